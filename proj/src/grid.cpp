#include "wealthdyn/grid.hpp"

#include "wealthdyn/smoothing.hpp"

#include <algorithm>
#include <stdexcept>

namespace wealthdyn {

WealthGrid::WealthGrid(double lower, double width, std::size_t n)
    : lower_asinh(lower), bin_width(width), n_bins(n) {
  if (!(width > 0.0) || !std::isfinite(width)) throw std::invalid_argument("bin_width must be positive");
  if (n == 0) throw std::invalid_argument("n_bins must be positive");
  if (!std::isfinite(lower)) throw std::invalid_argument("lower_asinh must be finite");
}

WealthGrid WealthGrid::from_range(double lower, double upper, double width) {
  if (!(upper > lower)) throw std::invalid_argument("grid upper must exceed lower");
  const double n = (upper - lower) / width;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
    throw std::invalid_argument("grid span is not a whole number of bins");
  return WealthGrid(lower, width, static_cast<std::size_t>(rounded));
}

Eigen::VectorXd WealthGrid::centers() const {
  Eigen::VectorXd c(static_cast<Eigen::Index>(n_bins));
  for (std::size_t i = 0; i < n_bins; ++i) c[static_cast<Eigen::Index>(i)] = center(i);
  return c;
}

Eigen::VectorXd WealthGrid::wealth_centers() const { return centers().array().sinh().matrix(); }

Eigen::VectorXd WealthGrid::upper_edges() const {
  Eigen::VectorXd e(static_cast<Eigen::Index>(n_bins));
  for (std::size_t i = 0; i < n_bins; ++i) e[static_cast<Eigen::Index>(i)] = upper_edge(i);
  return e;
}

std::ptrdiff_t WealthGrid::locate(double x) const {
  if (x < lower_asinh) return -1;
  if (x >= upper_asinh()) return static_cast<std::ptrdiff_t>(n_bins);
  auto i = static_cast<std::ptrdiff_t>(std::floor((x - lower_asinh) / bin_width));
  return std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
}

bool WealthGrid::compatible(const WealthGrid& o) const {
  const double scale = std::max({1.0, std::abs(lower_asinh), std::abs(upper_asinh())});
  return n_bins == o.n_bins && std::abs(lower_asinh - o.lower_asinh) <= 1e-12 * scale &&
         std::abs(bin_width - o.bin_width) <= 1e-12 * bin_width;
}

DistributionSnapshot::DistributionSnapshot(double t, const WealthGrid& g, Eigen::VectorXd m)
    : time(t), grid(g), mass(std::move(m)) {
  if (mass.size() != static_cast<Eigen::Index>(grid.n_bins))
    throw std::invalid_argument("snapshot mass does not match grid");
  if ((mass.array() < 0.0).any() || !mass.allFinite())
    throw std::invalid_argument("snapshot mass must be finite and nonnegative");
}

Eigen::VectorXd DistributionSnapshot::cdf() const {
  Eigen::VectorXd c(mass.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    acc += mass[i];
    c[i] = acc;
  }
  return c;
}

Eigen::VectorXd DistributionSnapshot::cdf_at_centers() const { return cdf() - 0.5 * mass; }

DistributionSnapshot DistributionSnapshot::normalized() const {
  const double total = total_mass();
  if (!(total > 0.0)) throw std::invalid_argument("cannot normalize an empty snapshot");
  return DistributionSnapshot(time, grid, mass / total);
}

double DistributionSnapshot::mean_wealth() const {
  return mass.dot(grid.wealth_centers()) / total_mass();
}

HistogramResult build_histogram(const std::vector<double>& wealth, const std::vector<double>& weights,
                                const WealthGrid& grid, double time) {
  if (wealth.empty()) throw std::invalid_argument("no observations");
  if (weights.size() != wealth.size()) throw std::invalid_argument("weights and wealth differ in size");
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.n_bins));
  double under = 0.0, over = 0.0, total = 0.0;
  for (std::size_t k = 0; k < wealth.size(); ++k) {
    const double wt = weights[k];
    if (!(wt >= 0.0) || !std::isfinite(wt)) throw std::invalid_argument("weights must be nonnegative");
    if (!std::isfinite(wealth[k])) throw std::invalid_argument("non-finite wealth observation");
    total += wt;
    const auto i = grid.locate(asinh(wealth[k]));
    if (i < 0)
      under += wt;
    else if (i >= static_cast<std::ptrdiff_t>(grid.n_bins))
      over += wt;
    else
      mass[i] += wt;
  }
  if (!(total > 0.0)) throw std::invalid_argument("no observations");
  HistogramResult out;
  out.snapshot = DistributionSnapshot(time, grid, mass / total);
  out.underflow = under / total;
  out.overflow = over / total;
  out.total_weight = total;
  return out;
}

HistogramResult build_histogram(const std::vector<double>& wealth, const WealthGrid& grid, double time) {
  return build_histogram(wealth, std::vector<double>(wealth.size(), 1.0), grid, time);
}

Eigen::VectorXd log_density_slope(const DistributionSnapshot& snapshot, double bandwidth) {
  const auto& g = snapshot.grid;
  // A slope needs a neighbor inside the window.
  if (bandwidth < 2.0 * g.bin_width * (1.0 - 1e-12))
    throw std::invalid_argument("bandwidth must be at least two bin widths");
  const Eigen::VectorXd dens = snapshot.density_asinh();
  if ((dens.array() <= 0.0).all()) throw std::invalid_argument("all-zero density");
  Eigen::VectorXd logd(dens.size());
  for (Eigen::Index i = 0; i < dens.size(); ++i)
    logd[i] = dens[i] > 1e-12 ? std::log(dens[i]) : kMissing;
  Eigen::VectorXd slope = local_linear(g.centers(), logd, bandwidth).slope;
  for (Eigen::Index i = 0; i < dens.size(); ++i)
    if (is_missing(logd[i])) slope[i] = kMissing;
  return slope;
}

double sup_cdf_distance(const DistributionSnapshot& a, const DistributionSnapshot& b) {
  if (!a.grid.compatible(b.grid)) throw std::invalid_argument("sup_cdf_distance: grid mismatch");
  return (a.cdf() - b.cdf()).cwiseAbs().maxCoeff();
}

}  // namespace wealthdyn
