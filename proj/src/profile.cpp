#include "wealthdyn/profile.hpp"

#include "wealthdyn/ito.hpp"

#include <algorithm>
#include <stdexcept>

namespace wealthdyn {

DriftDiffusionProfile DriftDiffusionProfile::zeros(const WealthGrid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.n_bins);
  DriftDiffusionProfile p;
  p.grid = grid;
  p.income_drift = Eigen::VectorXd::Zero(n);
  p.income_diffusion = Eigen::VectorXd::Zero(n);
  p.consumption_mean = Eigen::VectorXd::Zero(n);
  p.consumption_var = Eigen::VectorXd::Zero(n);
  return p;
}

DriftDiffusionProfile DriftDiffusionProfile::from_totals(const WealthGrid& grid, Eigen::VectorXd drift,
                                                         Eigen::VectorXd diffusion) {
  DriftDiffusionProfile p = zeros(grid);
  p.income_drift = std::move(drift);
  p.income_diffusion = std::move(diffusion);
  p.validate();
  return p;
}

void DriftDiffusionProfile::validate() const {
  const auto n = static_cast<Eigen::Index>(grid.n_bins);
  for (const Eigen::VectorXd* v : {&income_drift, &income_diffusion, &consumption_mean, &consumption_var}) {
    if (v->size() != n) throw std::invalid_argument("profile vector does not match grid");
    if (!v->allFinite()) throw std::invalid_argument("profile contains non-finite entries");
  }
  if ((income_diffusion.array() < 0.0).any() || (consumption_var.array() < 0.0).any())
    throw std::invalid_argument("profile variances must be nonnegative");
  for (const auto& c : income_components)
    if (c.values.size() != n) throw std::invalid_argument("income component does not match grid");
  if (!std::isfinite(growth_rate)) throw std::invalid_argument("growth rate must be finite");
}

ScaleParams scale_params_from_linear(const WealthGrid& grid, const Eigen::VectorXd& drift,
                                     const Eigen::VectorXd& diffusion) {
  const auto n = static_cast<Eigen::Index>(grid.n_bins);
  ScaleParams out{drift, diffusion, Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = to_asinh_scale(drift[i], diffusion[i], grid.wealth_center(static_cast<std::size_t>(i)));
    out.drift_asinh[i] = t.drift;
    out.diffusion_asinh[i] = t.var;
  }
  return out;
}

ScaleParams scale_params_from_asinh(const WealthGrid& grid, const Eigen::VectorXd& drift_asinh,
                                    const Eigen::VectorXd& diffusion_asinh) {
  const auto n = static_cast<Eigen::Index>(grid.n_bins);
  ScaleParams out{Eigen::VectorXd(n), Eigen::VectorXd(n), drift_asinh, diffusion_asinh};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto l = drift_from_asinh_scale(drift_asinh[i], diffusion_asinh[i],
                                          grid.wealth_center(static_cast<std::size_t>(i)));
    out.drift_linear[i] = l.drift;
    out.diffusion_linear[i] = l.var;
  }
  return out;
}

ScaleParams scale_params(const DriftDiffusionProfile& profile) {
  profile.validate();
  return scale_params_from_linear(profile.grid, profile.drift(), profile.diffusion());
}

BinInterpolator::BinInterpolator(const WealthGrid& grid, Eigen::VectorXd values)
    : x_first_(grid.center(0)), width_(grid.bin_width), values_(std::move(values)) {
  if (values_.size() != static_cast<Eigen::Index>(grid.n_bins))
    throw std::invalid_argument("interpolator values do not match grid");
}

double BinInterpolator::at_asinh(double x) const {
  const Eigen::Index n = values_.size();
  const double u = (x - x_first_) / width_;
  if (!(u > 0.0)) return values_[0];
  if (u >= static_cast<double>(n - 1)) return values_[n - 1];
  const auto i = static_cast<Eigen::Index>(u);
  const double f = u - static_cast<double>(i);
  return values_[i] + f * (values_[i + 1] - values_[i]);
}

ProfileSchedule ProfileSchedule::constant(const DriftDiffusionProfile& p) {
  ProfileSchedule s;
  s.start_times = {-std::numeric_limits<double>::infinity()};
  s.profiles = {p};
  return s;
}

std::size_t ProfileSchedule::index_at(double t) const {
  if (profiles.empty() || profiles.size() != start_times.size())
    throw std::invalid_argument("profile schedule is empty or inconsistent");
  auto it = std::upper_bound(start_times.begin(), start_times.end(), t + 1e-9);
  if (it == start_times.begin()) return 0;
  return static_cast<std::size_t>(std::distance(start_times.begin(), it) - 1);
}

Eigen::VectorXd fill_missing(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> valid;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!is_missing(v[i])) valid.push_back(i);
  if (valid.empty()) throw std::invalid_argument("fill_missing: no valid entries");
  Eigen::VectorXd out = v;
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!is_missing(v[i])) continue;
    while (k + 1 < valid.size() && valid[k + 1] < i) ++k;
    if (i < valid.front()) {
      out[i] = v[valid.front()];
    } else if (i > valid.back()) {
      out[i] = v[valid.back()];
    } else {
      const Eigen::Index a = valid[k], b = valid[k + 1];
      out[i] = v[a] + (v[b] - v[a]) * static_cast<double>(i - a) / static_cast<double>(b - a);
    }
  }
  return out;
}

}  // namespace wealthdyn
