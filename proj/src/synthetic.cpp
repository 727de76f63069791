#include "wealthdyn/synthetic.hpp"

#include <cmath>

#include "wealthdyn/ito.hpp"

namespace wealthdyn {

double LogisticDesign::lambda(double t) const {
  return lambda_inf / (1.0 + (lambda_inf / lambda0 - 1.0) * std::exp(-rho() * t));
}

DriftDiffusionProfile LogisticDesign::profile(const WealthGrid& g) const {
  DriftDiffusionProfile p = DriftDiffusionProfile::zeros(g);
  const double b = g.lower_asinh;
  for (std::size_t i = 0; i < g.n_bins; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double x = g.center(i), w = std::sinh(x), s2 = 1.0 + w * w, u = x - b;
    const double psit = (1.0 - gamma_share) * s1 * u, gamt = gamma_share * s1 * u;
    const double mut = 0.5 * s1 - rho() * u;
    p.income_drift[k] = income_a + income_b * w;
    p.income_diffusion[k] = psit * s2;
    p.consumption_var[k] = gamt * s2;
    const double zt = to_asinh_scale(p.income_drift[k], p.income_diffusion[k], w).drift;
    p.consumption_mean[k] = from_asinh_scale(zt - mut, gamt, w).drift;
  }
  return p;
}

DistributionSnapshot LogisticDesign::snapshot(const WealthGrid& g, double t) const {
  const double lam = lambda(t), b = g.lower_asinh;
  Eigen::VectorXd m(static_cast<Eigen::Index>(g.n_bins));
  for (std::size_t i = 0; i < g.n_bins; ++i)
    m[static_cast<Eigen::Index>(i)] = std::exp(-lam * (g.lower_edge(i) - b)) - std::exp(-lam * (g.upper_edge(i) - b));
  m[m.size() - 1] += std::exp(-lam * (g.upper_asinh() - b));  // tail beyond the grid
  return DistributionSnapshot(t, g, m);
}

DriftDiffusionProfile LinearProfileSpec::profile(const WealthGrid& g) const {
  DriftDiffusionProfile p = DriftDiffusionProfile::zeros(g);
  const Eigen::VectorXd w = g.wealth_centers();
  const Eigen::ArrayXd w2 = w.array().square();
  p.income_drift = (z0 + z1 * w.array()).matrix();
  p.income_diffusion = (p0 + p2 * w2).matrix();
  p.consumption_mean = (c0 + c1 * w.array()).matrix();
  p.consumption_var = (g0 + g2 * w2).matrix();
  return p;
}

WealthGrid ParetoBaseline::grid() const {
  const double lo = std::asinh(w_min);
  return WealthGrid(lo, bin_width, static_cast<std::size_t>(std::ceil((upper_asinh - lo) / bin_width - 1e-9)));
}

DistributionSnapshot ParetoBaseline::snapshot() const {
  const WealthGrid g = grid();
  Eigen::VectorXd m(static_cast<Eigen::Index>(g.n_bins));
  const auto surv = [&](double x) { return std::pow(std::sinh(x) / w_min, -alpha); };
  for (std::size_t i = 0; i < g.n_bins; ++i)
    m[static_cast<Eigen::Index>(i)] = (i == 0 ? 1.0 : surv(g.lower_edge(i))) - surv(g.upper_edge(i));
  return DistributionSnapshot(0.0, g, m);
}

TaxEnvironment ParetoBaseline::environment() const {
  const double k = sigma2_coef, r = consumption_rate;
  return {[k](double w) { return k * w * w; }, [r](double w) { return r * w; }};
}

}  // namespace wealthdyn
