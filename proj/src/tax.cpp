#include "wealthdyn/tax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wealthdyn/profile.hpp"
#include "wealthdyn/quadrature.hpp"

namespace wealthdyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRootTol = 1e-10;
constexpr int kMaxIter = 200;
constexpr double kPanel = 0.05;  // max asinh width of a quadrature panel

const GaussLegendre& gl8() {
  static const GaussLegendre rule(8);
  return rule;
}

// Integrand of -log theta in asinh coordinates (includes dw/dx = cosh x).
double log_theta_density(const TaxPolicy& p, const TaxEnvironment& env, double x) {
  const double w = std::sinh(x);
  const double tau = p.liability(w);
  const double beta = p.consumption_factor(w);
  const double c = env.consumption ? env.consumption(w) : 0.0;
  double num = tau * p.reported(w);
  if (beta != 1.0 && c != 0.0) num += c * (beta - 1.0);
  if (num == 0.0) return 0.0;
  const double s2 = env.sigma2(w);
  if (!(s2 > 0.0)) throw TaxError("zero mobility under tax");
  return 2.0 * num / s2 * std::cosh(x);
}

// -log theta accumulated over [xa, xb], split at thresholds.
double integrate_segment(const TaxPolicy& p, const TaxEnvironment& env, double xa, double xb) {
  if (!(xb > xa)) return 0.0;
  std::vector<double> cuts{xa};
  for (double t : p.thresholds) {
    const double xt = std::asinh(t);
    if (xt > xa && xt < xb) cuts.push_back(xt);
  }
  cuts.push_back(xb);
  double total = 0.0;
  const auto f = [&](double x) { return log_theta_density(p, env, x); };
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / kPanel)));
    total += gl8().integrate(f, a, b, panels);
    if (std::isinf(total)) return kInf;
  }
  return total;
}

double taxed_start(const TaxPolicy& p) { return std::asinh(p.first_threshold()); }

double paid(const TaxPolicy& p, double w) { return p.liability(w) * p.reported(w); }

}  // namespace

TaxPolicy TaxPolicy::linear(double rate, double threshold, double epsilon, double eta) {
  TaxPolicy p;
  p.thresholds = {threshold};
  p.rates = {rate};
  p.avoidance_elasticity = epsilon;
  p.consumption_elasticity = eta;
  p.validate();
  return p;
}

void TaxPolicy::validate() const {
  if (thresholds.size() != rates.size()) throw TaxError("thresholds and rates differ in length");
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] >= 0.0) || !std::isfinite(thresholds[k])) throw TaxError("thresholds must be finite and >= 0");
    if (k > 0 && !(thresholds[k] > thresholds[k - 1])) throw TaxError("thresholds must be strictly increasing");
    if (!(rates[k] >= 0.0 && rates[k] <= 1.0)) throw TaxError("marginal rates must lie in [0, 1]");
  }
  if (!(avoidance_elasticity >= 0.0) || !(consumption_elasticity >= 0.0))
    throw TaxError("elasticities must be nonnegative");
}

double TaxPolicy::liability(double w) const {
  double t = 0.0;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (w <= thresholds[k]) break;
    const double top = k + 1 < thresholds.size() ? std::min(w, thresholds[k + 1]) : w;
    t += rates[k] * (top - thresholds[k]);
  }
  return t;
}

double TaxPolicy::marginal(double w) const {
  double r = 0.0;
  for (std::size_t k = 0; k < thresholds.size(); ++k)
    if (w >= thresholds[k]) r = rates[k];
  return r;
}

double TaxPolicy::reported(double w) const {
  const double m = marginal(w);
  if (avoidance_elasticity == 0.0 || m == 0.0) return 1.0;
  return std::pow(1.0 - m, avoidance_elasticity);
}

double TaxPolicy::consumption_factor(double w) const {
  const double m = marginal(w);
  if (consumption_elasticity == 0.0 || m == 0.0) return 1.0;
  if (m >= 1.0) return kInf;
  return std::pow(1.0 - m, -consumption_elasticity);
}

double TaxPolicy::first_threshold() const {
  for (std::size_t k = 0; k < rates.size(); ++k)
    if (rates[k] > 0.0) return thresholds[k];
  return kInf;
}

bool TaxPolicy::untaxed() const { return !std::isfinite(first_threshold()); }

TaxEnvironment TaxEnvironment::from_bins(const WealthGrid& grid, const Eigen::VectorXd& sigma2,
                                         const Eigen::VectorXd& consumption) {
  if (sigma2.size() != static_cast<Eigen::Index>(grid.n_bins) ||
      consumption.size() != static_cast<Eigen::Index>(grid.n_bins))
    throw TaxError("environment vectors do not match grid");
  BinInterpolator s(grid, sigma2), c(grid, consumption);
  return {[s](double w) { return s(w); }, [c](double w) { return c(w); }};
}

double log_reweighting(const TaxPolicy& policy, const TaxEnvironment& env, double w) {
  policy.validate();
  if (policy.untaxed()) return 0.0;
  return -integrate_segment(policy, env, taxed_start(policy), std::asinh(w));
}

Eigen::VectorXd reweighting_factor(const TaxPolicy& policy, const TaxEnvironment& env, const WealthGrid& grid) {
  policy.validate();
  if (!env.sigma2) throw TaxError("sigma^2 function missing");
  const Eigen::Index n = static_cast<Eigen::Index>(grid.n_bins);
  Eigen::VectorXd theta = Eigen::VectorXd::Ones(n);
  if (policy.untaxed()) return theta;
  double x_prev = taxed_start(policy);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = grid.center(static_cast<std::size_t>(i));
    if (x <= x_prev) continue;
    if (!std::isinf(acc)) acc += integrate_segment(policy, env, x_prev, x);
    x_prev = x;
    theta[i] = std::exp(-acc);
  }
  return theta;
}

DistributionSnapshot steady_state_with_tax(const DistributionSnapshot& baseline, const Eigen::VectorXd& theta) {
  if (theta.size() != baseline.mass.size()) throw TaxError("theta does not match baseline grid");
  const Eigen::VectorXd m = baseline.mass.cwiseProduct(theta);
  const double total = m.sum();
  if (!(total > 0.0)) throw TaxError("zero total mass after reweighting");
  return DistributionSnapshot(baseline.time, baseline.grid, m * (baseline.total_mass() / total));
}

DistributionSnapshot steady_state_with_tax(const SteadyState& baseline, const Eigen::VectorXd& theta) {
  return steady_state_with_tax(baseline.snapshot(), theta);
}

TaxOutcome evaluate_policy(const TaxPolicy& policy, const DistributionSnapshot& baseline, const TaxEnvironment& env,
                           double population) {
  TaxOutcome out;
  out.theta = reweighting_factor(policy, env, baseline.grid);
  out.density_after = steady_state_with_tax(baseline, out.theta);
  const Eigen::Index n = baseline.mass.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = paid(policy, baseline.grid.wealth_center(static_cast<std::size_t>(i)));
    out.revenue_static += t * baseline.mass[i];
    out.revenue_long_run += t * out.density_after.mass[i];
  }
  out.revenue_static *= population;
  out.revenue_long_run *= population;
  return out;
}

LafferPoint laffer_point(const TaxPolicy& policy, const DistributionSnapshot& baseline, const TaxEnvironment& env,
                         double population) {
  const TaxOutcome o = evaluate_policy(policy, baseline, env, population);
  return {policy.rates.empty() ? 0.0 : policy.rates.back(), o.revenue_static, o.revenue_long_run};
}

TaxPolicy with_top_rate(const TaxPolicy& policy, double rate) {
  if (policy.rates.empty()) throw TaxError("policy has no brackets");
  TaxPolicy p = policy;
  p.rates.back() = rate;
  return p;
}

std::vector<LafferPoint> laffer_curve(const TaxPolicy& policy, const DistributionSnapshot& baseline,
                                      const TaxEnvironment& env, const std::vector<double>& rates) {
  std::vector<LafferPoint> curve;
  curve.reserve(rates.size());
  for (double r : rates) curve.push_back(laffer_point(with_top_rate(policy, r), baseline, env));
  return curve;
}

RevenueOptimum revenue_maximizing_rate(const TaxPolicy& policy, const DistributionSnapshot& baseline,
                                       const TaxEnvironment& env, int coarse_points, double tol) {
  if (coarse_points < 3) throw TaxError("coarse grid needs at least 3 points");
  std::vector<double> rates(static_cast<std::size_t>(coarse_points));
  for (int k = 0; k < coarse_points; ++k) rates[static_cast<std::size_t>(k)] = static_cast<double>(k) / (coarse_points - 1);
  RevenueOptimum opt;
  opt.curve = laffer_curve(policy, baseline, env, rates);
  std::size_t best = 0;
  for (std::size_t k = 1; k < opt.curve.size(); ++k)
    if (opt.curve[k].revenue_long_run > opt.curve[best].revenue_long_run) best = k;
  if (!(opt.curve[best].revenue_long_run > 0.0)) throw TaxError("no taxable mass above the threshold");
  if (best + 1 == opt.curve.size()) throw TaxError("no interior maximum (mechanical regime)");

  const auto revenue = [&](double r) { return laffer_point(with_top_rate(policy, r), baseline, env).revenue_long_run; };
  constexpr double kGold = 0.6180339887498949;
  double a = rates[best == 0 ? 0 : best - 1], b = rates[best + 1];
  double x1 = b - kGold * (b - a), x2 = a + kGold * (b - a);
  double f1 = revenue(x1), f2 = revenue(x2);
  for (int it = 0; it < kMaxIter && b - a > tol; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGold * (b - a);
      f2 = revenue(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGold * (b - a);
      f1 = revenue(x1);
    }
  }
  opt.rate = 0.5 * (a + b);
  opt.at_optimum = laffer_point(with_top_rate(policy, opt.rate), baseline, env);
  return opt;
}

RebateResult rebate_fixed_point(const TaxPolicy& policy, const DistributionSnapshot& baseline,
                                const TaxEnvironment& env) {
  const WealthGrid& g = baseline.grid;
  const Eigen::Index n = baseline.mass.size();
  RebateResult res;
  res.theta = reweighting_factor(policy, env, g);

  // log lambda(w) = 2 int_{w_first}^{w} ds / sigma^2(s), in asinh coordinates.
  Eigen::VectorXd log_lambda = Eigen::VectorXd::Zero(n);
  const auto inv = [&](double x) {
    const double s2 = env.sigma2(std::sinh(x));
    if (!(s2 > 0.0)) throw TaxError("zero mobility: rebate factor undefined");
    return 2.0 / s2 * std::cosh(x);
  };
  for (Eigen::Index i = 1; i < n; ++i) {
    const double a = g.center(static_cast<std::size_t>(i - 1)), b = g.center(static_cast<std::size_t>(i));
    log_lambda[i] = log_lambda[i - 1] + gl8().integrate(inv, a, b);
  }
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = paid(policy, g.wealth_center(static_cast<std::size_t>(i)));
  const Eigen::VectorXd base = baseline.mass.cwiseProduct(res.theta);

  const auto weights = [&](double tb) {
    Eigen::VectorXd lw = (tb * log_lambda).array() + base.array().max(1e-300).log();
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(base[i] > 0.0)) lw[i] = -kInf;
    const double mx = lw.maxCoeff();
    return Eigen::VectorXd((lw.array() - mx).exp());
  };
  const auto gap = [&](double tb) {
    const Eigen::VectorXd w = weights(tb);
    return tb - w.dot(t) / w.sum();
  };

  double lo = 0.0, hi = t.maxCoeff();
  if (!(hi > 0.0)) {
    res.density = baseline;
    return res;
  }
  double glo = gap(lo), ghi = gap(hi);
  if (glo == 0.0) hi = lo;
  if (!(glo <= 0.0 && ghi >= 0.0)) throw TaxError("rebate fixed point: no sign change on bracket");
  int it = 0;
  for (; it < kMaxIter && hi - lo > 1e-6 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = gap(mid);
    if (gm <= 0.0) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
      ghi = gm;
    }
  }
  // Secant polish inside the bracket.
  double x0 = lo, x1 = hi, g0 = glo, g1 = ghi;
  for (; it < kMaxIter; ++it) {
    if (std::abs(g1) < kRootTol || g1 == g0) break;
    double x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
    if (!(x2 >= lo && x2 <= hi)) x2 = 0.5 * (lo + hi);
    x0 = x1;
    g0 = g1;
    x1 = x2;
    g1 = gap(x1);
  }
  res.rebate = std::abs(g1) <= std::abs(g0) ? x1 : x0;
  res.iterations = it;
  const Eigen::VectorXd w = weights(res.rebate);
  res.density = DistributionSnapshot(baseline.time, g, w * (baseline.total_mass() / w.sum()));
  return res;
}

void EstateModel::validate() const {
  if (!(sigma > 0.0)) throw TaxError("sigma must be positive");
  if (!(delta > 0.0)) throw TaxError("delta must be positive");
  if (!(chi >= 0.0 && chi <= 1.0)) throw TaxError("chi must lie in [0, 1]");
  if (!(tau >= 0.0)) throw TaxError("tau must be nonnegative");
}

double EstateModel::alpha1() const {
  const double s2 = sigma * sigma;
  const double a0 = 1.0 - 2.0 * (mu - tau) / s2;
  return 0.5 * (a0 + std::sqrt(a0 * a0 + 8.0 * delta / s2));
}

double EstateModel::residual(double alpha) const {
  const double keep = chi >= 1.0 ? 0.0 : std::pow(1.0 - chi, alpha / delta);
  return mu + 0.5 * (alpha - 1.0) * sigma * sigma - tau - delta / alpha * (1.0 - keep);
}

double estate_pareto_alpha(const EstateModel& model) {
  model.validate();
  if (model.chi >= 1.0) return model.alpha1();
  double lo = 1.0, hi = 50.0;
  double flo = model.residual(lo), fhi = model.residual(hi);
  if (!(flo < 0.0 && fhi > 0.0)) throw TaxError("no root in bracket (1, 50]");
  for (int it = 0; it < kMaxIter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = model.residual(mid);
    if (fm == 0.0) return mid;
    (fm < 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  // The root never exceeds the full-estate-tax limit; keep bisection noise from crossing it.
  return std::min(0.5 * (lo + hi), model.alpha1());
}

TaxComparison tax_comparison_curve(const EstateModel& model, const std::vector<double>& rates) {
  TaxComparison out;
  out.rates = rates;
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw TaxError("rates must lie in [0, 1]");
    EstateModel annual = model, estate = model;
    annual.tau = r;
    annual.chi = 0.0;
    estate.tau = 0.0;
    estate.chi = r;
    out.alpha_annual.push_back(estate_pareto_alpha(annual));
    out.alpha_estate.push_back(estate_pareto_alpha(estate));
  }
  return out;
}

}  // namespace wealthdyn
