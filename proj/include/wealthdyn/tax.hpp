#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wealthdyn/fokker_planck.hpp"
#include "wealthdyn/grid.hpp"

namespace wealthdyn {

/// Piecewise-constant marginal rates: rates[k] applies on [thresholds[k], thresholds[k+1]).
struct TaxPolicy {
  std::vector<double> thresholds;  // sorted, >= 0, wealth units
  std::vector<double> rates;       // in [0, 1]
  double avoidance_elasticity = 0.0;    // epsilon
  double consumption_elasticity = 0.0;  // eta

  static TaxPolicy linear(double rate, double threshold, double epsilon = 0.0, double eta = 0.0);

  void validate() const;
  /// Liability tau(w) per year.
  double liability(double w) const;
  /// Right-limit marginal rate tau'(w).
  double marginal(double w) const;
  /// Reported fraction (1 - tau')^epsilon.
  double reported(double w) const;
  /// Consumption factor (1 - tau')^(-eta); infinite at a confiscatory margin.
  double consumption_factor(double w) const;
  double first_threshold() const;
  bool untaxed() const;
};

/// Linear-scale sigma^2(w) and c(w) seen by the tax calculations.
struct TaxEnvironment {
  std::function<double(double)> sigma2;
  std::function<double(double)> consumption;

  /// Per-bin values interpolated linearly in asinh coordinates.
  static TaxEnvironment from_bins(const WealthGrid& grid, const Eigen::VectorXd& sigma2,
                                  const Eigen::VectorXd& consumption);
};

struct TaxError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TaxOutcome {
  Eigen::VectorXd theta;          // per bin
  DistributionSnapshot density_after;  // same total mass as the baseline
  double revenue_long_run = 0.0;
  double revenue_static = 0.0;
  std::optional<double> rebate;
};

/// theta(w) = exp{-int 2[tau alpha + c(beta - 1)] / sigma^2} from the first taxed wealth to each
/// bin center. Composite Gauss-Legendre in asinh coordinates, split at the schedule thresholds.
Eigen::VectorXd reweighting_factor(const TaxPolicy& policy, const TaxEnvironment& env, const WealthGrid& grid);
/// log theta at arbitrary wealth points (sorted or not).
double log_reweighting(const TaxPolicy& policy, const TaxEnvironment& env, double w);

/// Pointwise theta * mass, rescaled to the baseline's total mass.
DistributionSnapshot steady_state_with_tax(const DistributionSnapshot& baseline, const Eigen::VectorXd& theta);
DistributionSnapshot steady_state_with_tax(const SteadyState& baseline, const Eigen::VectorXd& theta);

struct LafferPoint {
  double rate = 0.0;
  double revenue_static = 0.0;
  double revenue_long_run = 0.0;
};

/// Static revenue on the untaxed baseline and long-run revenue on the reweighted one, per
/// unit of baseline population times `population`.
TaxOutcome evaluate_policy(const TaxPolicy& policy, const DistributionSnapshot& baseline, const TaxEnvironment& env,
                           double population = 1.0);
LafferPoint laffer_point(const TaxPolicy& policy, const DistributionSnapshot& baseline, const TaxEnvironment& env,
                         double population = 1.0);

/// Policy with the top bracket's rate replaced.
TaxPolicy with_top_rate(const TaxPolicy& policy, double rate);

struct RevenueOptimum {
  double rate = 0.0;
  LafferPoint at_optimum;
  std::vector<LafferPoint> curve;  // coarse grid
};

/// Coarse grid over the top rate on [0, 1], then golden-section refinement around the best point.
/// Throws "no interior maximum (mechanical regime)" when the curve peaks at rate 1.
RevenueOptimum revenue_maximizing_rate(const TaxPolicy& policy, const DistributionSnapshot& baseline,
                                       const TaxEnvironment& env, int coarse_points = 41, double tol = 1e-6);

std::vector<LafferPoint> laffer_curve(const TaxPolicy& policy, const DistributionSnapshot& baseline,
                                      const TaxEnvironment& env, const std::vector<double>& rates);

struct RebateResult {
  double rebate = 0.0;  // per-capita lump sum tau_bar
  Eigen::VectorXd theta;
  DistributionSnapshot density;
  int iterations = 0;
};

/// Solves tau_bar = E*[tau alpha] under f* ∝ theta lambda^tau_bar f, lambda = exp{2 int 1/sigma^2}
/// measured from the lowest bin center. Bisection, then secant polish.
RebateResult rebate_fixed_point(const TaxPolicy& policy, const DistributionSnapshot& baseline,
                                const TaxEnvironment& env);

struct EstateModel {
  double mu = -0.04;
  double sigma = 0.4;
  double delta = 0.02;
  double w0 = 1.0;
  double tau = 0.0;
  double chi = 0.0;

  void validate() const;
  double alpha0() const { return 1.0 - 2.0 * mu / (sigma * sigma); }
  /// Closed-form limit at chi = 1 (with the annual tax folded into the drift).
  double alpha1() const;
  /// Residual of mu + (alpha-1) sigma^2/2 - tau - (delta/alpha)[1 - (1-chi)^(alpha/delta)].
  double residual(double alpha) const;
};

double estate_pareto_alpha(const EstateModel& model);

struct TaxComparison {
  std::vector<double> rates;
  std::vector<double> alpha_annual;  // chi = 0, tau = rate
  std::vector<double> alpha_estate;  // tau = 0, chi = rate
};

TaxComparison tax_comparison_curve(const EstateModel& model, const std::vector<double>& rates);

}  // namespace wealthdyn
