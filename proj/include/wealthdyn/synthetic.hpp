#pragma once

#include "wealthdyn/grid.hpp"
#include "wealthdyn/profile.hpp"
#include "wealthdyn/tax.hpp"

namespace wealthdyn {

/// Exponential survival model on the asinh scale with barrier b at the grid's lower edge:
/// sigma~^2 = s1 (x - b), mu~ = s1/2 - rho (x - b), rho = s1 lambda_inf / 2. Starting from
/// S_0 = exp(-lambda_0 (x - b)) the survival function stays exp(-lambda_t (x - b)) with lambda_t
/// logistic in t, so the logistic-trend step of the estimator is exact.
struct LogisticDesign {
  double s1 = 0.08;
  double lambda0 = 2.0;
  double lambda_inf = 1.0;
  double gamma_share = 0.75;  // consumption share of sigma~^2
  double income_a = 1.0;      // z = a + b w
  double income_b = 0.3;

  double rho() const { return 0.5 * s1 * lambda_inf; }
  double lambda(double t) const;
  DriftDiffusionProfile profile(const WealthGrid& grid) const;
  DistributionSnapshot snapshot(const WealthGrid& grid, double t) const;
};

/// Constant-coefficient profile: z = z0 + z1 w, psi^2 = p0 + p2 w^2, c = c0 + c1 w, gamma^2 = g0 + g2 w^2.
struct LinearProfileSpec {
  double z0 = 0.0, z1 = 0.0;
  double p0 = 0.0, p2 = 0.0;
  double c0 = 0.0, c1 = 0.0;
  double g0 = 0.0, g2 = 0.0;

  DriftDiffusionProfile profile(const WealthGrid& grid) const;
};

/// Pareto(alpha) baseline above w_min with sigma^2 = k w^2 and c = r w, on a fine asinh grid.
struct ParetoBaseline {
  double alpha = 1.5;
  double w_min = 1.0;
  double upper_asinh = 20.0;
  double bin_width = 0.01;
  double sigma2_coef = 0.16;
  double consumption_rate = 0.21;

  WealthGrid grid() const;
  DistributionSnapshot snapshot() const;
  TaxEnvironment environment() const;
};

}  // namespace wealthdyn
