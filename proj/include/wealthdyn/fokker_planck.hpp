#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>

#include "wealthdyn/events.hpp"
#include "wealthdyn/grid.hpp"
#include "wealthdyn/profile.hpp"

namespace wealthdyn {

struct SteadyState {
  WealthGrid grid;
  Eigen::VectorXd density;      // density on the asinh scale, integrates to one
  Eigen::VectorXd log_density;
  std::optional<double> pareto_alpha_tail;

  DistributionSnapshot snapshot(double time = 0.0) const;
};

enum class FpScheme { Implicit, Explicit };

class StabilityError : public std::runtime_error {
 public:
  StabilityError(const std::string& what, double suggested_dt) : std::runtime_error(what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const { return suggested_dt_; }

 private:
  double suggested_dt_;
};

/// Conservative finite-volume generator on the asinh grid: dm/dt = L m, with zero-flux ends.
/// Stored as three diagonals (sub, main, super).
struct FpOperator {
  Eigen::VectorXd sub;    // L(i, i-1), index i
  Eigen::VectorXd diag;   // L(i, i)
  Eigen::VectorXd super;  // L(i, i+1), index i

  static FpOperator build(const DriftDiffusionProfile& profile);
  static FpOperator build_asinh(const WealthGrid& grid, const Eigen::VectorXd& drift_asinh,
                                const Eigen::VectorXd& diffusion_asinh);
  Eigen::VectorXd apply(const Eigen::VectorXd& m) const;
};

/// Evolves bin masses for n_steps steps of size dt. Sources are integrated CDF-level effects
/// (per year) whose bin differences enter as mass sources.
DistributionSnapshot evolve_density(const DistributionSnapshot& f0, const DriftDiffusionProfile& profile,
                                    const EventEffects* sources, double dt, std::size_t n_steps,
                                    FpScheme scheme = FpScheme::Implicit);

/// Closed-form stationary density f~ ∝ (1/sigma~^2) exp(int 2 mu~/sigma~^2), trapezoid quadrature in asinh
/// coordinates. Coincides with the discrete stationary state of FpOperator.
SteadyState steady_state(const DriftDiffusionProfile& profile);

/// Tail exponent from the least-squares slope of log density_asinh on bins with centers above tail_start
/// (asinh units).
double tail_alpha(const DistributionSnapshot& state, double tail_start);
double tail_alpha(const SteadyState& state, double tail_start);

/// sup |J/f| / scale over interior interfaces, where J is the discrete flux and f the interface density.
/// scale = sup |mu~| (or sup of the diffusive velocity when the drift vanishes).
double stationarity_residual(const DistributionSnapshot& state, const DriftDiffusionProfile& profile);

/// Continuous version from analytic coefficient functions evaluated at the given points:
/// sup |mu - d(sigma^2)/2 - sigma^2/2 * dlogf| / sup |mu|.
double stationarity_residual(const Eigen::VectorXd& points, const std::function<double(double)>& mu,
                             const std::function<double(double)>& sigma2,
                             const std::function<double(double)>& dsigma2,
                             const std::function<double(double)>& dlogf);

}  // namespace wealthdyn
