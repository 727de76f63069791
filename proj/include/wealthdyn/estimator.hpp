#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wealthdyn/deming.hpp"
#include "wealthdyn/events.hpp"
#include "wealthdyn/grid.hpp"
#include "wealthdyn/profile.hpp"

namespace wealthdyn {

enum class Regime : int { Pre = 0, Post = 1 };

struct PhaseRecord {
  double year = 0.0;
  double x = 0.0;  // d log f / dx on the asinh scale
  double y = 0.0;  // left-hand side of the estimating equation
  Regime period = Regime::Post;
};

struct PhaseSeries {
  std::size_t bin = 0;
  std::vector<PhaseRecord> records;  // time-ordered
};

struct PhasePanel {
  WealthGrid grid;
  std::vector<PhaseSeries> series;  // one per bin, index = bin
  std::size_t dropped_records = 0;  // bin-years lost to missing components
  std::size_t dropped_bins = 0;     // bins whose trend fit failed
};

/// Smoothing hyperparameters. Bandwidths are full window widths (years or asinh units).
struct Bandwidths {
  double income_mean_time = 12.5;
  double income_variance_wealth = 1.0;
  double log_density_slope = 1.5;
  double survival_ratio_time = 2.0;
  double effects_time = 10.0;
  double measurement_error_time = 5.0;
  double diffusion_derivative = 0.5;
  double delta_scale = 1.0;  // multiplies the per-bin automatic delta

  void validate() const;
};

/// Yearly inputs on a common grid. `income` holds z and psi^2 on the linear scale (consumption
/// fields ignored); one profile per snapshot or a single profile for all years. `effects` is
/// empty or one entry per snapshot.
struct EstimationInputs {
  std::vector<DistributionSnapshot> snapshots;
  std::vector<DriftDiffusionProfile> income;
  std::vector<EventEffects> effects;
  double break_year = 1978.0;
};

PhasePanel build_lhs(const EstimationInputs& inputs, const Bandwidths& bw = {});

struct DeltaEstimate {
  double delta = 1.0;
  bool clamped = false;
};

/// var(y - MA(y)) / var(x - MA(x)) per series, clamped to [1e-6, 1e6], times delta_scale.
DeltaEstimate estimate_delta(const PhaseSeries& series, const Bandwidths& bw = {});

struct BinFit {
  std::size_t bin = 0;
  DemingFit<double> fit;
  std::vector<double> years;
  bool delta_clamped = false;
};

/// Per-bin Deming fits with one intercept per regime. Bins with fewer than 6 records or without
/// identifying variation are skipped; their reasons are collected in `skipped`.
std::vector<BinFit> fit_bins(const PhasePanel& panel, const Bandwidths& bw = {},
                             std::vector<std::string>* skipped = nullptr);

struct ConsumptionProfile {
  WealthGrid grid;
  Eigen::VectorXd gamma2_asinh;              // -2 slope, floored at 0
  Eigen::VectorXd dgamma2_asinh;             // local-linear derivative across bins
  std::array<Eigen::VectorXd, 2> c_asinh;    // per regime
  Eigen::VectorXd gamma2;                    // linear scale
  std::array<Eigen::VectorXd, 2> c;          // linear scale, per regime
  std::vector<bool> floored;                 // slope had the wrong sign

  // Bootstrap summaries (NaN until bootstrap runs or for excluded bins).
  Eigen::VectorXd gamma2_se, gamma2_lo, gamma2_hi;
  std::array<Eigen::VectorXd, 2> c_se, c_lo, c_hi;
};

/// Back out c and gamma^2 from the fitted intercepts and slopes.
ConsumptionProfile recover_consumption(const std::vector<BinFit>& fits, const WealthGrid& grid,
                                       const Bandwidths& bw = {});

struct BootstrapModel {
  std::vector<std::size_t> bins;  // bins in the bootstrap (complete year sets)
  Eigen::VectorXd rho;            // per bin AR(1) coefficient over time
  double r = 0.0;                 // AR(1) coefficient across adjacent bins
  Eigen::VectorXd sigma;          // per-bin residual scale
  std::size_t n_years = 0;
  int n_draws = 500;
};

BootstrapModel fit_bootstrap_model(const std::vector<BinFit>& fits, int n_draws = 500);

/// Sigma = A Omega A with Omega = W^{1/2} (Omega_t kron I_T) W^{1/2}, bin-major ordering.
/// Only for small problems; the sampler never forms it.
Eigen::MatrixXd bootstrap_covariance(const BootstrapModel& model);

/// Draw of nbins x T errors with covariance bootstrap_covariance(model).
Eigen::MatrixXd draw_bootstrap_errors(const BootstrapModel& model, std::mt19937_64& rng);

struct BootstrapResult {
  ConsumptionProfile profile;          // point estimates with CI columns
  std::vector<Eigen::VectorXd> slopes;  // per draw, per model bin
};

/// Parametric bootstrap of the consumption profile: n_draws Deming refits on perturbed data,
/// per-bin percentile 95% intervals. Draw k uses RNG stream k of `seed`.
BootstrapResult bootstrap(const std::vector<BinFit>& fits, const WealthGrid& grid, const BootstrapModel& model,
                          std::uint64_t seed, const Bandwidths& bw = {});

struct EstimationResult {
  PhasePanel panel;
  std::vector<BinFit> fits;
  BootstrapModel model;
  ConsumptionProfile profile;
  std::vector<std::string> skipped;
};

/// build_lhs, fit_bins, recover_consumption and (n_draws > 0) bootstrap in one call.
EstimationResult estimate(const EstimationInputs& inputs, const Bandwidths& bw, int n_draws, std::uint64_t seed);

}  // namespace wealthdyn
