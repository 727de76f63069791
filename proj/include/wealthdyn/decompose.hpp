#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wealthdyn/estimator.hpp"
#include "wealthdyn/events.hpp"
#include "wealthdyn/grid.hpp"
#include "wealthdyn/population.hpp"
#include "wealthdyn/profile.hpp"
#include "wealthdyn/sde.hpp"

namespace wealthdyn {

struct DecomposeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Per-bin terms of the quantile-motion identity, linear scale, wealth units per year.
/// dQ/dt = drift + mobility + mobility_gradient + events; each is split by source.
struct GrowthTerms {
  WealthGrid grid;
  std::map<std::string, Eigen::VectorXd> drift;              // income components and "consumption"
  std::map<std::string, Eigen::VectorXd> mobility;           // "income", "consumption": -sigma^2 f'/(2f)
  std::map<std::string, Eigen::VectorXd> mobility_gradient;  // "income", "consumption": -d sigma^2/dw / 2
  std::map<std::string, Eigen::VectorXd> events;             // "demography", "inheritance", "marriage_divorce"
  Eigen::VectorXd total;

  Eigen::VectorXd sum_of_components() const;
};

struct DecomposeOptions {
  double log_density_bandwidth = 1.5;  // asinh units, full window
};

/// Terms per bin for one year. `effects` may be null.
GrowthTerms growth_terms(const DistributionSnapshot& snapshot, const DriftDiffusionProfile& profile,
                         const EventEffects* effects, const DecomposeOptions& opts = {});

struct Period {
  double start = -1e300;
  double end = 1e300;
};

/// Growth rates of the average wealth above fractile p (wealth-weighted), per year.
struct GrowthDecomposition {
  double p = 0.99;
  Period period;
  std::map<std::string, double> drift;
  std::map<std::string, double> mobility;
  std::map<std::string, double> mobility_gradient;
  std::map<std::string, double> events;
  double total = 0.0;
  std::optional<double> observed;  // from consecutive snapshots, when available
  std::size_t years = 0;

  double drift_total() const;
  double mobility_total() const;
  double sum_of_components() const;
};

/// Averages over snapshots with time in the period. `profiles` holds one entry or one per snapshot;
/// `effects` is empty or one per snapshot.
GrowthDecomposition decompose_growth(const std::vector<DistributionSnapshot>& snapshots,
                                     const std::vector<DriftDiffusionProfile>& profiles,
                                     const std::vector<EventEffects>& effects, double p, Period period = {},
                                     const DecomposeOptions& opts = {});

/// Synthetic saving mu_syn = mu - d sigma^2/dw / 2 - sigma^2 f'/(2f) per bin, with its parts.
struct SyntheticSavings {
  double time = 0.0;
  Eigen::VectorXd rank;  // CDF at bin centers
  Eigen::VectorXd wealth;
  Eigen::VectorXd synthetic;
  Eigen::VectorXd drift;
  Eigen::VectorXd mobility;
  Eigen::VectorXd mobility_gradient;
  /// Finite-difference quantile motion dQ/dt at the bin ranks (NaN outside the observed range).
  Eigen::VectorXd observed;
};

std::vector<SyntheticSavings> synthetic_savings(const std::vector<DistributionSnapshot>& snapshots,
                                                const std::vector<DriftDiffusionProfile>& profiles,
                                                const DecomposeOptions& opts = {});

/// Wealth quantile Q(p) (linear units), density uniform in asinh coordinates within bins.
double quantile(const DistributionSnapshot& snapshot, double p);

/// Share of total wealth held above fractile p.
double top_share(const DistributionSnapshot& snapshot, double p);
double top_share(const Population& pop, double p);

struct PhaseRow {
  std::size_t bin = 0;
  double wealth = 0.0;
  double year = 0.0;
  int period = 0;
  double x = 0.0;
  double y = 0.0;
  double fitted = 0.0;  // a_period + b x
  double x_star = 0.0;
  double y_star = 0.0;
};

struct PhaseLine {
  std::size_t bin = 0;
  double slope = 0.0;
  std::array<double, 2> intercept{kMissing, kMissing};
  std::array<double, 2> x_stationary{kMissing, kMissing};  // where the line crosses y = 0
};

struct PhasePortrait {
  std::vector<PhaseRow> rows;
  std::vector<PhaseLine> lines;
};

PhasePortrait phase_portrait(const PhasePanel& panel, const std::vector<BinFit>& fits);

/// Inputs that a counterfactual overrides. `reference_snapshots` are the benchmark yearly
/// distributions used for rank matching when freezing profiles.
struct BaselineInputs {
  DistributionSnapshot initial;
  ProfileSchedule profiles;  // start_times are model years
  std::vector<DistributionSnapshot> reference_snapshots;
  std::optional<EventModels> models;
};

enum class OverrideTarget { LaborIncome, Returns, Taxes, Consumption, Growth, EstateTax, Demography };

struct Override {
  OverrideTarget target = OverrideTarget::Consumption;
  /// Freeze to the rank-matched average over [reference.start, reference.end].
  std::optional<Period> reference;
  double growth_factor = 1.0;                  // Growth only
  std::optional<EstateTaxSchedule> estate;     // EstateTax replacement
  std::optional<DemographyTables> demography;  // Demography replacement
};

struct Scenario {
  std::string name = "benchmark";
  double start = -1e300;  // overrides apply to years >= start
  std::vector<Override> overrides;
};

struct CounterfactualConfig {
  SimulationConfig sim;          // dt, n_particles, n_runs, rng_seed, events; horizon from profiles
  double horizon = 0.0;          // years to simulate
  std::vector<double> shares{0.99};
};

struct SharePath {
  std::vector<double> times;
  std::map<double, std::vector<double>> shares;  // fractile -> median across runs
  std::vector<DistributionSnapshot> snapshots;   // median across runs
};

struct CounterfactualResult {
  SharePath benchmark;
  SharePath counterfactual;
};

/// Profile for one year after applying the scenario; `current` is used for rank matching.
DriftDiffusionProfile apply_overrides(const BaselineInputs& base, const Scenario& scenario, double year,
                                      const DistributionSnapshot& current);

/// Runs benchmark and scenario through the same yearly driver with shared seeds, so an empty
/// override set reproduces the benchmark bit for bit.
CounterfactualResult run_counterfactual(const BaselineInputs& base, const Scenario& scenario,
                                        const CounterfactualConfig& config);

/// Benchmark path only.
SharePath run_scenario(const BaselineInputs& base, const Scenario& scenario, const CounterfactualConfig& config);

}  // namespace wealthdyn
