#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wealthdyn/events.hpp"
#include "wealthdyn/grid.hpp"
#include "wealthdyn/population.hpp"
#include "wealthdyn/profile.hpp"

namespace wealthdyn {

struct SimulationConfig {
  double dt = 0.1;
  double horizon = 0.0;
  double output_every = 1.0;
  double start_time = 0.0;
  std::size_t n_particles = 100000;
  int n_runs = 5;
  std::uint64_t rng_seed = 0;
  EventToggles events;

  void validate() const;
  /// Time steps between consecutive output snapshots.
  std::size_t steps_per_output() const;
};

/// Per-run generator, reproducible from (seed, stream).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

/// Euler-Maruyama step with wealth-dependent coefficient callables; no grid, no clamping.
template <class Drift, class Diffusion, class Rng>
void step_particles(Population& pop, Drift&& mu, Diffusion&& sigma2, double dt, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sdt = std::sqrt(dt);
  for (auto& p : pop) {
    if (!p.alive) continue;
    const double w = p.wealth;
    const double s2 = sigma2(w);
    p.wealth = w + mu(w) * dt + std::sqrt(s2 > 0.0 ? s2 : 0.0) * sdt * normal(rng);
  }
}

/// One Euler-Maruyama step with profile coefficients interpolated in asinh coordinates.
/// Wealth leaving the grid is clamped to the grid range and counted in `log`.
void step_drift_diffusion(Population& pop, const DriftDiffusionProfile& profile, double dt, std::mt19937_64& rng,
                          EventLog* log = nullptr);

/// Particles reproducing a snapshot. With equal_weights false each bin gets round(mass * n) particles (at
/// least one) whose weights sum to the bin's mass, so the histogram reproduces the snapshot exactly; with
/// equal_weights true the bins are filled by systematic sampling. Ages are spread over [20, 80).
Population particles_from_snapshot(const DistributionSnapshot& snap, std::size_t n, bool equal_weights,
                                   std::mt19937_64& rng);

DistributionSnapshot snapshot_of(const Population& pop, const WealthGrid& grid, double time);

struct SimulationResult {
  std::vector<DistributionSnapshot> snapshots;               // per-bin median across runs
  std::vector<std::vector<DistributionSnapshot>> runs;       // [run][output]
  std::vector<Population> final_populations;                 // [run]
  EventLog events;                                           // summed over runs
};

/// Callback invoked at every output time of every run (before the median is taken).
using OutputHook = std::function<void(int run, double time, const Population& pop, std::mt19937_64& rng)>;

SimulationResult simulate(const Population& init, const ProfileSchedule& profiles, const SimulationConfig& config,
                          const EventModels* models = nullptr, const OutputHook& hook = {});
SimulationResult simulate(const DistributionSnapshot& init, const ProfileSchedule& profiles,
                          const SimulationConfig& config, const EventModels* models = nullptr,
                          const OutputHook& hook = {});

/// Per-bin median across runs, renormalized to unit mass.
DistributionSnapshot median_snapshot(const std::vector<DistributionSnapshot>& runs);

struct GyongyReduction {
  DriftDiffusionProfile profile;  // missing bins filled by interpolation
  Eigen::VectorXd drift;          // conditional means, NaN where starved
  Eigen::VectorXd diffusion;
  Eigen::VectorXd counts;
};

/// Conditional means E[mu_i | w] and E[sigma_i^2 | w] per bin.
GyongyReduction gyongy_reduce(const std::vector<double>& wealth, const std::vector<double>& drift,
                              const std::vector<double>& diffusion, const WealthGrid& grid,
                              std::size_t min_count = 30);

}  // namespace wealthdyn
