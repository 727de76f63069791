#include "wealthdyn/sde.hpp"

#include <algorithm>
#include <future>
#include <thread>

namespace wealthdyn {

void SimulationConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
  if (n_particles == 0) throw std::invalid_argument("n_particles must be positive");
  if (n_runs < 1 || n_runs % 2 == 0) throw std::invalid_argument("n_runs must be odd");
  steps_per_output();
}

std::size_t SimulationConfig::steps_per_output() const {
  if (!(output_every > 0.0)) throw std::invalid_argument("output_every must be positive");
  const double k = output_every / dt;
  const double r = std::round(k);
  if (r < 1.0 || std::abs(k - r) > 1e-9 * r) throw std::invalid_argument("output_every must be a multiple of dt");
  return static_cast<std::size_t>(r);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

void step_drift_diffusion(Population& pop, const DriftDiffusionProfile& profile, double dt, std::mt19937_64& rng,
                          EventLog* log) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const WealthGrid& g = profile.grid;
  const BinInterpolator mu(g, profile.drift());
  const BinInterpolator s2(g, profile.diffusion());
  const double w_lo = asinh_inv(g.lower_asinh);
  const double w_hi = std::nextafter(asinh_inv(g.upper_asinh()), w_lo);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sdt = std::sqrt(dt);
  for (std::size_t k = 0; k < pop.size(); ++k) {
    Particle& p = pop[k];
    if (!p.alive) continue;
    const double x = asinh(p.wealth);
    const double var = s2.at_asinh(x);
    const double w = p.wealth + mu.at_asinh(x) * dt + std::sqrt(var > 0.0 ? var : 0.0) * sdt * normal(rng);
    if (std::isnan(w))
      throw std::runtime_error("NaN wealth for particle " + std::to_string(k) + " in bin " +
                               std::to_string(g.locate(x)));
    if (w < w_lo) {
      p.wealth = w_lo;
      if (log) ++log->clamped_low;
    } else if (w > w_hi) {
      p.wealth = w_hi;
      if (log) ++log->clamped_high;
    } else {
      p.wealth = w;
    }
  }
}

Population particles_from_snapshot(const DistributionSnapshot& snap, std::size_t n, bool equal_weights,
                                   std::mt19937_64& rng) {
  if (n == 0) throw std::invalid_argument("particle count must be positive");
  const DistributionSnapshot s = snap.normalized();
  const WealthGrid& g = s.grid;
  const auto nb = static_cast<Eigen::Index>(g.n_bins);
  Population pop;
  pop.reserve(n + g.n_bins);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto place = [&](std::size_t bin, std::size_t count, double weight) {
    for (std::size_t k = 0; k < count; ++k) {
      Particle p;
      // Stratified positions keep every particle inside its bin.
      p.wealth = asinh_inv(g.lower_edge(bin) + (static_cast<double>(k) + 0.5) / static_cast<double>(count) * g.bin_width);
      p.weight = weight;
      pop.push_back(p);
    }
  };
  if (!equal_weights) {
    for (Eigen::Index i = 0; i < nb; ++i) {
      if (s.mass[i] <= 0.0) continue;
      const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s.mass[i] * static_cast<double>(n))));
      place(static_cast<std::size_t>(i), count, s.mass[i] / static_cast<double>(count));
    }
  } else {
    // Systematic sampling on the CDF with a random offset.
    const Eigen::VectorXd cdf = s.cdf();
    const double offset = unif(rng);
    std::vector<std::size_t> counts(g.n_bins, 0);
    Eigen::Index bin = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double u = (static_cast<double>(k) + offset) / static_cast<double>(n);
      while (bin + 1 < nb && cdf[bin] <= u) ++bin;
      ++counts[static_cast<std::size_t>(bin)];
    }
    for (std::size_t i = 0; i < g.n_bins; ++i) place(i, counts[i], 1.0 / static_cast<double>(n));
  }
  std::shuffle(pop.begin(), pop.end(), rng);
  for (std::size_t k = 0; k < pop.size(); ++k) {
    pop[k].age = 20.0 + 60.0 * unif(rng);
    pop[k].sex = k % 2 == 0 ? Sex::F : Sex::M;
  }
  return pop;
}

DistributionSnapshot snapshot_of(const Population& pop, const WealthGrid& grid, double time) {
  std::vector<double> w, wt;
  w.reserve(pop.size());
  wt.reserve(pop.size());
  for (const auto& p : pop) {
    if (!p.alive) continue;
    w.push_back(p.wealth);
    wt.push_back(p.weight);
  }
  return build_histogram(w, wt, grid, time).snapshot;
}

DistributionSnapshot median_snapshot(const std::vector<DistributionSnapshot>& runs) {
  if (runs.empty()) throw std::invalid_argument("median of zero runs");
  if (runs.size() == 1) return runs.front();
  const auto nb = runs.front().mass.size();
  Eigen::VectorXd med(nb);
  std::vector<double> vals(runs.size());
  for (Eigen::Index i = 0; i < nb; ++i) {
    for (std::size_t r = 0; r < runs.size(); ++r) vals[r] = runs[r].mass[i];
    std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(vals.size() / 2), vals.end());
    med[i] = vals[vals.size() / 2];
  }
  const double total = med.sum();
  if (total > 0.0) med /= total;
  return DistributionSnapshot(runs.front().time, runs.front().grid, med);
}

namespace {

struct RunOutput {
  std::vector<DistributionSnapshot> snapshots;
  Population final_pop;
  EventLog events;
};

RunOutput run_one(const Population& init, const ProfileSchedule& profiles, const SimulationConfig& cfg,
                  const EventModels* models, const OutputHook& hook, int run) {
  std::mt19937_64 rng = make_rng(cfg.rng_seed, static_cast<std::uint64_t>(run));
  RunOutput out;
  Population pop = init;
  const WealthGrid& grid = profiles.profiles.front().grid;
  const std::size_t per_output = cfg.steps_per_output();
  const auto n_outputs = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.output_every + 1e-9));
  double t = cfg.start_time;
  out.snapshots.push_back(snapshot_of(pop, grid, t));
  if (hook) hook(run, t, pop, rng);
  for (std::size_t o = 0; o < n_outputs; ++o) {
    for (std::size_t s = 0; s < per_output; ++s) {
      if (cfg.events.any()) {
        if (!models) throw std::invalid_argument("event toggles set but no event models supplied");
        out.events += apply_events(pop, *models, cfg.events, t, cfg.dt, rng);
      }
      step_drift_diffusion(pop, profiles.at(t), cfg.dt, rng, &out.events);
      for (auto& p : pop) p.age += cfg.dt;
      t = cfg.start_time + static_cast<double>(o * per_output + s + 1) * cfg.dt;
    }
    out.snapshots.push_back(snapshot_of(pop, grid, t));
    if (hook) hook(run, t, pop, rng);
  }
  out.final_pop = std::move(pop);
  return out;
}

}  // namespace

SimulationResult simulate(const Population& init, const ProfileSchedule& profiles, const SimulationConfig& cfg,
                          const EventModels* models, const OutputHook& hook) {
  cfg.validate();
  if (profiles.profiles.empty()) throw std::invalid_argument("no profiles supplied");
  for (const auto& p : profiles.profiles) {
    p.validate();
    if (!p.grid.compatible(profiles.profiles.front().grid)) throw std::invalid_argument("profiles use different grids");
  }
  std::vector<RunOutput> outs(static_cast<std::size_t>(cfg.n_runs));
  const unsigned hw = std::thread::hardware_concurrency();
  if (hw > 1 && cfg.n_runs > 1 && !hook) {
    std::vector<std::future<RunOutput>> futs;
    for (int r = 0; r < cfg.n_runs; ++r)
      futs.push_back(std::async(std::launch::async, run_one, std::cref(init), std::cref(profiles), std::cref(cfg),
                                models, std::cref(hook), r));
    for (int r = 0; r < cfg.n_runs; ++r) outs[static_cast<std::size_t>(r)] = futs[static_cast<std::size_t>(r)].get();
  } else {
    for (int r = 0; r < cfg.n_runs; ++r) outs[static_cast<std::size_t>(r)] = run_one(init, profiles, cfg, models, hook, r);
  }
  SimulationResult res;
  for (auto& o : outs) {
    res.runs.push_back(std::move(o.snapshots));
    res.final_populations.push_back(std::move(o.final_pop));
    res.events += o.events;
  }
  const std::size_t n_out = res.runs.front().size();
  for (std::size_t k = 0; k < n_out; ++k) {
    std::vector<DistributionSnapshot> at_k;
    for (const auto& run : res.runs) at_k.push_back(run[k]);
    res.snapshots.push_back(median_snapshot(at_k));
  }
  return res;
}

SimulationResult simulate(const DistributionSnapshot& init, const ProfileSchedule& profiles,
                          const SimulationConfig& cfg, const EventModels* models, const OutputHook& hook) {
  cfg.validate();
  std::mt19937_64 rng = make_rng(cfg.rng_seed, 0xfffffffful);
  const Population pop = particles_from_snapshot(init, cfg.n_particles, cfg.events.any(), rng);
  SimulationConfig c = cfg;
  c.start_time = init.time;
  return simulate(pop, profiles, c, models, hook);
}

GyongyReduction gyongy_reduce(const std::vector<double>& wealth, const std::vector<double>& drift,
                              const std::vector<double>& diffusion, const WealthGrid& grid, std::size_t min_count) {
  if (wealth.empty()) throw std::invalid_argument("gyongy_reduce: empty panel");
  if (drift.size() != wealth.size() || diffusion.size() != wealth.size())
    throw std::invalid_argument("gyongy_reduce: panel columns differ in length");
  const auto nb = static_cast<Eigen::Index>(grid.n_bins);
  Eigen::VectorXd sum_mu = Eigen::VectorXd::Zero(nb), sum_s2 = Eigen::VectorXd::Zero(nb), cnt = Eigen::VectorXd::Zero(nb);
  for (std::size_t k = 0; k < wealth.size(); ++k) {
    const auto i = std::clamp<std::ptrdiff_t>(grid.locate(asinh(wealth[k])), 0, nb - 1);
    sum_mu[i] += drift[k];
    sum_s2[i] += diffusion[k];
    cnt[i] += 1.0;
  }
  GyongyReduction out;
  out.counts = cnt;
  out.drift = Eigen::VectorXd::Constant(nb, kMissing);
  out.diffusion = Eigen::VectorXd::Constant(nb, kMissing);
  for (Eigen::Index i = 0; i < nb; ++i) {
    if (cnt[i] < static_cast<double>(std::max<std::size_t>(min_count, 1))) continue;
    out.drift[i] = sum_mu[i] / cnt[i];
    out.diffusion[i] = sum_s2[i] / cnt[i];
  }
  out.profile = DriftDiffusionProfile::from_totals(grid, fill_missing(out.drift), fill_missing(out.diffusion));
  return out;
}

}  // namespace wealthdyn
