#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <Eigen/Core>
#include <json.hpp>

#include "wealthdyn/config.hpp"
#include "wealthdyn/decompose.hpp"
#include "wealthdyn/estimator.hpp"
#include "wealthdyn/fokker_planck.hpp"
#include "wealthdyn/io.hpp"
#include "wealthdyn/sde.hpp"
#include "wealthdyn/service.hpp"
#include "wealthdyn/synthetic.hpp"
#include "wealthdyn/tax.hpp"

namespace wealthdyn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

RunConfig load_run_config(const Common& c) {
  try {
    return c.config_path.empty() ? parse_config("") : load_config(c.config_path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

std::uint64_t require_seed(const Common& c) {
  if (!c.seed) throw UsageError("--seed is required for this command");
  return *c.seed;
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text << '\n';
}

void write_manifest(const Common& c, const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs, json extra = json::object()) {
  json m{{"command", command},
         {"argv", c.argv},
         {"config_path", c.config_path},
         {"config_hash", fnv1a_hex(cfg.source_text)},
         {"seed", c.seed ? json(*c.seed) : json(nullptr)},
         {"outputs", outputs},
         {"versions",
          {{"wealthdyn", kVersion},
           {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION)},
           {"compiler", __VERSION__}}}};
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_text(out_path(c, "manifest.json"), dump_json(m, 2));
}

DriftDiffusionProfile model_profile(const RunConfig& cfg, const WealthGrid& g) {
  return cfg.model.kind == "logistic" ? cfg.model.logistic.profile(g) : cfg.model.linear.profile(g);
}

DistributionSnapshot model_initial(const RunConfig& cfg, const WealthGrid& g) {
  // Design time runs from the simulation start.
  DistributionSnapshot s;
  if (cfg.model.kind == "logistic") {
    s = cfg.model.logistic.snapshot(g, 0.0);
  } else {
    LogisticDesign shape;
    shape.lambda0 = shape.lambda_inf = cfg.model.initial_lambda;
    s = shape.snapshot(g, 0.0);
  }
  s.time = cfg.simulation.start_time;
  return s;
}

void save_snapshots(const std::string& path, const std::vector<DistributionSnapshot>& snaps) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : snaps)
    for (std::size_t i = 0; i < s.grid.n_bins; ++i)
      rows.push_back({s.time, s.grid.center(i), s.mass[static_cast<Eigen::Index>(i)]});
  save_csv(path, {"time", "bin_center_asinh", "mass"}, rows);
}

PanelData read_panel_arg(const std::string& path) {
  if (path.empty()) throw UsageError("--panel is required");
  return load_panel(path);
}

struct LoadedProfile {
  Eigen::VectorXd gamma2;
  std::array<Eigen::VectorXd, 2> c;
};

// Consumption profile written by `estimate`; bins without estimates are interpolated.
LoadedProfile read_profile(const std::string& path, const WealthGrid& g) {
  if (path.empty()) throw UsageError("--profile is required");
  const CsvTable t = load_csv(path);
  const auto nb = static_cast<Eigen::Index>(g.n_bins);
  LoadedProfile p{Eigen::VectorXd::Constant(nb, kMissing),
                  {Eigen::VectorXd::Constant(nb, kMissing), Eigen::VectorXd::Constant(nb, kMissing)}};
  const std::size_t cb = t.column("bin"), cg = t.column("gamma2"), c0 = t.column("c_pre"), c1 = t.column("c_post");
  for (const auto& r : t.rows) {
    const double b = r[cb];
    if (b < 0 || b >= static_cast<double>(nb) || b != std::floor(b)) throw PanelError("profile bin outside the panel grid");
    const auto i = static_cast<Eigen::Index>(b);
    p.gamma2[i] = r[cg];
    p.c[0][i] = r[c0];
    p.c[1][i] = r[c1];
  }
  const auto fill = [](Eigen::VectorXd& v) {
    bool any = false;
    for (Eigen::Index i = 0; i < v.size(); ++i) any = any || !is_missing(v[i]);
    if (any) v = fill_missing(v);
  };
  fill(p.gamma2);
  // A regime without estimates borrows the other one.
  for (int r = 0; r < 2; ++r) fill(p.c[static_cast<std::size_t>(r)]);
  for (int r = 0; r < 2; ++r)
    if (is_missing(p.c[static_cast<std::size_t>(r)][0])) p.c[static_cast<std::size_t>(r)] = p.c[static_cast<std::size_t>(1 - r)];
  if (is_missing(p.gamma2[0]) || is_missing(p.c[0][0])) throw PanelError("profile has no estimated bins");
  p.gamma2 = p.gamma2.cwiseMax(0.0);
  return p;
}

std::vector<DriftDiffusionProfile> yearly_profiles(const PanelData& panel, const LoadedProfile& prof) {
  std::vector<DriftDiffusionProfile> out;
  for (std::size_t k = 0; k < panel.snapshots.size(); ++k) {
    DriftDiffusionProfile p = panel.income[k];
    const int regime = panel.snapshots[k].time < panel.break_year ? 0 : 1;
    p.consumption_mean = prof.c[static_cast<std::size_t>(regime)];
    p.consumption_var = prof.gamma2;
    out.push_back(std::move(p));
  }
  return out;
}

Period parse_period(const std::string& s) {
  if (s.empty()) return {};
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("period must be START:END");
  try {
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("period must be START:END");
  }
}

json decomposition_json(const GrowthDecomposition& d) {
  return {{"p", d.p},
          {"period", {d.period.start, d.period.end}},
          {"years", d.years},
          {"drift", d.drift},
          {"mobility", d.mobility},
          {"mobility_gradient", d.mobility_gradient},
          {"events", d.events},
          {"total", d.total},
          {"observed", d.observed ? json(*d.observed) : json(nullptr)}};
}

}  // namespace

std::vector<double> parse_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  try {
    while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  } catch (const std::exception&) {
    throw UsageError("range must be START:STOP:STEP, got '" + spec + "'");
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
    throw UsageError("range must be START:STOP:STEP with STEP > 0, got '" + spec + "'");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long k = 0; k <= n; ++k) out.push_back(parts[0] + parts[2] * static_cast<double>(k));
  return out;
}

int run_synth(const Common& c, const SynthArgs& a) {
  const RunConfig cfg = load_run_config(c);
  if (cfg.model.kind != "logistic") throw UsageError("synth needs model.kind = \"logistic\"");
  const LogisticDesign& d = cfg.model.logistic;
  const WealthGrid& g = cfg.grid;
  const DriftDiffusionProfile truth = d.profile(g);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < g.n_bins; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows.push_back({static_cast<double>(i), g.center(i), g.wealth_center(i), truth.income_drift[k],
                    truth.income_diffusion[k], truth.consumption_mean[k], truth.consumption_var[k]});
  }
  save_csv(out_path(c, "truth.csv"), {"bin", "x", "wealth", "income_drift", "income_diffusion", "c", "gamma2"}, rows);
  std::vector<DistributionSnapshot> snaps;
  const auto years = static_cast<int>(std::llround(a.horizon));
  for (int t = 0; t <= years; ++t) {
    snaps.push_back(d.snapshot(g, t));
    snaps.back().time = cfg.simulation.start_time + t;
  }
  PanelData panel = make_panel(snaps, truth, cfg.break_year);
  panel.manifest["source"] = "synth exact logistic design";
  save_panel(out_path(c, "panel_exact.csv"), panel);

  const DistributionSnapshot base = cfg.baseline.snapshot();
  std::vector<std::vector<double>> brows;
  for (std::size_t i = 0; i < base.grid.n_bins; ++i)
    brows.push_back({base.grid.center(i), base.grid.wealth_center(i), base.mass[static_cast<Eigen::Index>(i)]});
  save_csv(out_path(c, "tax_baseline.csv"), {"x", "wealth", "mass"}, brows);
  write_manifest(c, cfg, "synth", {"truth.csv", "panel_exact.csv", "tax_baseline.csv"});
  return 0;
}

int run_simulate(const Common& c, const SimulateArgs& a) {
  const RunConfig cfg = load_run_config(c);
  // The density solver is deterministic; only the particle solver needs a seed.
  const std::uint64_t seed = a.solver == "pde" ? c.seed.value_or(0) : require_seed(c);
  if (cfg.simulation.events.any()) throw UsageError("event models are not configurable from the command line");
  DistributionSnapshot init;
  if (!a.init_panel.empty()) {
    init = load_panel(a.init_panel).snapshots.front();
  } else {
    init = model_initial(cfg, cfg.grid);
  }
  const DriftDiffusionProfile prof = model_profile(cfg, init.grid);
  SimulationConfig sc = cfg.simulation;
  sc.rng_seed = seed;
  std::vector<DistributionSnapshot> snaps;
  if (a.solver == "particle") {
    snaps = simulate(init, ProfileSchedule::constant(prof), sc).snapshots;
  } else if (a.solver == "pde") {
    snaps.push_back(init);
    const std::size_t steps = sc.steps_per_output();
    const auto outputs = static_cast<std::size_t>(std::llround(sc.horizon / sc.output_every));
    for (std::size_t k = 0; k < outputs; ++k) snaps.push_back(evolve_density(snaps.back(), prof, nullptr, sc.dt, steps));
  } else {
    throw UsageError("--solver must be particle or pde");
  }
  std::vector<std::string> outputs{"snapshots.csv"};
  save_snapshots(out_path(c, "snapshots.csv"), snaps);
  if (a.emit_panel) {
    PanelData panel = make_panel(snaps, prof, cfg.break_year);
    panel.manifest["source"] = "simulate " + a.solver;
    panel.manifest["seed"] = std::to_string(seed);
    save_panel(out_path(c, "panel.csv"), panel);
    outputs.push_back("panel.csv");
  }
  write_manifest(c, cfg, "simulate", outputs, {{"solver", a.solver}});
  return 0;
}

int run_estimate(const Common& c, const EstimateArgs& a) {
  const RunConfig cfg = load_run_config(c);
  const std::uint64_t seed = require_seed(c);
  const PanelData panel = read_panel_arg(a.panel);
  EstimationInputs in;
  in.snapshots = panel.snapshots;
  in.income = panel.income;
  in.effects = panel.effects;
  in.break_year = a.break_year.value_or(panel.break_year);
  const int draws = a.draws.value_or(cfg.n_draws);
  const EstimationResult res = estimate(in, cfg.bandwidths, draws, seed);
  const ConsumptionProfile& p = res.profile;
  const WealthGrid& g = panel.grid;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < g.n_bins; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (is_missing(p.gamma2[k])) continue;
    rows.push_back({static_cast<double>(i), g.center(i), g.wealth_center(i), p.gamma2[k], p.gamma2_se[k],
                    p.gamma2_lo[k], p.gamma2_hi[k], p.c[0][k], p.c_se[0][k], p.c_lo[0][k], p.c_hi[0][k], p.c[1][k],
                    p.c_se[1][k], p.c_lo[1][k], p.c_hi[1][k], p.floored[i] ? 1.0 : 0.0});
  }
  save_csv(out_path(c, "profile.csv"),
           {"bin", "x", "wealth", "gamma2", "gamma2_se", "gamma2_lo", "gamma2_hi", "c_pre", "c_pre_se", "c_pre_lo",
            "c_pre_hi", "c_post", "c_post_se", "c_post_lo", "c_post_hi", "floored"},
           rows);
  std::vector<std::vector<double>> frows;
  for (const BinFit& f : res.fits) {
    const auto icpt = [&](int r) { return r < f.fit.intercepts.size() ? f.fit.intercepts[r] : kMissing; };
    frows.push_back({static_cast<double>(f.bin), f.fit.slope, icpt(0), icpt(1), f.fit.delta, f.delta_clamped ? 1.0 : 0.0,
                     f.fit.objective()});
  }
  save_csv(out_path(c, "fits.csv"), {"bin", "slope", "intercept_pre", "intercept_post", "delta", "delta_clamped", "objective"},
           frows);
  write_manifest(c, cfg, "estimate", {"profile.csv", "fits.csv"},
                 {{"skipped", res.skipped},
                  {"dropped_records", res.panel.dropped_records},
                  {"dropped_bins", res.panel.dropped_bins},
                  {"break_year", in.break_year},
                  {"n_draws", draws}});
  return 0;
}

int run_counterfactual(const Common& c, const CounterfactualArgs& a) {
  const RunConfig cfg = load_run_config(c);
  const std::uint64_t seed = require_seed(c);
  const PanelData panel = read_panel_arg(a.panel);
  const LoadedProfile prof = read_profile(a.profile, panel.grid);

  ScenarioConfig sc;
  if (!a.scenario.empty()) {
    const auto it = std::find_if(cfg.scenarios.begin(), cfg.scenarios.end(),
                                 [&](const ScenarioConfig& s) { return s.name == a.scenario; });
    if (it == cfg.scenarios.end()) throw UsageError("no [scenario." + a.scenario + "] in the config");
    sc = *it;
  } else {
    sc.name = "cli";
    sc.freeze = a.freeze;
  }
  if (!a.reference.empty()) {
    const Period r = parse_period(a.reference);
    sc.reference_start = r.start;
    sc.reference_end = r.end;
  }
  if (a.start) sc.start = *a.start;

  BaselineInputs base;
  base.initial = panel.snapshots.front();
  base.reference_snapshots = panel.snapshots;
  const std::vector<DriftDiffusionProfile> profiles = yearly_profiles(panel, prof);
  for (std::size_t k = 0; k < panel.snapshots.size(); ++k) {
    base.profiles.start_times.push_back(panel.snapshots[k].time);
    base.profiles.profiles.push_back(profiles[k]);
  }
  Scenario scenario;
  scenario.name = sc.name;
  scenario.start = sc.start;
  for (const std::string& f : sc.freeze) {
    Override o;
    o.reference = Period{sc.reference_start, sc.reference_end};
    if (f == "labor") o.target = OverrideTarget::LaborIncome;
    else if (f == "returns") o.target = OverrideTarget::Returns;
    else if (f == "taxes") o.target = OverrideTarget::Taxes;
    else if (f == "consumption") o.target = OverrideTarget::Consumption;
    else if (f == "estate") o.target = OverrideTarget::EstateTax;
    else throw UsageError("unknown freeze target '" + f + "'");
    scenario.overrides.push_back(o);
  }
  if (sc.growth_factor != 1.0) {
    Override o;
    o.target = OverrideTarget::Growth;
    o.growth_factor = sc.growth_factor;
    scenario.overrides.push_back(o);
  }
  CounterfactualConfig cc;
  cc.sim = cfg.simulation;
  cc.sim.rng_seed = seed;
  if (a.particles) cc.sim.n_particles = *a.particles;
  if (a.runs) cc.sim.n_runs = *a.runs;
  cc.horizon = panel.snapshots.back().time - panel.snapshots.front().time;
  cc.shares = {0.9, 0.99};
  const CounterfactualResult res = run_counterfactual(base, scenario, cc);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < res.benchmark.times.size(); ++k)
    rows.push_back({res.benchmark.times[k], res.benchmark.shares.at(0.99)[k], res.counterfactual.shares.at(0.99)[k],
                    res.benchmark.shares.at(0.9)[k], res.counterfactual.shares.at(0.9)[k]});
  save_csv(out_path(c, "shares.csv"),
           {"time", "benchmark_top1", "counterfactual_top1", "benchmark_top10", "counterfactual_top10"}, rows);
  write_manifest(c, cfg, "counterfactual", {"shares.csv"}, {{"scenario", sc.name}, {"freeze", sc.freeze}});
  return 0;
}

int run_tax(const Common& c, const TaxArgs& a) {
  const RunConfig cfg = load_run_config(c);
  const DistributionSnapshot base = cfg.baseline.snapshot();
  const TaxEnvironment env = cfg.baseline.environment();
  TaxPolicy policy = cfg.tax;
  if (a.threshold) policy = TaxPolicy::linear(policy.rates.back(), *a.threshold);
  policy.avoidance_elasticity = a.epsilon.value_or(cfg.tax.avoidance_elasticity);
  policy.consumption_elasticity = a.eta.value_or(cfg.tax.consumption_elasticity);
  if (a.rate) policy = with_top_rate(policy, *a.rate);
  try {
    policy.validate();
  } catch (const TaxError& e) {
    throw UsageError(e.what());
  }

  if (a.mode == "laffer") {
    std::vector<std::vector<double>> rows;
    for (const LafferPoint& p : laffer_curve(policy, base, env, parse_range(a.rate_grid)))
      rows.push_back({p.rate, p.revenue_static, p.revenue_long_run});
    save_csv(out_path(c, "laffer.csv"), {"rate", "revenue_static", "revenue_long_run"}, rows);
    write_manifest(c, cfg, "tax laffer", {"laffer.csv"});
  } else if (a.mode == "optimum") {
    const RevenueOptimum o = revenue_maximizing_rate(policy, base, env);
    std::vector<std::vector<double>> rows;
    for (const LafferPoint& p : o.curve) rows.push_back({p.rate, p.revenue_static, p.revenue_long_run});
    save_csv(out_path(c, "laffer.csv"), {"rate", "revenue_static", "revenue_long_run"}, rows);
    write_text(out_path(c, "optimum.json"),
               dump_json(json{{"rate", o.rate},
                              {"revenue_static", o.at_optimum.revenue_static},
                              {"revenue_long_run", o.at_optimum.revenue_long_run},
                              {"ratio", o.at_optimum.revenue_long_run / o.at_optimum.revenue_static}},
                         2));
    write_manifest(c, cfg, "tax optimum", {"optimum.json", "laffer.csv"});
  } else if (a.mode == "rebate") {
    const RebateResult r = rebate_fixed_point(policy, base, env);
    const TaxOutcome o = evaluate_policy(policy, base, env);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < base.grid.n_bins; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      rows.push_back({base.grid.wealth_center(i), base.mass[k], o.density_after.mass[k], r.density.mass[k], r.theta[k]});
    }
    save_csv(out_path(c, "rebate.csv"), {"wealth", "mass_baseline", "mass_taxed", "mass_rebated", "theta"}, rows);
    write_text(out_path(c, "rebate.json"),
               dump_json(json{{"rebate", r.rebate},
                              {"iterations", r.iterations},
                              {"revenue_long_run", o.revenue_long_run},
                              {"bottom50_share_taxed", 1.0 - top_share(o.density_after, 0.5)},
                              {"bottom50_share_rebated", 1.0 - top_share(r.density, 0.5)}},
                         2));
    write_manifest(c, cfg, "tax rebate", {"rebate.json", "rebate.csv"});
  } else if (a.mode == "estate-compare") {
    EstateModel m;
    m.mu = a.mu;
    m.sigma = a.sigma;
    m.delta = a.delta;
    const TaxComparison t = tax_comparison_curve(m, parse_range(a.rates));
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < t.rates.size(); ++k) rows.push_back({t.rates[k], t.alpha_annual[k], t.alpha_estate[k]});
    save_csv(out_path(c, "estate_compare.csv"), {"rate", "alpha_annual", "alpha_estate"}, rows);
    write_manifest(c, cfg, "tax estate-compare", {"estate_compare.csv"},
                   {{"alpha0", m.alpha0()}, {"alpha1", m.alpha1()}});
  } else {
    throw UsageError("tax mode must be laffer, optimum, rebate or estate-compare");
  }
  return 0;
}

int run_decompose(const Common& c, const DecomposeArgs& a) {
  const RunConfig cfg = load_run_config(c);
  const PanelData panel = read_panel_arg(a.panel);
  const LoadedProfile prof = read_profile(a.profile, panel.grid);
  DecomposeOptions opts;
  opts.log_density_bandwidth = cfg.bandwidths.log_density_slope;
  const GrowthDecomposition d =
      decompose_growth(panel.snapshots, yearly_profiles(panel, prof), panel.effects, a.p, parse_period(a.period), opts);
  write_text(out_path(c, "decomposition.json"), dump_json(decomposition_json(d), 2));
  write_manifest(c, cfg, "decompose", {"decomposition.json"});
  return 0;
}

int run_phase(const Common& c, const PhaseArgs& a) {
  const RunConfig cfg = load_run_config(c);
  const PanelData panel = read_panel_arg(a.panel);
  EstimationInputs in;
  in.snapshots = panel.snapshots;
  in.income = panel.income;
  in.effects = panel.effects;
  in.break_year = a.break_year.value_or(panel.break_year);
  const PhasePanel pp = build_lhs(in, cfg.bandwidths);
  std::vector<std::string> skipped;
  const std::vector<BinFit> fits = fit_bins(pp, cfg.bandwidths, &skipped);
  const PhasePortrait portrait = phase_portrait(pp, fits);
  std::vector<std::vector<double>> rows, lines;
  for (const PhaseRow& r : portrait.rows)
    rows.push_back({static_cast<double>(r.bin), r.wealth, r.year, static_cast<double>(r.period), r.x, r.y, r.fitted,
                    r.x_star, r.y_star});
  for (const PhaseLine& l : portrait.lines)
    lines.push_back({static_cast<double>(l.bin), l.slope, l.intercept[0], l.intercept[1], l.x_stationary[0],
                     l.x_stationary[1]});
  save_csv(out_path(c, "phase.csv"), {"bin", "wealth", "year", "period", "x", "y", "fitted", "x_star", "y_star"}, rows);
  save_csv(out_path(c, "lines.csv"), {"bin", "slope", "intercept_pre", "intercept_post", "x_stationary_pre", "x_stationary_post"},
           lines);
  write_manifest(c, cfg, "phase", {"phase.csv", "lines.csv"}, {{"skipped", skipped}});
  return 0;
}

int run_serve(const Common& c, const ServeArgs& a) {
  const RunConfig cfg = load_run_config(c);
  const std::string host = a.host.value_or(cfg.host);
  const int port = a.port.value_or(cfg.port);
  HttpService service(ServiceState::from_baseline(cfg.baseline, cfg.tax_threshold));
  const int bound = service.bind(host, port);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  write_manifest(c, cfg, "serve", {}, {{"host", host}, {"port", bound}});
  std::cout << dump_json(json{{"listening", host}, {"port", bound}}) << std::endl;
  return service.listen() ? 0 : 1;
}

}  // namespace wealthdyn::cli
