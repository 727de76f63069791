#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "wealthdyn/config.hpp"
#include "wealthdyn/io.hpp"

using namespace wealthdyn::cli;

namespace {

int fail(int code, const std::string& kind, const std::string& detail) {
  std::cerr << nlohmann::json{{"error", kind}, {"detail", detail}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wealth distribution dynamics: simulation, estimation, counterfactuals and tax analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);
  std::uint64_t seed = 0;
  app.add_option("--config", common.config_path, "Run configuration (TOML subset)")->check(CLI::ExistingFile);
  app.add_option("--out", common.out_dir, "Output directory");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "RNG seed (required for stochastic commands)");

  SynthArgs synth;
  CLI::App* c_synth = app.add_subcommand("synth", "Write synthetic calibrations");
  c_synth->add_option("--horizon", synth.horizon, "Years of exact snapshots")->check(CLI::NonNegativeNumber);

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "Simulate the wealth distribution");
  c_sim->add_option("--init", sim.init_panel, "Start from the first year of a panel")->check(CLI::ExistingFile);
  c_sim->add_flag("--emit-panel", sim.emit_panel, "Also write panel.csv");
  c_sim->add_option("--solver", sim.solver, "particle or pde")->check(CLI::IsMember({"particle", "pde"}));

  EstimateArgs est;
  CLI::App* c_est = app.add_subcommand("estimate", "Estimate the consumption profile from a panel");
  c_est->add_option("--panel", est.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  c_est->add_option("--break-year", est.break_year, "First year of the post regime");
  c_est->add_option("--draws", est.draws, "Bootstrap draws")->check(CLI::NonNegativeNumber);

  CounterfactualArgs cf;
  CLI::App* c_cf = app.add_subcommand("counterfactual", "Run a freeze counterfactual");
  c_cf->add_option("--panel", cf.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  c_cf->add_option("--profile", cf.profile, "profile.csv from estimate")->required()->check(CLI::ExistingFile);
  c_cf->add_option("--scenario", cf.scenario, "Scenario name from the config");
  c_cf->add_option("--freeze", cf.freeze, "labor, returns, taxes, consumption, estate")->delimiter(',');
  c_cf->add_option("--reference", cf.reference, "Reference period START:END");
  c_cf->add_option("--start", cf.start, "First counterfactual year");
  c_cf->add_option("--particles", cf.particles, "Particles per run")->check(CLI::PositiveNumber);
  c_cf->add_option("--runs", cf.runs, "Independent runs (odd)")->check(CLI::PositiveNumber);

  TaxArgs tax;
  CLI::App* c_tax = app.add_subcommand("tax", "Tax analysis on the synthetic baseline");
  c_tax->require_subcommand(1);
  const auto add_policy = [&](CLI::App* sub) {
    sub->add_option("--rate", tax.rate, "Top marginal rate");
    sub->add_option("--epsilon", tax.epsilon, "Avoidance elasticity");
    sub->add_option("--eta", tax.eta, "Consumption elasticity");
    sub->add_option("--threshold", tax.threshold, "Tax threshold (multiples of average income)");
  };
  CLI::App* t_laffer = c_tax->add_subcommand("laffer", "Static and long-run revenue curve");
  t_laffer->add_option("--rate-grid", tax.rate_grid, "START:STOP:STEP");
  add_policy(t_laffer);
  CLI::App* t_opt = c_tax->add_subcommand("optimum", "Revenue-maximizing top rate");
  add_policy(t_opt);
  CLI::App* t_reb = c_tax->add_subcommand("rebate", "Lump-sum rebate fixed point");
  add_policy(t_reb);
  CLI::App* t_est = c_tax->add_subcommand("estate-compare", "Annual versus estate tax tail exponents");
  t_est->add_option("--mu", tax.mu, "Drift of log wealth");
  t_est->add_option("--sigma", tax.sigma, "Volatility of log wealth");
  t_est->add_option("--delta", tax.delta, "Death rate");
  t_est->add_option("--rates", tax.rates, "START:STOP:STEP");

  DecomposeArgs dec;
  CLI::App* c_dec = app.add_subcommand("decompose", "Decompose top wealth growth");
  c_dec->add_option("--panel", dec.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  c_dec->add_option("--profile", dec.profile, "profile.csv from estimate")->required()->check(CLI::ExistingFile);
  c_dec->add_option("--p", dec.p, "Fractile")->check(CLI::Range(0.0, 1.0));
  c_dec->add_option("--period", dec.period, "START:END");

  PhaseArgs ph;
  CLI::App* c_ph = app.add_subcommand("phase", "Phase portrait per bin");
  c_ph->add_option("--panel", ph.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  c_ph->add_option("--break-year", ph.break_year, "First year of the post regime");

  ServeArgs srv;
  CLI::App* c_srv = app.add_subcommand("serve", "HTTP JSON API");
  c_srv->add_option("--host", srv.host, "Bind address");
  c_srv->add_option("--port", srv.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }
  if (*seed_opt) common.seed = seed;

  try {
    if (*c_synth) return run_synth(common, synth);
    if (*c_sim) return run_simulate(common, sim);
    if (*c_est) return run_estimate(common, est);
    if (*c_cf) return run_counterfactual(common, cf);
    if (*c_dec) return run_decompose(common, dec);
    if (*c_ph) return run_phase(common, ph);
    if (*c_srv) return run_serve(common, srv);
    if (*t_laffer) tax.mode = "laffer";
    else if (*t_opt) tax.mode = "optimum";
    else if (*t_reb) tax.mode = "rebate";
    else tax.mode = "estate-compare";
    return run_tax(common, tax);
  } catch (const UsageError& e) {
    return fail(2, "usage", e.what());
  } catch (const wealthdyn::ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const wealthdyn::PanelError& e) {
    return fail(1, "panel", e.what());
  } catch (const std::exception& e) {
    return fail(1, "computation", e.what());
  }
}
