#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wealthdyn::cli {

/// Usage or configuration problem; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> argv;
};

struct SynthArgs {
  double horizon = 40.0;
};

struct SimulateArgs {
  std::string init_panel;
  bool emit_panel = false;
  std::string solver = "particle";
};

struct EstimateArgs {
  std::string panel;
  std::optional<double> break_year;
  std::optional<int> draws;
};

struct CounterfactualArgs {
  std::string panel;
  std::string profile;
  std::string scenario;
  std::vector<std::string> freeze;
  std::string reference;
  std::optional<double> start;
  std::optional<std::size_t> particles;
  std::optional<int> runs;
};

struct TaxArgs {
  std::string mode;  // laffer | optimum | rebate | estate-compare
  std::string rate_grid = "0:0.5:0.01";
  std::optional<double> rate;
  std::optional<double> epsilon, eta, threshold;
  double mu = -0.04, sigma = 0.4, delta = 0.02;
  std::string rates = "0:1:0.05";
};

struct DecomposeArgs {
  std::string panel;
  std::string profile;
  double p = 0.99;
  std::string period;
};

struct PhaseArgs {
  std::string panel;
  std::optional<double> break_year;
};

struct ServeArgs {
  std::optional<std::string> host;
  std::optional<int> port;
};

int run_synth(const Common& c, const SynthArgs& a);
int run_simulate(const Common& c, const SimulateArgs& a);
int run_estimate(const Common& c, const EstimateArgs& a);
int run_counterfactual(const Common& c, const CounterfactualArgs& a);
int run_tax(const Common& c, const TaxArgs& a);
int run_decompose(const Common& c, const DecomposeArgs& a);
int run_phase(const Common& c, const PhaseArgs& a);
int run_serve(const Common& c, const ServeArgs& a);

/// "a:b:s" with inclusive end.
std::vector<double> parse_range(const std::string& spec);

}  // namespace wealthdyn::cli
