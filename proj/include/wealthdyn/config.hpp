#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "wealthdyn/estimator.hpp"
#include "wealthdyn/grid.hpp"
#include "wealthdyn/sde.hpp"
#include "wealthdyn/synthetic.hpp"
#include "wealthdyn/tax.hpp"

namespace wealthdyn {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Value of a `key = value` entry: number, string, bool, or array of numbers.
using ConfigValue = std::variant<double, std::string, bool, std::vector<double>>;

struct ConfigEntry {
  ConfigValue value;
  std::size_t line = 0;
};

/// Sections keyed by name ("" for top level); entries keyed by name.
using ConfigDocument = std::map<std::string, std::map<std::string, ConfigEntry>>;

/// TOML subset: [section] and [section.sub] headers, `key = value`, # comments, strings in double
/// quotes, true/false, numbers, flat numeric arrays.
ConfigDocument parse_config_text(const std::string& text);

struct ScenarioConfig {
  std::string name;
  std::vector<std::string> freeze;  // labor, returns, taxes, consumption, estate
  double start = 1978.0;
  double reference_start = 1962.0;
  double reference_end = 1977.0;
  double growth_factor = 1.0;
};

struct ModelConfig {
  std::string kind = "logistic";  // logistic | linear
  LogisticDesign logistic;
  LinearProfileSpec linear;
  double initial_lambda = 2.0;  // linear models start from the logistic-design shape with this rate
};

struct RunConfig {
  WealthGrid grid;
  Bandwidths bandwidths;
  SimulationConfig simulation;  // rng_seed is taken from the command line
  ModelConfig model;
  double break_year = 1978.0;
  int n_draws = 500;
  ParetoBaseline baseline;
  double tax_threshold = 600.0;
  TaxPolicy tax = TaxPolicy::linear(0.0, 600.0);
  std::vector<ScenarioConfig> scenarios;
  std::string host = "127.0.0.1";
  int port = 8787;
  double avg_income_usd = 80000.0;
  std::string source_text;  // raw document, hashed into run manifests

  void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace wealthdyn
