#include "wealthdyn/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace wealthdyn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing # comment outside double quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

double parse_number(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw ConfigError("invalid value '" + s + "'", line);
  return v;
}

ConfigValue parse_value(const std::string& raw, std::size_t line) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("missing value", line);
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError("unterminated string", line);
    return s.substr(1, s.size() - 2);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated array", line);
    std::vector<double> out;
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(parse_number(item, line));
    }
    return out;
  }
  return parse_number(s, line);
}

// Typed accessors that consume known keys; leftovers are unknown.
class Section {
 public:
  Section(const std::string& name, const std::map<std::string, ConfigEntry>* entries) : name_(name), entries_(entries) {}

  void number(const std::string& key, double& out) {
    if (const ConfigEntry* e = take(key)) {
      if (const auto* d = std::get_if<double>(&e->value))
        out = *d;
      else
        throw ConfigError(where(key) + " must be a number", e->line);
    }
  }
  void integer(const std::string& key, int& out) {
    double v = out;
    number(key, v);
    check_integer(key, v);
    out = static_cast<int>(v);
  }
  void count(const std::string& key, std::size_t& out) {
    double v = static_cast<double>(out);
    number(key, v);
    check_integer(key, v);
    if (v < 0) throw ConfigError(where(key) + " must be nonnegative", line_of(key));
    out = static_cast<std::size_t>(v);
  }
  void text(const std::string& key, std::string& out) {
    if (const ConfigEntry* e = take(key)) {
      if (const auto* s = std::get_if<std::string>(&e->value))
        out = *s;
      else
        throw ConfigError(where(key) + " must be a string", e->line);
    }
  }
  void flag(const std::string& key, bool& out) {
    if (const ConfigEntry* e = take(key)) {
      if (const auto* b = std::get_if<bool>(&e->value))
        out = *b;
      else
        throw ConfigError(where(key) + " must be true or false", e->line);
    }
  }
  void array(const std::string& key, std::vector<double>& out) {
    if (const ConfigEntry* e = take(key)) {
      if (const auto* a = std::get_if<std::vector<double>>(&e->value))
        out = *a;
      else if (const auto* d = std::get_if<double>(&e->value))
        out = {*d};
      else
        throw ConfigError(where(key) + " must be a numeric array", e->line);
    }
  }
  void finish() const {
    if (!entries_) return;
    for (const auto& [k, e] : *entries_)
      if (!used_.count(k)) throw ConfigError("unknown key '" + where(k) + "'", e.line);
  }
  std::size_t line_of(const std::string& key) const {
    if (!entries_) return 0;
    const auto it = entries_->find(key);
    return it == entries_->end() ? 0 : it->second.line;
  }

 private:
  const ConfigEntry* take(const std::string& key) {
    if (!entries_) return nullptr;
    const auto it = entries_->find(key);
    if (it == entries_->end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }
  void check_integer(const std::string& key, double v) const {
    if (v != std::floor(v)) throw ConfigError(where(key) + " must be an integer", line_of(key));
  }
  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  std::string name_;
  const std::map<std::string, ConfigEntry>* entries_;
  std::set<std::string> used_;
};

}  // namespace

ConfigError::ConfigError(const std::string& msg, std::size_t line)
    : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + msg : "config: " + msg), line_(line) {}

ConfigDocument parse_config_text(const std::string& text) {
  ConfigDocument doc;
  doc[""];
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", lineno);
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ConfigError("invalid section name '" + section + "'", lineno);
      if (doc.count(section) && !doc[section].empty()) throw ConfigError("duplicate section [" + section + "]", lineno);
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'", lineno);
    auto& entries = doc[section];
    if (entries.count(key)) throw ConfigError("duplicate key '" + key + "'", lineno);
    entries[key] = ConfigEntry{parse_value(line.substr(eq + 1), lineno), lineno};
  }
  return doc;
}

void RunConfig::validate() const {
  bandwidths.validate();
  SimulationConfig s = simulation;
  s.validate();
  tax.validate();
  if (n_draws < 0) throw ConfigError("estimate.n_draws must be nonnegative");
  if (port < 0 || port > 65535) throw ConfigError("service.port out of range");
  if (model.kind != "logistic" && model.kind != "linear") throw ConfigError("model.kind must be logistic or linear");
  if (!(baseline.alpha > 1.0)) throw ConfigError("baseline.alpha must exceed 1");
}

RunConfig parse_config(const std::string& text) {
  const ConfigDocument doc = parse_config_text(text);
  RunConfig cfg;
  cfg.source_text = text;
  cfg.simulation.horizon = 40.0;
  const auto section = [&](const std::string& name) {
    const auto it = doc.find(name);
    return Section(name, it == doc.end() ? nullptr : &it->second);
  };
  static const std::set<std::string> known{"", "grid", "bandwidths", "simulation", "model", "estimate",
                                           "baseline", "tax", "service"};
  for (const auto& [name, entries] : doc) {
    if (known.count(name) || name.rfind("scenario.", 0) == 0) continue;
    const std::size_t line = entries.empty() ? 0 : entries.begin()->second.line;
    throw ConfigError("unknown section [" + name + "]", line);
  }
  section("").finish();

  {
    Section s = section("grid");
    double lower = cfg.grid.lower_asinh, width = cfg.grid.bin_width;
    std::size_t n = cfg.grid.n_bins;
    s.number("lower_asinh", lower);
    s.number("bin_width", width);
    s.count("n_bins", n);
    s.finish();
    try {
      cfg.grid = WealthGrid(lower, width, n);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }
  {
    Section s = section("bandwidths");
    Bandwidths& b = cfg.bandwidths;
    s.number("income_mean_time", b.income_mean_time);
    s.number("income_variance_wealth", b.income_variance_wealth);
    s.number("log_density_slope", b.log_density_slope);
    s.number("survival_ratio_time", b.survival_ratio_time);
    s.number("effects_time", b.effects_time);
    s.number("measurement_error_time", b.measurement_error_time);
    s.number("diffusion_derivative", b.diffusion_derivative);
    std::string delta = "auto";
    s.text("delta", delta);
    if (delta != "auto") throw ConfigError("bandwidths.delta must be \"auto\" (scale it with delta_scale)", s.line_of("delta"));
    s.number("delta_scale", b.delta_scale);
    s.finish();
    try {
      b.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("bandwidths: ") + e.what());
    }
  }
  {
    Section s = section("simulation");
    SimulationConfig& c = cfg.simulation;
    s.number("dt", c.dt);
    s.number("horizon", c.horizon);
    s.number("output_every", c.output_every);
    s.number("start_time", c.start_time);
    s.count("n_particles", c.n_particles);
    s.integer("n_runs", c.n_runs);
    s.flag("demography", c.events.demography);
    s.flag("inheritance", c.events.inheritance);
    s.flag("marriage", c.events.marriage);
    s.finish();
  }
  {
    Section s = section("model");
    ModelConfig& m = cfg.model;
    s.text("kind", m.kind);
    s.number("s1", m.logistic.s1);
    s.number("lambda0", m.logistic.lambda0);
    s.number("lambda_inf", m.logistic.lambda_inf);
    s.number("gamma_share", m.logistic.gamma_share);
    s.number("income_a", m.logistic.income_a);
    s.number("income_b", m.logistic.income_b);
    s.number("z0", m.linear.z0);
    s.number("z1", m.linear.z1);
    s.number("p0", m.linear.p0);
    s.number("p2", m.linear.p2);
    s.number("c0", m.linear.c0);
    s.number("c1", m.linear.c1);
    s.number("g0", m.linear.g0);
    s.number("g2", m.linear.g2);
    s.number("initial_lambda", m.initial_lambda);
    s.finish();
  }
  {
    Section s = section("estimate");
    s.number("break_year", cfg.break_year);
    s.integer("n_draws", cfg.n_draws);
    s.finish();
  }
  {
    Section s = section("baseline");
    ParetoBaseline& b = cfg.baseline;
    s.number("alpha", b.alpha);
    s.number("w_min", b.w_min);
    s.number("upper_asinh", b.upper_asinh);
    s.number("bin_width", b.bin_width);
    s.number("sigma2_coef", b.sigma2_coef);
    s.number("consumption_rate", b.consumption_rate);
    s.finish();
  }
  {
    Section s = section("tax");
    std::vector<double> thresholds{cfg.tax_threshold}, rates{0.0};
    s.array("thresholds", thresholds);
    s.array("rates", rates);
    s.number("epsilon", cfg.tax.avoidance_elasticity);
    s.number("eta", cfg.tax.consumption_elasticity);
    s.finish();
    cfg.tax.thresholds = thresholds;
    cfg.tax.rates = rates;
    cfg.tax_threshold = thresholds.empty() ? cfg.tax_threshold : thresholds.back();
    try {
      cfg.tax.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("tax: ") + e.what());
    }
  }
  {
    Section s = section("service");
    s.text("host", cfg.host);
    s.integer("port", cfg.port);
    s.number("avg_income_usd", cfg.avg_income_usd);
    s.finish();
  }
  for (const auto& [name, entries] : doc) {
    if (name.rfind("scenario.", 0) != 0) continue;
    ScenarioConfig sc;
    sc.name = name.substr(9);
    Section s(name, &entries);
    std::string freeze;
    s.text("freeze", freeze);
    s.number("start", sc.start);
    s.number("reference_start", sc.reference_start);
    s.number("reference_end", sc.reference_end);
    s.number("growth_factor", sc.growth_factor);
    s.finish();
    std::stringstream ss(freeze);
    std::string item;
    static const std::set<std::string> targets{"labor", "returns", "taxes", "consumption", "estate"};
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      if (!targets.count(item)) throw ConfigError("unknown freeze target '" + item + "'", s.line_of("freeze"));
      sc.freeze.push_back(item);
    }
    cfg.scenarios.push_back(sc);
  }
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace wealthdyn
