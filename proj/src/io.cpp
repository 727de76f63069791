#include "wealthdyn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace wealthdyn {

namespace {

const std::vector<std::string> kPanelColumns{"year", "bin_center_asinh", "mass", "income_drift",
                                             "income_diffusion", "Z", "Xi", "X"};
constexpr const char* kUnits = "multiples_of_average_national_income";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line, std::size_t col) {
  if (s.empty()) throw PanelError("empty cell", line, col);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw PanelError("not a number: '" + s + "'", line, col);
  if (!std::isfinite(v)) throw PanelError("non-finite cell", line, col);
  return v;
}

std::string message_with_position(const std::string& msg, std::size_t line, std::size_t col) {
  if (line == 0) return msg;
  std::string s = "line " + std::to_string(line);
  if (col > 0) s += ", column " + std::to_string(col);
  return s + ": " + msg;
}

void dump_value(const nlohmann::json& j, std::string& out, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += nlohmann::json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_value(it.value(), out, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        dump_value(v, out, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite number in JSON output");
      out += format_double(v);
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

PanelError::PanelError(const std::string& msg, std::size_t line, std::size_t column)
    : std::runtime_error(message_with_position(msg, line, column)), line_(line), column_(column), message_(msg) {}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

PanelData read_panel(std::istream& in) {
  PanelData panel;
  std::map<std::string, std::string> header;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> columns;
  std::size_t header_line = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto colon = t.find(':');
      if (colon != std::string::npos) header[trim(t.substr(1, colon - 1))] = trim(t.substr(colon + 1));
      continue;
    }
    columns = split(t, ',');
    header_line = lineno;
    break;
  }
  if (columns.empty()) throw PanelError("missing column header");
  if (columns != kPanelColumns) {
    for (std::size_t k = 0; k < std::max(columns.size(), kPanelColumns.size()); ++k)
      if (k >= columns.size() || k >= kPanelColumns.size() || columns[k] != kPanelColumns[k])
        throw PanelError("expected columns year,bin_center_asinh,mass,income_drift,income_diffusion,Z,Xi,X",
                         header_line, k + 1);
  }
  const auto need = [&](const std::string& key) {
    const auto it = header.find(key);
    if (it == header.end()) throw PanelError("manifest lacks '" + key + "'");
    return it->second;
  };
  try {
    const double lower = parse_number(need("grid.lower_asinh"), 0, 0);
    const double width = parse_number(need("grid.bin_width"), 0, 0);
    const double n = parse_number(need("grid.n_bins"), 0, 0);
    if (n < 1 || n != std::floor(n)) throw PanelError("grid.n_bins must be a positive integer");
    panel.grid = WealthGrid(lower, width, static_cast<std::size_t>(n));
  } catch (const std::invalid_argument& e) {
    throw PanelError(std::string("invalid grid: ") + e.what());
  }
  if (header.count("units") && header["units"] != kUnits)
    throw PanelError("units must be " + std::string(kUnits) + ", got '" + header["units"] + "'");
  if (header.count("break_year")) panel.break_year = parse_number(header["break_year"], 0, 0);
  for (const auto& [k, v] : header)
    if (k != "grid.lower_asinh" && k != "grid.bin_width" && k != "grid.n_bins" && k != "units" && k != "break_year")
      panel.manifest[k] = v;

  const auto nb = static_cast<Eigen::Index>(panel.grid.n_bins);
  struct YearRows {
    Eigen::VectorXd cols[6];
    std::vector<bool> seen;
  };
  std::map<double, YearRows> years;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t, ',');
    if (cells.size() != kPanelColumns.size())
      throw PanelError("expected " + std::to_string(kPanelColumns.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       lineno, std::min(cells.size(), kPanelColumns.size()) + 1);
    double v[8];
    for (std::size_t k = 0; k < 8; ++k) v[k] = parse_number(cells[k], lineno, k + 1);
    const double pos = (v[1] - panel.grid.lower_asinh) / panel.grid.bin_width - 0.5;
    const double idx = std::round(pos);
    if (std::abs(pos - idx) > 1e-6 || idx < 0 || idx >= static_cast<double>(nb))
      throw PanelError("bin center not on the declared grid", lineno, 2);
    if (v[2] < 0.0) throw PanelError("negative mass", lineno, 3);
    if (v[4] < 0.0) throw PanelError("negative income variance", lineno, 5);
    auto& yr = years[v[0]];
    if (yr.seen.empty()) {
      yr.seen.assign(static_cast<std::size_t>(nb), false);
      for (auto& c : yr.cols) c = Eigen::VectorXd::Zero(nb);
    }
    const auto i = static_cast<Eigen::Index>(idx);
    if (yr.seen[static_cast<std::size_t>(i)]) throw PanelError("duplicate (year, bin) row", lineno, 1);
    yr.seen[static_cast<std::size_t>(i)] = true;
    for (int k = 0; k < 6; ++k) yr.cols[k][i] = v[k + 2];
  }
  if (years.empty()) throw PanelError("panel has no rows");

  // Integer-year panels must be contiguous.
  bool integral = true;
  for (const auto& [y, r] : years) integral = integral && y == std::floor(y);
  if (integral) {
    double expect = years.begin()->first;
    for (const auto& [y, r] : years) {
      if (y != expect) throw PanelError("missing year " + format_double(expect));
      expect += 1.0;
    }
  }
  for (const auto& [y, r] : years) {
    const auto missing = std::find(r.seen.begin(), r.seen.end(), false);
    if (missing != r.seen.end())
      throw PanelError("year " + format_double(y) + " lacks bin " + std::to_string(missing - r.seen.begin()));
    panel.snapshots.emplace_back(y, panel.grid, r.cols[0]);
    DriftDiffusionProfile p = DriftDiffusionProfile::zeros(panel.grid);
    p.income_drift = r.cols[1];
    p.income_diffusion = r.cols[2];
    panel.income.push_back(std::move(p));
    EventEffects e = EventEffects::zeros(panel.grid, y);
    e.Z = r.cols[3];
    e.Xi = r.cols[4];
    e.X = r.cols[5];
    panel.effects.push_back(std::move(e));
  }
  return panel;
}

PanelData load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PanelError("cannot open panel file '" + path + "'");
  return read_panel(in);
}

void write_panel(std::ostream& out, const PanelData& panel) {
  const WealthGrid& g = panel.grid;
  out << "# wealthdyn panel\n";
  out << "# grid.lower_asinh: " << format_double(g.lower_asinh) << '\n';
  out << "# grid.bin_width: " << format_double(g.bin_width) << '\n';
  out << "# grid.n_bins: " << g.n_bins << '\n';
  out << "# units: " << kUnits << '\n';
  out << "# break_year: " << format_double(panel.break_year) << '\n';
  for (const auto& [k, v] : panel.manifest) out << "# " << k << ": " << v << '\n';
  for (std::size_t k = 0; k < kPanelColumns.size(); ++k) out << (k ? "," : "") << kPanelColumns[k];
  out << '\n';
  if (panel.income.size() != panel.snapshots.size() || panel.effects.size() != panel.snapshots.size())
    throw PanelError("panel components differ in length");
  for (std::size_t t = 0; t < panel.snapshots.size(); ++t) {
    const auto& s = panel.snapshots[t];
    if (!s.grid.compatible(g)) throw PanelError("snapshot grid differs from panel grid");
    for (std::size_t i = 0; i < g.n_bins; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double cells[8] = {s.time, g.center(i), s.mass[k], panel.income[t].income_drift[k],
                               panel.income[t].income_diffusion[k], panel.effects[t].Z[k], panel.effects[t].Xi[k],
                               panel.effects[t].X[k]};
      for (int c = 0; c < 8; ++c) out << (c ? "," : "") << format_double(cells[c]);
      out << '\n';
    }
  }
}

void save_panel(const std::string& path, const PanelData& panel) {
  std::ofstream out(path);
  if (!out) throw PanelError("cannot write panel file '" + path + "'");
  write_panel(out, panel);
}

PanelData make_panel(const std::vector<DistributionSnapshot>& snapshots, const DriftDiffusionProfile& income,
                     double break_year) {
  if (snapshots.empty()) throw PanelError("no snapshots");
  PanelData p;
  p.grid = snapshots.front().grid;
  p.break_year = break_year;
  p.snapshots = snapshots;
  DriftDiffusionProfile z = DriftDiffusionProfile::zeros(p.grid);
  z.income_drift = income.income_drift;
  z.income_diffusion = income.income_diffusion;
  for (const auto& s : snapshots) {
    p.income.push_back(z);
    p.effects.push_back(EventEffects::zeros(p.grid, s.time));
  }
  return p;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw std::invalid_argument("row width differs from header");
    for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << (std::isnan(r[k]) ? "nan" : format_double(r[k]));
    out << '\n';
  }
}

void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_csv(out, header, rows);
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw PanelError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PanelError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto cells = split(s, ',');
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size()) throw PanelError("row width differs from header", lineno, cells.size());
    std::vector<double> row;
    for (std::size_t k = 0; k < cells.size(); ++k)
      row.push_back(cells[k] == "nan" ? kMissing : parse_number(cells[k], lineno, k + 1));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string dump_json(const nlohmann::json& j, int indent) {
  std::string out;
  dump_value(j, out, indent, 0);
  return out;
}

nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wealthdyn
