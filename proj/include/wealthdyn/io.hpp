#pragma once

#include <Eigen/Dense>

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wealthdyn/events.hpp"
#include "wealthdyn/grid.hpp"
#include "wealthdyn/profile.hpp"

namespace wealthdyn {

/// Parse or validation failure with a 1-based position (0 when not applicable).
class PanelError : public std::runtime_error {
 public:
  PanelError(const std::string& msg, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_, column_;
  std::string message_;
};

/// Yearly panel: rows (year, bin_center_asinh, mass, income_drift, income_diffusion, Z, Xi, X).
/// Income fields are linear-scale z and psi^2; Z, Xi, X are CDF-level effects per year at bin upper edges.
struct PanelData {
  WealthGrid grid;
  double break_year = 1978.0;
  std::string units = "multiples_of_average_national_income";
  std::map<std::string, std::string> manifest;  // extra header entries, kept on save
  std::vector<DistributionSnapshot> snapshots;
  std::vector<DriftDiffusionProfile> income;  // consumption fields zero
  std::vector<EventEffects> effects;
};

PanelData read_panel(std::istream& in);
PanelData load_panel(const std::string& path);
void write_panel(std::ostream& out, const PanelData& panel);
void save_panel(const std::string& path, const PanelData& panel);

/// Panel from snapshots with a single income profile and zero effects.
PanelData make_panel(const std::vector<DistributionSnapshot>& snapshots, const DriftDiffusionProfile& income,
                     double break_year);

/// "%.17g"
std::string format_double(double v);

/// Simple CSV table writer; numbers use format_double.
void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t column(const std::string& name) const;
};
CsvTable load_csv(const std::string& path);

/// JSON text with every floating-point number printed with 17 significant digits. Non-finite
/// numbers are rejected.
std::string dump_json(const nlohmann::json& j, int indent = -1);

/// JSON array from an Eigen vector.
nlohmann::json to_json(const Eigen::VectorXd& v);

/// 64-bit FNV-1a, hex.
std::string fnv1a_hex(const std::string& text);

}  // namespace wealthdyn
