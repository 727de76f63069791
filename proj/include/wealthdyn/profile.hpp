#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "wealthdyn/grid.hpp"

namespace wealthdyn {

/// Labeled income component (e.g. labor, capital income, capital gains, growth normalization).
struct IncomeComponent {
  std::string label;
  Eigen::VectorXd values;  // wealth units / yr, per bin
};

/// Per-bin conditional moments of wealth changes, linear scale.
struct DriftDiffusionProfile {
  WealthGrid grid;
  Eigen::VectorXd income_drift;      // z = y + (r - g) w
  Eigen::VectorXd income_diffusion;  // psi^2
  Eigen::VectorXd consumption_mean;  // c
  Eigen::VectorXd consumption_var;   // gamma^2
  double growth_rate = 0.0;          // g
  std::vector<IncomeComponent> income_components;  // optional split of income_drift

  static DriftDiffusionProfile zeros(const WealthGrid& grid);
  /// Profile whose total drift and diffusion are given; consumption set to zero.
  static DriftDiffusionProfile from_totals(const WealthGrid& grid, Eigen::VectorXd drift,
                                           Eigen::VectorXd diffusion);

  Eigen::VectorXd drift() const { return income_drift - consumption_mean; }
  Eigen::VectorXd diffusion() const { return income_diffusion + consumption_var; }

  /// Throws on size mismatch, non-finite entries, or negative variances.
  void validate() const;
};

/// Drift and diffusion on both scales at bin centers.
struct ScaleParams {
  Eigen::VectorXd drift_linear;
  Eigen::VectorXd diffusion_linear;
  Eigen::VectorXd drift_asinh;
  Eigen::VectorXd diffusion_asinh;
};

ScaleParams scale_params(const DriftDiffusionProfile& profile);
ScaleParams scale_params_from_linear(const WealthGrid& grid, const Eigen::VectorXd& drift,
                                     const Eigen::VectorXd& diffusion);
ScaleParams scale_params_from_asinh(const WealthGrid& grid, const Eigen::VectorXd& drift_asinh,
                                    const Eigen::VectorXd& diffusion_asinh);

/// Values at bin centers, interpolated linearly in asinh coordinates and held constant beyond
/// the end centers.
class BinInterpolator {
 public:
  BinInterpolator() = default;
  BinInterpolator(const WealthGrid& grid, Eigen::VectorXd values);
  double operator()(double w) const { return at_asinh(asinh(w)); }
  double at_asinh(double x) const;

 private:
  double x_first_ = 0.0;
  double width_ = 1.0;
  Eigen::VectorXd values_;
};

/// Piecewise-constant sequence of profiles: profile k applies from start_times[k] onward.
struct ProfileSchedule {
  std::vector<double> start_times;
  std::vector<DriftDiffusionProfile> profiles;

  static ProfileSchedule constant(const DriftDiffusionProfile& p);
  std::size_t index_at(double t) const;
  const DriftDiffusionProfile& at(double t) const { return profiles[index_at(t)]; }
};

/// Replaces missing entries by linear interpolation between valid neighbors (constant beyond).
Eigen::VectorXd fill_missing(const Eigen::VectorXd& v);

}  // namespace wealthdyn
