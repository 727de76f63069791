#pragma once

#include <Eigen/Dense>

namespace wealthdyn {

// Rectangular-kernel smoothers. The bandwidth is the full window width: a point j enters the
// window of i when |coord_j - coord_i| <= bandwidth / 2. Missing (NaN) values are skipped, and
// windows near the ends shrink one-sidedly. Results are NaN where the window is starved.

Eigen::VectorXd window_mean(const Eigen::VectorXd& coord, const Eigen::VectorXd& values,
                            double bandwidth);

struct LocalLinear {
  Eigen::VectorXd level;
  Eigen::VectorXd slope;
};

/// Local-linear regression evaluated at every coordinate. Needs two distinct coordinates in a
/// window for the slope; a single point yields a level only.
LocalLinear local_linear(const Eigen::VectorXd& coord, const Eigen::VectorXd& values,
                         double bandwidth);

/// Centered moving average over `width` consecutive points (shrinking at the ends).
Eigen::VectorXd moving_average(const Eigen::VectorXd& values, int width);

}  // namespace wealthdyn
