#include "wealthdyn/smoothing.hpp"

#include "wealthdyn/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace wealthdyn {

namespace {

double half_window(double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  // Tolerance so that points exactly on the window edge are included.
  return 0.5 * bandwidth * (1.0 + 1e-9);
}

}  // namespace

Eigen::VectorXd window_mean(const Eigen::VectorXd& coord, const Eigen::VectorXd& values,
                            double bandwidth) {
  if (coord.size() != values.size()) throw std::invalid_argument("window_mean: size mismatch");
  const double hw = half_window(bandwidth);
  const Eigen::Index n = coord.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(coord[j] - coord[i]) > hw || is_missing(values[j])) continue;
      sum += values[j];
      ++count;
    }
    out[i] = count > 0 ? sum / count : kMissing;
  }
  return out;
}

LocalLinear local_linear(const Eigen::VectorXd& coord, const Eigen::VectorXd& values,
                         double bandwidth) {
  if (coord.size() != values.size()) throw std::invalid_argument("local_linear: size mismatch");
  const double hw = half_window(bandwidth);
  const Eigen::Index n = coord.size();
  LocalLinear out{Eigen::VectorXd::Constant(n, kMissing), Eigen::VectorXd::Constant(n, kMissing)};
  for (Eigen::Index i = 0; i < n; ++i) {
    // Centered moments about coord[i] keep the normal equations well conditioned.
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double u = coord[j] - coord[i];
      if (std::abs(u) > hw || is_missing(values[j])) continue;
      s0 += 1.0;
      s1 += u;
      s2 += u * u;
      t0 += values[j];
      t1 += u * values[j];
    }
    if (s0 < 1.0) continue;
    const double det = s0 * s2 - s1 * s1;
    if (s0 >= 2.0 && det > 1e-14 * s0 * s2) {
      out.level[i] = (s2 * t0 - s1 * t1) / det;
      out.slope[i] = (s0 * t1 - s1 * t0) / det;
    } else {
      out.level[i] = t0 / s0;
    }
  }
  return out;
}

Eigen::VectorXd moving_average(const Eigen::VectorXd& values, int width) {
  if (width < 1) throw std::invalid_argument("moving_average: width must be >= 1");
  const Eigen::Index n = values.size();
  const int lo = (width - 1) / 2;
  const int hi = width / 2;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - lo); j <= std::min<Eigen::Index>(n - 1, i + hi); ++j) {
      if (is_missing(values[j])) continue;
      sum += values[j];
      ++count;
    }
    out[i] = count > 0 ? sum / count : kMissing;
  }
  return out;
}

}  // namespace wealthdyn
