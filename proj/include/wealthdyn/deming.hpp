#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace wealthdyn {

/// Deming line fit y = a_g + b x, minimizing sum (y - a - b x*)^2 + delta (x - x*)^2 over the
/// line and the latent x*. Groups share the slope and keep their own intercepts.
template <class Scalar>
struct DemingFit {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Scalar slope{};
  Vec intercepts;           // indexed by group label; NaN for labels with no points
  Scalar delta{};
  std::vector<int> groups;  // label per point (all zero for a single group)
  Vec x_star, y_star;       // projections onto the fitted line
  Vec residuals;            // signed scalar error per point

  bool expected_sign() const { return slope <= Scalar(0); }
  Scalar intercept(int g = 0) const { return intercepts[g]; }
  /// Objective value at the optimum, equal to the sum of squared residuals.
  Scalar objective() const { return residuals.squaredNorm(); }
};

struct DemingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Slope from centered second moments (any common normalization).
template <class Scalar>
Scalar deming_slope(Scalar sxx, Scalar sxy, Scalar syy, Scalar delta) {
  using std::sqrt;
  using std::abs;
  if (!(delta > Scalar(0))) throw DemingError("delta must be positive");
  const Scalar scale = sxx * delta + syy;
  if (!(abs(sxy) > Scalar(1e-300)) || abs(sxy) <= Scalar(1e-14) * scale)
    throw DemingError("no identifying variation");
  const Scalar d = syy - delta * sxx;
  const Scalar root = sqrt(d * d + Scalar(4) * delta * sxy * sxy);
  // Rationalized branch avoids cancellation when d < 0.
  if (d >= Scalar(0)) return (d + root) / (Scalar(2) * sxy);
  return Scalar(2) * delta * sxy / (root - d);
}

template <class Scalar>
DemingFit<Scalar> deming_fit(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                             const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y, Scalar delta,
                             const std::vector<int>& groups = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using std::sqrt;
  const Eigen::Index n = x.size();
  if (y.size() != n) throw DemingError("x and y differ in length");
  if (!groups.empty() && static_cast<Eigen::Index>(groups.size()) != n)
    throw DemingError("group labels differ in length");
  if (!x.allFinite() || !y.allFinite()) throw DemingError("non-finite observations");

  DemingFit<Scalar> fit;
  fit.delta = delta;
  fit.groups = groups.empty() ? std::vector<int>(static_cast<std::size_t>(n), 0) : groups;
  int n_groups = 0;
  for (int g : fit.groups) {
    if (g < 0) throw DemingError("group labels must be nonnegative");
    n_groups = std::max(n_groups, g + 1);
  }
  Vec sx = Vec::Zero(n_groups), sy = Vec::Zero(n_groups), cnt = Vec::Zero(n_groups);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int g = fit.groups[static_cast<std::size_t>(k)];
    sx[g] += x[k];
    sy[g] += y[k];
    cnt[g] += Scalar(1);
  }
  for (int g = 0; g < n_groups; ++g)
    if (cnt[g] > Scalar(0) && cnt[g] < Scalar(2)) throw DemingError("fewer than 2 points in a group");
  if (n < 2) throw DemingError("fewer than 2 points");

  Vec mx(n_groups), my(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    mx[g] = cnt[g] > Scalar(0) ? sx[g] / cnt[g] : Scalar(0);
    my[g] = cnt[g] > Scalar(0) ? sy[g] / cnt[g] : Scalar(0);
  }
  Scalar sxx(0), sxy(0), syy(0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int g = fit.groups[static_cast<std::size_t>(k)];
    const Scalar dx = x[k] - mx[g], dy = y[k] - my[g];
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const Scalar N = static_cast<Scalar>(n);
  const Scalar b = deming_slope(sxx / N, sxy / N, syy / N, delta);
  fit.slope = b;
  fit.intercepts = Vec::Constant(n_groups, std::numeric_limits<Scalar>::quiet_NaN());
  for (int g = 0; g < n_groups; ++g)
    if (cnt[g] > Scalar(0)) fit.intercepts[g] = my[g] - b * mx[g];

  fit.x_star.resize(n);
  fit.y_star.resize(n);
  fit.residuals.resize(n);
  const Scalar denom = b * b + delta;
  const Scalar proj = sqrt(delta / denom);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Scalar a = fit.intercepts[fit.groups[static_cast<std::size_t>(k)]];
    const Scalar r = y[k] - a - b * x[k];
    fit.x_star[k] = x[k] + b * r / denom;
    fit.y_star[k] = a + b * fit.x_star[k];
    fit.residuals[k] = proj * (b * (x[k] - fit.x_star[k]) - (y[k] - fit.y_star[k]));
  }
  return fit;
}

/// Observation rebuilt from a projection and a scalar error: the inverse of the residual map.
template <class Scalar>
void deming_perturb(Scalar x_star, Scalar y_star, Scalar e, Scalar slope, Scalar delta, Scalar& x, Scalar& y) {
  using std::sqrt;
  const Scalar norm = sqrt(delta * (slope * slope + delta));
  x = x_star + e * slope / norm;
  y = y_star - e * delta / norm;
}

}  // namespace wealthdyn
