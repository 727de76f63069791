#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace wealthdyn {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n)) {
    if (n < 1) throw std::invalid_argument("Gauss-Legendre order must be positive");
    const double pi = std::acos(-1.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p1 = x, p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[static_cast<std::size_t>(i)] = -x;
      nodes[static_cast<std::size_t>(n - 1 - i)] = x;
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      weights[static_cast<std::size_t>(i)] = w;
      weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    if (n == 1) {
      nodes[0] = 0.0;
      weights[0] = 2.0;
    }
  }

  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(m + h * nodes[i]);
    return s * h;
  }

  /// Composite rule over `panels` equal sub-intervals.
  template <class F>
  double integrate(F&& f, double a, double b, int panels) const {
    double s = 0.0;
    const double w = (b - a) / panels;
    for (int k = 0; k < panels; ++k) s += integrate(f, a + k * w, a + (k + 1) * w);
    return s;
  }
};

}  // namespace wealthdyn
