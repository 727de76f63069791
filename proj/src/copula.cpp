#include "wealthdyn/copula.hpp"

#include "wealthdyn/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wealthdyn {

namespace {

const GaussLegendre& gl16() {
  static const GaussLegendre rule(16);
  return rule;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double joe_conditional(double theta, double u, double v) {
  const double ub = 1.0 - u, vb = 1.0 - v;
  if (ub <= 0.0) return vb <= 0.0 ? 1.0 : (theta > 1.0 ? 0.0 : 1.0 - vb);
  const double a = std::pow(ub, theta), b = std::pow(vb, theta);
  const double s = a + b - a * b;
  if (s <= 0.0) return 0.0;
  return std::pow(ub, theta - 1.0) * (1.0 - b) * std::pow(s, 1.0 / theta - 1.0);
}

// Integrand of the Joe tau integral after s = 1 - t: (1 - s^th) log(1 - s^th) / (th s^{th-1}).
double joe_tau_integrand(double theta, double s) {
  if (s <= 0.0) return 0.0;
  const double st = std::pow(s, theta);
  if (st >= 1.0) return 0.0;
  const double one_minus = -std::expm1(theta * std::log(s));
  return one_minus * std::log1p(-st) / (theta * std::pow(s, theta - 1.0));
}

}  // namespace

void validate_copula_theta(CopulaFamily family, double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("copula theta must be finite");
  if (family == CopulaFamily::Joe && theta < 1.0) throw std::invalid_argument("Joe copula requires theta >= 1");
}

double copula_cdf(CopulaFamily family, double theta, double u, double v) {
  validate_copula_theta(family, theta);
  u = clamp01(u);
  v = clamp01(v);
  if (family == CopulaFamily::Joe) {
    const double a = std::pow(1.0 - u, theta), b = std::pow(1.0 - v, theta);
    return 1.0 - std::pow(a + b - a * b, 1.0 / theta);
  }
  if (theta == 0.0) return u * v;
  const double num = std::expm1(-theta * u) * std::expm1(-theta * v);
  return -std::log1p(num / std::expm1(-theta)) / theta;
}

double copula_conditional(CopulaFamily family, double theta, double u, double v) {
  validate_copula_theta(family, theta);
  u = clamp01(u);
  v = clamp01(v);
  if (family == CopulaFamily::Joe) return joe_conditional(theta, u, v);
  if (theta == 0.0) return v;
  const double a = std::exp(-theta * u);
  const double bm1 = std::expm1(-theta * v);
  const double d = std::expm1(-theta);
  return a * bm1 / (d + (a - 1.0) * bm1);
}

double copula_conditional_inverse(CopulaFamily family, double theta, double u, double p) {
  validate_copula_theta(family, theta);
  u = clamp01(u);
  p = clamp01(p);
  if (family == CopulaFamily::Frank) {
    if (std::abs(theta) < 1e-12) return p;
    const double a = std::exp(-theta * u);
    const double d = std::expm1(-theta);
    // b - 1 = p d / (p + a (1 - p)), v = -log(b) / theta
    return clamp01(-std::log1p(p * d / (p + a * (1.0 - p))) / theta);
  }
  if (theta == 1.0) return p;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (joe_conditional(theta, u, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double debye1(double x) {
  if (x == 0.0) return 1.0;
  auto f = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  const int panels = std::max(4, static_cast<int>(std::ceil(std::abs(x))));
  return gl16().integrate(f, 0.0, x, panels) / x;
}

double kendall_tau(CopulaFamily family, double theta) {
  validate_copula_theta(family, theta);
  if (family == CopulaFamily::Frank) {
    if (std::abs(theta) < 1e-5) return theta / 9.0;
    return 1.0 - 4.0 / theta * (1.0 - debye1(theta));
  }
  if (theta == 1.0) return 0.0;
  // Panels graded toward s = 1 where the integrand has a logarithmic derivative singularity.
  auto f = [theta](double s) { return joe_tau_integrand(theta, s); };
  double integral = gl16().integrate(f, 0.0, 0.5, 8);
  double a = 0.5;
  for (int k = 0; k < 40; ++k) {
    const double b = 1.0 - 0.5 * (1.0 - a);
    integral += gl16().integrate(f, a, b, 2);
    a = b;
  }
  return 1.0 + 4.0 * integral;
}

double calibrate_copula_theta(CopulaFamily family, double target) {
  if (!std::isfinite(target)) throw std::invalid_argument("Kendall tau target must be finite");
  double lo, hi;
  if (family == CopulaFamily::Frank) {
    if (!(target > -1.0 && target < 1.0)) throw std::invalid_argument("infeasible Kendall tau for Frank copula");
    if (target == 0.0) return kIndependenceTheta;
    lo = -500.0;
    hi = 500.0;
  } else {
    if (!(target >= 0.0 && target < 1.0)) throw std::invalid_argument("infeasible Kendall tau for Joe copula");
    if (target == 0.0) return 1.0;
    lo = 1.0;
    hi = 1e3;
  }
  if ((kendall_tau(family, lo) - target) * (kendall_tau(family, hi) - target) > 0.0)
    throw std::invalid_argument("infeasible Kendall tau for copula family");
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kendall_tau(family, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double empirical_kendall_tau(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size() || u.size() < 2) throw std::invalid_argument("kendall tau: need paired samples");
  const std::size_t n = u.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });
  std::vector<double> seq(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) seq[i] = v[order[i]];
  // Bottom-up merge sort counting inversions (discordant pairs).
  unsigned long long inversions = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (seq[j] < seq[i]) {
          inversions += mid - i;
          buf[k++] = seq[j++];
        } else {
          buf[k++] = seq[i++];
        }
      }
      while (i < mid) buf[k++] = seq[i++];
      while (j < hi) buf[k++] = seq[j++];
    }
    seq.swap(buf);
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return 1.0 - 2.0 * static_cast<double>(inversions) / pairs;
}

}  // namespace wealthdyn
