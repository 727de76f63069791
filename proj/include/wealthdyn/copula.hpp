#pragma once

#include <random>
#include <vector>

namespace wealthdyn {

enum class CopulaFamily { Joe, Frank };

/// Frank theta of exactly zero denotes the independence copula.
inline constexpr double kIndependenceTheta = 0.0;

double copula_cdf(CopulaFamily family, double theta, double u, double v);

/// h(v | u) = dC(u, v)/du.
double copula_conditional(CopulaFamily family, double theta, double u, double v);

/// v solving h(v | u) = p (conditional inversion).
double copula_conditional_inverse(CopulaFamily family, double theta, double u, double p);

template <class Rng>
double copula_sample(CopulaFamily family, double theta, double u, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return copula_conditional_inverse(family, theta, u, unif(rng));
}

/// Kendall's tau implied by theta (Joe: generator integral; Frank: Debye relation).
double kendall_tau(CopulaFamily family, double theta);

double calibrate_copula_theta(CopulaFamily family, double kendall_tau_target);

/// First Debye function D1(x) = (1/x) int_0^x t/(e^t - 1) dt.
double debye1(double x);

/// Sample Kendall's tau in O(n log n) (Knight's algorithm); assumes no ties.
double empirical_kendall_tau(const std::vector<double>& u, const std::vector<double>& v);

void validate_copula_theta(CopulaFamily family, double theta);

}  // namespace wealthdyn
