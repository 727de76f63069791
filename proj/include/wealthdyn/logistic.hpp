#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

#include "wealthdyn/grid.hpp"

namespace wealthdyn {

/// L(t) = x_inf / (1 + (x_inf/x0 - 1) exp(-rho (t - t0))).
struct LogisticFit {
  double x0 = 0.0;
  double x_inf = 0.0;
  double rho = 0.0;
  double t0 = 0.0;
  double ssr = 0.0;
  int iterations = 0;

  double value(double t) const;
  double derivative(double t) const;
};

struct LogisticOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
};

class LogisticFitError : public std::runtime_error {
 public:
  LogisticFitError(const std::string& what, double best_ssr)
      : std::runtime_error(what), best_ssr_(best_ssr) {}
  double best_ssr() const { return best_ssr_; }

 private:
  double best_ssr_;
};

/// Levenberg-Marquardt fit; t0 is the first time. Needs at least four points of one sign.
LogisticFit fit_logistic_trend(const std::vector<double>& t, const std::vector<double>& v,
                               const LogisticOptions& opts = {});

/// dF/dt per bin from fits of log(1-F) over time: dF/dt = -(1-F) d/dt log(1-F).
/// Missing fits give missing entries.
Eigen::VectorXd cdf_time_derivative(const std::vector<std::optional<LogisticFit>>& fits,
                                    const DistributionSnapshot& snapshot);

}  // namespace wealthdyn
