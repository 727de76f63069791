#include "wealthdyn/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wealthdyn {

namespace {

struct Eval {
  double value;
  Eigen::Vector3d grad;  // d/d(x0, x_inf, rho)
};

Eval eval_model(const Eigen::Vector3d& p, double tau) {
  const double x0 = p[0], xi = p[1], rho = p[2];
  const double k = xi / x0 - 1.0;
  const double e = std::exp(-rho * tau);
  const double d = 1.0 + k * e;
  const double d2 = d * d;
  Eval out;
  out.value = xi / d;
  out.grad[0] = xi * xi * e / (x0 * x0 * d2);
  out.grad[1] = 1.0 / d - xi * e / (x0 * d2);
  out.grad[2] = xi * k * e * tau / d2;
  return out;
}

double ssr_of(const Eigen::Vector3d& p, const std::vector<double>& tau, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double r = v[i] - eval_model(p, tau[i]).value;
    s += r * r;
  }
  return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

// Rate seed from a linear fit of log|x_inf/L - 1| against time.
double seed_rho(const std::vector<double>& tau, const std::vector<double>& v, double xi) {
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double q = xi / v[i] - 1.0;
    if (!(std::abs(q) > 1e-12)) continue;
    const double y = std::log(std::abs(q));
    s0 += 1;
    s1 += tau[i];
    s2 += tau[i] * tau[i];
    t0 += y;
    t1 += tau[i] * y;
  }
  const double det = s0 * s2 - s1 * s1;
  if (s0 < 2 || det <= 0) return 0.1;
  const double rho = -(s0 * t1 - s1 * t0) / det;
  return std::isfinite(rho) && rho != 0.0 ? rho : 0.1;
}

}  // namespace

double LogisticFit::value(double t) const {
  if (rho == 0.0 && x0 == x_inf) return x0;
  return x_inf / (1.0 + (x_inf / x0 - 1.0) * std::exp(-rho * (t - t0)));
}

double LogisticFit::derivative(double t) const {
  const double k = x_inf / x0 - 1.0;
  const double e = std::exp(-rho * (t - t0));
  const double d = 1.0 + k * e;
  return x_inf * k * rho * e / (d * d);
}

LogisticFit fit_logistic_trend(const std::vector<double>& t, const std::vector<double>& v,
                               const LogisticOptions& opts) {
  if (t.size() != v.size()) throw std::invalid_argument("logistic: time/value size mismatch");
  if (t.size() < 4) throw std::invalid_argument("logistic: need at least 4 points");
  const bool positive = v.front() > 0.0;
  for (double x : v) {
    if (!std::isfinite(x) || x == 0.0 || (x > 0.0) != positive)
      throw std::invalid_argument("logistic: values must be finite, nonzero and of one sign");
  }
  LogisticFit fit;
  fit.t0 = *std::min_element(t.begin(), t.end());
  std::vector<double> tau(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) tau[i] = t[i] - fit.t0;

  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  if (*mx - *mn <= 1e-14 * std::abs(*mx)) {
    fit.x0 = fit.x_inf = v.front();
    fit.rho = 0.0;
    return fit;
  }

  // Seeds: first value, last value (nudged outward so the log-odds stay finite), log-odds rate.
  std::size_t first = 0, last = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (tau[i] < tau[first]) first = i;
    if (tau[i] > tau[last]) last = i;
  }
  Eigen::Vector3d p;
  p[0] = v[first];
  p[1] = v[last] + 0.05 * (v[last] - v[first]);
  p[2] = seed_rho(tau, v, p[1]);

  double cost = ssr_of(p, tau, v);
  double lambda = 1e-3;
  const std::size_t n = tau.size();
  Eigen::MatrixXd jac(n, 3);
  Eigen::VectorXd res(n);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const Eval e = eval_model(p, tau[i]);
      res[i] = v[i] - e.value;
      jac.row(i) = e.grad.transpose();
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d g = jac.transpose() * res;
    if (g.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance) {
      fit.iterations = it;
      break;
    }
    bool improved = false;
    for (int inner = 0; inner < 40; ++inner) {
      Eigen::Matrix3d a = jtj;
      for (int d = 0; d < 3; ++d) a(d, d) += lambda * std::max(jtj(d, d), 1e-300);
      const Eigen::Vector3d step = a.ldlt().solve(g);
      const Eigen::Vector3d cand = p + step;
      const double c = ssr_of(cand, tau, v);
      if (step.allFinite() && c < cost) {
        const bool tiny = step.norm() <= 1e-15 * (p.norm() + 1e-15) || (cost - c) <= 1e-30;
        p = cand;
        cost = c;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (tiny) {
          fit.iterations = it;
          it = opts.max_iterations + 1;
        }
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e16) break;
    }
    if (!improved) {
      // No decrease possible: a stationary point up to rounding.
      fit.iterations = it;
      break;
    }
    if (it == opts.max_iterations)
      throw LogisticFitError("logistic fit did not converge", cost);
  }
  fit.x0 = p[0];
  fit.x_inf = p[1];
  fit.rho = p[2];
  fit.ssr = cost;
  if (!std::isfinite(cost) || !std::isfinite(fit.rho)) throw LogisticFitError("logistic fit diverged", cost);
  return fit;
}

Eigen::VectorXd cdf_time_derivative(const std::vector<std::optional<LogisticFit>>& fits,
                                    const DistributionSnapshot& snapshot) {
  const Eigen::Index n = static_cast<Eigen::Index>(snapshot.grid.n_bins);
  if (static_cast<Eigen::Index>(fits.size()) != n) throw std::invalid_argument("fits do not match grid");
  const Eigen::VectorXd surv = Eigen::VectorXd::Ones(n) - snapshot.cdf_at_centers();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = fits[i] ? -surv[i] * fits[i]->derivative(snapshot.time) : kMissing;
  }
  return out;
}

}  // namespace wealthdyn
