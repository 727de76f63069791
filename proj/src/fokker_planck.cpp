#include "wealthdyn/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wealthdyn {

namespace {

// Bernoulli function B(z) = z / (e^z - 1).
double bernoulli(double z) {
  if (std::abs(z) < 1e-10) return 1.0 - 0.5 * z;
  if (z > 700.0) return 0.0;
  return z / std::expm1(z);
}

constexpr double kTinyVar = 1e-300;

// Interface flux J_{i+1/2} = alpha_i m_i - beta_i m_{i+1} (bin masses m).
struct InterfaceCoeffs {
  Eigen::VectorXd alpha, beta;
  Eigen::VectorXd log_ratio;  // log(alpha/beta), the discrete stationary log-mass increment
};

InterfaceCoeffs interface_coeffs(const WealthGrid& g, const Eigen::VectorXd& mu, const Eigen::VectorXd& s2) {
  const Eigen::Index n = static_cast<Eigen::Index>(g.n_bins);
  const double h = g.bin_width;
  InterfaceCoeffs c{Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0)),
                    Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0)),
                    Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0))};
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double d = 0.25 * (s2[i] + s2[i + 1]);  // 1/2 of the interface variance
    if (s2[i] > kTinyVar && s2[i + 1] > kTinyVar) {
      // Scharfetter-Gummel / Chang-Cooper fitting with the -d(log sigma^2) drift correction.
      const double p = h * (mu[i] / s2[i] + mu[i + 1] / s2[i + 1]) - std::log(s2[i + 1] / s2[i]);
      c.alpha[i] = d / (h * h) * bernoulli(-p);
      c.beta[i] = d / (h * h) * bernoulli(p);
      c.log_ratio[i] = p;
    } else {
      const double v = 0.5 * (mu[i] + mu[i + 1]) - 0.5 * (s2[i + 1] - s2[i]) / h;
      c.alpha[i] = std::max(v, 0.0) / h + d / (h * h);
      c.beta[i] = std::max(-v, 0.0) / h + d / (h * h);
      c.log_ratio[i] = c.beta[i] > 0.0 ? std::log(c.alpha[i] / c.beta[i]) : std::numeric_limits<double>::infinity();
    }
  }
  return c;
}

ScaleParams asinh_coeffs(const DriftDiffusionProfile& profile) { return scale_params(profile); }

}  // namespace

DistributionSnapshot SteadyState::snapshot(double time) const {
  return DistributionSnapshot(time, grid, density * grid.bin_width);
}

FpOperator FpOperator::build_asinh(const WealthGrid& g, const Eigen::VectorXd& mu, const Eigen::VectorXd& s2) {
  const Eigen::Index n = static_cast<Eigen::Index>(g.n_bins);
  if (mu.size() != n || s2.size() != n) throw std::invalid_argument("coefficients do not match grid");
  if (!mu.allFinite() || !s2.allFinite()) throw std::invalid_argument("non-finite coefficients");
  const InterfaceCoeffs c = interface_coeffs(g, mu, s2);
  FpOperator op{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    // dm_i/dt gains J_{i-1/2} and loses J_{i+1/2}.
    op.diag[i] -= c.alpha[i];
    op.super[i] += c.beta[i];
    op.sub[i + 1] += c.alpha[i];
    op.diag[i + 1] -= c.beta[i];
  }
  return op;
}

FpOperator FpOperator::build(const DriftDiffusionProfile& profile) {
  const ScaleParams sp = asinh_coeffs(profile);
  return build_asinh(profile.grid, sp.drift_asinh, sp.diffusion_asinh);
}

Eigen::VectorXd FpOperator::apply(const Eigen::VectorXd& m) const {
  const Eigen::Index n = m.size();
  Eigen::VectorXd out = diag.cwiseProduct(m);
  for (Eigen::Index i = 1; i < n; ++i) out[i] += sub[i] * m[i - 1];
  for (Eigen::Index i = 0; i + 1 < n; ++i) out[i] += super[i] * m[i + 1];
  return out;
}

DistributionSnapshot evolve_density(const DistributionSnapshot& f0, const DriftDiffusionProfile& profile,
                                    const EventEffects* sources, double dt, std::size_t n_steps, FpScheme scheme) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!f0.grid.compatible(profile.grid)) throw std::invalid_argument("snapshot and profile grids differ");
  const FpOperator op = FpOperator::build(profile);
  const Eigen::Index n = f0.mass.size();
  Eigen::VectorXd src = Eigen::VectorXd::Zero(n);
  if (sources) {
    if (!sources->grid.compatible(f0.grid)) throw std::invalid_argument("source grid differs");
    const Eigen::VectorXd e = sources->total();
    for (Eigen::Index i = 0; i < n; ++i) src[i] = e[i] - (i > 0 ? e[i - 1] : 0.0);
  }
  Eigen::VectorXd m = f0.mass;

  if (scheme == FpScheme::Explicit) {
    const double rate = op.diag.cwiseAbs().maxCoeff();
    if (rate * dt > 1.0) {
      const double suggested = 0.9 / rate;
      throw StabilityError("explicit step violates stability bound; suggested dt <= " + std::to_string(suggested),
                           suggested);
    }
    for (std::size_t s = 0; s < n_steps; ++s) {
      m += dt * (op.apply(m) + src);
      if (sources) m = m.cwiseMax(0.0);
    }
  } else {
    // (I - dt L) m' = m + dt src, Thomas algorithm.
    Eigen::VectorXd a = -dt * op.sub, b = Eigen::VectorXd::Ones(n) - dt * op.diag, c = -dt * op.super;
    Eigen::VectorXd cp(n), inv(n);
    cp[0] = c[0] / b[0];
    inv[0] = 1.0 / b[0];
    for (Eigen::Index i = 1; i < n; ++i) {
      const double denom = b[i] - a[i] * cp[i - 1];
      inv[i] = 1.0 / denom;
      cp[i] = c[i] * inv[i];
    }
    Eigen::VectorXd d(n);
    for (std::size_t s = 0; s < n_steps; ++s) {
      d = m + dt * src;
      d[0] = d[0] * inv[0];
      for (Eigen::Index i = 1; i < n; ++i) d[i] = (d[i] - a[i] * d[i - 1]) * inv[i];
      for (Eigen::Index i = n - 2; i >= 0; --i) d[i] -= cp[i] * d[i + 1];
      m = sources ? d.cwiseMax(0.0) : d.cwiseMax(0.0);
    }
  }
  return DistributionSnapshot(f0.time + dt * static_cast<double>(n_steps), f0.grid, m);
}

SteadyState steady_state(const DriftDiffusionProfile& profile) {
  const ScaleParams sp = asinh_coeffs(profile);
  const WealthGrid& g = profile.grid;
  const Eigen::Index n = static_cast<Eigen::Index>(g.n_bins);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(sp.diffusion_asinh[i] > kTinyVar)) throw std::invalid_argument("degenerate diffusion");
  const InterfaceCoeffs c = interface_coeffs(g, sp.drift_asinh, sp.diffusion_asinh);
  Eigen::VectorXd logm(n);
  logm[0] = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) logm[i + 1] = logm[i] + c.log_ratio[i];
  const double mx = logm.maxCoeff();
  Eigen::VectorXd mass = (logm.array() - mx).exp().matrix();
  const double total = mass.sum();
  SteadyState ss;
  ss.grid = g;
  ss.density = mass / (total * g.bin_width);
  ss.log_density = logm.array() - mx - std::log(total * g.bin_width);
  const double start = g.upper_asinh() - 0.25 * (g.upper_asinh() - g.lower_asinh);
  try {
    ss.pareto_alpha_tail = tail_alpha(ss, start);
  } catch (const std::exception&) {
    ss.pareto_alpha_tail.reset();
  }
  return ss;
}

namespace {

double tail_slope(const WealthGrid& g, const Eigen::VectorXd& density, double tail_start) {
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  for (std::size_t i = 0; i < g.n_bins; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (g.center(i) < tail_start || !(density[k] > 1e-300)) continue;
    const double x = g.center(i), y = std::log(density[k]);
    s0 += 1;
    s1 += x;
    s2 += x * x;
    t0 += y;
    t1 += x * y;
  }
  if (s0 < 5) throw std::invalid_argument("starved tail: fewer than 5 positive bins");
  return (s0 * t1 - s1 * t0) / (s0 * s2 - s1 * s1);
}

}  // namespace

double tail_alpha(const DistributionSnapshot& state, double tail_start) {
  return -tail_slope(state.grid, state.density_asinh(), tail_start);
}

double tail_alpha(const SteadyState& state, double tail_start) {
  return -tail_slope(state.grid, state.density, tail_start);
}

double stationarity_residual(const DistributionSnapshot& state, const DriftDiffusionProfile& profile) {
  if (!state.grid.compatible(profile.grid)) throw std::invalid_argument("grids differ");
  const ScaleParams sp = asinh_coeffs(profile);
  const WealthGrid& g = state.grid;
  const InterfaceCoeffs c = interface_coeffs(g, sp.drift_asinh, sp.diffusion_asinh);
  const Eigen::VectorXd& m = state.mass;
  double sup = 0.0;
  for (Eigen::Index i = 0; i + 1 < m.size(); ++i) {
    if (!(m[i] > 0.0 && m[i + 1] > 0.0)) continue;
    const double flux = c.alpha[i] * m[i] - c.beta[i] * m[i + 1];
    const double f_face = std::sqrt(m[i] * m[i + 1]);
    sup = std::max(sup, std::abs(flux) / f_face * g.bin_width);
  }
  double scale = sp.drift_asinh.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) scale = 0.5 * sp.diffusion_asinh.maxCoeff() / (g.upper_asinh() - g.lower_asinh);
  return scale > 0.0 ? sup / scale : sup;
}

double stationarity_residual(const Eigen::VectorXd& pts, const std::function<double(double)>& mu,
                             const std::function<double(double)>& sigma2, const std::function<double(double)>& dsigma2,
                             const std::function<double(double)>& dlogf) {
  double sup = 0.0, scale = 0.0;
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    const double w = pts[i];
    sup = std::max(sup, std::abs(mu(w) - 0.5 * dsigma2(w) - 0.5 * sigma2(w) * dlogf(w)));
    scale = std::max(scale, std::abs(mu(w)));
  }
  return scale > 0.0 ? sup / scale : sup;
}

}  // namespace wealthdyn
