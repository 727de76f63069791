#include "wealthdyn/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "wealthdyn/ito.hpp"
#include "wealthdyn/logistic.hpp"
#include "wealthdyn/sde.hpp"
#include "wealthdyn/smoothing.hpp"

namespace wealthdyn {

void Bandwidths::validate() const {
  for (double b : {income_mean_time, income_variance_wealth, log_density_slope, survival_ratio_time, effects_time,
                   measurement_error_time, diffusion_derivative, delta_scale})
    if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("bandwidths must be positive");
}

namespace {

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

PhasePanel build_lhs(const EstimationInputs& in, const Bandwidths& bw) {
  bw.validate();
  const auto& snaps = in.snapshots;
  const std::size_t T = snaps.size();
  if (T < 4) throw std::invalid_argument("build_lhs needs at least 4 snapshots");
  const WealthGrid& g = snaps.front().grid;
  for (std::size_t t = 0; t < T; ++t) {
    if (!snaps[t].grid.compatible(g)) throw std::invalid_argument("snapshots use different grids");
    if (t > 0 && !(snaps[t].time > snaps[t - 1].time)) throw std::invalid_argument("snapshots must be time-ordered");
  }
  if (in.income.size() != 1 && in.income.size() != T)
    throw std::invalid_argument("income profiles must be one per snapshot or a single profile");
  if (!in.effects.empty() && in.effects.size() != T) throw std::invalid_argument("effects must be one per snapshot");

  const auto nb = static_cast<Eigen::Index>(g.n_bins);
  const Eigen::VectorXd centers = g.centers();
  Eigen::MatrixXd dens(nb, T), surv(nb, T), slope(nb, T), zt(nb, T), psi2(nb, T), dpsi2(nb, T), eff(nb, T);
  std::vector<double> years(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    const DistributionSnapshot& s = snaps[t];
    years[t] = s.time;
    dens.col(c) = s.density_asinh();
    surv.col(c) = Eigen::VectorXd::Ones(nb) - s.cdf_at_centers();
    slope.col(c) = log_density_slope(s, bw.log_density_slope);

    const DriftDiffusionProfile& inc = in.income.size() == 1 ? in.income.front() : in.income[t];
    if (!inc.grid.compatible(g)) throw std::invalid_argument("income profile grid differs");
    Eigen::VectorXd psi2_raw(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
      const auto a = to_asinh_scale(inc.income_drift[i], inc.income_diffusion[i], g.wealth_center(static_cast<std::size_t>(i)));
      zt(i, c) = a.drift;
      psi2_raw[i] = a.var;
    }
    const LocalLinear ll = local_linear(centers, psi2_raw, bw.income_variance_wealth);
    psi2.col(c) = ll.level;
    dpsi2.col(c) = ll.slope;

    if (in.effects.empty()) {
      eff.col(c).setZero();
    } else {
      if (!in.effects[t].grid.compatible(g)) throw std::invalid_argument("effects grid differs");
      const Eigen::VectorXd e = in.effects[t].total();  // at upper edges
      for (Eigen::Index i = 0; i < nb; ++i) eff(i, c) = 0.5 * (e[i] + (i > 0 ? e[i - 1] : 0.0));
    }
  }

  const Eigen::VectorXd yrs = as_vector(years);
  PhasePanel panel;
  panel.grid = g;
  panel.series.resize(g.n_bins);
  for (Eigen::Index i = 0; i < nb; ++i) {
    PhaseSeries& ser = panel.series[static_cast<std::size_t>(i)];
    ser.bin = static_cast<std::size_t>(i);

    Eigen::VectorXd ratio(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto c = static_cast<Eigen::Index>(t);
      ratio[c] = dens(i, c) > 1e-12 ? surv(i, c) / dens(i, c) : kMissing;
    }
    // Trend of log(1 - F), fitted separately on each side of the break.
    std::array<std::optional<LogisticFit>, 2> trend;
    bool failed = false;
    for (int r = 0; r < 2; ++r) {
      std::vector<double> fit_t, fit_v;
      bool present = false;
      for (std::size_t t = 0; t < T; ++t) {
        if ((years[t] < in.break_year ? 0 : 1) != r) continue;
        present = true;
        const double s = surv(i, static_cast<Eigen::Index>(t));
        if (s > 0.0 && s < 1.0) {
          fit_t.push_back(years[t]);
          fit_v.push_back(std::log(s));
        }
      }
      if (!present) continue;
      try {
        trend[static_cast<std::size_t>(r)] = fit_logistic_trend(fit_t, fit_v);
      } catch (const std::exception&) {
        failed = true;
      }
    }
    if (failed) {
      ++panel.dropped_bins;
      panel.dropped_records += T;
      continue;
    }
    const Eigen::VectorXd ratio_s = window_mean(yrs, ratio, bw.survival_ratio_time);
    const Eigen::VectorXd z_s = window_mean(yrs, zt.row(i).transpose(), bw.income_mean_time);
    const Eigen::VectorXd e_s = window_mean(yrs, eff.row(i).transpose(), bw.effects_time);

    for (std::size_t t = 0; t < T; ++t) {
      const auto c = static_cast<Eigen::Index>(t);
      const double x = slope(i, c);
      const double f = dens(i, c);
      const Regime reg = years[t] < in.break_year ? Regime::Pre : Regime::Post;
      const auto& tr = trend[static_cast<std::size_t>(reg)];
      const double y = ratio_s[c] * tr->derivative(years[t]) + e_s[c] / f - z_s[c] + 0.5 * dpsi2(i, c) +
                       0.5 * psi2(i, c) * x;
      if (!(f > 1e-12) || !std::isfinite(x) || !std::isfinite(y)) {
        ++panel.dropped_records;
        continue;
      }
      ser.records.push_back({years[t], x, y, reg});
    }
  }
  return panel;
}

DeltaEstimate estimate_delta(const PhaseSeries& series, const Bandwidths& bw) {
  const std::size_t n = series.records.size();
  if (n < 6) throw std::invalid_argument("estimate_delta needs at least 6 years");
  Eigen::VectorXd t(n), x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    t[i] = series.records[k].year;
    x[i] = series.records[k].x;
    y[i] = series.records[k].y;
  }
  const double half = 0.5 * bw.measurement_error_time;
  const Eigen::VectorXd rx = x - window_mean(t, x, bw.measurement_error_time);
  const Eigen::VectorXd ry = y - window_mean(t, y, bw.measurement_error_time);
  // Only points with a complete window, so a smooth trend leaves no residual at the ends.
  std::vector<Eigen::Index> inner;
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (t[i] - half >= t[0] - 1e-9 && t[i] + half <= t[t.size() - 1] + 1e-9) inner.push_back(i);
  if (inner.size() < 2)
    for (Eigen::Index i = 0; i < t.size(); ++i) inner.push_back(i);
  auto var = [&](const Eigen::VectorXd& r) {
    double m = 0.0, v = 0.0;
    for (auto i : inner) m += r[i];
    m /= static_cast<double>(inner.size());
    for (auto i : inner) v += (r[i] - m) * (r[i] - m);
    return v / static_cast<double>(inner.size() - 1);
  };
  const double vx = var(rx), vy = var(ry);
  constexpr double lo = 1e-6, hi = 1e6;
  double d = 0.0;
  if (!(vx > 0.0)) {
    d = hi;
  } else {
    d = vy / vx * bw.delta_scale;
  }
  DeltaEstimate out;
  out.delta = std::clamp(d, lo, hi);
  out.clamped = !(d > lo && d < hi);
  return out;
}

std::vector<BinFit> fit_bins(const PhasePanel& panel, const Bandwidths& bw, std::vector<std::string>* skipped) {
  std::vector<BinFit> fits;
  auto skip = [&](std::size_t bin, const std::string& why) {
    if (skipped) skipped->push_back("bin " + std::to_string(bin) + ": " + why);
  };
  for (const PhaseSeries& ser : panel.series) {
    if (ser.records.size() < 6) {
      if (!ser.records.empty()) skip(ser.bin, "fewer than 6 years");
      continue;
    }
    // A regime with a single year cannot carry its own intercept.
    std::array<int, 2> count{0, 0};
    for (const auto& r : ser.records) ++count[static_cast<std::size_t>(r.period)];
    PhaseSeries use{ser.bin, {}};
    for (const auto& r : ser.records)
      if (count[static_cast<std::size_t>(r.period)] >= 2) use.records.push_back(r);
    if (use.records.size() < 6) {
      skip(ser.bin, "fewer than 6 years");
      continue;
    }
    const DeltaEstimate de = estimate_delta(use, bw);
    const auto n = static_cast<Eigen::Index>(use.records.size());
    Eigen::VectorXd x(n), y(n);
    std::vector<int> groups(use.records.size());
    BinFit bf;
    bf.bin = ser.bin;
    bf.delta_clamped = de.clamped;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& r = use.records[static_cast<std::size_t>(k)];
      x[k] = r.x;
      y[k] = r.y;
      groups[static_cast<std::size_t>(k)] = static_cast<int>(r.period);
      bf.years.push_back(r.year);
    }
    try {
      bf.fit = deming_fit<double>(x, y, de.delta, groups);
    } catch (const DemingError& e) {
      skip(ser.bin, e.what());
      continue;
    }
    fits.push_back(std::move(bf));
  }
  return fits;
}

ConsumptionProfile recover_consumption(const std::vector<BinFit>& fits, const WealthGrid& g, const Bandwidths& bw) {
  bw.validate();
  const auto nb = static_cast<Eigen::Index>(g.n_bins);
  ConsumptionProfile p;
  p.grid = g;
  p.gamma2_asinh = Eigen::VectorXd::Constant(nb, kMissing);
  p.floored.assign(g.n_bins, false);
  std::array<Eigen::VectorXd, 2> a{Eigen::VectorXd::Constant(nb, kMissing), Eigen::VectorXd::Constant(nb, kMissing)};
  for (const BinFit& bf : fits) {
    if (bf.bin >= g.n_bins) throw std::invalid_argument("fit bin outside grid");
    const auto i = static_cast<Eigen::Index>(bf.bin);
    const double g2 = -2.0 * bf.fit.slope;
    p.floored[bf.bin] = g2 < 0.0;
    p.gamma2_asinh[i] = std::max(g2, 0.0);
    for (int r = 0; r < 2; ++r)
      if (r < bf.fit.intercepts.size()) a[static_cast<std::size_t>(r)][i] = bf.fit.intercepts[r];
  }
  p.dgamma2_asinh = local_linear(g.centers(), p.gamma2_asinh, bw.diffusion_derivative).slope;
  for (Eigen::Index i = 0; i < nb; ++i)
    if (is_missing(p.gamma2_asinh[i])) p.dgamma2_asinh[i] = kMissing;

  p.gamma2 = Eigen::VectorXd::Constant(nb, kMissing);
  for (std::size_t r = 0; r < 2; ++r) {
    p.c_asinh[r] = Eigen::VectorXd::Constant(nb, kMissing);
    p.c[r] = Eigen::VectorXd::Constant(nb, kMissing);
  }
  for (Eigen::Index i = 0; i < nb; ++i) {
    if (is_missing(p.gamma2_asinh[i])) continue;
    const double w = g.wealth_center(static_cast<std::size_t>(i));
    p.gamma2[i] = from_asinh_scale(0.0, p.gamma2_asinh[i], w).var;
    if (is_missing(p.dgamma2_asinh[i])) continue;
    for (std::size_t r = 0; r < 2; ++r) {
      if (is_missing(a[r][i])) continue;
      // intercept = -(c~ + d gamma~^2 / 2)
      p.c_asinh[r][i] = -a[r][i] - 0.5 * p.dgamma2_asinh[i];
      p.c[r][i] = from_asinh_scale(p.c_asinh[r][i], p.gamma2_asinh[i], w).drift;
    }
  }
  const Eigen::VectorXd nan = Eigen::VectorXd::Constant(nb, kMissing);
  p.gamma2_se = p.gamma2_lo = p.gamma2_hi = nan;
  for (std::size_t r = 0; r < 2; ++r) p.c_se[r] = p.c_lo[r] = p.c_hi[r] = nan;
  return p;
}

BootstrapModel fit_bootstrap_model(const std::vector<BinFit>& fits, int n_draws) {
  if (n_draws < 1) throw std::invalid_argument("n_draws must be positive");
  BootstrapModel m;
  m.n_draws = n_draws;
  std::vector<double> all;
  for (const auto& f : fits) all.insert(all.end(), f.years.begin(), f.years.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<const BinFit*> use;
  for (const auto& f : fits)
    if (f.years == all) use.push_back(&f);
  if (use.empty()) throw std::invalid_argument("no bin has a complete year set");
  const auto n = static_cast<Eigen::Index>(use.size());
  const auto T = static_cast<Eigen::Index>(all.size());
  m.n_years = all.size();
  Eigen::MatrixXd e(n, T);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.bins.push_back(use[static_cast<std::size_t>(i)]->bin);
    e.row(i) = use[static_cast<std::size_t>(i)]->fit.residuals.transpose();
  }
  constexpr double kMaxCorr = 0.99;
  m.rho.resize(n);
  m.sigma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ms = e.row(i).squaredNorm() / static_cast<double>(T);
    m.sigma[i] = std::sqrt(ms);
    double lag = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) lag += e(i, t) * e(i, t - 1);
    lag /= static_cast<double>(std::max<Eigen::Index>(T - 1, 1));
    m.rho[i] = ms > 0.0 ? std::clamp(lag / ms, -kMaxCorr, kMaxCorr) : 0.0;
  }
  if (n >= 2) {
    double acc = 0.0;
    int used = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double ms = e.col(t).squaredNorm() / static_cast<double>(n);
      if (!(ms > 0.0)) continue;
      double lag = 0.0;
      for (Eigen::Index i = 1; i < n; ++i) lag += e(i, t) * e(i - 1, t);
      acc += lag / static_cast<double>(n - 1) / ms;
      ++used;
    }
    m.r = used > 0 ? std::clamp(acc / used, -kMaxCorr, kMaxCorr) : 0.0;
  }
  return m;
}

namespace {

Eigen::MatrixXd ar1_toeplitz(double rho, Eigen::Index n) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol) throw std::runtime_error("covariance not positive semidefinite");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double quantile(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Eigen::MatrixXd bootstrap_covariance(const BootstrapModel& m) {
  const auto n = static_cast<Eigen::Index>(m.bins.size());
  const auto T = static_cast<Eigen::Index>(m.n_years);
  const Eigen::MatrixXd omega_t = ar1_toeplitz(m.r, n);
  Eigen::MatrixXd w_half = Eigen::MatrixXd::Zero(n * T, n * T);
  for (Eigen::Index i = 0; i < n; ++i) w_half.block(i * T, i * T, T, T) = psd_sqrt(ar1_toeplitz(m.rho[i], T));
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(n * T, n * T);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      kron.block(i * T, j * T, T, T) = omega_t(i, j) * Eigen::MatrixXd::Identity(T, T);
  const Eigen::MatrixXd omega = w_half * kron * w_half;
  Eigen::VectorXd a(n * T);
  for (Eigen::Index i = 0; i < n; ++i) a.segment(i * T, T).setConstant(m.sigma[i]);
  return a.asDiagonal() * omega * a.asDiagonal();
}

Eigen::MatrixXd draw_bootstrap_errors(const BootstrapModel& m, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(m.bins.size());
  const auto T = static_cast<Eigen::Index>(m.n_years);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(n, T);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < T; ++t) z(i, t) = normal(rng);
  const Eigen::LLT<Eigen::MatrixXd> llt(ar1_toeplitz(m.r, n));
  Eigen::MatrixXd e = llt.matrixL() * z;
  for (Eigen::Index i = 0; i < n; ++i)
    e.row(i) = (psd_sqrt(ar1_toeplitz(m.rho[i], T)) * e.row(i).transpose()).transpose() * m.sigma[i];
  return e;
}

BootstrapResult bootstrap(const std::vector<BinFit>& fits, const WealthGrid& g, const BootstrapModel& m,
                          std::uint64_t seed, const Bandwidths& bw) {
  BootstrapResult out;
  out.profile = recover_consumption(fits, g, bw);
  const auto n = static_cast<Eigen::Index>(m.bins.size());
  const auto T = static_cast<Eigen::Index>(m.n_years);
  std::map<std::size_t, std::size_t> pos;  // bin -> index in fits
  for (std::size_t k = 0; k < fits.size(); ++k) pos[fits[k].bin] = k;
  for (auto b : m.bins)
    if (!pos.count(b)) throw std::invalid_argument("bootstrap model bin has no fit");

  // Square roots are shared across draws.
  const Eigen::LLT<Eigen::MatrixXd> llt(ar1_toeplitz(m.r, n));
  if (llt.info() != Eigen::Success) throw std::runtime_error("bin correlation matrix not positive definite");
  const Eigen::MatrixXd lt = llt.matrixL();
  std::vector<Eigen::MatrixXd> wroot;
  for (Eigen::Index i = 0; i < n; ++i) wroot.push_back(psd_sqrt(ar1_toeplitz(m.rho[i], T)));

  const auto nb = static_cast<std::size_t>(g.n_bins);
  std::vector<std::vector<double>> g2(nb);
  std::array<std::vector<std::vector<double>>, 2> cc{std::vector<std::vector<double>>(nb),
                                                     std::vector<std::vector<double>>(nb)};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int d = 0; d < m.n_draws; ++d) {
    std::mt19937_64 rng = make_rng(seed, static_cast<std::uint64_t>(d));
    Eigen::MatrixXd z(n, T);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index t = 0; t < T; ++t) z(i, t) = normal(rng);
    const Eigen::MatrixXd e0 = lt * z;
    std::vector<BinFit> draw = fits;
    Eigen::VectorXd sl = Eigen::VectorXd::Constant(n, kMissing);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd e = wroot[static_cast<std::size_t>(i)] * e0.row(i).transpose() * m.sigma[i];
      BinFit& bf = draw[pos[m.bins[static_cast<std::size_t>(i)]]];
      const DemingFit<double>& f = bf.fit;
      Eigen::VectorXd x(T), y(T);
      for (Eigen::Index t = 0; t < T; ++t) deming_perturb(f.x_star[t], f.y_star[t], e[t], f.slope, f.delta, x[t], y[t]);
      try {
        bf.fit = deming_fit<double>(x, y, f.delta, f.groups);
        sl[i] = bf.fit.slope;
      } catch (const DemingError&) {
        bf.fit.slope = kMissing;
        bf.fit.intercepts.setConstant(kMissing);
      }
    }
    out.slopes.push_back(sl);
    const ConsumptionProfile p = recover_consumption(draw, g, bw);
    for (auto b : m.bins) {
      const auto i = static_cast<Eigen::Index>(b);
      if (std::isfinite(p.gamma2[i])) g2[b].push_back(p.gamma2[i]);
      for (std::size_t r = 0; r < 2; ++r)
        if (std::isfinite(p.c[r][i])) cc[r][b].push_back(p.c[r][i]);
    }
  }

  auto summarize = [](std::vector<double>& v, double& se, double& lo, double& hi) {
    if (v.size() < 10) return;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1));
    lo = quantile(v, 0.025);
    hi = quantile(v, 0.975);
  };
  ConsumptionProfile& p = out.profile;
  for (auto b : m.bins) {
    const auto i = static_cast<Eigen::Index>(b);
    summarize(g2[b], p.gamma2_se[i], p.gamma2_lo[i], p.gamma2_hi[i]);
    for (std::size_t r = 0; r < 2; ++r) summarize(cc[r][b], p.c_se[r][i], p.c_lo[r][i], p.c_hi[r][i]);
  }
  return out;
}

EstimationResult estimate(const EstimationInputs& inputs, const Bandwidths& bw, int n_draws, std::uint64_t seed) {
  EstimationResult res;
  res.panel = build_lhs(inputs, bw);
  res.fits = fit_bins(res.panel, bw, &res.skipped);
  if (res.fits.empty()) throw std::runtime_error("no bin could be fitted");
  if (n_draws > 0) {
    res.model = fit_bootstrap_model(res.fits, n_draws);
    res.profile = bootstrap(res.fits, res.panel.grid, res.model, seed, bw).profile;
  } else {
    res.profile = recover_consumption(res.fits, res.panel.grid, bw);
  }
  return res;
}

}  // namespace wealthdyn
