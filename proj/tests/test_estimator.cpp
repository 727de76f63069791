#include <doctest.h>

#include "approx.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wealthdyn/deming.hpp"
#include "wealthdyn/estimator.hpp"
#include "wealthdyn/sde.hpp"

using namespace wealthdyn;
using Eigen::VectorXd;

namespace {

struct Cloud {
  VectorXd x, y;
};

Cloud noisy_line(std::size_t n, double a, double b, double sx, double sy, std::mt19937_64& rng) {
  std::normal_distribution<double> nrm(0.0, 1.0);
  Cloud c{VectorXd(n), VectorXd(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const double xt = -2.0 + 4.0 * static_cast<double>(k) / static_cast<double>(n - 1);
    c.x[k] = xt + sx * nrm(rng);
    c.y[k] = a + b * xt + sy * nrm(rng);
  }
  return c;
}

double objective(const Cloud& c, double a, double b, const VectorXd& xs, double delta) {
  return (c.y.array() - a - b * xs.array()).square().sum() + delta * (c.x - xs).squaredNorm();
}

// Block coordinate descent over (a, b) and the latent x*: each block has an exact minimizer.
double brute_force_slope(const Cloud& c, double delta, double& a_out) {
  VectorXd xs = c.x;
  double a = 0.0, b = 0.0;
  for (int it = 0; it < 200000; ++it) {
    const double mx = xs.mean(), my = c.y.mean();
    const double sxx = (xs.array() - mx).square().sum();
    const double nb = ((xs.array() - mx) * (c.y.array() - my)).sum() / sxx;
    const double na = my - nb * mx;
    xs = ((delta * c.x.array() + nb * (c.y.array() - na)) / (delta + nb * nb)).matrix();
    const bool done = std::abs(nb - b) < 1e-13 && std::abs(na - a) < 1e-13;
    a = na;
    b = nb;
    if (done) break;
  }
  a_out = a;
  return b;
}

PhaseSeries series_from(const VectorXd& x, const VectorXd& y, double first_year = 1960.0) {
  PhaseSeries s;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    s.records.push_back({first_year + static_cast<double>(k), x[k], y[k], Regime::Post});
  return s;
}

BinFit exact_bin(std::size_t bin, double slope, double intercept) {
  VectorXd x(8), y(8);
  for (int k = 0; k < 8; ++k) {
    x[k] = -1.0 + 0.3 * k;
    y[k] = intercept + slope * x[k];
  }
  BinFit bf;
  bf.bin = bin;
  bf.fit = deming_fit<double>(x, y, 1.0, {0, 0, 0, 0, 1, 1, 1, 1});
  for (int k = 0; k < 8; ++k) bf.years.push_back(1970.0 + k);
  return bf;
}

}  // namespace

TEST_CASE("Deming: collinear points are fitted exactly for every delta") {
  VectorXd x(6);
  x << -3, -1, 0, 0.5, 2, 7;
  const VectorXd y = (2.0 - 0.5 * x.array()).matrix();
  for (double d : {1e-6, 0.3, 1.0, 50.0, 1e6}) {
    const auto f = deming_fit<double>(x, y, d);
    CHECK(f.slope == rel(-0.5).epsilon(1e-12));
    CHECK(f.intercept() == rel(2.0).epsilon(1e-12));
    CHECK(f.residuals.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f.expected_sign());
  }
}

TEST_CASE("Deming: limits reproduce ordinary least squares") {
  std::mt19937_64 rng(3);
  const Cloud c = noisy_line(40, 1.0, -0.7, 0.3, 0.3, rng);
  const double mx = c.x.mean(), my = c.y.mean();
  const double sxx = (c.x.array() - mx).square().sum();
  const double syy = (c.y.array() - my).square().sum();
  const double sxy = ((c.x.array() - mx) * (c.y.array() - my)).sum();
  // Small delta leaves x errors unpenalized: regression of x on y.
  CHECK(deming_fit<double>(c.x, c.y, 1e-12).slope == rel(syy / sxy).epsilon(1e-8));
  CHECK(deming_fit<double>(c.x, c.y, 1e12).slope == rel(sxy / sxx).epsilon(1e-8));
}

TEST_CASE("Deming: closed form equals direct minimization") {
  std::mt19937_64 rng(11);
  const Cloud c = noisy_line(50, 0.4, -0.3, 0.25, 0.2, rng);
  for (double d : {1.0, 0.25, 4.0}) {
    const auto f = deming_fit<double>(c.x, c.y, d);
    double a = 0.0;
    const double b = brute_force_slope(c, d, a);
    CHECK(f.slope == rel(b).epsilon(1e-6));
    CHECK(f.intercept() == rel(a).epsilon(1e-6));
    CHECK(f.objective() == rel(objective(c, f.intercept(), f.slope, f.x_star, d)).epsilon(1e-10));
    // Any perturbation of the fitted parameters raises the profiled objective.
    const auto profiled = [&](double aa, double bb) {
      const VectorXd xs = ((d * c.x.array() + bb * (c.y.array() - aa)) / (d + bb * bb)).matrix();
      return objective(c, aa, bb, xs, d);
    };
    const double best = profiled(f.intercept(), f.slope);
    for (double e : {-1e-3, 1e-3}) {
      CHECK(profiled(f.intercept() + e, f.slope) > best);
      CHECK(profiled(f.intercept(), f.slope + e) > best);
    }
  }
}

TEST_CASE("Deming: algebraic properties") {
  std::mt19937_64 rng(19);
  const Cloud c = noisy_line(30, -0.2, 0.9, 0.2, 0.35, rng);
  const double d = 2.5;
  const auto f = deming_fit<double>(c.x, c.y, d);

  SUBCASE("swapping axes inverts the slope") {
    const auto g = deming_fit<double>(c.y, c.x, 1.0 / d);
    CHECK(g.slope == rel(1.0 / f.slope).epsilon(1e-10));
    CHECK(g.intercept() == rel(-f.intercept() / f.slope).epsilon(1e-10));
  }
  SUBCASE("translation equivariance") {
    const VectorXd xs = (c.x.array() + 13.0).matrix(), ys = (c.y.array() - 4.0).matrix();
    const auto g = deming_fit<double>(xs, ys, d);
    CHECK(g.slope == rel(f.slope).epsilon(1e-10));
    CHECK(g.intercept() == rel(f.intercept() - 4.0 - 13.0 * f.slope).epsilon(1e-9));
  }
  SUBCASE("identical groups reduce to the single-group fit") {
    VectorXd x2(60), y2(60);
    x2 << c.x, c.x;
    y2 << c.y, c.y;
    std::vector<int> groups(60, 0);
    std::fill(groups.begin() + 30, groups.end(), 1);
    const auto g = deming_fit<double>(x2, y2, d, groups);
    CHECK(g.slope == rel(f.slope).epsilon(1e-12));
    CHECK(g.intercept(0) == rel(f.intercept()).epsilon(1e-12));
    CHECK(g.intercept(1) == rel(f.intercept()).epsilon(1e-12));
  }
  SUBCASE("shared slope, separate intercepts") {
    VectorXd x2(60), y2(60);
    x2 << c.x, c.x;
    y2 << c.y, (c.y.array() + 1.5).matrix();
    std::vector<int> groups(60, 0);
    std::fill(groups.begin() + 30, groups.end(), 1);
    const auto g = deming_fit<double>(x2, y2, d, groups);
    CHECK(g.slope == rel(f.slope).epsilon(1e-12));
    CHECK(g.intercept(1) - g.intercept(0) == rel(1.5).epsilon(1e-12));
  }
  SUBCASE("residual displacement is orthogonal to the line") {
    for (Eigen::Index k = 0; k < c.x.size(); ++k) {
      const double dx = c.x[k] - f.x_star[k], dy = c.y[k] - f.y_star[k];
      CHECK(std::abs(d * dx * 1.0 + dy * f.slope) < 1e-12);
      double px = 0.0, py = 0.0;
      deming_perturb(f.x_star[k], f.y_star[k], f.residuals[k], f.slope, d, px, py);
      CHECK(px == rel(c.x[k]).epsilon(1e-12));
      CHECK(py == rel(c.y[k]).epsilon(1e-12));
    }
  }
  SUBCASE("degenerate inputs") {
    const VectorXd flat = VectorXd::Constant(30, 0.7);
    CHECK_THROWS_AS(deming_fit<double>(flat, c.y, d), DemingError);
    CHECK_THROWS_AS(deming_fit<double>(c.x, c.y, 0.0), DemingError);
    CHECK_THROWS_AS(deming_fit<double>(c.x.head(1), c.y.head(1), d), DemingError);
  }
  SUBCASE("long double instantiation agrees") {
    const auto g = deming_fit<long double>(c.x.cast<long double>(), c.y.cast<long double>(), 2.5L);
    CHECK(static_cast<double>(g.slope) == rel(f.slope).epsilon(1e-12));
  }
}

TEST_CASE("automatic delta") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nrm(0.0, 1.0);
  const int n = 4000;
  VectorXd x(n), y(n), xs(n);
  for (int k = 0; k < n; ++k) {
    const double trend = std::sin(k / 400.0);
    xs[k] = trend;
    x[k] = trend + 0.1 * nrm(rng);
    y[k] = 2.0 * trend + 0.1 * nrm(rng);
  }
  CHECK(estimate_delta(series_from(x, y)).delta == rel(1.0).epsilon(0.1));

  VectorXd y2 = y;
  for (int k = 0; k < n; ++k) y2[k] = 2.0 * xs[k] + 0.2 * nrm(rng);
  CHECK(estimate_delta(series_from(x, y2)).delta == rel(4.0).epsilon(0.1));

  Bandwidths bw;
  bw.delta_scale = 0.5;
  CHECK(estimate_delta(series_from(x, y2), bw).delta == rel(2.0).epsilon(0.1));

  VectorXd x_lin(20), y_lin(20);
  for (int k = 0; k < 20; ++k) {
    x_lin[k] = 0.1 * k;
    y_lin[k] = std::sin(static_cast<double>(k * k));
  }
  const DeltaEstimate top = estimate_delta(series_from(x_lin, y_lin));
  CHECK(top.delta == 1e6);
  CHECK(top.clamped);
  CHECK_THROWS(estimate_delta(series_from(x_lin.head(5), y_lin.head(5))));
}

TEST_CASE("consumption recovery") {
  const WealthGrid g(-1.0, 0.1, 40);
  const VectorXd centers = g.centers();

  SUBCASE("constant mobility") {
    std::vector<BinFit> fits;
    for (std::size_t i = 0; i < g.n_bins; ++i) fits.push_back(exact_bin(i, -0.02, -0.05));
    const ConsumptionProfile p = recover_consumption(fits, g);
    for (std::size_t i = 3; i + 3 < g.n_bins; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      CHECK(p.gamma2_asinh[k] == rel(0.04));
      CHECK(std::abs(p.dgamma2_asinh[k]) < 1e-12);
      CHECK(p.c_asinh[0][k] == rel(0.05));
      CHECK(p.c_asinh[1][k] == rel(0.05));
      CHECK_FALSE(p.floored[i]);
    }
  }
  SUBCASE("linear mobility gradient") {
    std::vector<BinFit> fits;
    for (std::size_t i = 0; i < g.n_bins; ++i) {
      const double g2 = 0.01 + 0.002 * centers[static_cast<Eigen::Index>(i)];
      fits.push_back(exact_bin(i, -0.5 * g2, -0.1));
    }
    const ConsumptionProfile p = recover_consumption(fits, g);
    for (std::size_t i = 10; i < 30; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      CHECK(p.dgamma2_asinh[k] == rel(0.002).epsilon(0.05));
      CHECK(p.c_asinh[0][k] == rel(0.1 - 0.001).epsilon(1e-6));
    }
  }
  SUBCASE("wrong-sign slopes are floored and flagged") {
    std::vector<BinFit> fits = {exact_bin(5, 0.3, 0.0)};
    const ConsumptionProfile p = recover_consumption(fits, g);
    CHECK(p.gamma2_asinh[5] == 0.0);
    CHECK(p.floored[5]);
    CHECK(std::isnan(p.gamma2_asinh[6]));
  }
}

TEST_CASE("bootstrap covariance structure") {
  BootstrapModel m;
  m.bins = {0, 1, 2};
  m.n_years = 4;
  m.rho = VectorXd::Zero(3);
  m.sigma = (VectorXd(3) << 0.5, 1.0, 2.0).finished();
  const Eigen::MatrixXd s0 = bootstrap_covariance(m);
  CHECK(s0.rows() == 12);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 12; ++j) {
      const double expected = i == j ? std::pow(m.sigma[i / 4], 2) : 0.0;
      CHECK(s0(i, j) == rel(expected).epsilon(1e-12));
    }

  m.rho = (VectorXd(3) << 0.6, -0.3, 0.0).finished();
  m.r = 0.4;
  const Eigen::MatrixXd s = bootstrap_covariance(m);
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff() > -1e-12);
  // Within a bin the covariance is sigma^2 times the AR(1) Toeplitz matrix.
  CHECK(s(1, 0) == rel(0.25 * 0.6).epsilon(1e-12));
  CHECK(s(3, 0) == rel(0.25 * 0.216).epsilon(1e-12));

  // Sampler matches the covariance.
  std::mt19937_64 rng(4);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(12, 12);
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    const Eigen::MatrixXd e = draw_bootstrap_errors(m, rng);
    VectorXd v(12);
    for (int i = 0; i < 3; ++i) v.segment(4 * i, 4) = e.row(i).transpose();
    acc += v * v.transpose();
  }
  acc /= n;
  CHECK((acc - s).cwiseAbs().maxCoeff() < 0.12);
  CHECK(std::abs(acc(0, 4) - s(0, 4)) < 0.02);
}

TEST_CASE("bootstrap slope SE matches the OLS formula") {
  std::mt19937_64 rng(61);
  const Cloud c = noisy_line(60, 0.5, -0.4, 0.0, 0.15, rng);
  BinFit bf;
  bf.bin = 3;
  bf.fit = deming_fit<double>(c.x, c.y, 1e8);
  for (int k = 0; k < 60; ++k) bf.years.push_back(1950.0 + k);
  const std::vector<BinFit> fits = {bf};
  const BootstrapModel m = fit_bootstrap_model(fits, 2000);
  const BootstrapResult r = bootstrap(fits, WealthGrid(-1.0, 0.1, 10), m, 9);
  std::vector<double> sl;
  for (const auto& v : r.slopes) sl.push_back(v[0]);
  const double mean = std::accumulate(sl.begin(), sl.end(), 0.0) / static_cast<double>(sl.size());
  double ss = 0.0;
  for (double s : sl) ss += (s - mean) * (s - mean);
  const double se_boot = std::sqrt(ss / static_cast<double>(sl.size() - 1));

  const double mx = c.x.mean();
  const double sxx = (c.x.array() - mx).square().sum();
  const VectorXd res = (c.y.array() - bf.fit.intercept() - bf.fit.slope * c.x.array()).matrix();
  const double se_ols = std::sqrt(res.squaredNorm() / (60.0 - 2.0) / sxx);
  CHECK(se_boot == rel(se_ols).epsilon(0.15));
}

TEST_CASE("bootstrap reproducibility and CI columns") {
  const WealthGrid g(-1.0, 0.1, 12);
  std::mt19937_64 rng(71);
  std::vector<BinFit> fits;
  for (std::size_t i = 2; i < 10; ++i) {
    const Cloud c = noisy_line(20, -0.05, -0.03, 0.05, 0.02, rng);
    BinFit bf;
    bf.bin = i;
    std::vector<int> groups(20, 0);
    std::fill(groups.begin() + 8, groups.end(), 1);
    bf.fit = deming_fit<double>(c.x, c.y, 0.16, groups);
    for (int k = 0; k < 20; ++k) bf.years.push_back(1960.0 + k);
    fits.push_back(bf);
  }
  const BootstrapModel m = fit_bootstrap_model(fits, 100);
  const BootstrapResult a = bootstrap(fits, g, m, 5);
  const BootstrapResult b = bootstrap(fits, g, m, 5);
  const BootstrapResult other = bootstrap(fits, g, m, 6);
  REQUIRE(a.slopes.size() == 100);
  CHECK((a.slopes[37] - b.slopes[37]).norm() == 0.0);
  CHECK((a.slopes[37] - other.slopes[37]).norm() > 0.0);
  for (std::size_t i = 3; i < 9; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    CHECK(a.profile.gamma2_lo[k] <= a.profile.gamma2_hi[k]);
    CHECK(a.profile.c_lo[1][k] <= a.profile.c_hi[1][k]);
    CHECK(a.profile.gamma2_se[k] > 0.0);
  }
  CHECK(std::isnan(a.profile.gamma2_se[0]));
}

TEST_CASE("bootstrap percentile intervals reach nominal coverage") {
  // 5-bin toy with white noise on both sides and delta equal to the true variance ratio.
  // The 1/T residual scale and percentile intervals undercover at short panels (about 91% at T = 40).
  const WealthGrid g(-1.0, 0.1, 8);
  const int reps = 500, T = 200;
  const double b_true = -0.4, sx = 0.15, sy = 0.15;
  int covered = 0, total = 0;
  for (int rep = 0; rep < reps; ++rep) {
    std::mt19937_64 rng = make_rng(1234, static_cast<std::uint64_t>(rep));
    std::vector<BinFit> fits;
    for (std::size_t i = 1; i <= 5; ++i) {
      const Cloud c = noisy_line(T, 0.1 * i, b_true, sx, sy, rng);
      BinFit bf;
      bf.bin = i;
      bf.fit = deming_fit<double>(c.x, c.y, sy * sy / (sx * sx));
      for (int k = 0; k < T; ++k) bf.years.push_back(1960.0 + k);
      fits.push_back(bf);
    }
    const BootstrapModel m = fit_bootstrap_model(fits, 199);
    const BootstrapResult r = bootstrap(fits, g, m, 1000 + static_cast<std::uint64_t>(rep));
    for (Eigen::Index i = 0; i < 5; ++i) {
      std::vector<double> s;
      for (const auto& v : r.slopes) s.push_back(v[i]);
      std::sort(s.begin(), s.end());
      covered += (s[4] <= b_true && b_true <= s[194]);
      ++total;
    }
  }
  const double rate = static_cast<double>(covered) / total;
  MESSAGE("coverage " << rate);
  CHECK(rate == rel(0.95).epsilon(0.03 / 0.95));
}

TEST_CASE("left-hand side builder") {
  const WealthGrid g(-1.0, 0.1, 30);
  VectorXd mass(30);
  for (Eigen::Index i = 0; i < 30; ++i) mass[i] = std::exp(-0.5 * std::pow(g.centers()[i] / 0.8, 2));
  mass /= mass.sum();
  EstimationInputs in;
  in.break_year = 1975.0;
  for (int t = 0; t < 20; ++t) in.snapshots.emplace_back(1965.0 + t, g, mass);
  in.income = {DriftDiffusionProfile::zeros(g)};

  SUBCASE("stationary distribution with no income or events") {
    const PhasePanel p = build_lhs(in);
    CHECK(p.dropped_bins == 0);
    std::size_t n = 0;
    for (const auto& s : p.series)
      for (const auto& r : s.records) {
        CHECK(std::abs(r.y) < 1e-10);
        ++n;
      }
    CHECK(n == 600);
    CHECK(p.series[4].records.front().period == Regime::Pre);
    CHECK(p.series[4].records.back().period == Regime::Post);
  }
  SUBCASE("only demography effects") {
    EventEffects e = EventEffects::zeros(g);
    for (Eigen::Index i = 0; i < 30; ++i) e.Z[i] = 0.001 * (i + 1);
    in.effects.assign(20, e);
    const PhasePanel p = build_lhs(in);
    const VectorXd f = in.snapshots.front().density_asinh();
    for (std::size_t i = 1; i < 30; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      for (const auto& r : p.series[i].records)
        CHECK(r.y == rel(0.5 * (e.Z[k] + e.Z[k - 1]) / f[k]).epsilon(1e-10));
    }
  }
  SUBCASE("input validation") {
    EstimationInputs few = in;
    few.snapshots.resize(3);
    CHECK_THROWS(build_lhs(few));
    EstimationInputs bad = in;
    std::swap(bad.snapshots[2], bad.snapshots[5]);
    CHECK_THROWS(build_lhs(bad));
    EstimationInputs two = in;
    two.income.assign(2, DriftDiffusionProfile::zeros(g));
    CHECK_THROWS(build_lhs(two));
  }
}

TEST_CASE("per-bin fits identify a time-constant line only when x varies") {
  const WealthGrid g(-1.0, 0.1, 4);
  PhasePanel panel;
  panel.grid = g;
  panel.series.resize(4);
  std::mt19937_64 rng(81);
  std::normal_distribution<double> nrm(0.0, 0.002);
  for (std::size_t i = 0; i < 4; ++i) {
    panel.series[i].bin = i;
    for (int t = 0; t < 30; ++t) {
      const double x = i == 2 ? -1.5 : -1.5 + 0.05 * t + nrm(rng);
      const Regime reg = t < 12 ? Regime::Pre : Regime::Post;
      const double a = reg == Regime::Pre ? 0.02 : 0.05;
      panel.series[i].records.push_back({1960.0 + t, x, a - 0.1 * x + nrm(rng), reg});
    }
  }
  panel.series[3].records.resize(4);
  std::vector<std::string> skipped;
  const std::vector<BinFit> fits = fit_bins(panel, {}, &skipped);
  REQUIRE(fits.size() == 2);
  CHECK(skipped.size() == 2);
  for (const auto& f : fits) {
    CHECK(f.fit.slope == rel(-0.1).epsilon(0.1));
    CHECK(f.fit.intercept(1) - f.fit.intercept(0) == rel(0.03).epsilon(0.2));
  }
  CHECK(std::any_of(skipped.begin(), skipped.end(),
                    [](const std::string& s) { return s.find("no identifying variation") != std::string::npos; }));
}
