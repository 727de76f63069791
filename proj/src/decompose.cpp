#include "wealthdyn/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wealthdyn {

namespace {

// d v / dw at bin centers: central differences in x, one-sided at the ends.
Eigen::VectorXd derivative_w(const WealthGrid& g, const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  if (n < 2) return d;
  const double h = g.bin_width;
  for (Eigen::Index i = 0; i < n; ++i) {
    double dx;
    if (i == 0)
      dx = (v[1] - v[0]) / h;
    else if (i == n - 1)
      dx = (v[n - 1] - v[n - 2]) / h;
    else
      dx = (v[i + 1] - v[i - 1]) / (2.0 * h);
    d[i] = dx / std::cosh(g.center(static_cast<std::size_t>(i)));
  }
  return d;
}

Eigen::VectorXd at_centers(const Eigen::VectorXd& edges) {
  Eigen::VectorXd c(edges.size());
  for (Eigen::Index i = 0; i < edges.size(); ++i) c[i] = 0.5 * (edges[i] + (i > 0 ? edges[i - 1] : 0.0));
  return c;
}

// Population weights of the region above fractile p, per bin.
Eigen::VectorXd weights_above(const DistributionSnapshot& s, double p) {
  const DistributionSnapshot n = s.normalized();
  const Eigen::VectorXd F = n.cdf();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(F.size());
  for (Eigen::Index i = 0; i < F.size(); ++i) {
    const double lo = i > 0 ? F[i - 1] : 0.0;
    if (F[i] <= p) continue;
    w[i] = lo >= p ? n.mass[i] : F[i] - p;
  }
  return w;
}

double aggregate(const Eigen::VectorXd& weights, const Eigen::VectorXd& wealth, const Eigen::VectorXd& term) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) continue;
    num += weights[i] * term[i];
    den += weights[i] * wealth[i];
  }
  return num / den;
}

void check_region(const Eigen::VectorXd& weights, const Eigen::VectorXd& wealth, const Eigen::VectorXd& total) {
  double den = 0.0;
  int populated = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) continue;
    if (!std::isfinite(total[i])) throw DecomposeError("starved top bins: terms missing above Q(p)");
    den += weights[i] * wealth[i];
    ++populated;
  }
  if (populated < 2) throw DecomposeError("starved top bins: fewer than 2 populated bins above Q(p)");
  if (!(den > 0.0)) throw DecomposeError("nonpositive wealth above Q(p)");
}

double sum_map(const std::map<std::string, double>& m) {
  double s = 0.0;
  for (const auto& [k, v] : m) s += v;
  return s;
}

const DriftDiffusionProfile& profile_for(const std::vector<DriftDiffusionProfile>& profiles, std::size_t k) {
  return profiles.size() == 1 ? profiles.front() : profiles[k];
}

}  // namespace

Eigen::VectorXd GrowthTerms::sum_of_components() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.n_bins));
  for (const auto* m : {&drift, &mobility, &mobility_gradient, &events})
    for (const auto& [k, v] : *m) s += v;
  return s;
}

double GrowthDecomposition::drift_total() const { return sum_map(drift); }
double GrowthDecomposition::mobility_total() const { return sum_map(mobility); }
double GrowthDecomposition::sum_of_components() const {
  return sum_map(drift) + sum_map(mobility) + sum_map(mobility_gradient) + sum_map(events);
}

GrowthTerms growth_terms(const DistributionSnapshot& snap, const DriftDiffusionProfile& profile,
                         const EventEffects* effects, const DecomposeOptions& opts) {
  if (!snap.grid.compatible(profile.grid)) throw DecomposeError("snapshot and profile grids differ");
  profile.validate();
  const WealthGrid& g = snap.grid;
  const Eigen::Index n = static_cast<Eigen::Index>(g.n_bins);
  const Eigen::VectorXd x = g.centers();
  const Eigen::VectorXd ch = x.array().cosh();
  const DistributionSnapshot norm = snap.normalized();
  const Eigen::VectorXd f_w = norm.density_asinh().cwiseQuotient(ch);
  const Eigen::VectorXd slope_x = log_density_slope(norm, opts.log_density_bandwidth);
  const Eigen::VectorXd slope_w = (slope_x.array() - x.array().tanh()).matrix().cwiseQuotient(ch);

  GrowthTerms t;
  t.grid = g;
  if (profile.income_components.empty()) {
    t.drift["income"] = profile.income_drift;
  } else {
    Eigen::VectorXd rest = profile.income_drift;
    for (const auto& c : profile.income_components) {
      if (c.values.size() != n) throw DecomposeError("income component '" + c.label + "' does not match grid");
      auto [it, fresh] = t.drift.try_emplace(c.label, c.values);
      if (!fresh) it->second += c.values;
      rest -= c.values;
    }
    if (rest.cwiseAbs().maxCoeff() > 1e-12 * (1.0 + profile.income_drift.cwiseAbs().maxCoeff()))
      t.drift["other_income"] = rest;
  }
  t.drift["consumption"] = -profile.consumption_mean;
  t.mobility["income"] = -0.5 * profile.income_diffusion.cwiseProduct(slope_w);
  t.mobility["consumption"] = -0.5 * profile.consumption_var.cwiseProduct(slope_w);
  t.mobility_gradient["income"] = -0.5 * derivative_w(g, profile.income_diffusion);
  t.mobility_gradient["consumption"] = -0.5 * derivative_w(g, profile.consumption_var);
  if (effects) {
    if (!effects->grid.compatible(g)) throw DecomposeError("effects grid differs");
    const auto per_f = [&](const Eigen::VectorXd& e) {
      Eigen::VectorXd ec = at_centers(e), out(n);
      for (Eigen::Index i = 0; i < n; ++i) out[i] = f_w[i] > 0.0 ? -ec[i] / f_w[i] : kMissing;
      return out;
    };
    t.events["demography"] = per_f(effects->Z);
    t.events["inheritance"] = per_f(effects->Xi);
    t.events["marriage_divorce"] = per_f(effects->X);
  }
  t.total = t.sum_of_components();
  return t;
}

GrowthDecomposition decompose_growth(const std::vector<DistributionSnapshot>& snapshots,
                                     const std::vector<DriftDiffusionProfile>& profiles,
                                     const std::vector<EventEffects>& effects, double p, Period period,
                                     const DecomposeOptions& opts) {
  if (!(p > 0.0 && p < 1.0)) throw DecomposeError("p must lie in (0, 1)");
  if (snapshots.empty()) throw DecomposeError("no snapshots");
  if (profiles.size() != 1 && profiles.size() != snapshots.size())
    throw DecomposeError("need one profile or one per snapshot");
  if (!effects.empty() && effects.size() != snapshots.size()) throw DecomposeError("need one effects entry per snapshot");

  GrowthDecomposition out;
  out.p = p;
  out.period = period;
  double observed_sum = 0.0;
  std::size_t observed_n = 0;
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    const DistributionSnapshot& s = snapshots[k];
    if (s.time < period.start || s.time > period.end) continue;
    const GrowthTerms t = growth_terms(s, profile_for(profiles, k), effects.empty() ? nullptr : &effects[k], opts);
    const Eigen::VectorXd w = weights_above(s, p);
    const Eigen::VectorXd wealth = s.grid.wealth_centers();
    check_region(w, wealth, t.total);
    const auto add = [&](const std::map<std::string, Eigen::VectorXd>& src, std::map<std::string, double>& dst) {
      for (const auto& [label, v] : src) dst[label] += aggregate(w, wealth, v);
    };
    add(t.drift, out.drift);
    add(t.mobility, out.mobility);
    add(t.mobility_gradient, out.mobility_gradient);
    add(t.events, out.events);
    out.total += aggregate(w, wealth, t.total);
    ++out.years;

    if (k + 1 < snapshots.size() && snapshots[k + 1].time <= period.end) {
      const DistributionSnapshot& s1 = snapshots[k + 1];
      const double dt = s1.time - s.time;
      if (dt > 0.0 && s1.grid.compatible(s.grid)) {
        const Eigen::VectorXd F0 = s.normalized().cdf_at_centers(), F1 = s1.normalized().cdf_at_centers();
        const Eigen::VectorXd ch = s.grid.centers().array().cosh();
        const Eigen::VectorXd f = 0.5 * (s.normalized().density_asinh() + s1.normalized().density_asinh());
        Eigen::VectorXd dq(F0.size());
        for (Eigen::Index i = 0; i < dq.size(); ++i)
          dq[i] = f[i] > 0.0 ? -(F1[i] - F0[i]) / dt / (f[i] / ch[i]) : 0.0;
        observed_sum += aggregate(w, wealth, dq);
        ++observed_n;
      }
    }
  }
  if (out.years == 0) throw DecomposeError("no snapshots in period");
  const double inv = 1.0 / static_cast<double>(out.years);
  for (auto* m : {&out.drift, &out.mobility, &out.mobility_gradient, &out.events})
    for (auto& [k, v] : *m) v *= inv;
  out.total *= inv;
  if (observed_n > 0) out.observed = observed_sum / static_cast<double>(observed_n);
  return out;
}

double quantile(const DistributionSnapshot& snapshot, double p) {
  const DistributionSnapshot s = snapshot.normalized();
  const WealthGrid& g = s.grid;
  if (p <= 0.0) return asinh_inv(g.lower_asinh);
  double lo = 0.0;
  for (std::size_t i = 0; i < g.n_bins; ++i) {
    const double m = s.mass[static_cast<Eigen::Index>(i)];
    if (lo + m >= p && m > 0.0) return asinh_inv(g.lower_edge(i) + (p - lo) / m * g.bin_width);
    lo += m;
  }
  return asinh_inv(g.upper_asinh());
}

double top_share(const DistributionSnapshot& snapshot, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw DecomposeError("p must lie in [0, 1)");
  const DistributionSnapshot s = snapshot.normalized();
  const WealthGrid& g = s.grid;
  const double xp = asinh(quantile(s, p));
  double total = 0.0, top = 0.0;
  for (std::size_t i = 0; i < g.n_bins; ++i) {
    const double dens = s.mass[static_cast<Eigen::Index>(i)] / g.bin_width;
    const double a = g.lower_edge(i), b = g.upper_edge(i);
    total += dens * (std::cosh(b) - std::cosh(a));
    if (b > xp) top += dens * (std::cosh(b) - std::cosh(std::max(a, xp)));
  }
  if (!(total > 0.0)) throw DecomposeError("negative total wealth");
  return top / total;
}

double top_share(const Population& pop, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw DecomposeError("p must lie in [0, 1)");
  std::vector<std::size_t> idx;
  double weight = 0.0, wealth = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].alive) continue;
    idx.push_back(i);
    weight += pop[i].weight;
    wealth += pop[i].weight * pop[i].wealth;
  }
  if (idx.empty()) throw DecomposeError("empty population");
  if (!(wealth > 0.0)) throw DecomposeError("negative total wealth");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pop[a].wealth < pop[b].wealth; });
  // Q(p): first particle whose cumulative weight reaches p; holders at or above it form the top.
  double cum = 0.0, q = pop[idx.back()].wealth;
  for (std::size_t i : idx) {
    cum += pop[i].weight;
    if (cum >= p * weight) {
      q = pop[i].wealth;
      break;
    }
  }
  double top = 0.0;
  for (std::size_t i : idx)
    if (pop[i].wealth >= q) top += pop[i].weight * pop[i].wealth;
  return top / wealth;
}

std::vector<SyntheticSavings> synthetic_savings(const std::vector<DistributionSnapshot>& snapshots,
                                                const std::vector<DriftDiffusionProfile>& profiles,
                                                const DecomposeOptions& opts) {
  if (snapshots.size() < 2) throw DecomposeError("synthetic savings need two or more snapshots");
  if (profiles.size() != 1 && profiles.size() != snapshots.size())
    throw DecomposeError("need one profile or one per snapshot");
  std::vector<SyntheticSavings> out;
  const std::size_t T = snapshots.size();
  for (std::size_t k = 0; k < T; ++k) {
    const GrowthTerms t = growth_terms(snapshots[k], profile_for(profiles, k), nullptr, opts);
    SyntheticSavings s;
    const Eigen::Index n = t.total.size();
    s.time = snapshots[k].time;
    s.rank = snapshots[k].normalized().cdf_at_centers();
    s.wealth = snapshots[k].grid.wealth_centers();
    s.drift = Eigen::VectorXd::Zero(n);
    for (const auto& [l, v] : t.drift) s.drift += v;
    s.mobility = t.mobility.at("income") + t.mobility.at("consumption");
    s.mobility_gradient = t.mobility_gradient.at("income") + t.mobility_gradient.at("consumption");
    s.synthetic = s.drift + s.mobility + s.mobility_gradient;
    const std::size_t a = k == 0 ? 0 : k - 1, b = k + 1 == T ? k : k + 1;
    const double dt = snapshots[b].time - snapshots[a].time;
    s.observed = Eigen::VectorXd::Constant(n, kMissing);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = s.rank[i];
      if (!(r > 0.0 && r < 1.0) || !(dt > 0.0)) continue;
      s.observed[i] = (quantile(snapshots[b], r) - quantile(snapshots[a], r)) / dt;
    }
    out.push_back(std::move(s));
  }
  return out;
}

PhasePortrait phase_portrait(const PhasePanel& panel, const std::vector<BinFit>& fits) {
  PhasePortrait out;
  for (const BinFit& bf : fits) {
    if (bf.bin >= panel.series.size()) throw DecomposeError("fit refers to a bin outside the panel");
    const PhaseSeries& ser = panel.series[bf.bin];
    PhaseLine line;
    line.bin = bf.bin;
    line.slope = bf.fit.slope;
    for (Eigen::Index g = 0; g < bf.fit.intercepts.size() && g < 2; ++g) {
      line.intercept[static_cast<std::size_t>(g)] = bf.fit.intercepts[g];
      if (bf.fit.slope != 0.0) line.x_stationary[static_cast<std::size_t>(g)] = -bf.fit.intercepts[g] / bf.fit.slope;
    }
    out.lines.push_back(line);
    for (std::size_t k = 0; k < bf.years.size(); ++k) {
      const auto it = std::find_if(ser.records.begin(), ser.records.end(),
                                   [&](const PhaseRecord& r) { return r.year == bf.years[k]; });
      if (it == ser.records.end()) continue;
      const auto kk = static_cast<Eigen::Index>(k);
      PhaseRow row;
      row.bin = bf.bin;
      row.wealth = panel.grid.wealth_center(bf.bin);
      row.year = it->year;
      row.period = static_cast<int>(it->period);
      row.x = it->x;
      row.y = it->y;
      row.fitted = bf.fit.intercept(bf.fit.groups[k]) + bf.fit.slope * it->x;
      row.x_star = bf.fit.x_star[kk];
      row.y_star = bf.fit.y_star[kk];
      out.rows.push_back(row);
    }
  }
  return out;
}

namespace {

bool matches_returns(const std::string& label) { return label.rfind("capital", 0) == 0 || label == "returns"; }

bool matches(OverrideTarget t, const std::string& label) {
  switch (t) {
    case OverrideTarget::LaborIncome: return label == "labor" || label.rfind("labor", 0) == 0;
    case OverrideTarget::Returns: return matches_returns(label);
    case OverrideTarget::Taxes: return label == "tax" || label == "taxes";
    default: return false;
  }
}

// Value of `ref_values` (on the reference snapshot's bins) at the ranks of `current`.
Eigen::VectorXd rank_map(const DistributionSnapshot& ref, const Eigen::VectorXd& ref_values,
                         const DistributionSnapshot& current) {
  const Eigen::VectorXd rr = ref.normalized().cdf_at_centers();
  const Eigen::VectorXd rc = current.normalized().cdf_at_centers();
  const Eigen::Index n = rc.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = rc[i];
    const auto* b = rr.data();
    const auto* e = rr.data() + rr.size();
    const auto* it = std::lower_bound(b, e, r);
    if (it == b) {
      out[i] = ref_values[0];
    } else if (it == e) {
      out[i] = ref_values[rr.size() - 1];
    } else {
      const Eigen::Index j = it - b;
      const double span = rr[j] - rr[j - 1];
      const double u = span > 0.0 ? (r - rr[j - 1]) / span : 1.0;
      out[i] = (1.0 - u) * ref_values[j - 1] + u * ref_values[j];
    }
  }
  return out;
}

// Rank-matched average over the reference period of field(profile at t).
template <class Field>
Eigen::VectorXd frozen(const BaselineInputs& base, const Period& ref, const DistributionSnapshot& current, Field field) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(current.grid.n_bins));
  int count = 0;
  for (const DistributionSnapshot& s : base.reference_snapshots) {
    if (s.time < ref.start || s.time > ref.end) continue;
    acc += rank_map(s, field(base.profiles.at(s.time)), current);
    ++count;
  }
  if (count == 0) throw DecomposeError("freeze reference period has no reference snapshots");
  return acc / count;
}

}  // namespace

DriftDiffusionProfile apply_overrides(const BaselineInputs& base, const Scenario& scenario, double year,
                                      const DistributionSnapshot& current) {
  DriftDiffusionProfile p = base.profiles.at(year);
  if (year < scenario.start) return p;
  for (const Override& o : scenario.overrides) {
    switch (o.target) {
      case OverrideTarget::LaborIncome:
      case OverrideTarget::Returns:
      case OverrideTarget::Taxes: {
        if (!o.reference) throw DecomposeError("income override needs a reference period");
        bool any = false;
        for (std::size_t k = 0; k < p.income_components.size(); ++k) {
          const std::string label = p.income_components[k].label;
          if (!matches(o.target, label)) continue;
          any = true;
          const Eigen::VectorXd v = frozen(base, *o.reference, current, [&](const DriftDiffusionProfile& q) {
            for (const auto& c : q.income_components)
              if (c.label == label) return c.values;
            throw DecomposeError("reference profile lacks income component '" + label + "'");
          });
          p.income_drift += v - p.income_components[k].values;
          p.income_components[k].values = v;
        }
        if (!any) throw DecomposeError("override references an income component that the inputs do not label");
        break;
      }
      case OverrideTarget::Consumption: {
        if (!o.reference) throw DecomposeError("consumption override needs a reference period");
        p.consumption_mean = frozen(base, *o.reference, current, [](const DriftDiffusionProfile& q) { return q.consumption_mean; });
        p.consumption_var = frozen(base, *o.reference, current, [](const DriftDiffusionProfile& q) { return q.consumption_var; });
        break;
      }
      case OverrideTarget::Growth: {
        // z carries -g w; scaling g shifts z by -(k - 1) g w.
        const double dg = (o.growth_factor - 1.0) * p.growth_rate;
        const Eigen::VectorXd w = p.grid.wealth_centers();
        p.income_drift -= dg * w;
        for (auto& c : p.income_components)
          if (c.label == "growth") c.values -= dg * w;
        p.growth_rate *= o.growth_factor;
        break;
      }
      case OverrideTarget::EstateTax:
      case OverrideTarget::Demography:
        break;  // handled on the event models
    }
  }
  return p;
}

namespace {

std::optional<EventModels> scenario_models(const BaselineInputs& base, const Scenario& scenario) {
  std::optional<EventModels> m = base.models;
  for (const Override& o : scenario.overrides) {
    if (o.target == OverrideTarget::EstateTax) {
      if (!m) throw DecomposeError("estate-tax override without event models");
      if (o.estate)
        m->estate = *o.estate;
      else if (o.reference)
        m->estate = EstateTaxSchedule::constant(m->estate.at(static_cast<int>(std::lround(o.reference->start))));
      else
        throw DecomposeError("estate-tax override needs a schedule or a reference year");
    } else if (o.target == OverrideTarget::Demography) {
      if (!m) throw DecomposeError("demography override without event models");
      if (!o.demography) throw DecomposeError("demography override needs replacement tables");
      m->tables = *o.demography;
    }
  }
  return m;
}

std::uint64_t chunk_seed(std::uint64_t seed, std::uint64_t year_index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (year_index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SharePath run_scenario(const BaselineInputs& base, const Scenario& scenario, const CounterfactualConfig& config) {
  if (!(config.horizon > 0.0)) throw DecomposeError("horizon must be positive");
  const SimulationConfig& sc = config.sim;
  sc.validate();
  const std::optional<EventModels> models = scenario_models(base, scenario);
  const auto n_years = static_cast<std::size_t>(std::llround(config.horizon));
  const int n_runs = std::max(1, sc.n_runs);

  std::mt19937_64 init_rng = make_rng(sc.rng_seed, 0xfffffffful);
  const Population init = particles_from_snapshot(base.initial, sc.n_particles, sc.events.any(), init_rng);
  std::vector<Population> pops(static_cast<std::size_t>(n_runs), init);

  SharePath path;
  std::vector<std::vector<DistributionSnapshot>> snaps(n_years + 1);
  std::vector<std::map<double, std::vector<double>>> shares(n_years + 1);
  const auto record = [&](std::size_t k, const Population& pop, double t) {
    snaps[k].push_back(snapshot_of(pop, base.initial.grid, t));
    for (double q : config.shares) shares[k][q].push_back(top_share(pop, q));
  };
  for (auto& pop : pops) record(0, pop, base.initial.time);

  for (std::size_t y = 0; y < n_years; ++y) {
    const double t = base.initial.time + static_cast<double>(y);
    for (int r = 0; r < n_runs; ++r) {
      Population& pop = pops[static_cast<std::size_t>(r)];
      const DistributionSnapshot current = snapshot_of(pop, base.initial.grid, t);
      const DriftDiffusionProfile prof = apply_overrides(base, scenario, t, current);
      SimulationConfig c = sc;
      c.horizon = 1.0;
      c.output_every = 1.0;
      c.start_time = t;
      c.n_runs = 1;
      c.rng_seed = chunk_seed(sc.rng_seed, static_cast<std::uint64_t>(y) * 1000003ull + static_cast<std::uint64_t>(r));
      SimulationResult res = simulate(pop, ProfileSchedule::constant(prof), c, models ? &*models : nullptr);
      pop = std::move(res.final_populations.front());
      record(y + 1, pop, t + 1.0);
    }
  }
  for (std::size_t k = 0; k <= n_years; ++k) {
    path.times.push_back(base.initial.time + static_cast<double>(k));
    path.snapshots.push_back(median_snapshot(snaps[k]));
    for (auto& [q, v] : shares[k]) path.shares[q].push_back(median(v));
  }
  return path;
}

CounterfactualResult run_counterfactual(const BaselineInputs& base, const Scenario& scenario,
                                        const CounterfactualConfig& config) {
  CounterfactualResult out;
  out.benchmark = run_scenario(base, Scenario{"benchmark", scenario.start, {}}, config);
  out.counterfactual = run_scenario(base, scenario, config);
  return out;
}

}  // namespace wealthdyn
