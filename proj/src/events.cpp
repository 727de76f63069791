#include "wealthdyn/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace wealthdyn {

std::int64_t count_alive(const Population& pop) {
  return std::count_if(pop.begin(), pop.end(), [](const Particle& p) { return p.alive; });
}

void compact(Population& pop) {
  std::vector<std::int64_t> remap(pop.size(), -1);
  std::int64_t next = 0;
  for (std::size_t i = 0; i < pop.size(); ++i)
    if (pop[i].alive) remap[i] = next++;
  Population out;
  out.reserve(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].alive) continue;
    Particle p = pop[i];
    p.partner = p.partner >= 0 ? remap[static_cast<std::size_t>(p.partner)] : -1;
    out.push_back(p);
  }
  pop.swap(out);
}

// ---------------------------------------------------------------- tables

AgeSexTable::AgeSexTable(int first_year, int n_years, int n_ages, int n_orders, std::vector<double> values)
    : first_year_(first_year), n_years_(n_years), n_ages_(n_ages), n_orders_(n_orders), values_(std::move(values)) {
  if (n_years < 1 || n_ages < 1 || n_orders < 1) throw std::invalid_argument("rate table dimensions must be positive");
  if (values_.size() != static_cast<std::size_t>(n_years) * n_ages * 2 * n_orders)
    throw std::invalid_argument("rate table size does not match its dimensions");
  for (double r : values_)
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("rates must lie in [0, 1]");
}

AgeSexTable AgeSexTable::constant(double rate, int n_ages, int n_orders) {
  AgeSexTable t(0, 1, n_ages, n_orders, std::vector<double>(static_cast<std::size_t>(n_ages) * 2 * n_orders, rate));
  t.stationary_ = true;
  return t;
}

AgeSexTable AgeSexTable::by_age(const std::vector<double>& rate_by_age, int n_orders) {
  const int n_ages = static_cast<int>(rate_by_age.size());
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(n_ages) * 2 * n_orders);
  for (int a = 0; a < n_ages; ++a)
    for (int s = 0; s < 2; ++s)
      for (int o = 0; o < n_orders; ++o) v.push_back(rate_by_age[static_cast<std::size_t>(a)]);
  AgeSexTable t(0, 1, n_ages, n_orders, std::move(v));
  t.stationary_ = true;
  return t;
}

double AgeSexTable::at(int year, int age, Sex sex, int order) const {
  if (values_.empty()) return 0.0;
  int y = year - first_year_;
  if (y < 0 || y >= n_years_) {
    if (!stationary_) throw std::out_of_range("missing table years: " + std::to_string(year));
    y = std::clamp(y, 0, n_years_ - 1);
  }
  const int a = std::clamp(age, 0, n_ages_ - 1);
  const int o = std::clamp(order, 0, n_orders_ - 1);
  const std::size_t idx = ((static_cast<std::size_t>(y) * n_ages_ + a) * 2 + static_cast<int>(sex)) * n_orders_ + o;
  return values_[idx];
}

double AgeSexTable::max_rate() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double YearSeries::at(int year) const {
  if (values.empty()) return 0.0;
  int y = year - first_year;
  if (y < 0 || y >= static_cast<int>(values.size())) {
    if (!stationary) throw std::out_of_range("missing series year: " + std::to_string(year));
    y = std::clamp(y, 0, static_cast<int>(values.size()) - 1);
  }
  return values[static_cast<std::size_t>(y)];
}

DemographyTables DemographyTables::zeros(const WealthGrid& grid, double endowment_wealth) {
  DemographyTables t;
  t.mortality = AgeSexTable::constant(0.0);
  t.fertility = AgeSexTable::constant(0.0);
  t.marriage_rate = AgeSexTable::constant(0.0);
  t.divorce_rate = AgeSexTable::constant(0.0);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.n_bins));
  const auto i = std::clamp<std::ptrdiff_t>(grid.locate(asinh(endowment_wealth)), 0,
                                            static_cast<std::ptrdiff_t>(grid.n_bins) - 1);
  m[i] = 1.0;
  t.endowment = DistributionSnapshot(0.0, grid, m);
  return t;
}

void DemographyTables::validate() const {
  if (endowment.mass.size() == 0) throw std::invalid_argument("endowment density missing");
  if (std::abs(endowment.total_mass() - 1.0) > 1e-9) throw std::invalid_argument("endowment density must integrate to 1");
}

// ---------------------------------------------------------------- estate tax

EstateTaxSchedule EstateTaxSchedule::none() { return constant(EstateTaxYear{}); }

EstateTaxSchedule EstateTaxSchedule::constant(const EstateTaxYear& y) {
  EstateTaxSchedule s;
  s.years[0] = y;
  s.stationary = true;
  s.validate();
  return s;
}

const EstateTaxYear& EstateTaxSchedule::at(int year) const {
  if (years.empty()) throw std::out_of_range("estate-tax schedule is empty");
  auto it = years.find(year);
  if (it != years.end()) return it->second;
  if (!stationary) throw std::out_of_range("year outside estate-tax table: " + std::to_string(year));
  it = years.upper_bound(year);
  return it == years.begin() ? it->second : std::prev(it)->second;
}

void EstateTaxSchedule::validate() const {
  for (const auto& [year, y] : years) {
    if (!(y.exemption >= 0.0)) throw std::invalid_argument("estate exemption must be nonnegative");
    for (std::size_t k = 0; k < y.brackets.size(); ++k) {
      const auto& b = y.brackets[k];
      if (!(b.rate >= 0.0 && b.rate <= 1.0)) throw std::invalid_argument("estate-tax rates must lie in [0, 1]");
      if (k > 0 && !(b.lower > y.brackets[k - 1].lower)) throw std::invalid_argument("estate brackets must be sorted");
      if (b.lower < 0.0) throw std::invalid_argument("estate bracket thresholds must be nonnegative");
    }
  }
}

double estate_tax_due(double estate, const EstateTaxSchedule& schedule, int year) {
  if (!(estate >= 0.0)) throw std::invalid_argument("estate must be nonnegative");
  const EstateTaxYear& y = schedule.at(year);
  const double taxable = estate - y.exemption;
  if (taxable <= 0.0) return 0.0;
  double tax = 0.0;
  for (std::size_t k = 0; k < y.brackets.size(); ++k) {
    const double lo = y.brackets[k].lower;
    const double hi = k + 1 < y.brackets.size() ? y.brackets[k + 1].lower : std::numeric_limits<double>::infinity();
    const double overlap = std::clamp(taxable - lo, 0.0, hi - lo);
    tax += y.brackets[k].rate * overlap;
  }
  return tax;
}

// ---------------------------------------------------------------- inheritance margins

InheritanceModel InheritanceModel::with_phi(std::array<double, 4> c, double kendall_tau) {
  const double integral = c[0] + c[1] / 2.0 + c[2] / 3.0 + c[3] / 4.0;
  if (!(integral > 0.0)) throw std::invalid_argument("phi must have a positive integral");
  for (double& x : c) x /= integral;
  InheritanceModel m;
  m.phi_coeffs = c;
  m.kendall_tau_target = kendall_tau;
  m.joe_theta = calibrate_copula_theta(CopulaFamily::Joe, kendall_tau);
  m.validate();
  return m;
}

void InheritanceModel::validate() const {
  const auto& c = phi_coeffs;
  const double integral = c[0] + c[1] / 2.0 + c[2] / 3.0 + c[3] / 4.0;
  if (std::abs(integral - 1.0) > 1e-10) throw std::invalid_argument("phi must integrate to 1 on [0, 1]");
  std::vector<double> pts{0.0, 1.0};
  // Critical points of the cubic: c1 + 2 c2 r + 3 c3 r^2 = 0.
  const double qa = 3 * c[3], qb = 2 * c[2], qc = c[1];
  if (std::abs(qa) > 1e-300) {
    const double disc = qb * qb - 4 * qa * qc;
    if (disc >= 0) {
      pts.push_back((-qb + std::sqrt(disc)) / (2 * qa));
      pts.push_back((-qb - std::sqrt(disc)) / (2 * qa));
    }
  } else if (std::abs(qb) > 1e-300) {
    pts.push_back(-qc / qb);
  }
  for (double r : pts)
    if (r >= 0.0 && r <= 1.0 && extensive_margin_phi(r, *this) < -1e-12)
      throw std::invalid_argument("phi must be nonnegative on [0, 1]");
  validate_copula_theta(CopulaFamily::Joe, joe_theta);
}

double extensive_margin_phi(double r, const InheritanceModel& m) {
  const auto& c = m.phi_coeffs;
  return ((c[3] * r + c[2]) * r + c[1]) * r + c[0];
}

double phi_cdf(double r, const InheritanceModel& m) {
  const auto& c = m.phi_coeffs;
  return (((c[3] / 4.0 * r + c[2] / 3.0) * r + c[1] / 2.0) * r + c[0]) * r;
}

double phi_cdf_inverse(double p, const InheritanceModel& m) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi_cdf(mid, m) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

MarriageModel MarriageModel::calibrated(double kendall_tau) {
  MarriageModel m;
  m.kendall_tau_target = kendall_tau;
  m.frank_theta = calibrate_copula_theta(CopulaFamily::Frank, kendall_tau);
  return m;
}

EventEffects EventEffects::zeros(const WealthGrid& grid, double time) {
  const auto n = static_cast<Eigen::Index>(grid.n_bins);
  return EventEffects{grid, time, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
}

// ---------------------------------------------------------------- heirs

std::vector<Heir> simulate_heirs(const Particle& d, const DemographyTables& tables, int year, std::mt19937_64& rng) {
  if (!(d.age >= 0.0)) throw std::invalid_argument("decedent age must be nonnegative");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Heir> heirs;
  const int age = static_cast<int>(std::floor(d.age));
  int order = 0;
  for (int a = 0; a < age; ++a) {
    const int birth_year = year - (age - a);
    const double rate = tables.fertility.at(birth_year, a, d.sex, order);
    if (rate <= 0.0 || unif(rng) >= rate) continue;
    ++order;
    const Sex sex = unif(rng) < 0.5 ? Sex::F : Sex::M;
    const double child_age = d.age - a - 0.5;
    bool alive = true;
    for (int k = 0; k < static_cast<int>(std::floor(child_age)) && alive; ++k) {
      const double q = tables.mortality.at(birth_year + k, k, sex);
      if (q > 0.0 && unif(rng) < q) alive = false;
    }
    if (alive) heirs.push_back({child_age, sex});
  }
  return heirs;
}

// ---------------------------------------------------------------- event phase

namespace {

struct PhaseRecord {
  std::vector<double> death_wealth;
  std::vector<double> birth_wealth;
  std::vector<char> decedent;  // per original index
};

double event_probability(double rate, double dt) {
  const double p = rate * dt;
  if (p > 1.0 + 1e-12) throw std::invalid_argument("time step too coarse for event rate");
  return p;
}

double common_weight(const Population& pop) {
  double w = -1.0;
  for (const auto& p : pop) {
    if (!p.alive) continue;
    if (w < 0.0)
      w = p.weight;
    else if (std::abs(p.weight - w) > 1e-12 * w)
      throw std::invalid_argument("event simulation requires equal particle weights");
  }
  return w < 0.0 ? 1.0 : w;
}

double sample_endowment(const DistributionSnapshot& h, std::mt19937_64& rng) {
  std::discrete_distribution<Eigen::Index> bin(h.mass.data(), h.mass.data() + h.mass.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto b = static_cast<std::size_t>(bin(rng));
  return asinh_inv(h.grid.lower_edge(b) + unif(rng) * h.grid.bin_width);
}

int age_band(double age, double width) { return static_cast<int>(std::floor(age / width)); }

void route_bequests(Population& pop, const std::vector<std::size_t>& decedents, const EventModels& models, int year,
                    std::mt19937_64& rng, EventLog& log) {
  std::vector<char> dying(pop.size(), 0);
  for (auto i : decedents) dying[i] = 1;

  // Estate rank reference: wealth of everyone alive at the start of the phase.
  std::vector<double> sorted_wealth;
  for (const auto& p : pop)
    if (p.alive) sorted_wealth.push_back(p.wealth);
  std::sort(sorted_wealth.begin(), sorted_wealth.end());

  // Recipient pools by (sex, age band), sorted by wealth.
  std::map<std::pair<int, int>, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].alive || dying[i]) continue;
    pools[{static_cast<int>(pop[i].sex), age_band(pop[i].age, models.age_band)}].push_back(i);
  }
  for (auto& [key, idx] : pools)
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pop[a].wealth < pop[b].wealth; });

  for (auto d : decedents) {
    Particle& dec = pop[d];
    const std::int64_t sp = dec.partner;
    if (sp >= 0) {
      Particle& spouse = pop[static_cast<std::size_t>(sp)];
      spouse.partner = -1;
      dec.partner = -1;
      if (!dying[static_cast<std::size_t>(sp)]) {
        spouse.wealth += dec.wealth;
        ++log.spousal_bequests;
        continue;
      }
    }
    const double estate = dec.wealth;
    if (estate <= 0.0) continue;
    const double tax = estate_tax_due(estate, models.estate, year);
    const double net = estate - tax;
    std::vector<std::size_t> recipients;
    for (const Heir& h : simulate_heirs(dec, models.tables, year, rng)) {
      auto it = pools.find({static_cast<int>(h.sex), age_band(h.age, models.age_band)});
      if (it == pools.end() || it->second.empty()) continue;
      const auto& pool = it->second;
      const double u = static_cast<double>(std::lower_bound(sorted_wealth.begin(), sorted_wealth.end(), estate) -
                                           sorted_wealth.begin()) /
                       static_cast<double>(sorted_wealth.size());
      const double v = copula_sample(CopulaFamily::Joe, models.inheritance.joe_theta, u, rng);
      const double r = phi_cdf_inverse(v, models.inheritance);
      const auto k = std::min(pool.size() - 1, static_cast<std::size_t>(r * static_cast<double>(pool.size())));
      recipients.push_back(pool[k]);
    }
    if (recipients.empty()) {
      ++log.unassigned_estates;
      log.unassigned_wealth += net;
      continue;
    }
    log.estate_tax_collected += tax;
    ++log.child_bequests;
    const double share = net / static_cast<double>(recipients.size());
    for (auto r : recipients) pop[r].wealth += share;
    log.heirs_paid += static_cast<std::int64_t>(recipients.size());
  }
}

void marriages(Population& pop, const EventModels& models, int year, double dt, std::mt19937_64& rng,
               EventLog& log, std::vector<char>& newly_married) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> women, men;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const Particle& p = pop[i];
    if (!p.alive || p.married()) continue;
    const double prob = event_probability(
        models.tables.marriage_rate.at(year, static_cast<int>(std::floor(p.age)), p.sex), dt);
    if (prob > 0.0 && unif(rng) < prob) (p.sex == Sex::F ? women : men).push_back(i);
  }
  if (women.empty() || men.empty()) return;
  auto by_wealth = [&](std::size_t a, std::size_t b) { return pop[a].wealth < pop[b].wealth; };
  std::sort(women.begin(), women.end(), by_wealth);
  std::sort(men.begin(), men.end(), by_wealth);
  std::vector<std::size_t> order(women.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::set<std::size_t> free_men;
  for (std::size_t k = 0; k < men.size(); ++k) free_men.insert(k);
  const double nw = static_cast<double>(women.size()), nm = static_cast<double>(men.size());
  for (std::size_t rank : order) {
    if (free_men.empty()) break;
    const double u = (static_cast<double>(rank) + 0.5) / nw;
    const double v = copula_sample(CopulaFamily::Frank, models.marriage.frank_theta, u, rng);
    const double target = v * nm - 0.5;
    // Nearest free man in rank to the copula draw.
    auto it = free_men.lower_bound(static_cast<std::size_t>(std::max(0.0, std::ceil(target))));
    if (it == free_men.end()) {
      it = std::prev(it);
    } else if (it != free_men.begin()) {
      auto below = std::prev(it);
      if (target - static_cast<double>(*below) < static_cast<double>(*it) - target) it = below;
    }
    const std::size_t wi = women[rank], mi = men[*it];
    free_men.erase(it);
    const double pooled = 0.5 * (pop[wi].wealth + pop[mi].wealth);
    pop[wi].wealth = pooled;
    pop[mi].wealth = pooled;
    pop[wi].partner = static_cast<std::int64_t>(mi);
    pop[mi].partner = static_cast<std::int64_t>(wi);
    newly_married[wi] = newly_married[mi] = 1;
    ++log.marriages;
  }
}

void divorces(Population& pop, const EventModels& models, int year, double dt, std::mt19937_64& rng, EventLog& log,
              const std::vector<char>& newly_married) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    Particle& a = pop[i];
    if (!a.alive || !a.married() || newly_married[i]) continue;
    const auto j = static_cast<std::size_t>(a.partner);
    if (j < i) continue;  // each couple once
    Particle& b = pop[j];
    Particle& woman = a.sex == Sex::F ? a : b;
    Particle& man = a.sex == Sex::F ? b : a;
    const double prob = event_probability(
        models.tables.divorce_rate.at(year, static_cast<int>(std::floor(woman.age)), Sex::F), dt);
    if (!(prob > 0.0 && unif(rng) < prob)) continue;
    const double total = woman.wealth + man.wealth;
    const double s = models.marriage.sample_divorce_share(rng);
    woman.wealth = s * total;
    man.wealth = total - woman.wealth;
    a.partner = b.partner = -1;
    ++log.divorces;
  }
}

EventLog event_phase(Population& pop, const EventModels& models, const EventToggles& toggles, double year,
                     double dt, std::mt19937_64& rng, PhaseRecord* rec) {
  EventLog log;
  if (!toggles.any()) return log;
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double weight = common_weight(pop);
  const int iy = static_cast<int>(std::floor(year + 1e-9));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (rec) rec->decedent.assign(pop.size(), 0);

  if (toggles.demography || toggles.inheritance) {
    std::vector<std::size_t> decedents;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const Particle& p = pop[i];
      if (!p.alive) continue;
      const double prob =
          event_probability(models.tables.mortality.at(iy, static_cast<int>(std::floor(p.age)), p.sex), dt);
      if (prob > 0.0 && unif(rng) < prob) decedents.push_back(i);
    }
    if (toggles.inheritance) {
      route_bequests(pop, decedents, models, iy, rng, log);
    } else {
      for (auto d : decedents) {
        const std::int64_t sp = pop[d].partner;
        if (sp >= 0) pop[static_cast<std::size_t>(sp)].partner = -1;
        pop[d].partner = -1;
      }
    }
    for (auto d : decedents) {
      pop[d].alive = false;
      if (rec) {
        rec->decedent[d] = 1;
        rec->death_wealth.push_back(pop[d].wealth);
      }
    }
    log.deaths += static_cast<std::int64_t>(decedents.size());
  }

  if (toggles.demography) {
    const double expected = models.tables.birth_rate.at(iy) * static_cast<double>(count_alive(pop) + log.deaths) * dt;
    auto n_births = static_cast<std::int64_t>(std::floor(expected));
    if (unif(rng) < expected - static_cast<double>(n_births)) ++n_births;
    for (std::int64_t k = 0; k < n_births; ++k) {
      Particle p;
      p.wealth = sample_endowment(models.tables.endowment, rng);
      p.age = models.entry_age;
      p.sex = unif(rng) < 0.5 ? Sex::F : Sex::M;
      p.weight = weight;
      pop.push_back(p);
      if (rec) rec->birth_wealth.push_back(p.wealth);
    }
    log.births += n_births;
  }

  if (toggles.marriage) {
    std::vector<char> newly(pop.size(), 0);
    marriages(pop, models, iy, dt, rng, log, newly);
    divorces(pop, models, iy, dt, rng, log, newly);
  }
  return log;
}

// Adds weight w at the first edge at or above asinh(wealth) and all later edges.
void add_cumulative(Eigen::VectorXd& acc, const WealthGrid& grid, double wealth, double w) {
  const auto b = grid.locate(asinh(wealth));
  if (b >= static_cast<std::ptrdiff_t>(grid.n_bins)) return;
  const Eigen::Index start = std::max<std::ptrdiff_t>(b, 0);
  acc.tail(acc.size() - start).array() += w;
}

}  // namespace

EventLog apply_events(Population& pop, const EventModels& models, const EventToggles& toggles, double year, double dt,
                      std::mt19937_64& rng) {
  EventLog log = event_phase(pop, models, toggles, year, dt, rng, nullptr);
  if (toggles.any()) compact(pop);
  return log;
}

EventEffects effect_on_cdf(const Population& pop, const WealthGrid& grid, EventKind kind, const EventModels& models,
                           double year, double dt, std::mt19937_64& rng, int n_reps) {
  if (n_reps < 1) throw std::invalid_argument("n_reps must be positive");
  EventEffects out = EventEffects::zeros(grid, year);
  double total = 0.0;
  Eigen::VectorXd cdf_before = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.n_bins));
  for (const auto& p : pop) {
    if (!p.alive) continue;
    total += p.weight;
    add_cumulative(cdf_before, grid, p.wealth, p.weight);
  }
  if (!(total > 0.0)) throw std::invalid_argument("effect_on_cdf: empty population");
  cdf_before /= total;

  EventToggles toggles;
  toggles.demography = kind == EventKind::Demography;
  toggles.inheritance = kind == EventKind::Inheritance;
  toggles.marriage = kind == EventKind::Marriage;
  const double weight = common_weight(pop);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(cdf_before.size());
  for (int rep = 0; rep < n_reps; ++rep) {
    Population copy = pop;
    PhaseRecord rec;
    event_phase(copy, models, toggles, year, dt, rng, &rec);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(cdf_before.size());
    if (kind == EventKind::Demography) {
      for (double w : rec.birth_wealth) add_cumulative(delta, grid, w, weight);
      for (double w : rec.death_wealth) add_cumulative(delta, grid, w, -weight);
    } else {
      for (std::size_t i = 0; i < pop.size(); ++i) {
        if (!pop[i].alive || (!rec.decedent.empty() && rec.decedent[i])) continue;
        if (copy[i].wealth == pop[i].wealth) continue;
        add_cumulative(delta, grid, copy[i].wealth, pop[i].weight);
        add_cumulative(delta, grid, pop[i].wealth, -pop[i].weight);
      }
    }
    acc += delta / (total * dt);
  }
  acc /= n_reps;
  const int iy = static_cast<int>(std::floor(year + 1e-9));
  switch (kind) {
    case EventKind::Demography:
      out.Z = acc - models.tables.population_growth.at(iy) * cdf_before;
      break;
    case EventKind::Inheritance:
      out.Xi = acc;
      break;
    case EventKind::Marriage:
      out.X = acc;
      break;
  }
  return out;
}

// ---------------------------------------------------------------- marital rates

namespace {

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Eigen::MatrixXd winsorize_smooth(const Eigen::MatrixXd& raw, double winsor, int window) {
  std::vector<double> finite;
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    if (std::isfinite(raw.data()[i])) finite.push_back(raw.data()[i]);
  Eigen::MatrixXd w = raw;
  if (!finite.empty() && winsor > 0.0) {
    const double lo = quantile_of(finite, winsor), hi = quantile_of(finite, 1.0 - winsor);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (std::isfinite(w.data()[i])) w.data()[i] = std::clamp(w.data()[i], lo, hi);
  }
  if (window <= 1) return w;
  // Centered window of total width `window`; half weight on the two end offsets when even.
  const int half = window / 2;
  auto kernel = [&](int d) {
    d = std::abs(d);
    if (window % 2 == 0) return d < half ? 1.0 : (d == half ? 0.5 : 0.0);
    return d <= half ? 1.0 : 0.0;
  };
  Eigen::MatrixXd out(w.rows(), w.cols());
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      double s = 0.0, ws = 0.0;
      for (int dr = -half; dr <= half; ++dr) {
        for (int dc = -half; dc <= half; ++dc) {
          const Eigen::Index rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= w.rows() || cc >= w.cols() || !std::isfinite(w(rr, cc))) continue;
          const double k = kernel(dr) * kernel(dc);
          s += k * w(rr, cc);
          ws += k;
        }
      }
      out(r, c) = ws > 0.0 ? s / ws : kMissing;
    }
  }
  return out;
}

}  // namespace

MaritalRates marriage_divorce_rates_from_stocks(const MaritalStocks& st, double winsor, int window) {
  const Eigen::Index ny = st.never_married.rows(), na = st.never_married.cols();
  if (ny < 2 || na < 2 || st.married.rows() != ny || st.married.cols() != na || st.divorced.rows() != ny ||
      st.divorced.cols() != na)
    throw std::invalid_argument("marital stocks must share dimensions of at least 2 x 2");
  for (const Eigen::MatrixXd* m : {&st.never_married, &st.married, &st.divorced})
    if ((m->array() < 0.0).any() || (m->array() > 1.0).any()) throw std::invalid_argument("fractions must lie in [0, 1]");
  MaritalRates out;
  out.marriage_raw = Eigen::MatrixXd::Constant(ny - 1, na - 1, kMissing);
  out.divorce_raw = Eigen::MatrixXd::Constant(ny - 1, na - 1, kMissing);
  for (Eigen::Index t = 0; t + 1 < ny; ++t) {
    for (Eigen::Index a = 0; a + 1 < na; ++a) {
      const double nm = st.never_married(t, a);
      if (!(nm > 0.0)) continue;
      const double m = 1.0 - st.never_married(t + 1, a + 1) / nm;
      out.marriage_raw(t, a) = m;
      const double mar = st.married(t, a);
      if (!(mar > 0.0)) continue;
      out.divorce_raw(t, a) = (st.divorced(t + 1, a + 1) - (1.0 - m) * st.divorced(t, a)) / mar;
    }
  }
  out.marriage = winsorize_smooth(out.marriage_raw, winsor, window);
  out.divorce = winsorize_smooth(out.divorce_raw, winsor, window);
  return out;
}

}  // namespace wealthdyn
