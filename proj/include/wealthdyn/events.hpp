#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <random>
#include <vector>

#include "wealthdyn/copula.hpp"
#include "wealthdyn/grid.hpp"
#include "wealthdyn/population.hpp"

namespace wealthdyn {

/// Annual rates indexed by [year][age][sex][order]. Ages past the last row use the last row;
/// years outside the table are an error unless the table is stationary.
class AgeSexTable {
 public:
  AgeSexTable() = default;
  AgeSexTable(int first_year, int n_years, int n_ages, int n_orders, std::vector<double> values);
  /// One rate for every year, age, sex and order.
  static AgeSexTable constant(double rate, int n_ages = 121, int n_orders = 1);
  /// Stationary table from per-age rates (same for both sexes and all orders).
  static AgeSexTable by_age(const std::vector<double>& rate_by_age, int n_orders = 1);

  double at(int year, int age, Sex sex, int order = 0) const;
  bool empty() const { return values_.empty(); }
  bool covers(int year) const { return stationary_ || (year >= first_year_ && year < first_year_ + n_years_); }
  double max_rate() const;
  void set_stationary(bool s) { stationary_ = s; }
  int n_ages() const { return n_ages_; }
  int n_orders() const { return n_orders_; }

 private:
  int first_year_ = 0;
  int n_years_ = 0;
  int n_ages_ = 0;
  int n_orders_ = 1;
  bool stationary_ = false;
  std::vector<double> values_;
};

/// Scalar rate per year (stationary by default).
struct YearSeries {
  int first_year = 0;
  std::vector<double> values{0.0};
  bool stationary = true;

  static YearSeries constant(double v) { return YearSeries{0, {v}, true}; }
  double at(int year) const;
};

struct DemographyTables {
  AgeSexTable mortality;
  AgeSexTable fertility;  // by birth order
  AgeSexTable marriage_rate;
  AgeSexTable divorce_rate;
  DistributionSnapshot endowment;  // h: wealth density at entry
  YearSeries birth_rate = YearSeries::constant(0.0);
  YearSeries population_growth = YearSeries::constant(0.0);

  /// All-zero stationary tables with a point-mass endowment in the bin containing `w`.
  static DemographyTables zeros(const WealthGrid& grid, double endowment_wealth = 0.0);
  void validate() const;
};

struct EstateBracket {
  double lower = 0.0;  // taxable-estate threshold (estate minus exemption)
  double rate = 0.0;
};

struct EstateTaxYear {
  double exemption = 0.0;
  std::vector<EstateBracket> brackets;
};

struct EstateTaxSchedule {
  std::map<int, EstateTaxYear> years;
  bool stationary = false;

  static EstateTaxSchedule none();
  static EstateTaxSchedule constant(const EstateTaxYear& y);
  const EstateTaxYear& at(int year) const;
  void validate() const;
};

double estate_tax_due(double estate, const EstateTaxSchedule& schedule, int year);

struct InheritanceModel {
  std::array<double, 4> phi_coeffs{1.0, 0.0, 0.0, 0.0};  // phi(r) = c0 + c1 r + c2 r^2 + c3 r^3
  double joe_theta = 1.0;
  double kendall_tau_target = 0.083;

  /// Coefficients rescaled so that phi integrates to one; throws if phi < 0 somewhere on [0,1].
  static InheritanceModel with_phi(std::array<double, 4> coeffs, double kendall_tau = 0.083);
  void validate() const;
};

double extensive_margin_phi(double rank, const InheritanceModel& model);
/// int_0^r phi.
double phi_cdf(double rank, const InheritanceModel& model);
double phi_cdf_inverse(double p, const InheritanceModel& model);

struct MarriageModel {
  double frank_theta = 0.0;
  double kendall_tau_target = 0.28;
  std::vector<double> divorce_share_values;  // support of the share kept by the woman
  std::vector<double> divorce_share_probs;   // empty -> 50/50 split

  static MarriageModel calibrated(double kendall_tau = 0.28);
  template <class Rng>
  double sample_divorce_share(Rng& rng) const;
};

template <class Rng>
double MarriageModel::sample_divorce_share(Rng& rng) const {
  if (divorce_share_values.empty()) return 0.5;
  std::discrete_distribution<std::size_t> d(divorce_share_probs.begin(), divorce_share_probs.end());
  return divorce_share_values[d(rng)];
}

struct EventModels {
  DemographyTables tables;
  EstateTaxSchedule estate = EstateTaxSchedule::none();
  InheritanceModel inheritance;
  MarriageModel marriage;
  double age_band = 10.0;   // width of the age bands used for within-age wealth ranks
  double entry_age = 20.0;  // age at which births enter the population
};

struct EventToggles {
  bool demography = false;
  bool inheritance = false;
  bool marriage = false;
  bool any() const { return demography || inheritance || marriage; }
};

/// Integrated per-bin effects on the CDF, per year, at bin upper edges.
struct EventEffects {
  WealthGrid grid;
  double time = 0.0;
  Eigen::VectorXd Z;
  Eigen::VectorXd Xi;
  Eigen::VectorXd X;

  static EventEffects zeros(const WealthGrid& grid, double time = 0.0);
  Eigen::VectorXd total() const { return Z + Xi + X; }
};

struct Heir {
  double age;
  Sex sex;
};

/// Children over the decedent's past lifetime, thinned by child mortality up to `year`.
std::vector<Heir> simulate_heirs(const Particle& decedent, const DemographyTables& tables, int year,
                                 std::mt19937_64& rng);

/// One event phase in fixed order: deaths, inheritance, births, marriages, divorces.
/// Requires equal particle weights. Dead particles are removed before returning.
EventLog apply_events(Population& pop, const EventModels& models, const EventToggles& toggles, double year,
                      double dt, std::mt19937_64& rng);

enum class EventKind { Demography, Inheritance, Marriage };

/// CDF-level effect of one event kind over a step of length dt, averaged over n_reps.
/// Demography includes the -n_t F normalization term.
EventEffects effect_on_cdf(const Population& pop, const WealthGrid& grid, EventKind kind,
                           const EventModels& models, double year, double dt, std::mt19937_64& rng,
                           int n_reps = 5);

/// Marital-status stocks by [year][age], one set per sex.
struct MaritalStocks {
  int first_year = 0;
  int first_age = 0;
  Eigen::MatrixXd never_married;  // rows: years, cols: ages
  Eigen::MatrixXd married;
  Eigen::MatrixXd divorced;
};

struct MaritalRates {
  Eigen::MatrixXd marriage_raw;  // (years-1) x (ages-1); NaN where undefined
  Eigen::MatrixXd divorce_raw;
  Eigen::MatrixXd marriage;      // winsorized and smoothed
  Eigen::MatrixXd divorce;
};

MaritalRates marriage_divorce_rates_from_stocks(const MaritalStocks& stocks, double winsor = 0.10,
                                                int window = 10);

}  // namespace wealthdyn
