#pragma once

#include <cstdint>
#include <vector>

namespace wealthdyn {

enum class Sex : std::uint8_t { F = 0, M = 1 };

struct Particle {
  double wealth = 0.0;  // multiples of average national income
  double age = 0.0;     // years
  double weight = 1.0;  // population weight
  Sex sex = Sex::F;
  std::int64_t partner = -1;  // index of spouse in the population vector; -1 when single
  bool alive = true;

  bool married() const { return partner >= 0; }
};

using Population = std::vector<Particle>;

/// Counts of events applied during a step or run.
struct EventLog {
  std::int64_t births = 0;
  std::int64_t deaths = 0;
  std::int64_t marriages = 0;
  std::int64_t divorces = 0;
  std::int64_t spousal_bequests = 0;
  std::int64_t child_bequests = 0;
  std::int64_t heirs_paid = 0;
  std::int64_t unassigned_estates = 0;
  double estate_tax_collected = 0.0;
  double unassigned_wealth = 0.0;
  std::int64_t clamped_low = 0;
  std::int64_t clamped_high = 0;

  EventLog& operator+=(const EventLog& o);
};

inline EventLog& EventLog::operator+=(const EventLog& o) {
  births += o.births;
  deaths += o.deaths;
  marriages += o.marriages;
  divorces += o.divorces;
  spousal_bequests += o.spousal_bequests;
  child_bequests += o.child_bequests;
  heirs_paid += o.heirs_paid;
  unassigned_estates += o.unassigned_estates;
  estate_tax_collected += o.estate_tax_collected;
  unassigned_wealth += o.unassigned_wealth;
  clamped_low += o.clamped_low;
  clamped_high += o.clamped_high;
  return *this;
}

std::int64_t count_alive(const Population& pop);

/// Drops dead particles and remaps partner indices.
void compact(Population& pop);

}  // namespace wealthdyn
