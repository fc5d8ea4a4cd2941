#include "pcsim/operating_points.hpp"

#include <algorithm>
#include <string>

#include "pcsim/common.hpp"

namespace pcsim {

namespace {
constexpr double kLevelTolerance = 1e-6;  // Hz
}

OperatingPointTable::OperatingPointTable(std::vector<double> levels_hz, std::vector<double> level_volts,
                                         std::vector<std::vector<std::size_t>> domains, std::size_t core_count)
    : levels_(std::move(levels_hz)), volts_(std::move(level_volts)), domains_(std::move(domains)) {
  if (levels_.empty()) throw ScenarioInvalid("operating point table has no levels");
  require_size(volts_.size(), levels_.size(), "operating point voltages");
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (!(levels_[i] > levels_[i - 1])) throw ScenarioInvalid("frequency levels must be strictly increasing");
    if (volts_[i] < volts_[i - 1]) throw ScenarioInvalid("voltage must be non-decreasing with frequency");
  }
  if (levels_.front() <= 0.0 || volts_.front() <= 0.0) throw ScenarioInvalid("levels and voltages must be positive");

  domain_of_.assign(core_count, core_count);
  for (std::size_t d = 0; d < domains_.size(); ++d) {
    for (std::size_t core : domains_[d]) {
      if (core >= core_count) throw ScenarioInvalid("voltage domain references core " + std::to_string(core));
      if (domain_of_[core] != core_count) throw ScenarioInvalid("core " + std::to_string(core) + " in two domains");
      domain_of_[core] = d;
    }
  }
  for (std::size_t c = 0; c < core_count; ++c) {
    if (domain_of_[c] == core_count) throw ScenarioInvalid("core " + std::to_string(c) + " has no voltage domain");
  }
}

OperatingPointTable OperatingPointTable::standard(std::vector<std::vector<std::size_t>> domains,
                                                  std::size_t core_count) {
  std::vector<double> levels;
  std::vector<double> volts;
  for (int k = 4; k <= 20; ++k) {
    const double f = k * 1e8;
    levels.push_back(f);
    volts.push_back(k <= 9 ? 0.60 : (k <= 15 ? 0.75 : 0.90));
  }
  return {std::move(levels), std::move(volts), std::move(domains), core_count};
}

std::vector<std::vector<std::size_t>> OperatingPointTable::single_domain(std::size_t core_count) {
  std::vector<std::size_t> all(core_count);
  for (std::size_t i = 0; i < core_count; ++i) all[i] = i;
  return {all};
}

std::size_t OperatingPointTable::floor_index(double f) const {
  // upper_bound on f + tolerance so that a value a hair below a level (from
  // floating-point inversion) still lands on that level.
  auto it = std::upper_bound(levels_.begin(), levels_.end(), f + kLevelTolerance);
  if (it == levels_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(levels_.begin(), it) - 1);
}

double OperatingPointTable::floor_level(double f) const { return levels_[floor_index(f)]; }

double OperatingPointTable::min_voltage_for(double f) const {
  auto it = std::lower_bound(levels_.begin(), levels_.end(), f - kLevelTolerance);
  if (it == levels_.end()) return volts_.back();
  return volts_[static_cast<std::size_t>(std::distance(levels_.begin(), it))];
}

bool OperatingPointTable::is_level(double f) const {
  return std::any_of(levels_.begin(), levels_.end(), [f](double l) { return std::abs(l - f) <= kLevelTolerance; });
}

bool OperatingPointTable::within_frequency_bounds(double f) const {
  return f >= f_min() - kLevelTolerance && f <= f_max() + kLevelTolerance;
}

bool OperatingPointTable::within_voltage_bounds(double v) const {
  return v >= v_min() - 1e-9 && v <= v_max() + 1e-9;
}

std::vector<double> OperatingPointTable::expand(std::span<const double> per_domain) const {
  require_size(per_domain.size(), domains_.size(), "per-domain values");
  std::vector<double> out(domain_of_.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = per_domain[domain_of_[c]];
  return out;
}

}  // namespace pcsim
