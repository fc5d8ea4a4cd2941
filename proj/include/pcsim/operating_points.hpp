#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pcsim {

// Discrete frequency levels with their minimum supply voltage, plus the
// partition of cores into voltage domains (one VRM rail per domain).
class OperatingPointTable {
 public:
  OperatingPointTable() = default;
  OperatingPointTable(std::vector<double> levels_hz, std::vector<double> level_volts,
                      std::vector<std::vector<std::size_t>> domains, std::size_t core_count);

  // 0.4-2.0 GHz in 0.1 GHz steps; 0.60 V up to 0.9 GHz, 0.75 V up to 1.5 GHz, 0.90 V above.
  static OperatingPointTable standard(std::vector<std::vector<std::size_t>> domains, std::size_t core_count);
  static std::vector<std::vector<std::size_t>> single_domain(std::size_t core_count);

  std::span<const double> levels() const { return levels_; }
  std::span<const double> level_volts() const { return volts_; }
  double f_min() const { return levels_.front(); }
  double f_max() const { return levels_.back(); }
  double v_min() const { return volts_.front(); }
  double v_max() const { return volts_.back(); }

  // Largest level <= f, never below f_min.
  double floor_level(double f) const;
  // Index of floor_level(f).
  std::size_t floor_index(double f) const;
  // Minimum voltage of the smallest level that is >= f.
  double min_voltage_for(double f) const;
  bool is_level(double f) const;
  bool within_frequency_bounds(double f) const;
  bool within_voltage_bounds(double v) const;

  std::size_t core_count() const { return domain_of_.size(); }
  const std::vector<std::vector<std::size_t>>& domains() const { return domains_; }
  std::size_t domain_of(std::size_t core) const { return domain_of_.at(core); }

  // Expands one value per domain to one value per core.
  std::vector<double> expand(std::span<const double> per_domain) const;

 private:
  std::vector<double> levels_;
  std::vector<double> volts_;
  std::vector<std::vector<std::size_t>> domains_;
  std::vector<std::size_t> domain_of_;
};

}  // namespace pcsim
