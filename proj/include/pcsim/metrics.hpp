#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pcsim/harness.hpp"
#include "pcsim/scenario.hpp"

namespace pcsim {

struct MetricsReport {
  std::size_t samples = 0;
  std::size_t capped_samples = 0;
  double mean_abs_budget_deviation_w = 0.0;    // over capped samples
  double mean_abs_budget_deviation_pct = 0.0;  // of tdp
  double max_temp_c = 0.0;
  double overshoot_c = 0.0;  // max(0, max_temp - t_limit)
  double max_temp_after_settle_c = 0.0;
  double mean_total_power_w = 0.0;
  std::vector<std::uint64_t> retired;  // final record
};

// Settling window excluded from max_temp_after_settle_c.
constexpr SimTime kDefaultSettle = 100'000'000;  // 100 ms

MetricsReport compute_metrics(const Telemetry& t, const Scenario& s, SimTime settle = kDefaultSettle);

// Per-core (b - a) / a in percent.
std::vector<double> retired_deltas_pct(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

struct ComparisonReport {
  ControllerKind a = ControllerKind::Pcf;
  ControllerKind b = ControllerKind::Pcf;
  MetricsReport metrics_a;
  MetricsReport metrics_b;
  std::vector<double> deltas_pct;
};

// Runs both controllers in lockstep on the same scenario.
ComparisonReport compare_policies(const Scenario& s, ControllerKind a, ControllerKind b);

void write_comparison_csv(std::ostream& out, const ComparisonReport& r);
void write_metrics_text(std::ostream& out, const MetricsReport& m);

}  // namespace pcsim
