#include "pcsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace pcsim {

MetricsReport compute_metrics(const Telemetry& t, const Scenario& s, SimTime settle) {
  if (t.records.empty()) throw EmptyTelemetry("telemetry has no records");
  MetricsReport m;
  m.samples = t.records.size();
  m.max_temp_c = -std::numeric_limits<double>::infinity();
  m.max_temp_after_settle_c = -std::numeric_limits<double>::infinity();
  double dev_sum = 0.0;
  double power_sum = 0.0;
  for (const auto& r : t.records) {
    const double hottest = *std::max_element(r.temps.begin(), r.temps.end());
    m.max_temp_c = std::max(m.max_temp_c, hottest);
    if (r.time >= settle) m.max_temp_after_settle_c = std::max(m.max_temp_after_settle_c, hottest);
    power_sum += r.total_power;
    if (r.capping && std::isfinite(r.budget)) {
      dev_sum += std::abs(r.total_power - r.budget);
      ++m.capped_samples;
    }
  }
  if (m.capped_samples > 0) m.mean_abs_budget_deviation_w = dev_sum / static_cast<double>(m.capped_samples);
  m.mean_abs_budget_deviation_pct = 100.0 * m.mean_abs_budget_deviation_w / s.tdp_w;
  m.overshoot_c = std::max(0.0, m.max_temp_c - s.t_limit_c);
  m.mean_total_power_w = power_sum / static_cast<double>(m.samples);
  m.retired = t.records.back().retired;
  return m;
}

std::vector<double> retired_deltas_pct(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  require_size(b.size(), a.size(), "retired-instruction comparison");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double base = static_cast<double>(a[i]);
    out[i] = base > 0.0 ? 100.0 * (static_cast<double>(b[i]) - base) / base : 0.0;
  }
  return out;
}

ComparisonReport compare_policies(const Scenario& s, ControllerKind a, ControllerKind b) {
  ComparisonReport r;
  r.a = a;
  r.b = b;
  r.metrics_a = compute_metrics(run_lockstep(s, a).telemetry, s);
  r.metrics_b = compute_metrics(run_lockstep(s, b).telemetry, s);
  r.deltas_pct = retired_deltas_pct(r.metrics_a.retired, r.metrics_b.retired);
  return r;
}

namespace {

void row(std::ostream& out, const std::string& item, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,\n", item.c_str(), a, b);
  out << buf;
}

}  // namespace

void write_comparison_csv(std::ostream& out, const ComparisonReport& r) {
  out << "item," << to_string(r.a) << ',' << to_string(r.b) << ",delta_pct\n";
  char buf[160];
  for (std::size_t i = 0; i < r.deltas_pct.size(); ++i) {
    std::snprintf(buf, sizeof buf, "retired_core_%zu,%llu,%llu,%.6f\n", i,
                  static_cast<unsigned long long>(r.metrics_a.retired[i]),
                  static_cast<unsigned long long>(r.metrics_b.retired[i]), r.deltas_pct[i]);
    out << buf;
  }
  row(out, "max_temp_c", r.metrics_a.max_temp_c, r.metrics_b.max_temp_c);
  row(out, "overshoot_c", r.metrics_a.overshoot_c, r.metrics_b.overshoot_c);
  row(out, "mean_total_power_w", r.metrics_a.mean_total_power_w, r.metrics_b.mean_total_power_w);
  row(out, "budget_deviation_w", r.metrics_a.mean_abs_budget_deviation_w, r.metrics_b.mean_abs_budget_deviation_w);
  row(out, "budget_deviation_pct_tdp", r.metrics_a.mean_abs_budget_deviation_pct,
      r.metrics_b.mean_abs_budget_deviation_pct);
  row(out, "capped_samples", static_cast<double>(r.metrics_a.capped_samples),
      static_cast<double>(r.metrics_b.capped_samples));
}

void write_metrics_text(std::ostream& out, const MetricsReport& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "samples                 %zu\ncapped samples          %zu\n", m.samples,
                m.capped_samples);
  out << buf;
  std::snprintf(buf, sizeof buf, "budget deviation        %.4f W (%.3f %% of TDP)\n", m.mean_abs_budget_deviation_w,
                m.mean_abs_budget_deviation_pct);
  out << buf;
  std::snprintf(buf, sizeof buf, "max temperature         %.3f C (overshoot %.3f C)\n", m.max_temp_c, m.overshoot_c);
  out << buf;
  std::snprintf(buf, sizeof buf, "max temp after settle   %.3f C\nmean total power        %.3f W\n",
                m.max_temp_after_settle_c, m.mean_total_power_w);
  out << buf;
  for (std::size_t i = 0; i < m.retired.size(); ++i) {
    std::snprintf(buf, sizeof buf, "retired core %-2zu         %llu\n", i,
                  static_cast<unsigned long long>(m.retired[i]));
    out << buf;
  }
}

}  // namespace pcsim
