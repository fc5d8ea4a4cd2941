#include "pcsim/pcf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <variant>

namespace pcsim::pcf {

namespace {
constexpr double kMaxCorrection = 0.2;
}  // namespace

void PcfConfig::validate() const {
  const std::size_t n = core_count();
  if (n == 0) throw ScenarioInvalid("pcf: operating point table has no cores");
  if (pvct_period <= 0 || pfct_period <= 0) throw ScenarioInvalid("pcf: task periods must be positive");
  if (pfct_period % pvct_period != 0) throw ScenarioInvalid("pcf: pfct period must be a multiple of the pvct period");
  if (!(t_margin < t_limit)) throw ScenarioInvalid("pcf: t_margin must be below t_limit");
  if (pid.kp < 0.0 || pid.ki < 0.0 || pid.kd < 0.0) throw ScenarioInvalid("pcf: pid gains must be >= 0");
  require_size(p_min.size(), n, "pcf p_min");
  for (double p : p_min) {
    if (p < 0.0) throw ScenarioInvalid("pcf: p_min must be >= 0");
  }
  if (!(initial_budget > 0.0)) throw ScenarioInvalid("pcf: initial budget must be > 0");
  if (budget_feedback_gain < 0.0) throw ScenarioInvalid("pcf: budget feedback gain must be >= 0");
  require_size(model.core_count(), n, "pcf power model");
  if (fixed_voltage && !table.within_voltage_bounds(*fixed_voltage)) {
    throw ScenarioInvalid("pcf: fixed voltage outside the operating point table");
  }
}

PowerEstimate p4_estimate_power(const plant::PowerParams& model, std::span<const double> temps,
                                std::span<const double> ceff_multipliers, std::span<const double> freqs,
                                std::span<const double> volts) {
  const std::size_t n = model.core_count();
  require_size(temps.size(), n, "p4 temperatures");
  require_size(ceff_multipliers.size(), n, "p4 workload");
  require_size(freqs.size(), n, "p4 frequencies");
  require_size(volts.size(), n, "p4 voltages");
  PowerEstimate out;
  out.per_core.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ceff = model.ceff_base[i] * ceff_multipliers[i];
    out.per_core[i] = model.kappa(temps[i]) * (model.icc[i] * volts[i] + ceff * freqs[i] * volts[i] * volts[i]);
    out.total += out.per_core[i];
  }
  return out;
}

CapResult p5_alpha_power_cap(std::span<const double> targets, std::span<const double> p_min, double budget) {
  require_size(p_min.size(), targets.size(), "p5 p_min");
  CapResult out;
  out.capped.assign(targets.begin(), targets.end());
  const double sum_t = std::accumulate(targets.begin(), targets.end(), 0.0);
  if (sum_t <= budget) return out;

  out.engaged = true;
  const double sum_min = std::accumulate(p_min.begin(), p_min.end(), 0.0);
  if (budget <= sum_min) {
    out.infeasible = budget < sum_min;
    out.alpha = 0.0;
    out.capped.assign(p_min.begin(), p_min.end());
    return out;
  }
  out.alpha = std::clamp((budget - sum_min) / (sum_t - sum_min), 0.0, 1.0);
  for (std::size_t i = 0; i < targets.size(); ++i) out.capped[i] = p_min[i] + out.alpha * (targets[i] - p_min[i]);
  return out;
}

std::vector<double> p6_thermal_pid(std::span<const double> temps, std::span<const double> caps_in,
                                   std::span<const double> p_min, const PidGains& gains, double t_margin, double dt,
                                   PidBank& bank) {
  const std::size_t n = caps_in.size();
  require_size(temps.size(), n, "p6 temperatures");
  require_size(p_min.size(), n, "p6 p_min");
  require_size(bank.integral.size(), n, "p6 pid bank");
  std::vector<double> out(caps_in.begin(), caps_in.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double e = temps[i] - t_margin;
    const double headroom = std::max(0.0, caps_in[i] - p_min[i]);
    const double derivative = bank.has_prev[i] ? (e - bank.prev_error[i]) / dt : 0.0;
    bank.prev_error[i] = e;
    bank.has_prev[i] = true;
    if (e <= 0.0 && bank.integral[i] <= 0.0) {
      bank.integral[i] = 0.0;
      continue;
    }
    const double i_max = gains.ki > 0.0 ? headroom / gains.ki : 0.0;
    bank.integral[i] = std::clamp(bank.integral[i] + e * dt, 0.0, i_max);
    const double r = gains.kp * e + gains.ki * bank.integral[i] + gains.kd * derivative;
    out[i] = caps_in[i] - std::clamp(r, 0.0, headroom);
  }
  return out;
}

FvResult p7_compute_fv(std::span<const double> caps, std::span<const double> temps,
                       std::span<const double> ceff_multipliers, std::span<const double> volts,
                       std::span<const double> os_targets, const OperatingPointTable& table,
                       const plant::PowerParams& model, std::optional<double> fixed_voltage,
                       Quantization quantization, std::vector<double>* carry) {
  const std::size_t n = table.core_count();
  require_size(caps.size(), n, "p7 caps");
  require_size(temps.size(), n, "p7 temperatures");
  require_size(ceff_multipliers.size(), n, "p7 workload");
  require_size(volts.size(), n, "p7 voltages");
  require_size(os_targets.size(), n, "p7 os targets");
  const bool diffuse = quantization == Quantization::ErrorDiffusion && carry != nullptr;
  if (diffuse && carry->size() != n) carry->assign(n, 0.0);

  FvResult out;
  out.freqs.resize(n);
  out.f_raw.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = volts[i];
    const double ceff = model.ceff_base[i] * ceff_multipliers[i];
    const double f_raw = (caps[i] / model.kappa(temps[i]) - model.icc[i] * v) / (ceff * v * v);
    out.f_raw[i] = f_raw;
    const double ceiling = table.floor_level(os_targets[i]);
    const double want = std::min(f_raw, os_targets[i]);
    if (!diffuse) {
      out.freqs[i] = table.floor_level(want);
      continue;
    }
    const double with_carry = want + (*carry)[i];
    const double q = std::min(table.floor_level(with_carry), ceiling);
    double gap = 0.0;
    const std::size_t k = table.floor_index(q);
    if (k + 1 < table.levels().size() && q < ceiling) gap = table.levels()[k + 1] - q;
    (*carry)[i] = std::clamp(with_carry - q, 0.0, gap);
    out.freqs[i] = q;
  }

  const auto& domains = table.domains();
  out.domain_volts.resize(domains.size());
  for (std::size_t d = 0; d < domains.size(); ++d) {
    if (fixed_voltage) {
      out.domain_volts[d] = *fixed_voltage;
      continue;
    }
    double f_top = table.f_min();
    for (std::size_t c : domains[d]) f_top = std::max(f_top, out.freqs[c]);
    out.domain_volts[d] = table.min_voltage_for(f_top);
  }
  return out;
}

Pcf::Pcf(PcfConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t n = config_.core_count();
  state_.pid = PidBank(n);
  state_.os_targets.assign(n, config_.table.f_max());
  state_.budget = config_.initial_budget;
  state_.carry.assign(n, 0.0);
  state_.rail_powers.assign(config_.table.domains().size(), 0.0);
}

std::vector<TaskInfo> Pcf::tasks() const {
  return {{"pvct", config_.pvct_period}, {"pfct", config_.pfct_period}};
}

Setpoints Pcf::run_task(std::size_t task, const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox) {
  if (task == kPvctTask) return pvct_step(snapshot, inbox);
  if (task == kPfctTask) return pfct_step(snapshot, inbox);
  throw OutOfRange("pcf has no task " + std::to_string(task));
}

ControllerStatus Pcf::status() const { return {state_.budget, state_.power_capping, state_.pfct_steps}; }

void Pcf::apply_budget(const scmi::PowerCapSet& cmd, SimTime now) {
  if (cmd.budget_mw == 0) {
    log_.emit(now, "MalformedCommand", "power budget of 0 mW dropped");
    return;
  }
  state_.budget = cmd.watts();
}

void Pcf::apply_target(const scmi::PerfLevelSet& cmd, SimTime now) {
  if (cmd.core >= config_.core_count()) {
    log_.emit(now, "MalformedCommand", "frequency target for unknown core " + std::to_string(cmd.core) + " dropped");
    return;
  }
  const double f = cmd.hertz();
  if (!config_.table.within_frequency_bounds(f)) {
    log_.emit(now, "MalformedCommand", "frequency target " + std::to_string(f) + " Hz outside the table dropped");
    return;
  }
  state_.os_targets[cmd.core] = f;
}

double Pcf::domain_voltage_for(std::span<const double> freqs, std::size_t domain) const {
  if (config_.fixed_voltage) return *config_.fixed_voltage;
  double f_top = config_.table.f_min();
  for (std::size_t c : config_.table.domains()[domain]) f_top = std::max(f_top, freqs[c]);
  return config_.table.min_voltage_for(f_top);
}

std::vector<double> Pcf::initial_domain_volts() const {
  std::vector<double> out(config_.table.domains().size());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = domain_voltage_for(state_.os_targets, d);
  return out;
}

Setpoints Pcf::pvct_step(const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox) {
  ++state_.pvct_steps;
  state_.rail_powers = snapshot.rail_powers;
  if (config_.budget_feedback_gain > 0.0 && state_.cap_engaged && std::isfinite(state_.budget)) {
    const double measured = snapshot.total_rail_power();
    const double step = config_.budget_feedback_gain * to_seconds(config_.pvct_period);
    state_.threshold_correction =
        std::clamp(state_.threshold_correction + step * (state_.budget - measured) / state_.budget, -kMaxCorrection,
                   kMaxCorrection);
  }
  for (const auto& cmd : inbox) {
    if (const auto* cap = std::get_if<scmi::PowerCapSet>(&cmd.message)) {
      apply_budget(*cap, snapshot.time);
    } else if (std::holds_alternative<scmi::PerfLevelSet>(cmd.message)) {
      queued_.push_back(cmd);
    }
  }
  const std::vector<double> domain_volts = state_.fv_computed ? state_.pending_domain_volts : initial_domain_volts();
  Setpoints out;
  out.volts = config_.table.expand(domain_volts);
  return out;
}

Setpoints Pcf::pfct_step(const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox) {
  ++state_.pfct_steps;
  const std::size_t n = config_.core_count();
  const auto& table = config_.table;
  trace_ = StepTrace{};
  trace_.time = snapshot.time;

  // P1: dispatch what the previous step computed.
  if (state_.fv_computed) {
    trace_.dispatched = state_.pending_freqs;
  } else {
    trace_.dispatched.resize(n);
    for (std::size_t i = 0; i < n; ++i) trace_.dispatched[i] = table.floor_level(state_.os_targets[i]);
  }

  // P2: sensors.
  require_size(snapshot.core_count(), n, "pcf snapshot");
  trace_.temps = snapshot.temps;
  trace_.ceff = observer_.observe_ceff(snapshot);

  // P3: commands.
  for (const auto& cmd : queued_) apply_target(std::get<scmi::PerfLevelSet>(cmd.message), snapshot.time);
  queued_.clear();
  for (const auto& cmd : inbox) {
    if (const auto* t = std::get_if<scmi::PerfLevelSet>(&cmd.message)) {
      apply_target(*t, snapshot.time);
    } else if (const auto* cap = std::get_if<scmi::PowerCapSet>(&cmd.message)) {
      apply_budget(*cap, snapshot.time);
    }
  }

  // P4: power each core would draw at its OS target.
  std::vector<double> target_volts(n);
  for (std::size_t d = 0; d < table.domains().size(); ++d) {
    const double v = domain_voltage_for(state_.os_targets, d);
    for (std::size_t c : table.domains()[d]) target_volts[c] = v;
  }
  trace_.estimate = p4_estimate_power(config_.model, trace_.temps, trace_.ceff, state_.os_targets, target_volts);
  state_.power_estimates = trace_.estimate.per_core;

  // P5: budget.
  std::vector<double> p_min(n);
  for (std::size_t i = 0; i < n; ++i) p_min[i] = std::min(config_.p_min[i], trace_.estimate.per_core[i]);
  trace_.cap = p5_alpha_power_cap(trace_.estimate.per_core, p_min, threshold());
  if (trace_.cap.infeasible) {
    log_.emit(snapshot.time, "InfeasibleBudget",
              "budget " + std::to_string(state_.budget) + " W below the sum of per-core minimum power");
  }

  // P6: thermal regulator.
  const double dt = to_seconds(config_.pfct_period);
  trace_.after_pid = p6_thermal_pid(trace_.temps, trace_.cap.capped, p_min, config_.pid, config_.t_margin, dt,
                                    state_.pid);
  bool thermal = false;
  for (std::size_t i = 0; i < n; ++i) thermal = thermal || trace_.after_pid[i] < trace_.cap.capped[i];
  state_.thermal_capping = thermal;
  state_.power_capping = trace_.cap.engaged && !thermal;
  state_.cap_engaged = trace_.cap.engaged;

  // P7: frequencies and domain voltages for the next step.
  const std::vector<double> current_domain =
      state_.fv_computed ? state_.pending_domain_volts : initial_domain_volts();
  const std::vector<double> current_volts = table.expand(current_domain);
  trace_.fv = p7_compute_fv(trace_.after_pid, trace_.temps, trace_.ceff, current_volts, state_.os_targets, table,
                            config_.model, config_.fixed_voltage, config_.quantization, &state_.carry);
  state_.pending_freqs = trace_.fv.freqs;
  state_.pending_domain_volts = trace_.fv.domain_volts;
  state_.fv_computed = true;

  Setpoints out;
  out.freqs = trace_.dispatched;
  return out;
}

}  // namespace pcsim::pcf
