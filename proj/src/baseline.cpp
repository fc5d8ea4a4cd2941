#include "pcsim/baseline.hpp"

#include <algorithm>
#include <numeric>
#include <variant>

namespace pcsim::baseline {

void VotingBoxConfig::validate() const {
  if (period <= 0) throw ScenarioInvalid("voting box: period must be positive");
  if (kp_hz_per_c < 0.0 || ki_hz_per_c_s < 0.0 || power_gain < 0.0) {
    throw ScenarioInvalid("voting box: gains must be >= 0");
  }
  if (!(initial_budget > 0.0)) throw ScenarioInvalid("voting box: initial budget must be > 0");
  if (table.core_count() == 0) throw ScenarioInvalid("voting box: operating point table has no cores");
  require_size(model.core_count(), table.core_count(), "voting box power model");
  if (fixed_voltage && !table.within_voltage_bounds(*fixed_voltage)) {
    throw ScenarioInvalid("voting box: fixed voltage outside the operating point table");
  }
}

namespace {

// One PID step on error e, returning the frequency reduction in Hz.
double pid_reduction(double e, double& integral, const VotingBoxConfig& cfg) {
  const double span = cfg.table.f_max() - cfg.table.f_min();
  if (e <= 0.0 && integral <= 0.0) {
    integral = 0.0;
    return 0.0;
  }
  const double dt = to_seconds(cfg.period);
  const double i_max = cfg.ki_hz_per_c_s > 0.0 ? span / cfg.ki_hz_per_c_s : 0.0;
  integral = std::clamp(integral + e * dt, 0.0, i_max);
  return std::clamp(cfg.kp_hz_per_c * e + cfg.ki_hz_per_c_s * integral, 0.0, span);
}

}  // namespace

std::vector<double> thermal_vote(std::span<const double> temps, const VotingBoxConfig& cfg, VotingBoxState& state) {
  const std::size_t n = temps.size();
  require_size(n, cfg.table.core_count(), "thermal vote temperatures");
  std::vector<double> votes(n, cfg.table.f_max());
  if (cfg.variant == ThermalVariant::HottestCore) {
    if (state.integral.size() != 1) state.integral.assign(1, 0.0);
    const double hottest = *std::max_element(temps.begin(), temps.end());
    const double r = pid_reduction(hottest - cfg.t_limit, state.integral[0], cfg);
    for (auto& v : votes) v -= r;
  } else {
    if (state.integral.size() != n) state.integral.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) votes[i] -= pid_reduction(temps[i] - cfg.t_limit, state.integral[i], cfg);
  }
  return votes;
}

std::vector<double> power_vote(std::span<const double> powers, double budget, const VotingBoxConfig& cfg,
                               VotingBoxState* state) {
  const std::size_t n = cfg.table.core_count();
  require_size(powers.size(), n, "power vote estimates");
  const double f_max = cfg.table.f_max();
  const double f_min = cfg.table.f_min();
  const double total = std::accumulate(powers.begin(), powers.end(), 0.0);
  const double over = budget > 0.0 ? (total - budget) / budget : std::numeric_limits<double>::infinity();
  const bool integrate = state != nullptr && cfg.integrating_power_vote;
  if (integrate && state->power_votes.size() != n) state->power_votes.assign(n, f_max);

  std::vector<double> votes(n, f_max);
  for (std::size_t i = 0; i < n; ++i) {
    const double step = cfg.power_gain > 0.0 ? cfg.power_gain * f_max * over : 0.0;
    if (integrate) {
      votes[i] = std::clamp(state->power_votes[i] - step, f_min, f_max);
    } else if (over > 0.0) {
      votes[i] = std::clamp(f_max - step, f_min, f_max);
    }
  }
  if (state) {
    if (integrate) state->power_votes = votes;
    state->power_limited = std::any_of(votes.begin(), votes.end(), [&](double v) { return v < f_max; });
  }
  return votes;
}

std::vector<double> voting_box_select(std::span<const std::vector<double>> votes, std::span<const double> os_targets,
                                      const OperatingPointTable& table) {
  if (votes.empty()) throw DimensionMismatch("voting box needs at least one vote vector");
  const std::size_t n = os_targets.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = os_targets[i];
    for (const auto& v : votes) {
      require_size(v.size(), n, "vote vector");
      f = std::min(f, v[i]);
    }
    out[i] = table.floor_level(f);
  }
  return out;
}

VotingBox::VotingBox(VotingBoxConfig config) : config_(std::move(config)) {
  config_.validate();
  state_.os_targets.assign(config_.table.core_count(), config_.table.f_max());
  state_.applied = state_.os_targets;
  state_.budget = config_.initial_budget;
}

Setpoints VotingBox::run_task(std::size_t task, const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox) {
  if (task != 0) throw OutOfRange("voting box has a single task");
  ++state_.steps;
  const auto& table = config_.table;
  const std::size_t n = table.core_count();
  require_size(snapshot.core_count(), n, "voting box snapshot");

  for (const auto& cmd : inbox) {
    if (const auto* cap = std::get_if<scmi::PowerCapSet>(&cmd.message)) {
      if (cap->budget_mw == 0) {
        log_.emit(snapshot.time, "MalformedCommand", "power budget of 0 mW dropped");
      } else {
        state_.budget = cap->watts();
      }
    } else if (const auto* t = std::get_if<scmi::PerfLevelSet>(&cmd.message)) {
      if (t->core >= n || !table.within_frequency_bounds(t->hertz())) {
        log_.emit(snapshot.time, "MalformedCommand", "frequency target dropped: " + scmi::describe(cmd));
      } else {
        state_.os_targets[t->core] = t->hertz();
      }
    }
  }

  // Power estimates at the frequencies currently applied.
  const std::vector<double> ceff = observer_.observe_ceff(snapshot);
  std::vector<double> volts(n);
  for (std::size_t d = 0; d < table.domains().size(); ++d) {
    double f_top = table.f_min();
    for (std::size_t c : table.domains()[d]) f_top = std::max(f_top, state_.applied[c]);
    const double v = config_.fixed_voltage ? *config_.fixed_voltage : table.min_voltage_for(f_top);
    for (std::size_t c : table.domains()[d]) volts[c] = v;
  }
  std::vector<double> estimates(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = config_.model.ceff_base[i] * ceff[i];
    estimates[i] = config_.model.kappa(snapshot.temps[i]) *
                   (config_.model.icc[i] * volts[i] + c * state_.applied[i] * volts[i] * volts[i]);
  }

  std::vector<std::vector<double>> votes;
  votes.push_back(thermal_vote(snapshot.temps, config_, state_));
  votes.push_back(power_vote(estimates, state_.budget, config_, &state_));

  Setpoints out;
  out.freqs = voting_box_select(votes, state_.os_targets, table);
  state_.applied = *out.freqs;
  std::vector<double> domain_volts(table.domains().size());
  for (std::size_t d = 0; d < domain_volts.size(); ++d) {
    if (config_.fixed_voltage) {
      domain_volts[d] = *config_.fixed_voltage;
      continue;
    }
    double f_top = table.f_min();
    for (std::size_t c : table.domains()[d]) f_top = std::max(f_top, (*out.freqs)[c]);
    domain_volts[d] = table.min_voltage_for(f_top);
  }
  out.volts = table.expand(domain_volts);
  return out;
}

}  // namespace pcsim::baseline
