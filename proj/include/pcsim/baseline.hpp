#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pcsim/controller.hpp"
#include "pcsim/operating_points.hpp"
#include "pcsim/plant.hpp"

// Voting-box controller in the style of the OpenPOWER on-chip controller: a
// thermal vote and a power vote per core, and the minimum wins.
namespace pcsim::baseline {

enum class ThermalVariant { HottestCore, PerCore };

struct VotingBoxConfig {
  SimTime period = micros(250);
  double kp_hz_per_c = 40e6;     // Hz/degC
  double ki_hz_per_c_s = 4e9;    // Hz/(degC s)
  double t_limit = 85.0;         // PID setpoint, degC
  double power_gain = 0.5;       // fraction of f_max per unit relative overshoot
  // true: the power vote integrates overshoot across periods (vote moves from
  // its previous value); false: stateless proportional vote from f_max.
  bool integrating_power_vote = true;
  double initial_budget = std::numeric_limits<double>::infinity();
  ThermalVariant variant = ThermalVariant::PerCore;
  OperatingPointTable table;
  std::optional<double> fixed_voltage;
  plant::PowerParams model;  // the power model as the controller knows it, for the power estimates

  void validate() const;
};

// Integrators for the thermal PIDs (one shared entry for HottestCore) and the
// last power vote.
struct VotingBoxState {
  std::vector<double> integral;  // degC s
  std::vector<double> power_votes;  // Hz per core, empty until the first vote
  std::vector<double> applied;      // Hz per core, last selection
  std::vector<double> os_targets;
  double budget = 0.0;
  bool power_limited = false;
  std::uint64_t steps = 0;
};

// Per-core thermal votes in Hz. Updates the integrators in `state`.
std::vector<double> thermal_vote(std::span<const double> temps, const VotingBoxConfig& cfg, VotingBoxState& state);

// Per-core power votes in Hz from per-core power estimates. Stateless rule
// (no `state`, or integrating_power_vote off): f_max reduced by
// power_gain * f_max * overshoot, overshoot = (sum - budget) / budget, only
// when over budget. Integrating rule: the same step applied to the previous
// vote in either direction.
std::vector<double> power_vote(std::span<const double> powers, double budget, const VotingBoxConfig& cfg,
                               VotingBoxState* state = nullptr);

// Table floor of min(every vote, os target), per core.
std::vector<double> voting_box_select(std::span<const std::vector<double>> votes, std::span<const double> os_targets,
                                      const OperatingPointTable& table);

class VotingBox final : public Controller {
 public:
  explicit VotingBox(VotingBoxConfig config);

  std::string_view name() const override {
    return config_.variant == ThermalVariant::HottestCore ? "voting-box-hottest" : "voting-box-per-core";
  }
  std::vector<TaskInfo> tasks() const override { return {{"occ", config_.period}}; }
  Setpoints run_task(std::size_t task, const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox) override;
  ControllerStatus status() const override { return {state_.budget, state_.power_limited, state_.steps}; }
  const DiagnosticLog& diagnostics() const override { return log_; }

  const VotingBoxState& state() const { return state_; }
  const VotingBoxConfig& config() const { return config_; }

 private:
  VotingBoxConfig config_;
  VotingBoxState state_;
  WorkloadObserver observer_;
  DiagnosticLog log_;
};

}  // namespace pcsim::baseline
