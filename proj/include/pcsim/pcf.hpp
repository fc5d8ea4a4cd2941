#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pcsim/controller.hpp"
#include "pcsim/operating_points.hpp"
#include "pcsim/plant.hpp"

// Two-layer power control firmware: a frequency control task (PFCT) running
// phases P1-P7 and a faster voltage control task (PVCT) that monitors rails,
// takes budget updates, and dispatches domain voltages.
namespace pcsim::pcf {

struct PidGains {
  double kp = 0.8;   // W/degC
  double ki = 30.0;  // W/(degC s)
  double kd = 0.0;   // W s/degC
};

// How P7 maps a continuous frequency onto table levels.
//   Floor: largest level <= the request.
//   ErrorDiffusion: floor of (request + carried remainder); the remainder is
//   carried to the next step so the time-average frequency matches the request.
enum class Quantization { Floor, ErrorDiffusion };

struct PcfConfig {
  SimTime pfct_period = micros(500);
  SimTime pvct_period = micros(125);
  double t_limit = 85.0;
  double t_margin = 80.0;  // PID setpoint
  PidGains pid;
  std::vector<double> p_min;  // W per core
  double initial_budget = std::numeric_limits<double>::infinity();
  OperatingPointTable table;
  std::optional<double> fixed_voltage;
  plant::PowerParams model;  // controller's copy of the power model, no variability, no noise
  Quantization quantization = Quantization::Floor;
  // Rail-power feedback on the P5 threshold, 1/s. 0 leaves the threshold at
  // the BMC budget; otherwise the PVCT integrates the relative gap between the
  // budget and the measured rail total while the PFCT is power capping.
  double budget_feedback_gain = 0.0;

  std::size_t core_count() const { return table.core_count(); }
  void validate() const;
};

struct PowerEstimate {
  std::vector<double> per_core;
  double total = 0.0;
};

// P4: power model per core from measured temperature and observed workload.
PowerEstimate p4_estimate_power(const plant::PowerParams& model, std::span<const double> temps,
                                std::span<const double> ceff_multipliers, std::span<const double> freqs,
                                std::span<const double> volts);

struct CapResult {
  std::vector<double> capped;
  double alpha = 1.0;
  bool engaged = false;     // sum of targets exceeded the budget
  bool infeasible = false;  // budget below sum of p_min
};

// P5: capped_i = p_min_i + alpha (target_i - p_min_i),
// alpha = (budget - sum p_min) / (sum targets - sum p_min) clamped to [0, 1].
CapResult p5_alpha_power_cap(std::span<const double> targets, std::span<const double> p_min, double budget);

// Per-core discrete PID state for the thermal regulator layer.
struct PidBank {
  std::vector<double> integral;    // degC s
  std::vector<double> prev_error;  // degC
  std::vector<bool> has_prev;

  explicit PidBank(std::size_t cores = 0) : integral(cores, 0.0), prev_error(cores, 0.0), has_prev(cores, false) {}
};

// P6: reduces each core's cap by the PID output on (temp - t_margin). The
// result stays in [p_min, caps_in]; the integral is clamped to [0, (caps_in - p_min) / ki].
std::vector<double> p6_thermal_pid(std::span<const double> temps, std::span<const double> caps_in,
                                   std::span<const double> p_min, const PidGains& gains, double t_margin, double dt,
                                   PidBank& bank);

struct FvResult {
  std::vector<double> freqs;         // Hz per core, table levels
  std::vector<double> domain_volts;  // V per domain
  std::vector<double> f_raw;         // Hz per core, power model inverted
};

// P7: invert the power model at the current voltage, cap by the OS target, quantise to
// the table; per domain pick the lowest voltage that supports its fastest core.
// `carry` is only used with Quantization::ErrorDiffusion.
FvResult p7_compute_fv(std::span<const double> caps, std::span<const double> temps,
                       std::span<const double> ceff_multipliers, std::span<const double> volts,
                       std::span<const double> os_targets, const OperatingPointTable& table,
                       const plant::PowerParams& model, std::optional<double> fixed_voltage,
                       Quantization quantization = Quantization::Floor, std::vector<double>* carry = nullptr);

struct ControllerState {
  PidBank pid;
  std::vector<double> os_targets;        // latest governor ceilings, Hz
  double budget = 0.0;                   // latest BMC budget, W
  double threshold_correction = 0.0;     // relative, applied to budget for P5
  std::vector<double> pending_freqs;     // computed at step n-1, dispatched at P1 of step n
  std::vector<double> pending_domain_volts;
  bool fv_computed = false;
  std::vector<double> power_estimates;   // last P4 at the OS targets
  std::vector<double> rail_powers;       // last PVCT read
  std::vector<double> carry;             // error-diffusion remainders
  bool power_capping = false;
  bool thermal_capping = false;
  bool cap_engaged = false;              // P5 engaged, whatever P6 did
  std::uint64_t pfct_steps = 0;
  std::uint64_t pvct_steps = 0;
};

// Intermediate values of the last PFCT step, for telemetry and tests.
struct StepTrace {
  SimTime time = 0;
  std::vector<double> dispatched;  // P1
  std::vector<double> temps;       // P2
  std::vector<double> ceff;        // P2
  PowerEstimate estimate;          // P4
  CapResult cap;                   // P5
  std::vector<double> after_pid;   // P6
  FvResult fv;                     // P7
};

class Pcf final : public Controller {
 public:
  static constexpr std::size_t kPvctTask = 0;
  static constexpr std::size_t kPfctTask = 1;

  explicit Pcf(PcfConfig config);

  Setpoints pvct_step(const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox);
  Setpoints pfct_step(const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox);

  std::string_view name() const override { return "pcf"; }
  std::vector<TaskInfo> tasks() const override;
  Setpoints run_task(std::size_t task, const SensorSnapshot& snapshot, std::span<const scmi::Command> inbox) override;
  ControllerStatus status() const override;
  const DiagnosticLog& diagnostics() const override { return log_; }

  const ControllerState& state() const { return state_; }
  const PcfConfig& config() const { return config_; }
  const StepTrace& last_step() const { return trace_; }
  // Budget handed to P5: the BMC budget scaled by the rail-feedback correction.
  double threshold() const { return state_.budget * (1.0 + state_.threshold_correction); }

 private:
  void apply_budget(const scmi::PowerCapSet& cmd, SimTime now);
  void apply_target(const scmi::PerfLevelSet& cmd, SimTime now);
  std::vector<double> initial_domain_volts() const;
  double domain_voltage_for(std::span<const double> freqs, std::size_t domain) const;

  PcfConfig config_;
  ControllerState state_;
  StepTrace trace_;
  WorkloadObserver observer_;
  std::vector<scmi::Command> queued_;  // governor commands taken by the PVCT, applied at P3
  DiagnosticLog log_;
};

}  // namespace pcsim::pcf
