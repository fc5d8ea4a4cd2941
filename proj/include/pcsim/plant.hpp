#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pcsim/common.hpp"
#include "pcsim/operating_points.hpp"
#include "pcsim/workload.hpp"

namespace pcsim::plant {

using workload::WorkloadSample;

// Rectangular tile of cores, row-major indexing, 4-neighbour adjacency.
class Floorplan {
 public:
  Floorplan(std::size_t rows, std::size_t cols, double core_pitch_m = 0.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t core_count() const { return rows_ * cols_; }
  double core_pitch() const { return pitch_; }
  const std::vector<std::size_t>& neighbors(std::size_t core) const { return neighbors_.at(core); }
  bool adjacent(std::size_t a, std::size_t b) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  double pitch_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

struct RcParams {
  double r_lateral = 2.0;     // degC/W between adjacent cores
  double r_vertical = 0.8;    // degC/W from each core to ambient
  double c_thermal = 0.005;   // J/degC per core
  double dt = 1e-6;           // s
};

// x[k+1] - Ta = A (x[k] - Ta) + B u[k]
struct ThermalModel {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  double t_ambient = 25.0;
  double dt = 1e-6;

  std::size_t core_count() const { return static_cast<std::size_t>(a.rows()); }
  // Slowest continuous-time constant implied by A: -dt / ln(rho(A)).
  double slowest_time_constant() const;
};

double spectral_radius(const Eigen::MatrixXd& m);

// Forward-Euler discretisation of the RC grid. Throws StabilityViolation when
// the Euler step bound or the spectral radius check fails.
ThermalModel build_thermal_model(const Floorplan& floorplan, const RcParams& rc, double t_ambient);

std::vector<double> thermal_step(const ThermalModel& model, std::span<const double> temps,
                                 std::span<const double> powers);

// Power model parameters for every core, plus the affine temperature factor
// kappa(T) = 1 + kappa_slope * (T - kappa_ref_temp).
struct PowerParams {
  std::vector<double> icc;          // A
  std::vector<double> ceff_base;    // F
  std::vector<double> variability;  // multiplicative, 1 = nominal
  double noise_sigma = 0.0;         // W
  double kappa_slope = 0.01;        // 1/degC
  double kappa_ref_temp = 25.0;     // degC

  static PowerParams uniform(std::size_t cores, double icc, double ceff_base);

  std::size_t core_count() const { return icc.size(); }
  double kappa(double temp) const { return 1.0 + kappa_slope * (temp - kappa_ref_temp); }
  // Checks vector sizes, signs, and kappa > 0 over [t_lo, t_hi].
  void validate(double t_lo, double t_hi) const;
  // Same parameters with variability reset to 1 and no noise: what a
  // controller can know about the silicon.
  PowerParams nominal() const;
};

// Per-core multipliers drawn from Normal(1, sigma); never below 0.5.
std::vector<double> draw_variability(std::size_t cores, double sigma, std::uint64_t seed);

// Zero-mean Gaussian source. Each draw() consumes exactly two engine outputs
// (Box-Muller without caching), so streams replay identically.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed = 0) : engine_(seed) {}
  double draw();
  bool operator==(const GaussianNoise&) const = default;

 private:
  std::mt19937_64 engine_;
};

// Deterministic part of the power model including variability.
double nominal_power(const PowerParams& p, std::size_t core, double freq, double volt, double temp,
                     const WorkloadSample& workload);

// Power model plus one additive noise draw. Clamped at 0 W.
double compute_power(const PowerParams& p, std::size_t core, double freq, double volt, double temp,
                     const WorkloadSample& workload, GaussianNoise& noise);

struct PlantState {
  SimTime time = 0;
  std::vector<double> temps;     // degC at `time`
  std::vector<double> powers;    // W during the last step
  std::vector<double> freqs;     // Hz currently applied
  std::vector<double> volts;     // V currently applied
  std::vector<std::uint64_t> retired;
  std::vector<double> retired_carry;  // fractional instructions, in [0, 1)
  // Cumulative activity counters: integral of the workload ceff multiplier
  // and IPC over time (s). Controllers difference them to get window averages.
  std::vector<double> activity_ceff;
  std::vector<double> activity_ipc;
  std::vector<WorkloadSample> workload;  // sample in effect during the last step
  GaussianNoise noise;

  explicit PlantState(std::size_t cores = 0, double t_initial = 25.0, double f0 = 0.0, double v0 = 0.0,
                      std::uint64_t seed = 0);
  std::size_t core_count() const { return temps.size(); }
  bool operator==(const PlantState&) const = default;
};

// retired += ipc * freq * dt per core, carrying the fractional part.
void performance_step(PlantState& state, std::span<const WorkloadSample> workload, double dt);

struct SensorConfig {
  double temp_step = 0.1;    // degC, 0 = exact
  double power_step = 0.01;  // W, 0 = exact
};

struct SensorSnapshot {
  SimTime time = 0;
  std::vector<double> temps;        // per core, quantized
  std::vector<double> rail_powers;  // per voltage domain, quantized
  std::vector<WorkloadSample> workload;
  std::vector<double> activity_ceff;
  std::vector<double> activity_ipc;

  std::size_t core_count() const { return temps.size(); }
  double total_rail_power() const;
};

double quantize_floor(double value, double step);

SensorSnapshot read_sensor_snapshot(const PlantState& state, const std::vector<std::vector<std::size_t>>& domains,
                                    const SensorConfig& sensors);

struct ActuatorDelays {
  SimTime pll = micros(5);
  SimTime vrm = micros(10);
};

// PLL and VRM models: a request takes effect after its delay. A newer request
// for the same core replaces any pending one, so only the latest value is ever
// applied.
class Actuators {
 public:
  Actuators(const OperatingPointTable& table, ActuatorDelays delays);

  void apply_setpoints(std::span<const double> freqs, std::span<const double> volts, SimTime now);
  void request_frequencies(std::span<const double> freqs, SimTime now);
  void request_voltages(std::span<const double> volts, SimTime now);
  // Applies every request due at or before `now`.
  void settle(SimTime now, PlantState& state);
  bool has_pending() const;
  const ActuatorDelays& delays() const { return delays_; }

 private:
  struct Pending {
    double value = 0.0;
    SimTime due = 0;
  };
  OperatingPointTable table_;
  ActuatorDelays delays_;
  std::vector<std::optional<Pending>> freq_;
  std::vector<std::optional<Pending>> volt_;
};

struct PlantConfig {
  Floorplan floorplan{1, 1};
  RcParams rc;
  double t_ambient = 25.0;
  double t_initial = 25.0;
  PowerParams power;
  SensorConfig sensors;
  ActuatorDelays delays;
  OperatingPointTable table;
  double initial_freq = 0.0;  // 0 = table f_max
  double initial_volt = 0.0;  // 0 = table voltage for initial_freq
  std::uint64_t seed = 0;
};

// The controlled many-core CPU. Owns its state; external readers get
// snapshots by value.
class Plant {
 public:
  Plant(PlantConfig config, std::vector<std::shared_ptr<const workload::WorkloadTrace>> traces);

  // Advances one micro-step of length dt: settle actuators, sample workload,
  // compute power, retire instructions, integrate temperature.
  void step();

  const PlantState& state() const { return state_; }
  SensorSnapshot snapshot() const { return read_sensor_snapshot(state_, config_.table.domains(), config_.sensors); }
  Actuators& actuators() { return actuators_; }
  const ThermalModel& thermal() const { return thermal_; }
  const PlantConfig& config() const { return config_; }
  SimTime dt() const { return dt_; }
  SimTime time() const { return state_.time; }
  double total_power() const;

 private:
  PlantConfig config_;
  ThermalModel thermal_;
  std::vector<std::shared_ptr<const workload::WorkloadTrace>> traces_;
  std::vector<workload::TraceCursor> cursors_;
  PlantState state_;
  Actuators actuators_;
  SimTime dt_;
  Eigen::VectorXd offset_;
  Eigen::VectorXd next_;
  Eigen::VectorXd power_vec_;
};

}  // namespace pcsim::plant
