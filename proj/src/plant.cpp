#include "pcsim/plant.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numbers>
#include <string>

namespace pcsim::plant {

Floorplan::Floorplan(std::size_t rows, std::size_t cols, double core_pitch_m)
    : rows_(rows), cols_(cols), pitch_(core_pitch_m) {
  if (rows == 0 || cols == 0) throw DimensionMismatch("floorplan needs at least one row and one column");
  neighbors_.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      auto& n = neighbors_[r * cols + c];
      if (r > 0) n.push_back((r - 1) * cols + c);
      if (c > 0) n.push_back(r * cols + c - 1);
      if (c + 1 < cols) n.push_back(r * cols + c + 1);
      if (r + 1 < rows) n.push_back((r + 1) * cols + c);
    }
  }
}

bool Floorplan::adjacent(std::size_t a, std::size_t b) const {
  const auto& n = neighbors_.at(a);
  return std::find(n.begin(), n.end(), b) != n.end();
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double ThermalModel::slowest_time_constant() const {
  const double rho = spectral_radius(a);
  return -dt / std::log(rho);
}

ThermalModel build_thermal_model(const Floorplan& floorplan, const RcParams& rc, double t_ambient) {
  if (!(rc.dt > 0.0) || !(rc.r_lateral > 0.0) || !(rc.r_vertical > 0.0) || !(rc.c_thermal > 0.0)) {
    throw StabilityViolation("RC parameters and dt must be positive");
  }
  const double euler_bound = rc.c_thermal / (4.0 / rc.r_lateral + 1.0 / rc.r_vertical);
  if (!(rc.dt < euler_bound)) {
    throw StabilityViolation("dt " + std::to_string(rc.dt) + " s violates the forward-Euler bound " +
                             std::to_string(euler_bound) + " s");
  }

  const auto n = static_cast<Eigen::Index>(floorplan.core_count());
  const double k = rc.dt / rc.c_thermal;
  ThermalModel m;
  m.t_ambient = t_ambient;
  m.dt = rc.dt;
  m.a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& nb = floorplan.neighbors(static_cast<std::size_t>(i));
    double conductance = 1.0 / rc.r_vertical;
    for (std::size_t j : nb) {
      m.a(i, static_cast<Eigen::Index>(j)) = k / rc.r_lateral;
      conductance += 1.0 / rc.r_lateral;
    }
    m.a(i, i) = 1.0 - k * conductance;
  }
  m.b = Eigen::MatrixXd::Identity(n, n) * k;

  const double rho = spectral_radius(m.a);
  if (!(rho < 1.0)) throw StabilityViolation("thermal model spectral radius " + std::to_string(rho) + " >= 1");
  return m;
}

std::vector<double> thermal_step(const ThermalModel& model, std::span<const double> temps,
                                 std::span<const double> powers) {
  const std::size_t n = model.core_count();
  require_size(temps.size(), n, "thermal_step temperatures");
  require_size(powers.size(), n, "thermal_step powers");
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x[static_cast<Eigen::Index>(i)] = temps[i] - model.t_ambient;
    u[static_cast<Eigen::Index>(i)] = powers[i];
  }
  const Eigen::VectorXd next = model.a * x + model.b * u;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = next[static_cast<Eigen::Index>(i)] + model.t_ambient;
  return out;
}

PowerParams PowerParams::uniform(std::size_t cores, double icc, double ceff_base) {
  PowerParams p;
  p.icc.assign(cores, icc);
  p.ceff_base.assign(cores, ceff_base);
  p.variability.assign(cores, 1.0);
  return p;
}

void PowerParams::validate(double t_lo, double t_hi) const {
  const std::size_t n = icc.size();
  require_size(ceff_base.size(), n, "ceff_base");
  require_size(variability.size(), n, "variability");
  for (std::size_t i = 0; i < n; ++i) {
    if (icc[i] < 0.0) throw ScenarioInvalid("icc must be >= 0");
    if (!(ceff_base[i] > 0.0)) throw ScenarioInvalid("ceff_base must be > 0");
    if (!(variability[i] > 0.0)) throw ScenarioInvalid("variability must be > 0");
  }
  if (noise_sigma < 0.0) throw ScenarioInvalid("noise sigma must be >= 0");
  if (!(kappa(t_lo) > 0.0) || !(kappa(t_hi) > 0.0)) {
    throw ScenarioInvalid("kappa(T) must stay positive over the simulated temperature range");
  }
}

PowerParams PowerParams::nominal() const {
  PowerParams p = *this;
  p.variability.assign(icc.size(), 1.0);
  p.noise_sigma = 0.0;
  return p;
}

std::vector<double> draw_variability(std::size_t cores, double sigma, std::uint64_t seed) {
  GaussianNoise g(seed);
  std::vector<double> out(cores);
  for (auto& v : out) v = std::max(0.5, 1.0 + sigma * g.draw());
  return out;
}

double GaussianNoise::draw() {
  // u1 in (0, 1], u2 in [0, 1)
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double nominal_power(const PowerParams& p, std::size_t core, double freq, double volt, double temp,
                     const WorkloadSample& workload) {
  const double ceff = p.ceff_base[core] * workload.ceff_multiplier;
  return p.kappa(temp) * (p.icc[core] * volt + ceff * freq * volt * volt) * p.variability[core];
}

double compute_power(const PowerParams& p, std::size_t core, double freq, double volt, double temp,
                     const WorkloadSample& workload, GaussianNoise& noise) {
  const double n = noise.draw();
  return std::max(0.0, nominal_power(p, core, freq, volt, temp, workload) + p.noise_sigma * n);
}

PlantState::PlantState(std::size_t cores, double t_initial, double f0, double v0, std::uint64_t seed)
    : temps(cores, t_initial),
      powers(cores, 0.0),
      freqs(cores, f0),
      volts(cores, v0),
      retired(cores, 0),
      retired_carry(cores, 0.0),
      activity_ceff(cores, 0.0),
      activity_ipc(cores, 0.0),
      workload(cores),
      noise(seed) {}

void performance_step(PlantState& state, std::span<const WorkloadSample> workload, double dt) {
  require_size(workload.size(), state.core_count(), "performance_step workload");
  for (std::size_t i = 0; i < workload.size(); ++i) {
    const double acc = state.retired_carry[i] + workload[i].ipc * state.freqs[i] * dt;
    // Round to absorb representation error (1e3 * 1e-6 * 1e9 is not exact in binary).
    double whole = std::floor(acc);
    if (acc - whole > 1.0 - 1e-9) whole += 1.0;
    state.retired[i] += static_cast<std::uint64_t>(whole);
    state.retired_carry[i] = std::max(0.0, acc - whole);
  }
}

double SensorSnapshot::total_rail_power() const {
  double s = 0.0;
  for (double p : rail_powers) s += p;
  return s;
}

double quantize_floor(double value, double step) {
  if (step <= 0.0) return value;
  // The small bias keeps exact multiples (e.g. 57.3 / 0.1) from flooring one step low.
  return std::floor(value / step + 1e-9) * step;
}

SensorSnapshot read_sensor_snapshot(const PlantState& state, const std::vector<std::vector<std::size_t>>& domains,
                                    const SensorConfig& sensors) {
  SensorSnapshot s;
  s.time = state.time;
  s.temps.resize(state.core_count());
  for (std::size_t i = 0; i < s.temps.size(); ++i) s.temps[i] = quantize_floor(state.temps[i], sensors.temp_step);
  s.rail_powers.reserve(domains.size());
  for (const auto& dom : domains) {
    double sum = 0.0;
    for (std::size_t c : dom) sum += state.powers.at(c);
    s.rail_powers.push_back(quantize_floor(sum, sensors.power_step));
  }
  s.workload = state.workload;
  s.activity_ceff = state.activity_ceff;
  s.activity_ipc = state.activity_ipc;
  return s;
}

Actuators::Actuators(const OperatingPointTable& table, ActuatorDelays delays)
    : table_(table), delays_(delays), freq_(table.core_count()), volt_(table.core_count()) {
  if (delays.pll < 0 || delays.vrm < 0) throw ScenarioInvalid("actuator delays must be >= 0");
}

void Actuators::apply_setpoints(std::span<const double> freqs, std::span<const double> volts, SimTime now) {
  request_frequencies(freqs, now);
  request_voltages(volts, now);
}

void Actuators::request_frequencies(std::span<const double> freqs, SimTime now) {
  require_size(freqs.size(), freq_.size(), "frequency setpoints");
  for (double f : freqs) {
    if (!table_.within_frequency_bounds(f)) {
      throw OutOfRange("frequency setpoint " + std::to_string(f) + " Hz outside the operating point table");
    }
  }
  for (std::size_t i = 0; i < freqs.size(); ++i) freq_[i] = Pending{freqs[i], now + delays_.pll};
}

void Actuators::request_voltages(std::span<const double> volts, SimTime now) {
  require_size(volts.size(), volt_.size(), "voltage setpoints");
  for (double v : volts) {
    if (!table_.within_voltage_bounds(v)) {
      throw OutOfRange("voltage setpoint " + std::to_string(v) + " V outside the operating point table");
    }
  }
  for (std::size_t i = 0; i < volts.size(); ++i) volt_[i] = Pending{volts[i], now + delays_.vrm};
}

void Actuators::settle(SimTime now, PlantState& state) {
  for (std::size_t i = 0; i < freq_.size(); ++i) {
    if (freq_[i] && freq_[i]->due <= now) {
      state.freqs[i] = freq_[i]->value;
      freq_[i].reset();
    }
    if (volt_[i] && volt_[i]->due <= now) {
      state.volts[i] = volt_[i]->value;
      volt_[i].reset();
    }
  }
}

bool Actuators::has_pending() const {
  auto any = [](const auto& v) { return std::any_of(v.begin(), v.end(), [](const auto& p) { return p.has_value(); }); };
  return any(freq_) || any(volt_);
}

Plant::Plant(PlantConfig config, std::vector<std::shared_ptr<const workload::WorkloadTrace>> traces)
    : config_(std::move(config)),
      thermal_(build_thermal_model(config_.floorplan, config_.rc, config_.t_ambient)),
      traces_(std::move(traces)),
      actuators_(config_.table, config_.delays),
      dt_(from_seconds(config_.rc.dt)) {
  const std::size_t n = config_.floorplan.core_count();
  require_size(traces_.size(), n, "workload traces");
  require_size(config_.table.core_count(), n, "operating point table cores");
  config_.power.validate(std::min(config_.t_ambient, config_.t_initial), 150.0);
  require_size(config_.power.core_count(), n, "power parameters");
  if (dt_ <= 0) throw ScenarioInvalid("plant step must be at least 1 ns");

  const double f0 = config_.initial_freq > 0.0 ? config_.initial_freq : config_.table.f_max();
  const double v0 = config_.initial_volt > 0.0 ? config_.initial_volt : config_.table.min_voltage_for(f0);
  state_ = PlantState(n, config_.t_initial, f0, v0, config_.seed);
  cursors_.reserve(n);
  for (const auto& t : traces_) {
    if (!t) throw ScenarioInvalid("missing workload trace");
    cursors_.emplace_back(*t);
  }
  for (std::size_t i = 0; i < n; ++i) state_.workload[i] = cursors_[i].at(0);

  const auto en = static_cast<Eigen::Index>(n);
  offset_.resize(en);
  next_.resize(en);
  power_vec_.resize(en);
}

void Plant::step() {
  const std::size_t n = state_.core_count();
  const double dt = config_.rc.dt;
  actuators_.settle(state_.time, state_);

  for (std::size_t i = 0; i < n; ++i) {
    const WorkloadSample& w = cursors_[i].at(state_.time);
    state_.workload[i] = w;
    const double p = compute_power(config_.power, i, state_.freqs[i], state_.volts[i], state_.temps[i], w, state_.noise);
    state_.powers[i] = p;
    power_vec_[static_cast<Eigen::Index>(i)] = p;
    offset_[static_cast<Eigen::Index>(i)] = state_.temps[i] - thermal_.t_ambient;
    state_.activity_ceff[i] += w.ceff_multiplier * dt;
    state_.activity_ipc[i] += w.ipc * dt;
  }
  performance_step(state_, state_.workload, dt);

  next_.noalias() = thermal_.a * offset_;
  next_.noalias() += thermal_.b * power_vec_;
  for (std::size_t i = 0; i < n; ++i) state_.temps[i] = next_[static_cast<Eigen::Index>(i)] + thermal_.t_ambient;
  state_.time += dt_;
}

double Plant::total_power() const {
  double s = 0.0;
  for (double p : state_.powers) s += p;
  return s;
}

}  // namespace pcsim::plant
