#include "pcsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace pcsim {

using nlohmann::json;

ControllerKind parse_controller_kind(std::string_view name) {
  if (name == "pcf") return ControllerKind::Pcf;
  if (name == "voting_box_hottest") return ControllerKind::VotingBoxHottest;
  if (name == "voting_box_per_core") return ControllerKind::VotingBoxPerCore;
  throw ScenarioInvalid("unknown controller '" + std::string(name) +
                        "' (expected pcf, voting_box_hottest, voting_box_per_core)");
}

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Pcf: return "pcf";
    case ControllerKind::VotingBoxHottest: return "voting_box_hottest";
    case ControllerKind::VotingBoxPerCore: return "voting_box_per_core";
  }
  return "?";
}

ExecutionMode parse_execution_mode(std::string_view name) {
  if (name == "lockstep") return ExecutionMode::Lockstep;
  if (name == "async") return ExecutionMode::Async;
  throw ScenarioInvalid("unknown execution mode '" + std::string(name) + "' (expected lockstep or async)");
}

std::string_view to_string(ExecutionMode mode) { return mode == ExecutionMode::Lockstep ? "lockstep" : "async"; }

namespace {

// Reads a JSON object and rejects keys nobody asked for, so a misspelt unit
// suffix fails loudly instead of silently taking the default.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ScenarioInvalid(where_ + ": expected an object");
  }
  ~Fields() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ScenarioInvalid(where_ + ": missing field '" + key + "'");
    return j_.at(key);
  }
  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ScenarioInvalid(where_ + "." + key + ": " + e.what());
    }
  }
  template <typename T>
  T require(const std::string& key) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ScenarioInvalid(where_ + "." + key + ": " + e.what());
    }
  }
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ScenarioInvalid(where_ + ": unknown field '" + item.key() + "'");
    }
  }
  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

SimTime micros_field(Fields& f, const std::string& key, SimTime fallback) {
  if (!f.has(key)) return fallback;
  return from_seconds(f.require<double>(key) * 1e-6);
}

// A scalar broadcast to every core, or one value per core.
std::vector<double> per_core(const json& v, std::size_t n, const std::string& where, double scale = 1.0) {
  std::vector<double> out;
  try {
    if (v.is_array()) {
      out = v.get<std::vector<double>>();
      require_size(out.size(), n, where.c_str());
    } else {
      out.assign(n, v.get<double>());
    }
  } catch (const json::exception& e) {
    throw ScenarioInvalid(where + ": " + e.what());
  } catch (const DimensionMismatch& e) {
    throw ScenarioInvalid(e.what());
  }
  for (auto& x : out) x *= scale;
  return out;
}

std::vector<std::vector<std::size_t>> parse_domains(const json& v, std::size_t rows, std::size_t cols) {
  const std::size_t n = rows * cols;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    std::vector<std::vector<std::size_t>> d;
    if (s == "single") return OperatingPointTable::single_domain(n);
    if (s == "rows") {
      for (std::size_t r = 0; r < rows; ++r) {
        d.emplace_back();
        for (std::size_t c = 0; c < cols; ++c) d.back().push_back(r * cols + c);
      }
      return d;
    }
    if (s == "per_core") {
      for (std::size_t i = 0; i < n; ++i) d.push_back({i});
      return d;
    }
    throw ScenarioInvalid("operating_points.domains: expected single, rows, per_core or a list of core lists");
  }
  try {
    return v.get<std::vector<std::vector<std::size_t>>>();
  } catch (const json::exception& e) {
    throw ScenarioInvalid(std::string("operating_points.domains: ") + e.what());
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser, so neighbouring seeds give unrelated streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace


void Scenario::validate() const {
  const std::size_t n = core_count();
  const SimTime dt = from_seconds(plant.rc.dt);
  if (dt <= 0) throw ScenarioInvalid("thermal.dt_us must be positive");
  if (duration <= 0) throw ScenarioInvalid("duration_s must be positive");
  if (duration % dt != 0) throw ScenarioInvalid("duration_s must be a whole number of plant steps");
  if (!(tdp_w > 0.0)) throw ScenarioInvalid("tdp_w must be positive");
  if (telemetry_decimation <= 0 || telemetry_decimation % dt != 0) {
    throw ScenarioInvalid("telemetry.decimation_us must be a positive multiple of the plant step");
  }
  if (workloads.size() != n) {
    throw ScenarioInvalid("workload.cores lists " + std::to_string(workloads.size()) + " entries for " +
                          std::to_string(n) + " cores");
  }
  try {
    plant::build_thermal_model(plant.floorplan, plant.rc, plant.t_ambient);
  } catch (const Error& e) {
    throw ScenarioInvalid(std::string("thermal: ") + e.what());
  }
  if (plant.table.core_count() != n) throw ScenarioInvalid("operating point domains do not cover every core");
  try {
    plant.power.validate(std::min(plant.t_ambient, plant.t_initial), 150.0);
    require_size(plant.power.core_count(), n, "power parameters");
    pcf.validate();
    voting_box.validate();
  } catch (const ScenarioInvalid&) {
    throw;
  } catch (const Error& e) {
    throw ScenarioInvalid(e.what());
  }
  for (SimTime p : {pcf.pfct_period, pcf.pvct_period, voting_box.period}) {
    if (p % dt != 0) throw ScenarioInvalid("controller periods must be whole numbers of plant steps");
  }
  if (plant.delays.pll % dt != 0 || plant.delays.vrm % dt != 0) {
    throw ScenarioInvalid("actuator delays must be whole numbers of plant steps");
  }
  SimTime prev = 0;
  for (const auto& b : budget_schedule) {
    if (b.time < prev || b.time > duration) throw ScenarioInvalid("budget_schedule must be time-sorted within [0, duration]");
    if (!(b.budget_w > 0.0) || b.budget_w * 1e3 > 4.0e9) throw ScenarioInvalid("budget_schedule entries need 0 < budget_w < 4e6");
    prev = b.time;
  }
  prev = 0;
  for (const auto& g : governor_schedule) {
    if (g.time < prev || g.time > duration) {
      throw ScenarioInvalid("governor_schedule must be time-sorted within [0, duration]");
    }
    if (const auto* p = std::get_if<scmi::PerfLevelSet>(&g.command.message)) {
      if (p->core >= n) throw ScenarioInvalid("governor_schedule references core " + std::to_string(p->core));
      if (!plant.table.within_frequency_bounds(p->hertz())) {
        throw ScenarioInvalid("governor_schedule frequency outside the operating point table");
      }
    }
    prev = g.time;
  }
  if (!(async.realtime_factor >= 0.0) || !(async.controller_period_scale > 0.0) || async.publish_interval <= 0) {
    throw ScenarioInvalid("async options out of range");
  }
}

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioInvalid(std::string("scenario is not valid JSON: ") + e.what());
  }
  Scenario s;
  s.base_dir = base_dir;
  Fields top(root, "scenario");
  s.name = top.get<std::string>("name", s.name);
  s.duration = from_seconds(top.require<double>("duration_s"));
  s.seed = top.get<std::uint64_t>("seed", s.seed);
  s.mode = parse_execution_mode(top.get<std::string>("mode", "lockstep"));
  s.tdp_w = top.get<double>("tdp_w", s.tdp_w);
  s.t_limit_c = top.get<double>("t_limit_c", s.t_limit_c);
  s.bmc_agent_id = top.get<std::uint32_t>("bmc_agent_id", s.bmc_agent_id);

  // floorplan
  std::size_t rows = 1, cols = 1;
  {
    Fields f(top.at("floorplan"), "floorplan");
    rows = f.require<std::size_t>("rows");
    cols = f.require<std::size_t>("cols");
    const double pitch_mm = f.get<double>("core_pitch_mm", 0.0);
    f.finish();
    try {
      s.plant.floorplan = plant::Floorplan(rows, cols, pitch_mm * 1e-3);
    } catch (const Error& e) {
      throw ScenarioInvalid(std::string("floorplan: ") + e.what());
    }
  }
  const std::size_t n = rows * cols;

  if (top.has("thermal")) {
    Fields f(top.at("thermal"), "thermal");
    s.plant.rc.r_lateral = f.get<double>("r_lateral_c_per_w", s.plant.rc.r_lateral);
    s.plant.rc.r_vertical = f.get<double>("r_vertical_c_per_w", s.plant.rc.r_vertical);
    s.plant.rc.c_thermal = f.get<double>("c_thermal_j_per_c", s.plant.rc.c_thermal);
    s.plant.rc.dt = f.get<double>("dt_us", s.plant.rc.dt * 1e6) * 1e-6;
    s.plant.t_ambient = f.get<double>("t_ambient_c", s.plant.t_ambient);
    s.plant.t_initial = f.get<double>("t_initial_c", s.plant.t_ambient);
    f.finish();
  }

  {
    s.plant.power = plant::PowerParams::uniform(n, 1.0, 1e-9);
    if (top.has("power")) {
      Fields f(top.at("power"), "power");
      if (f.has("icc_a")) s.plant.power.icc = per_core(f.at("icc_a"), n, "power.icc_a");
      if (f.has("ceff_base_nf")) s.plant.power.ceff_base = per_core(f.at("ceff_base_nf"), n, "power.ceff_base_nf", 1e-9);
      s.variability_sigma = f.get<double>("variability_sigma", 0.0);
      if (f.has("variability")) s.plant.power.variability = per_core(f.at("variability"), n, "power.variability");
      s.plant.power.noise_sigma = f.get<double>("noise_sigma_w", 0.0);
      s.plant.power.kappa_slope = f.get<double>("kappa_slope_per_c", s.plant.power.kappa_slope);
      s.plant.power.kappa_ref_temp = f.get<double>("kappa_ref_temp_c", s.plant.power.kappa_ref_temp);
      f.finish();
      if (s.variability_sigma < 0.0) throw ScenarioInvalid("power.variability_sigma must be >= 0");
    }
  }

  if (top.has("sensors")) {
    Fields f(top.at("sensors"), "sensors");
    s.plant.sensors.temp_step = f.get<double>("temp_step_c", s.plant.sensors.temp_step);
    s.plant.sensors.power_step = f.get<double>("power_step_w", s.plant.sensors.power_step);
    f.finish();
  }

  if (top.has("actuators")) {
    Fields f(top.at("actuators"), "actuators");
    s.plant.delays.pll = micros_field(f, "pll_delay_us", s.plant.delays.pll);
    s.plant.delays.vrm = micros_field(f, "vrm_delay_us", s.plant.delays.vrm);
    f.finish();
  }

  std::optional<double> fixed_voltage;
  {
    std::vector<std::vector<std::size_t>> domains = OperatingPointTable::single_domain(n);
    std::vector<double> levels, volts;
    if (top.has("operating_points")) {
      Fields f(top.at("operating_points"), "operating_points");
      if (f.has("domains")) domains = parse_domains(f.at("domains"), rows, cols);
      if (f.has("levels_mhz")) {
        levels = f.require<std::vector<double>>("levels_mhz");
        for (auto& l : levels) l *= 1e6;
        volts = f.require<std::vector<double>>("volts_v");
      }
      if (f.has("fixed_voltage_v")) fixed_voltage = f.require<double>("fixed_voltage_v");
      f.finish();
    }
    try {
      s.plant.table = levels.empty() ? OperatingPointTable::standard(domains, n)
                                     : OperatingPointTable(levels, volts, domains, n);
    } catch (const Error& e) {
      throw ScenarioInvalid(std::string("operating_points: ") + e.what());
    }
  }
  if (fixed_voltage) s.plant.initial_volt = *fixed_voltage;

  if (top.has("workload")) {
    Fields f(top.at("workload"), "workload");
    s.wsynth.mix_period_s = f.get<double>("mix_period_ms", s.wsynth.mix_period_s * 1e3) * 1e-3;
    s.wsynth.fast_period_s = f.get<double>("fast_period_us", s.wsynth.fast_period_s * 1e6) * 1e-6;
    s.wsynth.fast_high_class = f.get<std::string>("fast_high_class", s.wsynth.fast_high_class);
    s.wsynth.fast_low_class = f.get<std::string>("fast_low_class", s.wsynth.fast_low_class);
    const json& cores = f.at("cores");
    if (!cores.is_array()) throw ScenarioInvalid("workload.cores must be a list");
    for (std::size_t i = 0; i < cores.size(); ++i) {
      Fields c(cores[i], "workload.cores[" + std::to_string(i) + "]");
      CoreWorkload w;
      if (c.has("seed")) w.seed = c.require<std::uint64_t>("seed");
      if (c.has("kind")) {
        try {
          w.kind = workload::parse_wsynth_kind(c.require<std::string>("kind"));
        } catch (const Error& e) {
          throw ScenarioInvalid(c.where() + ": " + e.what());
        }
      } else {
        w.trace_file = c.require<std::string>("trace_file");
      }
      c.finish();
      s.workloads.push_back(std::move(w));
    }
    f.finish();
  }

  s.controller = parse_controller_kind(top.get<std::string>("controller", "pcf"));

  s.pcf.table = s.plant.table;
  s.pcf.fixed_voltage = fixed_voltage;
  s.pcf.p_min.assign(n, 0.5);
  if (top.has("pcf")) {
    Fields f(top.at("pcf"), "pcf");
    s.pcf.pfct_period = micros_field(f, "pfct_period_us", s.pcf.pfct_period);
    s.pcf.pvct_period = micros_field(f, "pvct_period_us", s.pcf.pvct_period);
    s.pcf.t_limit = f.get<double>("t_limit_c", s.pcf.t_limit);
    s.pcf.t_margin = f.get<double>("t_margin_c", s.pcf.t_margin);
    s.pcf.pid.kp = f.get<double>("kp_w_per_c", s.pcf.pid.kp);
    s.pcf.pid.ki = f.get<double>("ki_w_per_c_s", s.pcf.pid.ki);
    s.pcf.pid.kd = f.get<double>("kd_w_s_per_c", s.pcf.pid.kd);
    if (f.has("p_min_w")) s.pcf.p_min = per_core(f.at("p_min_w"), n, "pcf.p_min_w");
    s.pcf.initial_budget = f.get<double>("initial_budget_w", s.pcf.initial_budget);
    s.pcf.budget_feedback_gain = f.get<double>("budget_feedback_per_s", s.pcf.budget_feedback_gain);
    const auto q = f.get<std::string>("quantization", "floor");
    if (q == "floor") {
      s.pcf.quantization = pcf::Quantization::Floor;
    } else if (q == "error_diffusion") {
      s.pcf.quantization = pcf::Quantization::ErrorDiffusion;
    } else {
      throw ScenarioInvalid("pcf.quantization: expected floor or error_diffusion");
    }
    f.finish();
  }

  s.voting_box.table = s.plant.table;
  s.voting_box.fixed_voltage = fixed_voltage;
  if (top.has("voting_box")) {
    Fields f(top.at("voting_box"), "voting_box");
    s.voting_box.period = micros_field(f, "period_us", s.voting_box.period);
    s.voting_box.kp_hz_per_c = f.get<double>("kp_mhz_per_c", s.voting_box.kp_hz_per_c * 1e-6) * 1e6;
    s.voting_box.ki_hz_per_c_s = f.get<double>("ki_mhz_per_c_s", s.voting_box.ki_hz_per_c_s * 1e-6) * 1e6;
    s.voting_box.t_limit = f.get<double>("t_limit_c", s.voting_box.t_limit);
    s.voting_box.power_gain = f.get<double>("power_gain", s.voting_box.power_gain);
    s.voting_box.integrating_power_vote = f.get<bool>("integrating_power_vote", s.voting_box.integrating_power_vote);
    s.voting_box.initial_budget = f.get<double>("initial_budget_w", s.voting_box.initial_budget);
    f.finish();
  }

  if (top.has("budget_schedule")) {
    const json& list = top.at("budget_schedule");
    if (!list.is_array()) throw ScenarioInvalid("budget_schedule must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Fields e(list[i], "budget_schedule[" + std::to_string(i) + "]");
      s.budget_schedule.push_back({from_seconds(e.require<double>("time_s")), e.require<double>("budget_w")});
      e.finish();
    }
  }

  if (top.has("governor_schedule")) {
    const json& list = top.at("governor_schedule");
    if (!list.is_array()) throw ScenarioInvalid("governor_schedule must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Fields e(list[i], "governor_schedule[" + std::to_string(i) + "]");
      GovernorEntry g;
      g.time = from_seconds(e.require<double>("time_s"));
      const auto core = e.require<std::uint32_t>("core");
      const double mhz = e.require<double>("freq_mhz");
      if (!(mhz > 0.0) || mhz > 4.0e6) throw ScenarioInvalid(e.where() + ": freq_mhz out of range");
      g.command.message = scmi::PerfLevelSet{core, static_cast<std::uint32_t>(std::llround(mhz * 1e3))};
      g.command.agent_id = e.get<std::uint32_t>("agent_id", 16 + core);
      g.command.token = static_cast<std::uint16_t>(i);
      e.finish();
      s.governor_schedule.push_back(g);
    }
  }

  if (top.has("telemetry")) {
    Fields f(top.at("telemetry"), "telemetry");
    s.telemetry_decimation = micros_field(f, "decimation_us", s.telemetry_decimation);
    f.finish();
  }

  if (top.has("async")) {
    Fields f(top.at("async"), "async");
    s.async.realtime_factor = f.get<double>("realtime_factor", s.async.realtime_factor);
    s.async.controller_period_scale = f.get<double>("controller_period_scale", s.async.controller_period_scale);
    s.async.publish_interval = micros_field(f, "publish_interval_us", s.async.publish_interval);
    f.finish();
  }
  top.finish();

  s.pcf.model = s.plant.power.nominal();
  s.voting_box.model = s.plant.power.nominal();
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioInvalid("cannot open scenario file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), file.parent_path());
}

plant::PlantConfig build_plant_config(const Scenario& s) {
  plant::PlantConfig cfg = s.plant;
  if (s.variability_sigma > 0.0) {
    const auto draw = plant::draw_variability(s.core_count(), s.variability_sigma, mix_seed(s.seed, 1));
    for (std::size_t i = 0; i < draw.size(); ++i) cfg.power.variability[i] *= draw[i];
  }
  cfg.seed = mix_seed(s.seed, 2);
  return cfg;
}

std::vector<std::shared_ptr<const workload::WorkloadTrace>> build_traces(const Scenario& s) {
  std::vector<std::shared_ptr<const workload::WorkloadTrace>> out;
  const double duration = to_seconds(s.duration);
  for (std::size_t i = 0; i < s.workloads.size(); ++i) {
    const auto& w = s.workloads[i];
    if (w.kind) {
      const std::uint64_t seed = w.seed.value_or(mix_seed(s.seed, 100 + i));
      out.push_back(std::make_shared<const workload::WorkloadTrace>(
          workload::gen_wsynth(*w.kind, duration, seed, s.wsynth)));
      continue;
    }
    const auto path = s.base_dir / w.trace_file;
    std::ifstream in(path);
    if (!in) throw ScenarioInvalid("cannot open trace file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      out.push_back(std::make_shared<const workload::WorkloadTrace>(workload::WorkloadTrace::from_text(buf.str())));
    } catch (const Error& e) {
      throw ScenarioInvalid(path.string() + ": " + e.what());
    }
  }
  return out;
}

std::unique_ptr<Controller> make_controller(const Scenario& s, ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Pcf:
      return std::make_unique<pcf::Pcf>(s.pcf);
    case ControllerKind::VotingBoxHottest: {
      auto cfg = s.voting_box;
      cfg.variant = baseline::ThermalVariant::HottestCore;
      return std::make_unique<baseline::VotingBox>(cfg);
    }
    case ControllerKind::VotingBoxPerCore: {
      auto cfg = s.voting_box;
      cfg.variant = baseline::ThermalVariant::PerCore;
      return std::make_unique<baseline::VotingBox>(cfg);
    }
  }
  throw ScenarioInvalid("unknown controller kind");
}

}  // namespace pcsim
