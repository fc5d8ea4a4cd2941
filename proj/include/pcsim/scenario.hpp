#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcsim/baseline.hpp"
#include "pcsim/controller.hpp"
#include "pcsim/pcf.hpp"
#include "pcsim/plant.hpp"
#include "pcsim/workload.hpp"

namespace pcsim {

enum class ControllerKind { Pcf, VotingBoxHottest, VotingBoxPerCore };
ControllerKind parse_controller_kind(std::string_view name);
std::string_view to_string(ControllerKind kind);

enum class ExecutionMode { Lockstep, Async };
ExecutionMode parse_execution_mode(std::string_view name);
std::string_view to_string(ExecutionMode mode);

struct BudgetEntry {
  SimTime time = 0;
  double budget_w = 0.0;
};

struct GovernorEntry {
  SimTime time = 0;
  scmi::Command command;
};

struct CoreWorkload {
  std::optional<workload::WsynthKind> kind;
  std::optional<std::uint64_t> seed;  // default: derived from the scenario seed
  std::string trace_file;  // used when kind is empty
};

struct AsyncOptions {
  // Simulated seconds per wall-clock second; 0 runs the plant unpaced.
  double realtime_factor = 1.0;
  // Controller task periods are stretched by this factor in async mode.
  double controller_period_scale = 1.0;
  SimTime publish_interval = micros(5);
};

// Everything one closed-loop run needs. Loaded from a JSON document whose
// field names carry their units.
struct Scenario {
  std::string name = "scenario";
  SimTime duration = from_seconds(1.0);
  std::uint64_t seed = 1;
  ExecutionMode mode = ExecutionMode::Lockstep;
  double tdp_w = 120.0;
  double t_limit_c = 85.0;  // chip thermal limit, used by the metrics

  plant::PlantConfig plant;
  double variability_sigma = 0.0;
  workload::WsynthParams wsynth;
  std::vector<CoreWorkload> workloads;

  ControllerKind controller = ControllerKind::Pcf;
  pcf::PcfConfig pcf;
  baseline::VotingBoxConfig voting_box;

  std::vector<BudgetEntry> budget_schedule;
  std::vector<GovernorEntry> governor_schedule;
  std::uint32_t bmc_agent_id = 1;

  SimTime telemetry_decimation = micros(50);
  AsyncOptions async;

  std::filesystem::path base_dir;  // relative trace files resolve against this

  std::size_t core_count() const { return plant.floorplan.core_count(); }
  void validate() const;
};

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& file);

// Plant configuration with per-core variability drawn from the scenario seed.
plant::PlantConfig build_plant_config(const Scenario& s);
std::vector<std::shared_ptr<const workload::WorkloadTrace>> build_traces(const Scenario& s);
std::unique_ptr<Controller> make_controller(const Scenario& s, ControllerKind kind);
inline std::unique_ptr<Controller> make_controller(const Scenario& s) { return make_controller(s, s.controller); }

}  // namespace pcsim
