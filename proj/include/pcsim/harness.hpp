#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcsim/controller.hpp"
#include "pcsim/plant.hpp"
#include "pcsim/scenario.hpp"
#include "pcsim/scmi.hpp"

namespace pcsim {

// One decimated sample. Power columns are means over the sample interval;
// everything else is the state at `time`.
struct TelemetryRecord {
  SimTime time = 0;
  std::vector<double> temps;
  std::vector<double> powers;
  std::vector<double> freqs;
  std::vector<double> volts;
  std::vector<std::uint64_t> retired;
  double total_power = 0.0;
  double budget = 0.0;
  bool capping = false;
  std::uint64_t controller_steps = 0;
};

struct Telemetry {
  std::size_t cores = 0;
  std::vector<TelemetryRecord> records;
};

void write_telemetry_csv(std::ostream& out, const Telemetry& t);
std::string telemetry_csv(const Telemetry& t);
Telemetry read_telemetry_csv(std::istream& in);

// Hooks for tests that need to look inside a run.
class RunObserver {
 public:
  virtual ~RunObserver() = default;
  // After a controller task ran at `now` and its setpoints were handed to the actuators.
  virtual void on_task(SimTime /*now*/, std::size_t /*task*/, const Controller& /*controller*/,
                       const Setpoints& /*setpoints*/) {}
  // After every plant micro-step.
  virtual void on_step(const plant::Plant& /*plant*/) {}
};

struct RunResult {
  Telemetry telemetry;
  std::vector<std::uint64_t> task_invocations;  // per controller task
  std::uint64_t plant_steps = 0;
  DiagnosticLog diagnostics;  // mailbox and controller findings
  std::string controller;
};

// Feeds budget and governor schedules into the mailbox at their timestamps.
// A command whose channel is still occupied waits for the next attempt.
class ScheduleFeeder {
 public:
  explicit ScheduleFeeder(const Scenario& s);
  void post_due(SimTime now, scmi::MailboxRegion& region);
  bool empty() const { return pending_.empty(); }

 private:
  struct Entry {
    SimTime time;
    scmi::Command command;
  };
  std::deque<Entry> pending_;
};

// Deterministic closed loop: plant micro-steps, controller tasks at multiples
// of their periods (shorter period first at coincident ticks).
RunResult run_lockstep(const Scenario& s, std::optional<ControllerKind> controller = std::nullopt,
                       RunObserver* observer = nullptr);

// Plant and controller on separate threads exchanging snapshots and setpoints
// through last-writer-wins buffers. Not deterministic.
RunResult run_async(const Scenario& s, std::optional<ControllerKind> controller = std::nullopt);

// Dispatches on s.mode.
RunResult run_scenario(const Scenario& s, std::optional<ControllerKind> controller = std::nullopt);

}  // namespace pcsim
