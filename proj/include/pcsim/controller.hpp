#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcsim/common.hpp"
#include "pcsim/plant.hpp"
#include "pcsim/scmi.hpp"

namespace pcsim {

using plant::SensorSnapshot;

// What a task hands to the actuators. Unset fields leave the plant unchanged.
struct Setpoints {
  std::optional<std::vector<double>> freqs;  // Hz per core
  std::optional<std::vector<double>> volts;  // V per core
};

struct TaskInfo {
  std::string name;
  SimTime period = 0;
};

struct ControllerStatus {
  double budget_w = 0.0;
  bool capping_active = false;
  std::uint64_t steps = 0;  // main-task invocations
};

// A periodic-task controller. The runner invokes run_task for every task whose
// period divides the current time, shorter periods first.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string_view name() const = 0;
  virtual std::vector<TaskInfo> tasks() const = 0;
  virtual Setpoints run_task(std::size_t task, const SensorSnapshot& snapshot,
                             std::span<const scmi::Command> inbox) = 0;
  virtual ControllerStatus status() const = 0;
  virtual const DiagnosticLog& diagnostics() const = 0;
};

// Estimated workload seen by a controller: the window average of the plant's
// activity counters since the previous read, or the instantaneous descriptor on
// the first read.
class WorkloadObserver {
 public:
  std::vector<double> observe_ceff(const SensorSnapshot& snapshot);

 private:
  std::optional<SimTime> last_time_;
  std::vector<double> last_counters_;
};

}  // namespace pcsim
