#include "pcsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace pcsim {

namespace {

void append_num(std::string& out, const char* fmt, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, v);
  out += buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ScenarioInvalid("telemetry: bad number '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw ScenarioInvalid("telemetry: bad integer '" + s + "'");
  return v;
}

constexpr std::size_t kFixedColumns = 5;
constexpr std::size_t kPerCoreColumns = 5;

// Decimated sampling with interval-mean power.
class Recorder {
 public:
  Recorder(SimTime decimation, std::size_t cores) : decimation_(decimation), power_sum_(cores, 0.0) {
    telemetry_.cores = cores;
  }

  void after_step(const plant::Plant& p, const ControllerStatus& status) {
    const auto& st = p.state();
    for (std::size_t i = 0; i < power_sum_.size(); ++i) power_sum_[i] += st.powers[i];
    ++count_;
    if (st.time % decimation_ != 0) return;
    TelemetryRecord r;
    r.time = st.time;
    r.temps = st.temps;
    r.powers.resize(power_sum_.size());
    for (std::size_t i = 0; i < power_sum_.size(); ++i) {
      r.powers[i] = power_sum_[i] / static_cast<double>(count_);
      r.total_power += r.powers[i];
    }
    r.freqs = st.freqs;
    r.volts = st.volts;
    r.retired = st.retired;
    r.budget = status.budget_w;
    r.capping = status.capping_active;
    r.controller_steps = status.steps;
    telemetry_.records.push_back(std::move(r));
    std::fill(power_sum_.begin(), power_sum_.end(), 0.0);
    count_ = 0;
  }

  Telemetry take() { return std::move(telemetry_); }

 private:
  SimTime decimation_;
  std::vector<double> power_sum_;
  std::uint64_t count_ = 0;
  Telemetry telemetry_;
};

void apply(plant::Actuators& act, const Setpoints& sp, SimTime now) {
  if (sp.freqs) act.request_frequencies(*sp.freqs, now);
  if (sp.volts) act.request_voltages(*sp.volts, now);
}

std::vector<std::size_t> task_order(const std::vector<TaskInfo>& tasks) {
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return tasks[a].period < tasks[b].period; });
  return order;
}

void merge_diagnostics(DiagnosticLog& into, const DiagnosticLog& from) {
  for (const auto& d : from.entries()) into.emit(d.time, d.source, d.message);
}

}  // namespace

void write_telemetry_csv(std::ostream& out, const Telemetry& t) { out << telemetry_csv(t); }

std::string telemetry_csv(const Telemetry& t) {
  std::string out = "time_s,total_power_w,budget_w,capping,controller_steps";
  for (std::size_t i = 0; i < t.cores; ++i) {
    const auto k = std::to_string(i);
    out += ",temp_c_" + k + ",power_w_" + k + ",freq_hz_" + k + ",volt_v_" + k + ",retired_" + k;
  }
  out += '\n';
  out.reserve(out.size() + t.records.size() * (32 + t.cores * 64));
  for (const auto& r : t.records) {
    append_num(out, "%.9f", to_seconds(r.time));
    append_num(out, ",%.9g", r.total_power);
    append_num(out, ",%.9g", r.budget);
    out += r.capping ? ",1," : ",0,";
    out += std::to_string(r.controller_steps);
    for (std::size_t i = 0; i < t.cores; ++i) {
      append_num(out, ",%.9g", r.temps[i]);
      append_num(out, ",%.9g", r.powers[i]);
      append_num(out, ",%.9g", r.freqs[i]);
      append_num(out, ",%.9g", r.volts[i]);
      out += ',';
      out += std::to_string(r.retired[i]);
    }
    out += '\n';
  }
  return out;
}

Telemetry read_telemetry_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyTelemetry("telemetry file is empty");
  const auto header = split_csv(line);
  if (header.size() < kFixedColumns || (header.size() - kFixedColumns) % kPerCoreColumns != 0 ||
      header[0] != "time_s") {
    throw ScenarioInvalid("telemetry: unexpected header");
  }
  Telemetry t;
  t.cores = (header.size() - kFixedColumns) / kPerCoreColumns;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ScenarioInvalid("telemetry: row with wrong column count");
    TelemetryRecord r;
    r.time = from_seconds(parse_double(cells[0]));
    r.total_power = parse_double(cells[1]);
    r.budget = parse_double(cells[2]);
    r.capping = cells[3] == "1";
    r.controller_steps = parse_u64(cells[4]);
    for (std::size_t i = 0; i < t.cores; ++i) {
      const std::size_t b = kFixedColumns + i * kPerCoreColumns;
      r.temps.push_back(parse_double(cells[b]));
      r.powers.push_back(parse_double(cells[b + 1]));
      r.freqs.push_back(parse_double(cells[b + 2]));
      r.volts.push_back(parse_double(cells[b + 3]));
      r.retired.push_back(parse_u64(cells[b + 4]));
    }
    t.records.push_back(std::move(r));
  }
  return t;
}

ScheduleFeeder::ScheduleFeeder(const Scenario& s) {
  std::vector<Entry> all;
  std::uint16_t token = 0;
  for (const auto& b : s.budget_schedule) {
    scmi::Command c;
    c.message = scmi::PowerCapSet{static_cast<std::uint32_t>(std::llround(b.budget_w * 1e3))};
    c.agent_id = s.bmc_agent_id;
    c.token = token++;
    all.push_back({b.time, c});
  }
  for (const auto& g : s.governor_schedule) all.push_back({g.time, g.command});
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.time < b.time; });
  pending_.assign(all.begin(), all.end());
}

void ScheduleFeeder::post_due(SimTime now, scmi::MailboxRegion& region) {
  // Per channel, entries go out in schedule order; a blocked channel does not
  // hold up the others.
  std::vector<bool> blocked(scmi::kChannelCount, false);
  for (auto it = pending_.begin(); it != pending_.end() && it->time <= now;) {
    const std::size_t ch = it->command.agent_id % scmi::kChannelCount;
    if (blocked[ch] || region.busy(ch)) {
      blocked[ch] = true;
      ++it;
      continue;
    }
    region.encode(it->command, ch);
    blocked[ch] = true;  // one message per channel per drain
    it = pending_.erase(it);
  }
}

RunResult run_lockstep(const Scenario& s, std::optional<ControllerKind> controller, RunObserver* observer) {
  auto ctrl = make_controller(s, controller.value_or(s.controller));
  plant::Plant plant(build_plant_config(s), build_traces(s));
  scmi::MailboxRegion mailbox;
  ScheduleFeeder feeder(s);
  const auto tasks = ctrl->tasks();
  const auto order = task_order(tasks);

  RunResult result;
  result.controller = std::string(ctrl->name());
  result.task_invocations.assign(tasks.size(), 0);
  Recorder recorder(s.telemetry_decimation, s.core_count());
  const SimTime dt = plant.dt();
  const std::int64_t steps = s.duration / dt;
  const std::vector<scmi::Command> no_commands;

  for (std::int64_t k = 0; k < steps; ++k) {
    const SimTime now = plant.time();
    feeder.post_due(now, mailbox);
    std::optional<SensorSnapshot> snapshot;
    std::vector<scmi::Command> inbox;
    for (std::size_t idx : order) {
      if (now % tasks[idx].period != 0) continue;
      const bool first = !snapshot;
      if (first) {
        snapshot = plant.snapshot();
        inbox = scmi::platform_drain(mailbox, &result.diagnostics, now).commands;
      }
      const Setpoints sp = ctrl->run_task(idx, *snapshot, first ? std::span<const scmi::Command>(inbox)
                                                                 : std::span<const scmi::Command>(no_commands));
      apply(plant.actuators(), sp, now);
      ++result.task_invocations[idx];
      if (observer) observer->on_task(now, idx, *ctrl, sp);
    }
    plant.step();
    ++result.plant_steps;
    if (observer) observer->on_step(plant);
    recorder.after_step(plant, ctrl->status());
  }
  merge_diagnostics(result.diagnostics, ctrl->diagnostics());
  result.telemetry = recorder.take();
  return result;
}

namespace {

// Last-writer-wins slot. The writer fills a fresh buffer off to the side and
// only the pointer swap is guarded, so neither side waits on the other's work.
template <typename T>
class LatestSlot {
 public:
  void publish(std::shared_ptr<const T> value) {
    std::lock_guard lock(mutex_);
    value_.swap(value);
  }
  std::shared_ptr<const T> load() const {
    std::lock_guard lock(mutex_);
    return value_;
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const T> value_;
};

struct Published {
  std::uint64_t sequence = 0;
  Setpoints setpoints;
  ControllerStatus status;
};

}  // namespace

RunResult run_async(const Scenario& s, std::optional<ControllerKind> controller) {
  using Clock = std::chrono::steady_clock;
  auto ctrl = make_controller(s, controller.value_or(s.controller));
  plant::Plant plant(build_plant_config(s), build_traces(s));
  scmi::MailboxRegion mailbox;
  std::mutex mailbox_mutex;
  ScheduleFeeder feeder(s);
  const auto tasks = ctrl->tasks();
  const auto order = task_order(tasks);

  LatestSlot<SensorSnapshot> snapshots;
  LatestSlot<Published> outputs;
  std::atomic<bool> done{false};
  const double rt = s.async.realtime_factor;
  const auto start = Clock::now();
  auto wall_of = [&](SimTime sim) {
    return start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(to_seconds(sim) / rt));
  };

  RunResult result;
  result.controller = std::string(ctrl->name());
  result.task_invocations.assign(tasks.size(), 0);
  DiagnosticLog mailbox_log;

  snapshots.publish(std::make_shared<const SensorSnapshot>(plant.snapshot()));

  std::thread controller_thread([&] {
    std::vector<SimTime> next_due(tasks.size(), 0);
    std::vector<SimTime> period(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      period[i] = std::max<SimTime>(1, static_cast<SimTime>(std::llround(
                                           static_cast<double>(tasks[i].period) * s.async.controller_period_scale)));
    }
    std::uint64_t sequence = 0;
    Setpoints last;
    while (!done.load(std::memory_order_acquire)) {
      const auto snap = snapshots.load();
      const SimTime clock =
          rt > 0.0 ? from_seconds(std::chrono::duration<double>(Clock::now() - start).count() * rt) : snap->time;
      bool ran = false;
      std::vector<scmi::Command> inbox;
      for (std::size_t idx : order) {
        if (next_due[idx] > clock) continue;
        if (!ran) {
          std::lock_guard lock(mailbox_mutex);
          inbox = scmi::platform_drain(mailbox, &mailbox_log, snap->time).commands;
        }
        const Setpoints sp = ctrl->run_task(idx, *snap, ran ? std::span<const scmi::Command>()
                                                            : std::span<const scmi::Command>(inbox));
        if (sp.freqs) last.freqs = sp.freqs;
        if (sp.volts) last.volts = sp.volts;
        ran = true;
        ++result.task_invocations[idx];
        // An overrun skips the missed releases instead of bursting to catch up.
        while (next_due[idx] <= clock) next_due[idx] += period[idx];
      }
      if (ran) {
        auto out = std::make_shared<Published>();
        out->sequence = ++sequence;
        out->setpoints = last;
        out->status = ctrl->status();
        outputs.publish(std::move(out));
      }
      if (rt > 0.0) {
        const SimTime wake = *std::min_element(next_due.begin(), next_due.end());
        std::this_thread::sleep_until(std::min(wall_of(wake), Clock::now() + std::chrono::milliseconds(5)));
      } else {
        std::this_thread::yield();
      }
    }
  });

  Recorder recorder(s.telemetry_decimation, s.core_count());
  const SimTime dt = plant.dt();
  const std::int64_t steps = s.duration / dt;
  const std::int64_t publish_every = std::max<std::int64_t>(1, s.async.publish_interval / dt);
  std::uint64_t applied = 0;
  ControllerStatus status{std::numeric_limits<double>::infinity(), false, 0};
  try {
    for (std::int64_t k = 0; k < steps; ++k) {
      const SimTime now = plant.time();
      if (rt > 0.0 && k % 64 == 0) std::this_thread::sleep_until(wall_of(now));
      {
        std::lock_guard lock(mailbox_mutex);
        feeder.post_due(now, mailbox);
      }
      if (k % publish_every == 0) snapshots.publish(std::make_shared<const SensorSnapshot>(plant.snapshot()));
      if (const auto out = outputs.load(); out && out->sequence != applied) {
        applied = out->sequence;
        apply(plant.actuators(), out->setpoints, now);
        status = out->status;
      }
      plant.step();
      ++result.plant_steps;
      recorder.after_step(plant, status);
    }
  } catch (...) {
    done.store(true, std::memory_order_release);
    controller_thread.join();
    throw;
  }
  done.store(true, std::memory_order_release);
  controller_thread.join();

  merge_diagnostics(result.diagnostics, mailbox_log);
  merge_diagnostics(result.diagnostics, ctrl->diagnostics());
  result.telemetry = recorder.take();
  return result;
}

RunResult run_scenario(const Scenario& s, std::optional<ControllerKind> controller) {
  return s.mode == ExecutionMode::Lockstep ? run_lockstep(s, controller) : run_async(s, controller);
}

}  // namespace pcsim
