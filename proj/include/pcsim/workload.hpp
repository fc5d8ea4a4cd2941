#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pcsim/common.hpp"

namespace pcsim::workload {

struct InstructionClass {
  std::string name;
  double ceff_multiplier = 1.0;  // scales the core's baseline effective capacitance
  double ipc = 1.0;
};

// idle, scalar, mixed-mem, vecmax.
std::vector<InstructionClass> default_catalog();

// Mix-weighted reduction of one trace instant.
struct WorkloadSample {
  double ceff_multiplier = 1.0;
  double ipc = 1.0;

  bool operator==(const WorkloadSample&) const = default;
};

struct Segment {
  double duration_s = 0.0;
  std::vector<double> weights;  // indexed like the trace's class catalog
};

// Time-indexed sequence of instruction-class mixes. Segments are left-closed,
// right-open; durations are held internally in integer nanoseconds so segment
// boundaries are exact.
class WorkloadTrace {
 public:
  WorkloadTrace(std::vector<InstructionClass> classes, std::vector<Segment> segments, bool looping);

  WorkloadSample sample_at(double t_s) const { return sample_at(from_seconds(t_s)); }
  WorkloadSample sample_at(SimTime t) const;
  // Index of the segment containing t (after wrapping for looping traces).
  std::size_t segment_index(SimTime t) const;

  const std::vector<InstructionClass>& classes() const { return classes_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const WorkloadSample& segment_sample(std::size_t i) const { return samples_.at(i); }
  SimTime segment_start(std::size_t i) const { return starts_.at(i); }
  bool looping() const { return looping_; }
  double total_duration() const { return to_seconds(total_); }
  SimTime total_duration_ns() const { return total_; }
  double mean_ceff_multiplier() const;

  std::string to_text() const;
  static WorkloadTrace from_text(std::string_view text);

  bool operator==(const WorkloadTrace& other) const;

 private:
  friend class TraceCursor;

  std::vector<InstructionClass> classes_;
  std::vector<Segment> segments_;
  std::vector<WorkloadSample> samples_;
  std::vector<SimTime> starts_;
  SimTime total_ = 0;
  bool looping_ = false;
};

// Monotone sampler for the plant's inner loop: amortised O(1) per call while
// time only moves forward.
class TraceCursor {
 public:
  explicit TraceCursor(const WorkloadTrace& trace) : trace_(&trace) {}
  const WorkloadSample& at(SimTime t);

 private:
  const WorkloadTrace* trace_;
  std::size_t index_ = 0;
  SimTime base_ = 0;  // start time of the current loop iteration
};

enum class WsynthKind { Max, Idle, Mix, Fast };

WsynthKind parse_wsynth_kind(std::string_view name);
std::string_view to_string(WsynthKind kind);

struct WsynthParams {
  double mix_period_s = 10e-3;
  // Fast segments have random durations in [fast_period/2, fast_period].
  double fast_period_s = 200e-6;
  std::string fast_high_class = "vecmax";
  std::string fast_low_class = "mixed-mem";
  std::vector<InstructionClass> catalog = default_catalog();
};

// Synthetic benchmark traces. Max/Idle: one segment of the highest/lowest
// power class. Mix: random blends every mix_period. Fast: alternating
// high/low segments. Traces are looping and reproducible for a given seed.
WorkloadTrace gen_wsynth(WsynthKind kind, double duration_s, std::uint64_t seed, const WsynthParams& params = {});

}  // namespace pcsim::workload
