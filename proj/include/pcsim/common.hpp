#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcsim {

// Simulation time in integer nanoseconds. Periods and delays are exact multiples
// of the plant step, so tick arithmetic never drifts.
using SimTime = std::int64_t;

constexpr SimTime kNanosPerMicro = 1'000;
constexpr SimTime kNanosPerSecond = 1'000'000'000;

constexpr SimTime micros(std::int64_t us) { return us * kNanosPerMicro; }

inline SimTime from_seconds(double s) { return static_cast<SimTime>(std::llround(s * 1e9)); }
inline double to_seconds(SimTime t) { return static_cast<double>(t) * 1e-9; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StabilityViolation : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class OutOfTrace : public Error {
 public:
  using Error::Error;
};

class ChannelBusy : public Error {
 public:
  using Error::Error;
};

class ScenarioInvalid : public Error {
 public:
  using Error::Error;
};

class EmptyTelemetry : public Error {
 public:
  using Error::Error;
};

// Non-fatal findings raised by controllers and the mailbox (dropped commands,
// infeasible budgets). They never abort a control step.
struct Diagnostic {
  SimTime time = 0;
  std::string source;
  std::string message;
};

class DiagnosticLog {
 public:
  void emit(SimTime time, std::string source, std::string message) {
    entries_.push_back({time, std::move(source), std::move(message)});
  }
  const std::vector<Diagnostic>& entries() const { return entries_; }
  std::size_t count(std::string_view source) const {
    std::size_t n = 0;
    for (const auto& d : entries_) n += (d.source == source) ? 1 : 0;
    return n;
  }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<Diagnostic> entries_;
};

inline void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(want) + " entries, got " +
                            std::to_string(got));
  }
}

}  // namespace pcsim
