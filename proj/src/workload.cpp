#include "pcsim/workload.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace pcsim::workload {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t class_index(const std::vector<InstructionClass>& classes, std::string_view name) {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].name == name) return i;
  }
  throw ScenarioInvalid("unknown instruction class '" + std::string(name) + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<InstructionClass> default_catalog() {
  return {
      {"idle", 0.1, 0.2},
      {"scalar", 0.5, 1.0},
      {"mixed-mem", 0.7, 0.8},
      {"vecmax", 1.0, 2.0},
  };
}

WorkloadTrace::WorkloadTrace(std::vector<InstructionClass> classes, std::vector<Segment> segments, bool looping)
    : classes_(std::move(classes)), segments_(std::move(segments)), looping_(looping) {
  if (classes_.empty()) throw ScenarioInvalid("workload trace needs at least one instruction class");
  for (const auto& c : classes_) {
    if (!(c.ceff_multiplier > 0.0) || !(c.ipc > 0.0)) {
      throw ScenarioInvalid("instruction class '" + c.name + "' needs positive ceff multiplier and ipc");
    }
  }
  if (segments_.empty()) throw ScenarioInvalid("workload trace has no segments");

  starts_.reserve(segments_.size());
  samples_.reserve(segments_.size());
  for (const auto& seg : segments_) {
    const SimTime d = from_seconds(seg.duration_s);
    if (d <= 0) throw ScenarioInvalid("workload segment durations must be positive");
    require_size(seg.weights.size(), classes_.size(), "segment weights");
    double sum = 0.0;
    WorkloadSample s{0.0, 0.0};
    for (std::size_t k = 0; k < classes_.size(); ++k) {
      const double w = seg.weights[k];
      if (w < 0.0) throw ScenarioInvalid("segment weights must be non-negative");
      sum += w;
      s.ceff_multiplier += w * classes_[k].ceff_multiplier;
      s.ipc += w * classes_[k].ipc;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ScenarioInvalid("segment weights must sum to 1");
    starts_.push_back(total_);
    samples_.push_back(s);
    total_ += d;
  }
}

std::size_t WorkloadTrace::segment_index(SimTime t) const {
  if (t < 0) throw OutOfTrace("negative trace time");
  if (t >= total_) {
    if (!looping_) throw OutOfTrace("time " + std::to_string(to_seconds(t)) + " s beyond non-looping trace");
    t %= total_;
  }
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  return static_cast<std::size_t>(std::distance(starts_.begin(), it) - 1);
}

WorkloadSample WorkloadTrace::sample_at(SimTime t) const { return samples_[segment_index(t)]; }

double WorkloadTrace::mean_ceff_multiplier() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const SimTime end = (i + 1 < starts_.size()) ? starts_[i + 1] : total_;
    acc += samples_[i].ceff_multiplier * static_cast<double>(end - starts_[i]);
  }
  return acc / static_cast<double>(total_);
}

bool WorkloadTrace::operator==(const WorkloadTrace& other) const {
  if (looping_ != other.looping_ || starts_ != other.starts_ || total_ != other.total_) return false;
  if (classes_.size() != other.classes_.size()) return false;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto& a = classes_[i];
    const auto& b = other.classes_[i];
    if (a.name != b.name || a.ceff_multiplier != b.ceff_multiplier || a.ipc != b.ipc) return false;
  }
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].weights != other.segments_[i].weights) return false;
  }
  return true;
}

std::string WorkloadTrace::to_text() const {
  std::ostringstream out;
  out << "# pcsim workload trace\n";
  out << "loop " << (looping_ ? 1 : 0) << "\n";
  for (const auto& c : classes_) {
    out << "class " << c.name << ' ' << format_double(c.ceff_multiplier) << ' ' << format_double(c.ipc) << "\n";
  }
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const SimTime end = (i + 1 < starts_.size()) ? starts_[i + 1] : total_;
    out << "seg " << format_double(to_seconds(end - starts_[i]));
    for (std::size_t k = 0; k < classes_.size(); ++k) {
      if (segments_[i].weights[k] != 0.0) {
        out << ' ' << classes_[k].name << ':' << format_double(segments_[i].weights[k]);
      }
    }
    out << "\n";
  }
  return out.str();
}

WorkloadTrace WorkloadTrace::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<InstructionClass> classes;
  std::vector<std::pair<double, std::vector<std::pair<std::string, double>>>> raw;
  bool looping = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    auto fail = [&](const std::string& why) {
      throw ScenarioInvalid("trace line " + std::to_string(lineno) + ": " + why);
    };
    if (kw == "loop") {
      int v = 0;
      if (!(ls >> v)) fail("expected 0 or 1 after 'loop'");
      looping = v != 0;
    } else if (kw == "class") {
      InstructionClass c;
      if (!(ls >> c.name >> c.ceff_multiplier >> c.ipc)) fail("expected 'class <name> <ceff> <ipc>'");
      classes.push_back(c);
    } else if (kw == "seg") {
      double d = 0.0;
      if (!(ls >> d)) fail("expected segment duration");
      std::vector<std::pair<std::string, double>> parts;
      std::string tok;
      while (ls >> tok) {
        const auto colon = tok.rfind(':');
        if (colon == std::string::npos) fail("expected <class>:<weight>, got '" + tok + "'");
        try {
          parts.emplace_back(tok.substr(0, colon), std::stod(tok.substr(colon + 1)));
        } catch (const std::exception&) {
          fail("bad weight in '" + tok + "'");
        }
      }
      raw.emplace_back(d, std::move(parts));
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }
  if (classes.empty()) classes = default_catalog();
  std::vector<Segment> segments;
  for (auto& [d, parts] : raw) {
    Segment s{d, std::vector<double>(classes.size(), 0.0)};
    for (auto& [name, w] : parts) s.weights[class_index(classes, name)] += w;
    segments.push_back(std::move(s));
  }
  return WorkloadTrace(std::move(classes), std::move(segments), looping);
}

const WorkloadSample& TraceCursor::at(SimTime t) {
  const auto& starts = trace_->starts_;
  const SimTime total = trace_->total_;
  if (t < base_ + starts[index_]) {
    // Time went backwards: fall back to a fresh lookup.
    index_ = trace_->segment_index(t);
    base_ = trace_->looping() ? (t / total) * total : 0;
    return trace_->samples_[index_];
  }
  for (;;) {
    const SimTime end = base_ + ((index_ + 1 < starts.size()) ? starts[index_ + 1] : total);
    if (t < end) return trace_->samples_[index_];
    if (index_ + 1 < starts.size()) {
      ++index_;
    } else {
      if (!trace_->looping()) throw OutOfTrace("time beyond non-looping trace");
      index_ = 0;
      base_ += total;
    }
  }
}

WsynthKind parse_wsynth_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "max" || lower == "wsynthmax") return WsynthKind::Max;
  if (lower == "idle" || lower == "wsynthidle") return WsynthKind::Idle;
  if (lower == "mix" || lower == "wsynthmix") return WsynthKind::Mix;
  if (lower == "fast" || lower == "wsynthfast") return WsynthKind::Fast;
  throw ScenarioInvalid("unknown workload kind '" + std::string(name) + "'");
}

std::string_view to_string(WsynthKind kind) {
  switch (kind) {
    case WsynthKind::Max: return "max";
    case WsynthKind::Idle: return "idle";
    case WsynthKind::Mix: return "mix";
    case WsynthKind::Fast: return "fast";
  }
  return "?";
}

WorkloadTrace gen_wsynth(WsynthKind kind, double duration_s, std::uint64_t seed, const WsynthParams& params) {
  if (!(duration_s > 0.0)) throw ScenarioInvalid("workload duration must be positive");
  const auto& catalog = params.catalog;
  const std::size_t n = catalog.size();
  const SimTime total = from_seconds(duration_s);

  auto pure = [n](std::size_t k) {
    std::vector<double> w(n, 0.0);
    w[k] = 1.0;
    return w;
  };
  auto by_ceff = [&](bool highest) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      const bool better = highest ? catalog[k].ceff_multiplier > catalog[best].ceff_multiplier
                                  : catalog[k].ceff_multiplier < catalog[best].ceff_multiplier;
      if (better) best = k;
    }
    return best;
  };

  std::vector<Segment> segments;
  std::mt19937_64 rng(seed);

  switch (kind) {
    case WsynthKind::Max:
      segments.push_back({duration_s, pure(by_ceff(true))});
      break;
    case WsynthKind::Idle:
      segments.push_back({duration_s, pure(by_ceff(false))});
      break;
    case WsynthKind::Mix: {
      const SimTime period = from_seconds(params.mix_period_s);
      if (period <= 0) throw ScenarioInvalid("mix period must be positive");
      for (SimTime t = 0; t < total; t += period) {
        // Uniform draw on the simplex (normalised exponentials).
        std::vector<double> w(n);
        double sum = 0.0;
        for (auto& x : w) {
          x = -std::log(1.0 - uniform01(rng));
          sum += x;
        }
        for (auto& x : w) x /= sum;
        // Renormalise the tail so the weights sum to one to the last bit.
        double head = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) head += w[k];
        w[n - 1] = 1.0 - head;
        segments.push_back({to_seconds(std::min(period, total - t)), std::move(w)});
      }
      break;
    }
    case WsynthKind::Fast: {
      const SimTime period = from_seconds(params.fast_period_s);
      const SimTime min_len = period / 2;
      if (min_len <= 0) throw ScenarioInvalid("fast period must be positive");
      const std::size_t hi = class_index(catalog, params.fast_high_class);
      const std::size_t lo = class_index(catalog, params.fast_low_class);
      if (catalog[hi].ceff_multiplier <= catalog[lo].ceff_multiplier) {
        throw ScenarioInvalid("fast workload high class must out-power the low class");
      }
      bool high = (rng() & 1U) != 0;
      const SimTime span_us = (period - min_len) / kNanosPerMicro;
      for (SimTime t = 0; t < total;) {
        SimTime len = min_len + static_cast<SimTime>(rng() % static_cast<std::uint64_t>(span_us + 1)) * kNanosPerMicro;
        len = std::min(len, total - t);
        segments.push_back({to_seconds(len), pure(high ? hi : lo)});
        high = !high;
        t += len;
      }
      break;
    }
  }
  return WorkloadTrace(catalog, std::move(segments), true);
}

}  // namespace pcsim::workload
