#include <doctest.h>

#include <algorithm>

#include "pcsim/workload.hpp"
#include "test_support.hpp"

using namespace pcsim;
using namespace pcsim::workload;

namespace {

std::vector<InstructionClass> two_classes() { return {{"A", 1.0, 2.0}, {"B", 0.2, 0.5}}; }

}  // namespace

TEST_CASE("default catalog") {
  const auto c = default_catalog();
  REQUIRE(c.size() == 4);
  CHECK(c[0].name == "idle");
  CHECK(c[0].ceff_multiplier == 0.1);
  CHECK(c[3].name == "vecmax");
  CHECK(c[3].ceff_multiplier == 1.0);
  CHECK(c[3].ipc == 2.0);
}

TEST_CASE("Max and Idle are single pure segments") {
  const WorkloadTrace mx = gen_wsynth(WsynthKind::Max, 2.0, 42);
  REQUIRE(mx.segments().size() == 1);
  CHECK(mx.classes()[3].name == "vecmax");
  CHECK(mx.segments()[0].weights[3] == 1.0);
  CHECK(mx.sample_at(1.3).ceff_multiplier == 1.0);

  const WorkloadTrace idle = gen_wsynth(WsynthKind::Idle, 2.0, 7);
  REQUIRE(idle.segments().size() == 1);
  CHECK(idle.segments()[0].weights[0] == 1.0);
  CHECK(idle.sample_at(0.0).ceff_multiplier == doctest::Approx(0.1));
}

TEST_CASE("Fast alternates between its two extremes in segments of at most 200 us") {
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    const WorkloadTrace f = gen_wsynth(WsynthKind::Fast, 2.0, seed);
    const auto& segs = f.segments();
    REQUIRE(segs.size() > 1000);
    double hi = 0.0, lo = 1e9;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      hi = std::max(hi, f.segment_sample(i).ceff_multiplier);
      lo = std::min(lo, f.segment_sample(i).ceff_multiplier);
    }
    CHECK(hi > lo);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      CHECK(segs[i].duration_s <= 200e-6 + 1e-15);
      const double c = f.segment_sample(i).ceff_multiplier;
      CHECK((c == hi || c == lo));
      if (i > 0) CHECK(c != f.segment_sample(i - 1).ceff_multiplier);
    }
  }
}

TEST_CASE("Fast extremes follow the configured classes") {
  WsynthParams p;
  p.fast_low_class = "idle";
  const WorkloadTrace f = gen_wsynth(WsynthKind::Fast, 0.01, 3, p);
  for (std::size_t i = 0; i < f.segments().size(); ++i) {
    const double c = f.segment_sample(i).ceff_multiplier;
    CHECK((c == 1.0 || c == doctest::Approx(0.1)));
  }
  p.fast_high_class = "idle";
  p.fast_low_class = "vecmax";
  CHECK_THROWS_AS(gen_wsynth(WsynthKind::Fast, 0.01, 3, p), ScenarioInvalid);
}

TEST_CASE("Mix changes blend every mix period") {
  const WorkloadTrace m = gen_wsynth(WsynthKind::Mix, 0.1, 5);
  CHECK(m.segments().size() == 10);
  for (const auto& s : m.segments()) {
    double sum = 0.0;
    for (double w : s.weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(m.sample_at(0.005) != m.sample_at(0.015));
}

TEST_CASE("property: generation is reproducible per (kind, duration, seed)") {
  for (auto kind : {WsynthKind::Max, WsynthKind::Idle, WsynthKind::Mix, WsynthKind::Fast}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CHECK(gen_wsynth(kind, 0.5, seed) == gen_wsynth(kind, 0.5, seed));
    }
  }
  CHECK_FALSE(gen_wsynth(WsynthKind::Mix, 0.5, 1) == gen_wsynth(WsynthKind::Mix, 0.5, 2));
}

TEST_CASE("property: Max >= Mix >= Idle in mean ceff multiplier") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const double mx = gen_wsynth(WsynthKind::Max, 0.2, seed).mean_ceff_multiplier();
    const double mix = gen_wsynth(WsynthKind::Mix, 0.2, seed).mean_ceff_multiplier();
    const double idle = gen_wsynth(WsynthKind::Idle, 0.2, seed).mean_ceff_multiplier();
    CHECK(mx >= mix);
    CHECK(mix >= idle);
  }
}

TEST_CASE("sampling examples") {
  const WorkloadTrace single(two_classes(), {{1.0, {1.0, 0.0}}}, false);
  CHECK(single.sample_at(0.0) == single.sample_at(0.999));

  const WorkloadTrace two(two_classes(), {{1.0, {1.0, 0.0}}, {1.0, {0.0, 1.0}}}, false);
  CHECK(two.sample_at(0.999).ceff_multiplier == 1.0);
  CHECK(two.sample_at(1.0).ceff_multiplier == 0.2);
  CHECK(two.segment_index(from_seconds(1.0)) == 1);

  // weighted-mean oracle
  const WorkloadTrace mix(two_classes(), {{1.0, {0.5, 0.5}}}, false);
  CHECK(mix.sample_at(0.3).ceff_multiplier == doctest::Approx(0.5 * 1.0 + 0.5 * 0.2));
  CHECK(mix.sample_at(0.3).ipc == doctest::Approx(0.5 * 2.0 + 0.5 * 0.5));
}

TEST_CASE("non-looping traces end, looping traces wrap") {
  const WorkloadTrace once(two_classes(), {{1.0, {1.0, 0.0}}, {1.0, {0.0, 1.0}}}, false);
  CHECK_THROWS_AS(once.sample_at(2.0), OutOfTrace);
  CHECK_THROWS_AS(once.sample_at(-0.1), OutOfTrace);
  const WorkloadTrace loop(two_classes(), {{1.0, {1.0, 0.0}}, {1.0, {0.0, 1.0}}}, true);
  CHECK(loop.sample_at(2.5) == loop.sample_at(0.5));
  CHECK(loop.sample_at(3.0) == loop.sample_at(1.0));
}

TEST_CASE("property: cursor agrees with random access sampling") {
  const WorkloadTrace f = gen_wsynth(WsynthKind::Fast, 0.003, 8);
  TraceCursor cur(f);
  for (SimTime t = 0; t < from_seconds(0.01); t += micros(1)) REQUIRE(cur.at(t) == f.sample_at(t));
}

TEST_CASE("invalid traces") {
  CHECK_THROWS_AS(WorkloadTrace(two_classes(), {}, false), ScenarioInvalid);
  CHECK_THROWS_AS(WorkloadTrace(two_classes(), {{1.0, {0.7, 0.7}}}, false), ScenarioInvalid);
  CHECK_THROWS_AS(WorkloadTrace(two_classes(), {{0.0, {1.0, 0.0}}}, false), ScenarioInvalid);
  CHECK_THROWS_AS(WorkloadTrace({{"bad", 0.0, 1.0}}, {{1.0, {1.0}}}, false), ScenarioInvalid);
  CHECK_THROWS_AS(parse_wsynth_kind("huge"), ScenarioInvalid);
  CHECK(parse_wsynth_kind("fast") == WsynthKind::Fast);
}

TEST_CASE("text format round-trips") {
  for (auto kind : {WsynthKind::Max, WsynthKind::Mix, WsynthKind::Fast}) {
    const WorkloadTrace t = gen_wsynth(kind, 0.05, 13);
    const WorkloadTrace back = WorkloadTrace::from_text(t.to_text());
    CHECK(back == t);
  }
  const std::string text =
      "# two phases\n"
      "loop 0\n"
      "class A 1.0 2.0\n"
      "class B 0.2 0.5\n"
      "seg 0.001 A:1\n"
      "seg 0.002 A:0.25 B:0.75\n";
  const WorkloadTrace t = WorkloadTrace::from_text(text);
  CHECK_FALSE(t.looping());
  CHECK(t.total_duration() == doctest::Approx(0.003));
  CHECK(t.sample_at(0.0015).ceff_multiplier == doctest::Approx(0.25 + 0.75 * 0.2));
  CHECK_THROWS_AS(WorkloadTrace::from_text("loop 1\nclass A 1 1\nseg 0.1 Z:1\n"), ScenarioInvalid);
}
