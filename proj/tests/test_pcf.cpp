#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pcsim/pcf.hpp"
#include "pcsim/plant.hpp"
#include "test_support.hpp"

using namespace pcsim;
using namespace pcsim::pcf;

namespace {

PcfConfig make_config(std::size_t n, double budget = std::numeric_limits<double>::infinity()) {
  PcfConfig c;
  c.table = OperatingPointTable::standard(OperatingPointTable::single_domain(n), n);
  c.model = plant::PowerParams::uniform(n, 1.0, 12e-9);
  c.p_min.assign(n, 0.5);
  c.initial_budget = budget;
  c.fixed_voltage = 0.75;
  return c;
}

// Snapshot with a constant workload multiplier; the activity counters advance
// consistently with it so the observer sees the same value every window.
SensorSnapshot snap(SimTime t, std::vector<double> temps, double mult = 1.0, std::size_t domains = 1,
                    double rail = 0.0) {
  SensorSnapshot s;
  s.time = t;
  s.temps = std::move(temps);
  s.rail_powers.assign(domains, rail);
  s.workload.assign(s.temps.size(), {mult, 1.0});
  s.activity_ceff.assign(s.temps.size(), mult * to_seconds(t));
  s.activity_ipc.assign(s.temps.size(), to_seconds(t));
  return s;
}

scmi::Command budget_cmd(double watts) {
  return {scmi::PowerCapSet{static_cast<std::uint32_t>(std::llround(watts * 1e3))}, 1, 0};
}

scmi::Command target_cmd(std::uint32_t core, double hz) {
  return {scmi::PerfLevelSet{core, static_cast<std::uint32_t>(std::llround(hz / 1e3))}, 16, 0};
}

// Drives PVCT/PFCT at their periods, PVCT first at coincident ticks.
struct Driver {
  Pcf& pcf;
  SimTime now = 0;
  Setpoints last_pfct;

  void hyperperiod(const std::vector<double>& temps, double mult = 1.0, std::vector<scmi::Command> pvct_inbox = {}) {
    const SimTime pvct = pcf.config().pvct_period;
    const SimTime pfct = pcf.config().pfct_period;
    for (SimTime k = 0; k < pfct / pvct; ++k) {
      const SensorSnapshot s = snap(now, temps, mult);
      pcf.pvct_step(s, k == 0 ? std::span<const scmi::Command>(pvct_inbox) : std::span<const scmi::Command>());
      if (now % pfct == 0) last_pfct = pcf.pfct_step(s, {});
      now += pvct;
    }
  }
};

}  // namespace

TEST_CASE("P4 estimate examples") {
  plant::PowerParams m = plant::PowerParams::uniform(1, 0.0, 1e-9);
  m.kappa_slope = 0.0;
  const std::vector<double> t{70.0}, c{1.0}, f{1e9}, v{1.0};
  CHECK(p4_estimate_power(m, t, c, f, v).total == doctest::Approx(1.0).epsilon(1e-12));

  plant::PowerParams s = plant::PowerParams::uniform(3, 1.5, 1e-9);
  const std::vector<double> temps{40.0, 60.0, 80.0}, mult{1.0, 0.5, 0.1}, zero(3, 0.0), volts{0.6, 0.75, 0.9};
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) expected += s.kappa(temps[i]) * 1.5 * volts[i];
  CHECK(p4_estimate_power(s, temps, mult, zero, volts).total == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("P4 matches the noisy plant on average") {
  plant::PowerParams truth = plant::PowerParams::uniform(1, 1.0, 12e-9);
  truth.noise_sigma = 0.05;
  const plant::PowerParams model = truth.nominal();
  plant::GaussianNoise noise(77);
  const std::vector<double> t{70.0}, c{0.7}, f{1.5e9}, v{0.75};
  const double est = p4_estimate_power(model, t, c, f, v).total;
  double sum = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) sum += plant::compute_power(truth, 0, 1.5e9, 0.75, 70.0, {0.7, 1.0}, noise) - est;
  CHECK(std::abs(sum / n) < 4.0 * 0.05 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("P5 alpha capping examples") {
  const std::vector<double> t1{10, 20}, pm1{1, 1};
  const CapResult under = p5_alpha_power_cap(t1, pm1, 40.0);
  CHECK_FALSE(under.engaged);
  CHECK(under.capped == t1);

  const std::vector<double> t2{50, 50, 50}, pm2{10, 10, 10};
  const CapResult half = p5_alpha_power_cap(t2, pm2, 90.0);
  CHECK(half.engaged);
  CHECK(half.alpha == doctest::Approx(0.5));
  for (double c : half.capped) CHECK(c == doctest::Approx(30.0));
  CHECK(std::accumulate(half.capped.begin(), half.capped.end(), 0.0) == doctest::Approx(90.0).epsilon(1e-15));

  const CapResult floor = p5_alpha_power_cap(t2, pm2, 20.0);
  CHECK(floor.infeasible);
  CHECK(floor.capped == pm2);
}

TEST_CASE("property: P5 respects the budget and preserves demand order") {
  auto g = testing::rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 12)(g));
    std::vector<double> targets(n), p_min(n);
    for (std::size_t i = 0; i < n; ++i) {
      p_min[i] = testing::uniform(g, 0.0, 2.0);
      targets[i] = p_min[i] + testing::uniform(g, 0.0, 20.0);
    }
    const double sum_min = std::accumulate(p_min.begin(), p_min.end(), 0.0);
    const double sum_t = std::accumulate(targets.begin(), targets.end(), 0.0);
    const double budget = testing::uniform(g, sum_min, sum_t * 1.2);
    const CapResult r = p5_alpha_power_cap(targets, p_min, budget);
    const double sum_c = std::accumulate(r.capped.begin(), r.capped.end(), 0.0);
    CHECK(sum_c <= budget + 1e-9);
    CHECK_FALSE(r.infeasible);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(r.capped[i] <= targets[i] + 1e-12);
      CHECK(r.capped[i] >= p_min[i] - 1e-12);
      for (std::size_t j = 0; j < n; ++j) {
        if (targets[i] - p_min[i] > targets[j] - p_min[j]) CHECK(r.capped[i] - p_min[i] >= r.capped[j] - p_min[j]);
      }
    }
  }
}

TEST_CASE("P6 thermal PID examples") {
  const std::vector<double> pm{1.0};
  SUBCASE("cold core keeps its cap") {
    PidBank bank(1);
    const auto out = p6_thermal_pid(std::vector<double>{60.0}, std::vector<double>{25.0}, pm, {0.8, 30, 0}, 80.0,
                                    5e-4, bank);
    CHECK(out[0] == 25.0);
    CHECK(bank.integral[0] == 0.0);
  }
  SUBCASE("proportional only") {
    PidBank bank(1);
    const auto out = p6_thermal_pid(std::vector<double>{85.0}, std::vector<double>{30.0}, pm, {2.0, 0, 0}, 80.0,
                                    5e-4, bank);
    CHECK(out[0] == doctest::Approx(30.0 - 2.0 * 5.0));
  }
  SUBCASE("saturation lands exactly on p_min and the integral stays clamped") {
    PidBank bank(1);
    const PidGains gains{0.8, 30.0, 0.0};
    std::vector<double> out;
    for (int k = 0; k < 100; ++k) {
      out = p6_thermal_pid(std::vector<double>{300.0}, std::vector<double>{20.0}, pm, gains, 80.0, 5e-4, bank);
    }
    CHECK(out[0] == 1.0);
    CHECK(bank.integral[0] <= (20.0 - 1.0) / gains.ki + 1e-15);
  }
}

TEST_CASE("property: hotter never gets a larger cap") {
  auto g = testing::rng(9);
  const PidGains gains{0.8, 30.0, 0.01};
  for (int trial = 0; trial < 2000; ++trial) {
    PidBank bank(1);
    bank.integral[0] = testing::uniform(g, 0.0, 0.5);
    bank.prev_error[0] = testing::uniform(g, -5.0, 5.0);
    bank.has_prev[0] = true;
    PidBank other = bank;
    const double t1 = testing::uniform(g, 60.0, 100.0);
    const double t2 = t1 + testing::uniform(g, 1e-6, 10.0);
    const std::vector<double> cap{testing::uniform(g, 2.0, 25.0)}, pm{1.0};
    const double c1 = p6_thermal_pid(std::vector<double>{t1}, cap, pm, gains, 80.0, 5e-4, bank)[0];
    const double c2 = p6_thermal_pid(std::vector<double>{t2}, cap, pm, gains, 80.0, 5e-4, other)[0];
    CHECK(c2 <= c1);
  }
}

TEST_CASE("P7 inverts the power model and floors to the table") {
  plant::PowerParams m = plant::PowerParams::uniform(1, 1.0, 2e-9);
  const OperatingPointTable coarse({0.8e9, 1.2e9, 1.6e9, 2.0e9}, {0.75, 0.75, 0.75, 0.75},
                                   OperatingPointTable::single_domain(1), 1);
  const std::vector<double> temps{85.0}, mult{1.0}, volts{0.75}, target{2.0e9};

  const FvResult exact = p7_compute_fv(std::vector<double>{4.8}, temps, mult, volts, target, coarse, m, 0.75);
  CHECK(exact.f_raw[0] == doctest::Approx(2.0e9).epsilon(1e-12));
  CHECK(exact.freqs[0] == 2.0e9);

  const double static_w = m.kappa(85.0) * 1.0 * 0.75;
  const FvResult starved =
      p7_compute_fv(std::vector<double>{static_w * 0.5}, temps, mult, volts, target, coarse, m, 0.75);
  CHECK(starved.f_raw[0] < 0.0);
  CHECK(starved.freqs[0] == 0.8e9);

  const double cap_17 = m.kappa(85.0) * (0.75 + 2e-9 * 1.7e9 * 0.75 * 0.75);
  const FvResult mid = p7_compute_fv(std::vector<double>{cap_17}, temps, mult, volts, target, coarse, m, 0.75);
  CHECK(mid.f_raw[0] == doctest::Approx(1.7e9));
  CHECK(mid.freqs[0] == 1.6e9);

  const FvResult ceiling =
      p7_compute_fv(std::vector<double>{100.0}, temps, mult, volts, std::vector<double>{1.3e9}, coarse, m, 0.75);
  CHECK(ceiling.freqs[0] == 1.2e9);
}

TEST_CASE("P7 picks the lowest domain voltage that supports the fastest core") {
  const auto table = OperatingPointTable::standard({{0, 1}, {2}}, 3);
  const plant::PowerParams m = plant::PowerParams::uniform(3, 1.0, 1e-9);
  const std::vector<double> temps(3, 50.0), mult(3, 1.0), volts(3, 0.9), target(3, 2.0e9);
  std::vector<double> caps(3);
  const double fs[3] = {0.8e9, 1.6e9, 1.2e9};
  for (int i = 0; i < 3; ++i) caps[i] = m.kappa(50.0) * (0.9 + 1e-9 * fs[i] * 0.81) + 1e-9;
  const FvResult r = p7_compute_fv(caps, temps, mult, volts, target, table, m, std::nullopt);
  CHECK(r.freqs[0] == 0.8e9);
  CHECK(r.freqs[1] == 1.6e9);
  CHECK(r.domain_volts[0] == 0.90);
  CHECK(r.domain_volts[1] == 0.75);
}

TEST_CASE("error diffusion tracks the continuous request on average") {
  plant::PowerParams m = plant::PowerParams::uniform(1, 1.0, 2e-9);
  const auto table = OperatingPointTable::standard(OperatingPointTable::single_domain(1), 1);
  const std::vector<double> temps{70.0}, mult{1.0}, volts{0.75}, target{2.0e9};
  const double cap = m.kappa(70.0) * (0.75 + 2e-9 * 1.37e9 * 0.75 * 0.75);
  std::vector<double> carry;
  double sum = 0.0;
  const int steps = 1000;
  for (int k = 0; k < steps; ++k) {
    const FvResult r = p7_compute_fv(std::vector<double>{cap}, temps, mult, volts, target, table, m, 0.75,
                                     Quantization::ErrorDiffusion, &carry);
    CHECK(table.is_level(r.freqs[0]));
    sum += r.freqs[0];
  }
  CHECK(sum / steps == doctest::Approx(1.37e9).epsilon(1e-3));
}

TEST_CASE("cold unconstrained system passes the OS targets through") {
  Pcf pcf(make_config(4));
  Driver d{pcf};
  const std::vector<double> cold(4, 45.0);
  for (int k = 0; k < 10; ++k) {
    d.hyperperiod(cold);
    REQUIRE(d.last_pfct.freqs);
    for (double f : *d.last_pfct.freqs) CHECK(f == 2.0e9);
  }
  CHECK_FALSE(pcf.status().capping_active);
}

TEST_CASE("tiny budget drives every core to f_min on the next step") {
  Pcf pcf(make_config(4, 100.0));
  Driver d{pcf};
  const std::vector<double> temps(4, 60.0);
  d.hyperperiod(temps, 1.0, {budget_cmd(0.1)});
  CHECK(pcf.state().budget == doctest::Approx(0.1));
  CHECK(pcf.diagnostics().count("InfeasibleBudget") == 1);
  for (double f : pcf.last_step().fv.freqs) CHECK(f == 0.4e9);
  d.hyperperiod(temps);
  for (double f : *d.last_pfct.freqs) CHECK(f == 0.4e9);
}

TEST_CASE("PVCT applies budgets before the next PFCT and dispatches start-up voltages") {
  PcfConfig cfg = make_config(3);
  cfg.fixed_voltage.reset();
  Pcf pcf(cfg);
  const std::vector<scmi::Command> inbox{budget_cmd(100.0)};
  const Setpoints v = pcf.pvct_step(snap(0, {50, 50, 50}), inbox);
  CHECK(pcf.state().budget == doctest::Approx(100.0));
  REQUIRE(v.volts);
  for (double x : *v.volts) CHECK(x == 0.90);
  CHECK_FALSE(v.freqs);
}

TEST_CASE("frequencies computed at step n are dispatched at step n+1") {
  Pcf pcf(make_config(4, 40.0));
  Driver d{pcf};
  std::vector<double> previous;
  auto g = testing::rng(3);
  for (int k = 0; k < 40; ++k) {
    std::vector<double> temps(4);
    for (auto& t : temps) t = testing::uniform(g, 60.0, 90.0);
    d.hyperperiod(temps, testing::uniform(g, 0.2, 1.0));
    if (!previous.empty()) CHECK(*d.last_pfct.freqs == previous);
    previous = pcf.last_step().fv.freqs;
  }
}

TEST_CASE("property: dispatched frequencies stay on the table, under targets, above f_min") {
  PcfConfig cfg = make_config(6, 30.0);
  cfg.budget_feedback_gain = 30.0;
  Pcf pcf(cfg);
  Driver d{pcf};
  auto g = testing::rng(17);
  std::vector<double> targets(6, 2.0e9);
  for (int k = 0; k < 300; ++k) {
    std::vector<scmi::Command> inbox;
    if (k % 7 == 0) {
      const auto core = static_cast<std::uint32_t>(std::uniform_int_distribution<int>(0, 5)(g));
      const double f = 1e8 * std::uniform_int_distribution<int>(4, 20)(g);
      targets[core] = f;
      inbox.push_back(target_cmd(core, f));
    }
    if (k % 11 == 0) inbox.push_back(budget_cmd(testing::uniform(g, 5.0, 80.0)));
    std::vector<double> temps(6);
    for (auto& t : temps) t = testing::uniform(g, 50.0, 95.0);
    d.hyperperiod(temps, testing::uniform(g, 0.1, 1.0), inbox);
    const auto& table = pcf.config().table;
    for (std::size_t i = 0; i < 6; ++i) {
      const double f = (*d.last_pfct.freqs)[i];
      CHECK(table.is_level(f));
      CHECK(f >= table.f_min());
      // targets reach the controller one PFCT later than the dispatch they constrain
    }
    for (std::size_t i = 0; i < 6; ++i) CHECK(pcf.last_step().fv.freqs[i] <= pcf.state().os_targets[i]);
    const auto& cap = pcf.last_step().cap;
    if (cap.engaged && !cap.infeasible) {
      CHECK(std::accumulate(cap.capped.begin(), cap.capped.end(), 0.0) <= pcf.threshold() + 1e-9);
    }
  }
  CHECK(pcf.state().os_targets == targets);
}

TEST_CASE("steady inputs below the margin converge to fixed setpoints") {
  Pcf pcf(make_config(4, 35.0));
  Driver d{pcf};
  const std::vector<double> temps{60.0, 62.0, 64.0, 66.0};
  std::vector<double> last;
  int unchanged = 0;
  for (int k = 0; k < 50; ++k) {
    d.hyperperiod(temps, 0.8);
    if (*d.last_pfct.freqs == last) ++unchanged;
    last = *d.last_pfct.freqs;
  }
  CHECK(unchanged >= 45);
  CHECK(pcf.status().capping_active);
}

TEST_CASE("rail feedback raises the threshold while the rails read under budget") {
  PcfConfig cfg = make_config(4, 30.0);
  cfg.budget_feedback_gain = 30.0;
  Pcf pcf(cfg);
  SimTime now = 0;
  for (int k = 0; k < 400; ++k) {
    const SensorSnapshot s = snap(now, {60, 60, 60, 60}, 1.0, 1, 27.0);
    pcf.pvct_step(s, {});
    if (k % 4 == 0) pcf.pfct_step(s, {});
    now += micros(125);
  }
  CHECK(pcf.state().threshold_correction > 0.0);
  CHECK(pcf.state().threshold_correction <= 0.2);
  CHECK(pcf.threshold() == doctest::Approx(30.0 * (1.0 + pcf.state().threshold_correction)));

  Pcf plain(make_config(4, 30.0));
  for (SimTime t = 0; t < micros(50000); t += micros(125)) {
    const SensorSnapshot s = snap(t, {60, 60, 60, 60}, 1.0, 1, 27.0);
    plain.pvct_step(s, {});
    if (t % micros(500) == 0) plain.pfct_step(s, {});
  }
  CHECK(plain.threshold() == 30.0);
}

TEST_CASE("malformed commands are dropped with a diagnostic") {
  Pcf pcf(make_config(2, 50.0));
  const std::vector<scmi::Command> inbox{budget_cmd(0.0), target_cmd(7, 1e9), target_cmd(0, 3.0e9),
                                         target_cmd(1, 1.2e9)};
  pcf.pvct_step(snap(0, {50, 50}), inbox);
  pcf.pfct_step(snap(0, {50, 50}), {});
  CHECK(pcf.diagnostics().count("MalformedCommand") == 3);
  CHECK(pcf.state().budget == 50.0);
  CHECK(pcf.state().os_targets[0] == 2.0e9);
  CHECK(pcf.state().os_targets[1] == 1.2e9);
}

TEST_CASE("configuration checks") {
  PcfConfig c = make_config(2);
  c.pfct_period = micros(300);
  CHECK_THROWS_AS(Pcf{c}, ScenarioInvalid);
  c = make_config(2);
  c.t_margin = 90.0;
  CHECK_THROWS_AS(Pcf{c}, ScenarioInvalid);
  c = make_config(2);
  c.pid.ki = -1.0;
  CHECK_THROWS_AS(Pcf{c}, ScenarioInvalid);
  c = make_config(2);
  c.p_min = {1.0};
  CHECK_THROWS_AS(Pcf{c}, DimensionMismatch);
}

TEST_CASE("a full step on the reference scenario is reproducible") {
  const Scenario s = testing::short_reference(0.01);
  const auto traces = build_traces(s);
  plant::Plant plant(build_plant_config(s), traces);
  auto a = make_controller(s, ControllerKind::Pcf);
  auto b = make_controller(s, ControllerKind::Pcf);
  const std::vector<scmi::Command> inbox{budget_cmd(90.0)};
  for (int k = 0; k < 40; ++k) {
    for (int j = 0; j < 125; ++j) plant.step();
    const SensorSnapshot snapshot = plant.snapshot();
    const std::span<const scmi::Command> in = k == 0 ? std::span<const scmi::Command>(inbox) : std::span<const scmi::Command>();
    const Setpoints sa = a->run_task(Pcf::kPvctTask, snapshot, in);
    const Setpoints sb = b->run_task(Pcf::kPvctTask, snapshot, in);
    CHECK(sa.volts == sb.volts);
    if (k % 4 == 0) {
      const Setpoints fa = a->run_task(Pcf::kPfctTask, snapshot, {});
      const Setpoints fb = b->run_task(Pcf::kPfctTask, snapshot, {});
      CHECK(fa.freqs == fb.freqs);
      if (fa.freqs) plant.actuators().request_frequencies(*fa.freqs, plant.time());
    }
  }
  CHECK(a->status().steps == 10);
}
