// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "pcsim/harness.hpp"
#include "pcsim/metrics.hpp"
#include "pcsim/pcf.hpp"
#include "pcsim/scmi.hpp"

using namespace pcsim;

namespace {

// Tolerances.
constexpr double kTdpW = 120.0;
constexpr double kMaxDeviationPctTdp = 3.0;
constexpr double kTempLimitC = 85.0;
constexpr double kMaxOvershootC = 1.0;
constexpr double kHottestGainLoPct = 1.0;
constexpr double kHottestGainHiPct = 10.0;
constexpr double kAcceptedPp = 3.0;
constexpr double kMaxGainLoPct = 2.5 - kAcceptedPp;
constexpr double kMaxGainHiPct = 5.0 + kAcceptedPp;
constexpr double kIdleLossLoPct = -3.0 - kAcceptedPp;
constexpr double kIdleLossHiPct = -2.0 + kAcceptedPp;
constexpr double kSteadyRelErr = 1e-9;
constexpr int kRandomModels = 10;
constexpr int kScmiRoundTrips = 10000;
constexpr SimTime kSchedulerWindow = 10'000'000;  // 10 ms

// Workload map of the comparison scenario, 0-based.
constexpr std::size_t kMaxCores[] = {0, 2};
constexpr std::size_t kIdleCores[] = {1, 3};
constexpr std::size_t kMixCores[] = {4, 5, 8};

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("%s  %d  %-34s %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string deltas_text(const std::vector<double>& d) {
  std::string out = "[";
  for (std::size_t i = 0; i < d.size(); ++i) out += fmt(i ? " %+.2f" : "%+.2f", d[i]);
  return out + "]%";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 6: task timing and the P1 dispatch delay, seen from the plant.
class SchedulerProbe : public RunObserver {
 public:
  std::vector<SimTime> pvct_times, pfct_times;
  std::size_t checked_steps = 0, violations = 0, changes_seen = 0;

  void on_task(SimTime now, std::size_t task, const Controller& c, const Setpoints&) override {
    if (task == pcf::Pcf::kPvctTask) {
      pvct_times.push_back(now);
      return;
    }
    pfct_times.push_back(now);
    const auto& pcf = dynamic_cast<const pcf::Pcf&>(c);
    // frequencies live in the plant until the next PFCT are those computed one step earlier
    expected_ = computed_;
    computed_ = pcf.last_step().fv.freqs;
    if (expected_ && computed_ != *expected_) ++changes_seen;
  }

  void on_step(const plant::Plant& p) override {
    if (!expected_) return;
    ++checked_steps;
    if (p.state().freqs != *expected_) ++violations;
  }

 private:
  std::optional<std::vector<double>> computed_;
  std::optional<std::vector<double>> expected_;
};

std::size_t count_in(const std::vector<SimTime>& times, SimTime lo, SimTime hi) {
  return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), hi) -
                                  std::lower_bound(times.begin(), times.end(), lo));
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : std::filesystem::path(PCSIM_SOURCE_DIR) / "scenarios";
  Scenario reference;
  Scenario thermal;
  try {
    reference = load_scenario(dir / "reference.json");
    thermal = load_scenario(dir / "thermal.json");
  } catch (const Error& e) {
    std::fprintf(stderr, "acceptance: %s\n", e.what());
    return 2;
  }

  const RunResult pcf_run = run_lockstep(reference, ControllerKind::Pcf);

  {
    const MetricsReport m = compute_metrics(pcf_run.telemetry, reference);
    const double limit_w = kMaxDeviationPctTdp / 100.0 * kTdpW;
    const bool shape = reference.core_count() == 9 && reference.tdp_w == kTdpW && reference.budget_schedule.size() >= 5;
    report(1, "power-budget tracking", shape && m.capped_samples > 0 && m.mean_abs_budget_deviation_w <= limit_w,
           fmt("mean |P-B| %.3f W (%.2f%% TDP) <= %.2f W over %.0f capped samples", m.mean_abs_budget_deviation_w,
               m.mean_abs_budget_deviation_pct, limit_w, static_cast<double>(m.capped_samples)));
  }

  {
    const MetricsReport m = compute_metrics(run_lockstep(thermal, ControllerKind::Pcf).telemetry, thermal);
    const double overshoot = std::max(0.0, m.max_temp_c - kTempLimitC);
    const bool ok = m.max_temp_after_settle_c <= kTempLimitC && overshoot <= kMaxOvershootC;
    report(2, "thermal capping", ok,
           fmt("max %.3f C after 100 ms settle (<= %.1f), overall max %.3f C, overshoot %.3f C (<= 1.0)",
               m.max_temp_after_settle_c, kTempLimitC, m.max_temp_c, overshoot));
  }

  const MetricsReport per_core = compute_metrics(run_lockstep(reference, ControllerKind::VotingBoxPerCore).telemetry,
                                                 reference);
  {
    const MetricsReport hottest = compute_metrics(
        run_lockstep(reference, ControllerKind::VotingBoxHottest).telemetry, reference);
    const auto d = retired_deltas_pct(per_core.retired, hottest.retired);
    bool ok = true;
    for (std::size_t c : kMaxCores) ok = ok && d[c] > 0.0 && d[c] >= kHottestGainLoPct && d[c] <= kHottestGainHiPct;
    report(3, "hottest vs per-core, max cores", ok,
           "max cores " + fmt("%+.2f%% %+.2f%%", d[kMaxCores[0]], d[kMaxCores[1]]) + " in [+1, +10]; all " +
               deltas_text(d));
  }

  {
    const MetricsReport pcf_m = compute_metrics(pcf_run.telemetry, reference);
    const auto d = retired_deltas_pct(per_core.retired, pcf_m.retired);
    bool signs = true, bands = true;
    for (std::size_t c : kMaxCores) {
      signs = signs && d[c] > 0.0;
      bands = bands && d[c] >= kMaxGainLoPct && d[c] <= kMaxGainHiPct;
    }
    for (std::size_t c : kIdleCores) {
      signs = signs && d[c] < 0.0;
      bands = bands && d[c] >= kIdleLossLoPct && d[c] <= kIdleLossHiPct;
    }
    for (std::size_t c : kMixCores) signs = signs && d[c] > 0.0;
    report(4, "pcf vs per-core band", signs && bands,
           std::string("signs ") + (signs ? "ok" : "wrong") + ", bands " + (bands ? "ok" : "out") +
               " (max [-0.5, +8], idle [-6, +1]); all " + deltas_text(d));
  }

  {
    std::mt19937_64 g(5);
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); };
    double worst_err = 0.0, worst_rho = 0.0;
    for (int trial = 0; trial < kRandomModels; ++trial) {
      const auto rows = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 4)(g));
      const auto cols = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 4)(g));
      plant::RcParams rc;
      rc.r_lateral = u(0.3, 5.0);
      rc.r_vertical = u(0.3, 3.0);
      rc.c_thermal = u(1e-4, 5e-3);
      rc.dt = rc.c_thermal / (4.0 / rc.r_lateral + 1.0 / rc.r_vertical) * u(0.05, 0.9);
      const double ambient = u(20.0, 50.0);
      const plant::ThermalModel m = build_thermal_model(plant::Floorplan(rows, cols), rc, ambient);
      const auto n = m.a.rows();
      worst_rho = std::max(worst_rho, Eigen::EigenSolver<Eigen::MatrixXd>(m.a).eigenvalues().cwiseAbs().maxCoeff());

      Eigen::VectorXd p(n);
      for (Eigen::Index i = 0; i < n; ++i) p[i] = u(0.0, 10.0);
      const Eigen::VectorXd rise =
          (Eigen::MatrixXd::Identity(n, n) - m.a).fullPivLu().solve(m.b * p);
      std::vector<double> t(static_cast<std::size_t>(n), ambient);
      const std::vector<double> pw(p.data(), p.data() + n);
      const auto steps = static_cast<long>(std::ceil(40.0 * m.slowest_time_constant() / m.dt));
      for (long k = 0; k < steps; ++k) t = thermal_step(m, t, pw);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double expected = ambient + rise[i];
        worst_err = std::max(worst_err, std::abs(t[static_cast<std::size_t>(i)] - expected) / std::abs(expected));
      }
    }
    report(5, "thermal steady-state oracle", worst_err <= kSteadyRelErr && worst_rho < 1.0,
           fmt("worst relative error %.2e (<= 1e-9), worst spectral radius %.9f (< 1)", worst_err, worst_rho));
  }

  {
    Scenario s = reference;
    s.duration = 10 * kSchedulerWindow;
    SchedulerProbe probe;
    run_lockstep(s, ControllerKind::Pcf, &probe);
    bool counts = true;
    const SimTime stride = micros(25);
    for (SimTime start = 0; start + kSchedulerWindow <= s.duration; start += stride) {
      const auto pvct = count_in(probe.pvct_times, start, start + kSchedulerWindow);
      const auto pfct = count_in(probe.pfct_times, start, start + kSchedulerWindow);
      counts = counts && pfct > 0 && pvct == 4 * pfct;
    }
    const bool delay = probe.violations == 0 && probe.checked_steps > 0 && probe.changes_seen > 0;
    report(6, "scheduler contract", counts && delay,
           std::string("PVCT = 4 x PFCT in every 10 ms window: ") + (counts ? "yes" : "no") +
               fmt("; one-step delay held on %.0f plant steps (%.0f setpoint changes), %.0f violations",
                   static_cast<double>(probe.checked_steps), static_cast<double>(probe.changes_seen),
                   static_cast<double>(probe.violations)));
  }

  {
    std::mt19937_64 g(11);
    scmi::MailboxRegion region;
    int mismatches = 0;
    for (int k = 0; k < kScmiRoundTrips; ++k) {
      scmi::Command c;
      switch (g() % 3) {
        case 0: c.message = scmi::BaseVersion{}; break;
        case 1: c.message = scmi::PerfLevelSet{static_cast<std::uint32_t>(g() % 64), static_cast<std::uint32_t>(g())}; break;
        default: c.message = scmi::PowerCapSet{static_cast<std::uint32_t>(g())}; break;
      }
      c.agent_id = static_cast<std::uint32_t>(g());
      c.token = static_cast<std::uint16_t>(g());
      const std::size_t ch = g() % scmi::kChannelCount;
      region.encode(c, ch);
      const auto raw = region.channel(ch);
      const scmi::ChannelBytes written = [&] {
        scmi::ChannelBytes b{};
        std::copy(raw.begin(), raw.end(), b.begin());
        return b;
      }();
      const auto d = scmi::platform_drain(region);
      if (d.commands.size() != 1 || !(d.commands[0] == c) || scmi::encode_record(d.commands[0]) != written) ++mismatches;
    }
    const std::size_t size = scmi::encode_record(scmi::Command{}).size();

    // BaseVersion, agent 0x2A, token 0xBEEF, answered on channel 3
    const std::uint8_t expected[40] = {0x01, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x0C, 0x00,
                                       0x00, 0x00, 0x10, 0x00, 0xEF, 0xBE, 0x00, 0x00, 0x00, 0x00,
                                       0x00, 0x00, 0x02, 0x00, 0x2A, 0x00, 0x00, 0x00, 0, 0,
                                       0,    0,    0,    0,    0,    0,    0,    0,    0, 0};
    scmi::MailboxRegion r;
    r.encode({scmi::BaseVersion{}, 0x2A, 0xBEEF}, 3);
    scmi::platform_drain(r);
    const auto resp = r.channel(3);
    const bool response_ok = std::equal(resp.begin(), resp.end(), std::begin(expected));
    report(7, "SCMI conformance", mismatches == 0 && size == 40 && response_ok,
           fmt("%.0f/%.0f round-trips byte-exact, record %.0f B, ", kScmiRoundTrips - mismatches, kScmiRoundTrips,
               static_cast<double>(size)) +
               "BaseVersion response " + (response_ok ? "matches" : "differs from") + " reference bytes");
  }

  {
    const auto tmp = std::filesystem::temp_directory_path();
    const auto a = tmp / "pcsim_acceptance_a.csv";
    const auto b = tmp / "pcsim_acceptance_b.csv";
    {
      std::ofstream out(a, std::ios::binary);
      write_telemetry_csv(out, pcf_run.telemetry);
    }
    {
      std::ofstream out(b, std::ios::binary);
      write_telemetry_csv(out, run_lockstep(reference, ControllerKind::Pcf).telemetry);
    }
    const std::string ta = slurp(a), tb = slurp(b);
    report(8, "determinism", !ta.empty() && ta == tb,
           fmt("two seed-%.0f runs: %.0f and %.0f bytes, ", static_cast<double>(reference.seed),
               static_cast<double>(ta.size()), static_cast<double>(tb.size())) +
               (ta == tb ? "identical" : "different"));
    std::filesystem::remove(a);
    std::filesystem::remove(b);
  }

  return failures == 0 ? 0 : 1;
}
