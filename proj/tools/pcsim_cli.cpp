#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "pcsim/harness.hpp"
#include "pcsim/metrics.hpp"
#include "pcsim/scenario.hpp"
#include "pcsim/scmi.hpp"
#include "pcsim/workload.hpp"

namespace {

constexpr int kExitInvalid = 2;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void print_diagnostics(const pcsim::DiagnosticLog& log) {
  for (const auto& d : log.entries()) {
    std::fprintf(stderr, "[%.6f s] %s: %s\n", pcsim::to_seconds(d.time), d.source.c_str(), d.message.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcsim: closed-loop many-core power and thermal control simulator"};
  app.require_subcommand(1);

  std::string scenario_file, out_file, mode, ctrl_a, ctrl_b, telemetry_file;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run a scenario and write telemetry");
  run->add_option("scenario", scenario_file, "Scenario JSON")->required();
  run->add_option("--mode", mode, "lockstep or async");
  run->add_option("--out", out_file, "Telemetry CSV");
  run->add_option("--seed", seed, "Override the scenario seed");

  auto* compare = app.add_subcommand("compare", "Run two controllers on one scenario");
  compare->add_option("scenario", scenario_file, "Scenario JSON")->required();
  compare->add_option("--a", ctrl_a, "Baseline controller")->required();
  compare->add_option("--b", ctrl_b, "Compared controller")->required();
  compare->add_option("--out", out_file, "Report CSV")->required();
  compare->add_option("--seed", seed, "Override the scenario seed");

  auto* metrics = app.add_subcommand("metrics", "Summarise a telemetry file");
  metrics->add_option("telemetry", telemetry_file, "Telemetry CSV")->required();
  metrics->add_option("scenario", scenario_file, "Scenario JSON")->required();

  std::string kind;
  double duration_s = 1.0;
  std::uint64_t trace_seed = 1;
  auto* trace = app.add_subcommand("trace-gen", "Write a synthetic workload trace");
  trace->add_option("kind", kind, "max, idle, mix or fast")->required();
  trace->add_option("--duration-s", duration_s, "Trace length");
  trace->add_option("--seed", trace_seed, "Generator seed");
  trace->add_option("--out", out_file, "Trace file (default stdout)");

  std::string message = "base-version";
  std::uint32_t core = 0, agent = 0;
  double freq_mhz = 1000.0, budget_w = 100.0;
  std::size_t channel = 0;
  auto* encode = app.add_subcommand("encode", "Hex-dump the 40-byte record for one command");
  encode->add_option("message", message, "base-version, perf-level-set or power-cap-set");
  encode->add_option("--core", core);
  encode->add_option("--freq-mhz", freq_mhz);
  encode->add_option("--budget-w", budget_w);
  encode->add_option("--agent", agent);
  encode->add_option("--channel", channel, "Channel index for the printed offset");

  double at_s = 0.0;
  auto* mailbox = app.add_subcommand("mailbox", "Hex-dump the mailbox region after posting a scenario's schedule");
  mailbox->add_option("scenario", scenario_file, "Scenario JSON")->required();
  mailbox->add_option("--at-s", at_s, "Post every entry due at or before this time");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto s = pcsim::load_scenario(scenario_file);
      if (!mode.empty()) s.mode = pcsim::parse_execution_mode(mode);
      if (seed) s.seed = *seed;
      const auto result = pcsim::run_scenario(s);
      if (!out_file.empty()) {
        auto out = open_out(out_file);
        pcsim::write_telemetry_csv(out, result.telemetry);
      }
      print_diagnostics(result.diagnostics);
      std::printf("controller              %s (%s)\n", result.controller.c_str(),
                  std::string(pcsim::to_string(s.mode)).c_str());
      pcsim::write_metrics_text(std::cout, pcsim::compute_metrics(result.telemetry, s));
    } else if (*compare) {
      auto s = pcsim::load_scenario(scenario_file);
      if (seed) s.seed = *seed;
      const auto report =
          pcsim::compare_policies(s, pcsim::parse_controller_kind(ctrl_a), pcsim::parse_controller_kind(ctrl_b));
      auto out = open_out(out_file);
      pcsim::write_comparison_csv(out, report);
      pcsim::write_comparison_csv(std::cout, report);
    } else if (*metrics) {
      const auto s = pcsim::load_scenario(scenario_file);
      std::ifstream in(telemetry_file);
      if (!in) throw std::runtime_error("cannot open " + telemetry_file);
      pcsim::write_metrics_text(std::cout, pcsim::compute_metrics(pcsim::read_telemetry_csv(in), s));
    } else if (*trace) {
      const auto t = pcsim::workload::gen_wsynth(pcsim::workload::parse_wsynth_kind(kind), duration_s, trace_seed);
      if (out_file.empty()) {
        std::cout << t.to_text();
      } else {
        auto out = open_out(out_file);
        out << t.to_text();
      }
    } else if (*encode) {
      pcsim::scmi::Command cmd;
      cmd.agent_id = agent;
      if (message == "base-version") {
        cmd.message = pcsim::scmi::BaseVersion{};
      } else if (message == "perf-level-set") {
        cmd.message = pcsim::scmi::PerfLevelSet{core, static_cast<std::uint32_t>(std::llround(freq_mhz * 1e3))};
      } else if (message == "power-cap-set") {
        cmd.message = pcsim::scmi::PowerCapSet{static_cast<std::uint32_t>(std::llround(budget_w * 1e3))};
      } else {
        throw pcsim::ScenarioInvalid("unknown message " + message);
      }
      const auto rec = pcsim::scmi::encode_record(cmd);
      std::cout << pcsim::scmi::describe(cmd) << '\n'
                << pcsim::scmi::hexdump(rec, channel * pcsim::scmi::kChannelBytes);
    } else if (*mailbox) {
      const auto s = pcsim::load_scenario(scenario_file);
      pcsim::scmi::MailboxRegion region;
      pcsim::ScheduleFeeder feeder(s);
      feeder.post_due(pcsim::from_seconds(at_s), region);
      for (std::size_t ch = 0; ch < pcsim::scmi::kChannelCount; ++ch) {
        if (!region.doorbell(ch)) continue;
        std::printf("channel %zu (doorbell pending)\n", ch);
        std::cout << pcsim::scmi::hexdump(region.channel(ch), ch * pcsim::scmi::kChannelBytes);
      }
    }
  } catch (const pcsim::ScenarioInvalid& e) {
    std::fprintf(stderr, "invalid scenario: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
