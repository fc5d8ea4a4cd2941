#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pcsim/harness.hpp"
#include "pcsim/metrics.hpp"
#include "pcsim/scenario.hpp"
#include "pcsim/scmi.hpp"
#include "pcsim/workload.hpp"

namespace py = pybind11;
using namespace pcsim;

namespace {

std::optional<ControllerKind> controller_arg(const std::optional<std::string>& name) {
  if (!name) return std::nullopt;
  return parse_controller_kind(*name);
}

py::bytes to_bytes(const scmi::ChannelBytes& b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

scmi::ChannelBytes from_bytes(const py::bytes& data) {
  const std::string s = data;
  if (s.size() != scmi::kChannelBytes) throw py::value_error("SCMI record must be exactly 40 bytes");
  scmi::ChannelBytes b{};
  std::copy(s.begin(), s.end(), b.begin());
  return b;
}

py::dict command_dict(const scmi::Command& c) {
  py::dict d;
  d["agent_id"] = c.agent_id;
  d["token"] = c.token;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, scmi::BaseVersion>) {
          d["message"] = "base-version";
        } else if constexpr (std::is_same_v<T, scmi::PerfLevelSet>) {
          d["message"] = "perf-level-set";
          d["core"] = m.core;
          d["freq_khz"] = m.freq_khz;
        } else {
          d["message"] = "power-cap-set";
          d["budget_mw"] = m.budget_mw;
        }
      },
      c.message);
  return d;
}

scmi::Command command_from(const std::string& message, std::uint32_t agent_id, std::uint16_t token,
                           std::uint32_t core, std::uint32_t freq_khz, std::uint32_t budget_mw) {
  scmi::Command c;
  c.agent_id = agent_id;
  c.token = token;
  if (message == "base-version") {
    c.message = scmi::BaseVersion{};
  } else if (message == "perf-level-set") {
    c.message = scmi::PerfLevelSet{core, freq_khz};
  } else if (message == "power-cap-set") {
    c.message = scmi::PowerCapSet{budget_mw};
  } else {
    throw py::value_error("unknown SCMI message '" + message + "'");
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_pcsim, m) {
  m.doc() = "Closed-loop power and thermal control simulator";

  // translators are tried newest first, so the base class goes in first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ScenarioInvalid>(m, "ScenarioInvalid", PyExc_ValueError);
  py::register_exception<EmptyTelemetry>(m, "EmptyTelemetry", PyExc_ValueError);
  py::register_exception<ChannelBusy>(m, "ChannelBusy", PyExc_RuntimeError);

  py::class_<Scenario>(m, "Scenario")
      .def_readwrite("name", &Scenario::name)
      .def_property(
          "duration_s", [](const Scenario& s) { return to_seconds(s.duration); },
          [](Scenario& s, double v) { s.duration = from_seconds(v); })
      .def_readwrite("seed", &Scenario::seed)
      .def_readwrite("tdp_w", &Scenario::tdp_w)
      .def_readwrite("t_limit_c", &Scenario::t_limit_c)
      .def_property_readonly("core_count", &Scenario::core_count)
      .def_property(
          "mode", [](const Scenario& s) { return std::string(to_string(s.mode)); },
          [](Scenario& s, const std::string& v) { s.mode = parse_execution_mode(v); })
      .def_property(
          "controller", [](const Scenario& s) { return std::string(to_string(s.controller)); },
          [](Scenario& s, const std::string& v) { s.controller = parse_controller_kind(v); })
      .def("validate", &Scenario::validate);

  m.def("load_scenario", [](const std::filesystem::path& p) { return load_scenario(p); }, py::arg("path"));
  m.def("parse_scenario", [](const std::string& text) { return parse_scenario(text); }, py::arg("text"));

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("samples", &MetricsReport::samples)
      .def_readonly("capped_samples", &MetricsReport::capped_samples)
      .def_readonly("mean_abs_budget_deviation_w", &MetricsReport::mean_abs_budget_deviation_w)
      .def_readonly("mean_abs_budget_deviation_pct", &MetricsReport::mean_abs_budget_deviation_pct)
      .def_readonly("max_temp_c", &MetricsReport::max_temp_c)
      .def_readonly("overshoot_c", &MetricsReport::overshoot_c)
      .def_readonly("max_temp_after_settle_c", &MetricsReport::max_temp_after_settle_c)
      .def_readonly("mean_total_power_w", &MetricsReport::mean_total_power_w)
      .def_readonly("retired", &MetricsReport::retired);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("plant_steps", &RunResult::plant_steps)
      .def_readonly("task_invocations", &RunResult::task_invocations)
      .def_readonly("controller", &RunResult::controller)
      .def_property_readonly("samples", [](const RunResult& r) { return r.telemetry.records.size(); })
      .def("telemetry_csv", [](const RunResult& r) { return telemetry_csv(r.telemetry); })
      .def("column", [](const RunResult& r, const std::string& name) {
        // time_s, total_power_w, budget_w or capping
        std::vector<double> out;
        out.reserve(r.telemetry.records.size());
        for (const auto& rec : r.telemetry.records) {
          if (name == "time_s") out.push_back(to_seconds(rec.time));
          else if (name == "total_power_w") out.push_back(rec.total_power);
          else if (name == "budget_w") out.push_back(rec.budget);
          else if (name == "capping") out.push_back(rec.capping ? 1.0 : 0.0);
          else throw py::key_error(name);
        }
        return out;
      })
      .def("metrics", [](const RunResult& r, const Scenario& s) { return compute_metrics(r.telemetry, s); });

  m.def(
      "run",
      [](const Scenario& s, std::optional<std::string> controller) {
        py::gil_scoped_release release;
        return run_scenario(s, controller_arg(controller));
      },
      py::arg("scenario"), py::arg("controller") = py::none());

  m.def(
      "metrics_from_csv",
      [](const std::string& csv, const Scenario& s) {
        std::istringstream in(csv);
        return compute_metrics(read_telemetry_csv(in), s);
      },
      py::arg("csv"), py::arg("scenario"));

  m.def(
      "compare",
      [](const Scenario& s, const std::string& a, const std::string& b) {
        ComparisonReport r;
        {
          py::gil_scoped_release release;
          r = compare_policies(s, parse_controller_kind(a), parse_controller_kind(b));
        }
        py::dict d;
        d["metrics_a"] = r.metrics_a;
        d["metrics_b"] = r.metrics_b;
        d["deltas_pct"] = r.deltas_pct;
        return d;
      },
      py::arg("scenario"), py::arg("a"), py::arg("b"));

  m.def("retired_deltas_pct", &retired_deltas_pct, py::arg("a"), py::arg("b"));

  py::class_<workload::WorkloadTrace>(m, "WorkloadTrace")
      .def("sample_at",
           [](const workload::WorkloadTrace& t, double s) {
             const auto w = t.sample_at(s);
             return py::make_tuple(w.ceff_multiplier, w.ipc);
           })
      .def("to_text", &workload::WorkloadTrace::to_text)
      .def_static("from_text", [](const std::string& s) { return workload::WorkloadTrace::from_text(s); })
      .def_property_readonly("segment_count", [](const workload::WorkloadTrace& t) { return t.segments().size(); })
      .def_property_readonly("total_duration_s", &workload::WorkloadTrace::total_duration);

  m.def(
      "gen_wsynth",
      [](const std::string& kind, double duration_s, std::uint64_t seed) {
        return workload::gen_wsynth(workload::parse_wsynth_kind(kind), duration_s, seed);
      },
      py::arg("kind"), py::arg("duration_s"), py::arg("seed"));

  py::module_ scmi_mod = m.def_submodule("scmi", "Shared-memory command records");
  scmi_mod.attr("RECORD_BYTES") = scmi::kChannelBytes;
  scmi_mod.def(
      "encode",
      [](const std::string& message, std::uint32_t agent_id, std::uint16_t token, std::uint32_t core,
         std::uint32_t freq_khz, std::uint32_t budget_mw) {
        return to_bytes(scmi::encode_record(command_from(message, agent_id, token, core, freq_khz, budget_mw)));
      },
      py::arg("message"), py::arg("agent_id") = 0, py::arg("token") = 0, py::arg("core") = 0,
      py::arg("freq_khz") = 0, py::arg("budget_mw") = 0);
  scmi_mod.def(
      "decode",
      [](const py::bytes& data) -> py::object {
        const auto b = from_bytes(data);
        const auto c = scmi::decode_record(b);
        if (!c) return py::none();
        return command_dict(*c);
      },
      py::arg("record"));
  scmi_mod.def(
      "respond",
      [](const py::bytes& request) {
        const auto c = scmi::decode_record(from_bytes(request));
        if (!c) throw py::value_error("malformed SCMI record");
        return to_bytes(scmi::encode_response(*c, scmi::kStatusSuccess));
      },
      py::arg("request"));
  scmi_mod.def(
      "hexdump",
      [](const py::bytes& data, std::size_t base) {
        const std::string s = data;
        return scmi::hexdump(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), base);
      },
      py::arg("data"), py::arg("base_offset") = 0);
}
