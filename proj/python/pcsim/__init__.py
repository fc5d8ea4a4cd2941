"""Python front end for the pcsim closed-loop simulator."""

from ._pcsim import (
    ChannelBusy,
    EmptyTelemetry,
    Error,
    MetricsReport,
    RunResult,
    Scenario,
    ScenarioInvalid,
    WorkloadTrace,
    compare,
    gen_wsynth,
    load_scenario,
    metrics_from_csv,
    parse_scenario,
    retired_deltas_pct,
    run,
    scmi,
)

CONTROLLERS = ("pcf", "voting_box_hottest", "voting_box_per_core")

__all__ = [
    "CONTROLLERS",
    "ChannelBusy",
    "EmptyTelemetry",
    "Error",
    "MetricsReport",
    "RunResult",
    "Scenario",
    "ScenarioInvalid",
    "WorkloadTrace",
    "compare",
    "gen_wsynth",
    "load_scenario",
    "metrics_from_csv",
    "parse_scenario",
    "retired_deltas_pct",
    "run",
    "scmi",
]
