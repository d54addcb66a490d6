"""Soft-tissue XPBD simulation core."""

from ._core import (
    Error,
    MetricsRow,
    Simulation,
    ToolPose,
    closest_point_element_sdf,
    load_scenario_simulation,
    run_scenario,
    tool_kinds,
)

__all__ = [
    "Error",
    "MetricsRow",
    "Simulation",
    "ToolPose",
    "closest_point_element_sdf",
    "load_scenario_simulation",
    "run_scenario",
    "tool_kinds",
]
