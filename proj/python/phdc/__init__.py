"""Grid-tied AC/DC converter simulator with Port-Hamiltonian control and energy audit."""

from ._core import (
    ComparisonError,
    ConfigError,
    Error,
    LoadError,
    ParameterError,
    RunResult,
    ScenarioError,
    SingularityError,
    audit_trajectory_csv,
    check_config,
    compare,
    demo_config,
    demo_names,
    dvoc_current_reference,
    outer_voltage_loop,
    run_config,
    run_demo,
    trajectory_columns,
    write_outputs,
)

__all__ = [
    "ComparisonError",
    "ConfigError",
    "Error",
    "LoadError",
    "ParameterError",
    "RunResult",
    "ScenarioError",
    "SingularityError",
    "audit_trajectory_csv",
    "check_config",
    "compare",
    "demo_config",
    "demo_names",
    "dvoc_current_reference",
    "outer_voltage_loop",
    "run_config",
    "run_demo",
    "trajectory_columns",
    "write_outputs",
]
