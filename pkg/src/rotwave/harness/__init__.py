"""Configuration-driven experiments: sweeps, audits, fits and their CSV output."""
from .config import ExperimentConfig, load_config
from .experiments import (
    ConvergenceReport,
    CompareResult,
    ExperimentError,
    audit_invariants,
    build_report,
    run_amplitude,
    run_compare,
    run_compare_all,
    run_converge,
    run_gaussian,
    run_trajectory,
    sweep,
)
from .fitting import EnvelopeFit, LineFit, ehrenfest_window, fit_envelope, fit_rate

__all__ = [
    "CompareResult",
    "ConvergenceReport",
    "EnvelopeFit",
    "ExperimentConfig",
    "ExperimentError",
    "LineFit",
    "audit_invariants",
    "build_report",
    "ehrenfest_window",
    "fit_envelope",
    "fit_rate",
    "load_config",
    "run_amplitude",
    "run_compare",
    "run_compare_all",
    "run_converge",
    "run_gaussian",
    "run_trajectory",
    "sweep",
]
