"""Experiment runner: configuration, scheduling, reports and the CLI."""

from .ablation import AblationReport, ablation, run_many
from .config import RunConfig, apply_overrides, load_config, parse_config_text
from .plot import emit_plot, render_svg
from .report import emit_csv
from .run import Probe, RunReport, baseline, run

__all__ = [
    "AblationReport",
    "Probe",
    "RunConfig",
    "RunReport",
    "ablation",
    "apply_overrides",
    "baseline",
    "emit_csv",
    "emit_plot",
    "load_config",
    "parse_config_text",
    "render_svg",
    "run",
    "run_many",
]
