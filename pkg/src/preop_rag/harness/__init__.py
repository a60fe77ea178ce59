"""Experiment configuration, execution, persistence, and reporting."""

from __future__ import annotations

from .config import RunConfig, SystemSpec, load_config
from .runner import RunRecord, load_records, run_experiment
from .report import build_report, write_report

__all__ = [
    "RunConfig",
    "SystemSpec",
    "RunRecord",
    "load_config",
    "load_records",
    "run_experiment",
    "build_report",
    "write_report",
]
