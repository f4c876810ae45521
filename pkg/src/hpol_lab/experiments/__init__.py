"""Configs, runners and the report writer behind the ``hpol-lab`` command."""

from hpol_lab.experiments.config import ConfigError, ExperimentConfig, load, parse
from hpol_lab.experiments.report import write_report
from hpol_lab.experiments.runners import (
    Report,
    run,
    run_face_witness,
    run_flat_baseline,
    run_property_suite,
    run_revolution,
)

__all__ = ["ConfigError", "ExperimentConfig", "load", "parse", "write_report", "Report", "run",
           "run_face_witness", "run_flat_baseline", "run_property_suite", "run_revolution"]
