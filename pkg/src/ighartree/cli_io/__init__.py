"""Scenario files, IGHF snapshots, run pipeline and the command line."""
from .pipeline import RunManifest, load_run, run_pipeline, verify_manifest
from .scenario import DEFAULTS, Scenario, load_scenario, parse_scenario
from .snapshot import read_snapshot, write_snapshot, write_state

__all__ = ["DEFAULTS", "RunManifest", "Scenario", "load_run", "load_scenario", "parse_scenario",
           "read_snapshot", "run_pipeline", "verify_manifest", "write_snapshot", "write_state"]
