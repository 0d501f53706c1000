"""Configuration, orchestration and command line for the experiments."""
from .config import KINDS, ExperimentConfig, apply_overrides, from_dict, load, loads
from .runner import RunRecord, make_datum, run, sweep

__all__ = ["KINDS", "ExperimentConfig", "RunRecord", "apply_overrides", "from_dict", "load",
           "loads", "make_datum", "run", "sweep"]
