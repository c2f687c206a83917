"""Distributed deep RL where explorers are pulled toward a supervisor-validated global best."""

from .errors import ConfigError, ContractError, NumericError, ShapeError, StaleCommitError, SwarmRLError, WorkerError
from .runner import RunConfig, RunReport, ablation, run

__all__ = [
    "ConfigError",
    "ContractError",
    "NumericError",
    "RunConfig",
    "RunReport",
    "ShapeError",
    "StaleCommitError",
    "SwarmRLError",
    "WorkerError",
    "ablation",
    "run",
]
__version__ = "0.1.0"
