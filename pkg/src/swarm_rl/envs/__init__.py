"""In-repo classic-control tasks: ``cartpole``, ``acrobot`` and ``pendulum``."""

from .core import SPECS, EnvSpec, EnvState, StepResult, angle_normalize, env_spec, observe, reset, step
from .rollout import actor_policy, evaluate, greedy_q_policy

__all__ = [
    "SPECS",
    "EnvSpec",
    "EnvState",
    "StepResult",
    "actor_policy",
    "angle_normalize",
    "env_spec",
    "evaluate",
    "greedy_q_policy",
    "observe",
    "reset",
    "step",
]
