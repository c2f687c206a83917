"""Plumbing shared by the DQN and DDPG explorers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import ParamVector

# spawn keys for the non-explorer RNG consumers of a run
SUPERVISOR_KEY = 10_000
EVAL_KEY = 20_000
POPULATION_KEY = 30_000


@dataclass
class AgentStreams:
    """Independent generators so that, e.g., attraction draws never shift replay sampling."""

    init: np.random.Generator
    env: np.random.Generator
    explore: np.random.Generator
    replay: np.random.Generator
    attract: np.random.Generator


def agent_streams(seed: int, agent_id: int) -> AgentStreams:
    ss = np.random.SeedSequence(seed, spawn_key=(agent_id,))
    return AgentStreams(*(np.random.default_rng(s) for s in ss.spawn(5)))


def aux_rng(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def eval_seeds(seed: int, n: int) -> list:
    """Episode seeds for greedy evaluation; depend on the run seed only."""
    return [int(s) for s in aux_rng(seed, EVAL_KEY).integers(0, 2**31 - 1, n)]


def staggered(lo: float, hi: float, agent_id: int, n_agents: int, single: float) -> float:
    """Evenly spread per-agent value in [lo, hi]; a lone agent gets ``single``."""
    if n_agents <= 1:
        return single
    return lo + (hi - lo) * agent_id / (n_agents - 1)


def spread_rates(seed: int, n_agents: int, lo: float = 1e-5, hi: float = 1e-2, k: int = 1) -> np.ndarray:
    """Log-uniform per-agent learning rates, shape ``(n_agents, k)``."""
    rng = aux_rng(seed, POPULATION_KEY)
    return 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), (n_agents, k))


@dataclass
class EpisodeRecord:
    episode: int
    steps: int  # the agent's cumulative environment steps at episode end
    ret: float
    epsilon: float  # exploration level (epsilon for DQN, noise sigma for DDPG)
    loss_mean: float
    c_seen: float
    best_version_seen: int
    truncated_by_budget: bool = False
    actor_loss_proxy: float = math.nan
    critic_loss: float = math.nan


class ServerView:
    """An explorer's cached copy of (global best, c), refreshed from the server."""

    def __init__(self, c_override: float | None = None):
        self.version = 0
        self.c = 0.0
        self.score = -math.inf
        self.star = None  # arrays of the global best, or None before the first commit
        self.c_override = c_override

    def refresh(self, server) -> None:
        if server is None:
            return
        rec = server.read_best()
        if rec.version == self.version:
            return
        self.version = rec.version
        self.score = rec.score
        self.c = rec.c
        p = rec.params
        if p is None:
            self.star = None
        elif isinstance(p, ParamVector):
            self.star = p.values
        else:
            self.star = tuple(v.values for v in p)

    @property
    def weight(self) -> float:
        return self.c if self.c_override is None else self.c_override


def mean_or_nan(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan
