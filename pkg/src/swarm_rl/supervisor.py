"""Validation worker that gates commits to the parameter server.

A loaded candidate is replayed greedily; every episode whose return is at
least the current validated score bumps the success counter ``x`` and the
confidence weight ``c``. Once ``x > b`` the candidate is committed with the
mean of its successful returns as its validated score. Between candidates
the current best keeps being replayed, and each further success raises
``c`` and is re-published. Those replays can be held to a step budget so
the supervisor gets the same share of environment steps as one explorer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .agent import SUPERVISOR_KEY, aux_rng
from .errors import ConfigError, StaleCommitError
from .hybrid import schedule_weight


@dataclass
class CandidateEval:
    candidate_id: int
    source_agent: int
    claimed_score: float
    best_score_then: float
    step: int
    returns: list = field(default_factory=list)
    committed: bool = False
    version: int | None = None

    @property
    def eval_mean(self) -> float:
        return sum(self.returns) / len(self.returns) if self.returns else math.nan


@dataclass
class TracePoint:
    step: int
    kind: str  # "candidate" or "best"
    candidate_id: int
    ret: float


class Supervisor:
    """Algorithm-agnostic supervisor; subclasses implement ``play_episode``."""

    def __init__(
        self,
        server,
        env_tag: str,
        b: int = 5,
        schedule_divisor: float = 200.0,
        episodes_per_candidate: int = 10,
        keepalive_episodes: int = 1,
        seed: int = 0,
    ):
        if b < 1:
            raise ConfigError(f"b: must be >= 1, got {b}")
        if episodes_per_candidate < b + 1:
            raise ConfigError(
                f"episodes_per_candidate: must be >= b + 1 = {b + 1} for a commit to be possible"
            )
        self.server = server
        self.env_tag = env_tag
        self.b = b
        self.divisor = schedule_divisor
        self.episodes_per_candidate = episodes_per_candidate
        self.keepalive_episodes = keepalive_episodes
        self.rng = aux_rng(seed, SUPERVISOR_KEY)
        self.best_params = None
        self.best_source = -1
        self.r_global = -math.inf
        self.x = 0
        self.evals: list[CandidateEval] = []
        self.trace: list[TracePoint] = []
        self.episodes_run = 0
        self.env_steps = 0

    def play_episode(self, params) -> tuple[float, int]:
        """One greedy episode of ``params``: ``(return, length)``."""
        raise NotImplementedError

    def episode_return(self, params) -> float:
        return self.play_episode(params)[0]

    def _episode_seed(self) -> int:
        return int(self.rng.integers(0, 2**31 - 1))

    def _play(self, params, kind, cid, step) -> float:
        ret, length = self.play_episode(params)
        ret = float(ret)
        self.env_steps += int(length)
        self.episodes_run += 1
        self.trace.append(TracePoint(step, kind, cid, ret))
        return ret

    def sync_from_server(self):
        """Adopt the server's current best as the record to beat."""
        rec = self.server.read_best()
        self.best_params = rec.params
        self.best_source = rec.source_agent
        self.r_global = rec.score
        self.x = rec.x

    def validate(self, cand, step: int = 0) -> CandidateEval:
        """Replay one candidate for up to ``episodes_per_candidate`` episodes."""
        ev = CandidateEval(cand.candidate_id, cand.source_agent, cand.claimed_score, self.r_global, step)
        x = 0
        successes = []
        for _ in range(self.episodes_per_candidate):
            ret = self._play(cand.params, "candidate", cand.candidate_id, step)
            ev.returns.append(ret)
            if ret < self.r_global:
                continue
            x += 1
            successes.append(ret)
            if x <= self.b:
                continue
            score = sum(successes) / len(successes)
            c = schedule_weight(x, self.b, self.divisor)
            try:
                ev.version = self.server.commit_best(cand.params, score, c, x, step, cand.source_agent)
            except StaleCommitError:
                # someone else raised the bar meanwhile; re-validate from scratch
                self.sync_from_server()
                x = 0
                successes = []
                continue
            ev.committed = True
            self.best_params = cand.params
            self.best_source = cand.source_agent
            self.r_global = score
            self.x = x
            break
        self.evals.append(ev)
        return ev

    def keepalive(self, step: int = 0) -> None:
        """Replay the current best; each success raises and re-publishes ``c``."""
        if self.best_params is None:
            return
        ret = self._play(self.best_params, "best", -1, step)
        if ret < self.r_global:
            return
        self.x += 1
        c = schedule_weight(self.x, self.b, self.divisor)
        try:
            self.server.commit_best(self.best_params, self.r_global, c, self.x, step, self.best_source)
        except StaleCommitError:
            self.sync_from_server()

    def turn(self, step: int = 0, step_budget: int | None = None) -> None:
        """Drain every pending candidate, then replay the current best.

        Candidates are always validated. Replays of the best stop once the
        supervisor's own environment steps reach ``step_budget``.
        """
        while True:
            cand = self.server.take_candidate()
            if cand is None:
                break
            self.validate(cand, step)
        for _ in range(self.keepalive_episodes):
            if step_budget is not None and self.env_steps >= step_budget:
                break
            self.keepalive(step)
