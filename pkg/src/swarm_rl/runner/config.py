"""Run configuration: dataclass, validation and the key=value file format."""

from __future__ import annotations

import dataclasses
import os
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .. import envs
from ..ddpg import DdpgConfig
from ..dqn import DqnConfig
from ..errors import ConfigError
from ..hybrid import R_MODES

ALGOS = ("dqn", "ddpg")
THRESHOLDS = {"cartpole": 195.0, "acrobot": -100.0}
THREADS_ENV = "SWARM_RL_THREADS"


@dataclass
class RunConfig:
    algo: str = "dqn"
    env: str = "cartpole"
    n_explorers: int = 8
    n_supervisors: int = 1
    steps: int = 100_000  # per explorer
    seed: int = 0
    b: int = 5
    schedule_divisor: float = 200.0
    candidate_rule: str = "episode"
    target_update: str = "own"
    r_mode: str = "per-dim"
    lr: float | None = None  # DQN rate; None keeps the algorithm default
    actor_lr: float | None = None
    critic_lr: float | None = None
    lr_spread: bool = False
    candidate_episodes: int = 10  # supervisor episodes per candidate (E)
    keepalive_episodes: int = 1  # max replays of the best per supervisor turn
    keepalive_budget: bool = True  # replays stop once the supervisor has used one explorer's steps
    queue_capacity: int = 4
    supervisor: bool = True
    c_pinned: float | None = None
    vanilla: bool = False  # plain single-agent baseline, no server
    probe_interval: int = 500  # per-agent steps between greedy evaluations
    probe_episodes: int = 100
    final_eval_episodes: int | None = None  # None: 100 for dqn, 20 for ddpg
    threshold: float | None = None  # None: per-env default where one exists
    deterministic: bool = False
    out_dir: str | None = None
    dqn: DqnConfig = field(default_factory=DqnConfig)
    ddpg: DdpgConfig = field(default_factory=DdpgConfig)

    @property
    def final_episodes(self) -> int:
        if self.final_eval_episodes is not None:
            return self.final_eval_episodes
        return 100 if self.algo == "dqn" else 20

    @property
    def score_threshold(self) -> float | None:
        return self.threshold if self.threshold is not None else THRESHOLDS.get(self.env)

    def algo_config(self):
        """The DQN/DDPG sub-config with run-level overrides folded in."""
        if self.algo == "dqn":
            return dataclasses.replace(self.dqn, candidate_rule=self.candidate_rule, r_mode=self.r_mode)
        return dataclasses.replace(
            self.ddpg, candidate_rule=self.candidate_rule, r_mode=self.r_mode, target_update=self.target_update
        )

    def validate(self) -> None:
        problems = []
        if self.algo not in ALGOS:
            problems.append(f"algo: expected one of {ALGOS}, got {self.algo!r}")
        if self.env not in envs.SPECS:
            problems.append(f"env: expected one of {tuple(envs.SPECS)}, got {self.env!r}")
        elif self.algo in ALGOS and envs.SPECS[self.env].discrete != (self.algo == "dqn"):
            kind = "discrete" if envs.SPECS[self.env].discrete else "continuous"
            problems.append(f"env: {self.env} has {kind} actions, which {self.algo} cannot drive")
        if self.n_explorers < 1:
            problems.append(f"n_explorers: must be >= 1, got {self.n_explorers}")
        if self.n_supervisors != 1:
            problems.append(f"n_supervisors: fixed at 1, got {self.n_supervisors}")
        if self.vanilla and self.n_explorers != 1:
            problems.append(f"n_explorers: the vanilla baseline runs one agent, got {self.n_explorers}")
        if self.steps < 0:
            problems.append(f"steps: must be >= 0, got {self.steps}")
        if self.b < 1:
            problems.append(f"b: must be >= 1, got {self.b}")
        if self.schedule_divisor <= 0:
            problems.append(f"schedule_divisor: must be > 0, got {self.schedule_divisor}")
        for name in ("lr", "actor_lr", "critic_lr"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                problems.append(f"{name}: must be > 0, got {v}")
        if self.candidate_episodes < self.b + 1:
            problems.append(f"candidate_episodes: must be >= b + 1 = {self.b + 1}, got {self.candidate_episodes}")
        for name in ("keepalive_episodes",):
            if getattr(self, name) < 0:
                problems.append(f"{name}: must be >= 0, got {getattr(self, name)}")
        for name in ("queue_capacity", "probe_interval", "probe_episodes", "final_episodes"):
            if getattr(self, name) < 1:
                problems.append(f"{name}: must be >= 1, got {getattr(self, name)}")
        if self.c_pinned is not None and not 0.0 <= self.c_pinned < 1.5707963267948966:
            problems.append(f"c_pinned: must lie in [0, pi/2), got {self.c_pinned}")
        if self.candidate_rule not in ("episode", "td_target"):
            problems.append(f"candidate_rule: expected episode or td_target, got {self.candidate_rule!r}")
        if self.target_update not in ("own", "global_best"):
            problems.append(f"target_update: expected own or global_best, got {self.target_update!r}")
        if self.r_mode not in R_MODES:
            problems.append(f"r_mode: expected one of {R_MODES}, got {self.r_mode!r}")
        if self.algo in ALGOS:
            try:
                self.algo_config().validate()
            except ConfigError as exc:
                problems.extend(f"{self.algo}.{p}" for p in exc.problems)
        if problems:
            raise ConfigError(problems)


def thread_cap() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}")
    return cap


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(raw: str, hint):
    raw = raw.strip()
    if typing.get_origin(hint) in (typing.Union, types.UnionType):
        args = typing.get_args(hint)
        if type(None) in args and raw.lower() in ("", "none", "null"):
            return None
        hint = next(a for a in args if a is not type(None))
    if hint is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if hint is tuple or typing.get_origin(hint) is tuple:
        return tuple(int(p) for p in raw.replace(" ", "").split(",") if p)
    return hint(raw)


def _hints(cls):
    return typing.get_type_hints(cls)


def apply_overrides(cfg: RunConfig, items: dict) -> RunConfig:
    """Return a copy of ``cfg`` with string values applied; nested keys look like ``dqn.batch_size``.

    Every bad key or value is collected before raising one ``ConfigError``.
    """
    top, sub = {}, {"dqn": {}, "ddpg": {}}
    problems = []
    run_hints = _hints(RunConfig)
    for key, raw in items.items():
        key = key.strip().replace("-", "_")
        prefix, dot, name = key.partition(".")
        if dot:
            if prefix not in sub:
                problems.append(f"{key}: unknown section {prefix!r}")
                continue
            owner = DqnConfig if prefix == "dqn" else DdpgConfig
            hints = _hints(owner)
            if name not in hints:
                problems.append(f"{key}: unknown field")
                continue
            try:
                sub[prefix][name] = _convert(str(raw), hints[name])
            except (ValueError, StopIteration) as exc:
                problems.append(f"{key}: {exc}")
            continue
        if key not in run_hints or key in ("dqn", "ddpg"):
            problems.append(f"{key}: unknown field")
            continue
        try:
            top[key] = _convert(str(raw), run_hints[key])
        except (ValueError, StopIteration) as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    out = dataclasses.replace(cfg, **top)
    out.dqn = dataclasses.replace(out.dqn, **sub["dqn"])
    out.ddpg = dataclasses.replace(out.ddpg, **sub["ddpg"])
    return out


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    items = {}
    problems = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq or not key.strip():
            problems.append(f"line {n}: expected key=value, got {line!r}")
            continue
        items[key.strip()] = value.strip()
    if problems:
        raise ConfigError(problems)
    return items


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    return apply_overrides(base or RunConfig(), parse_config_text(Path(path).read_text()))
