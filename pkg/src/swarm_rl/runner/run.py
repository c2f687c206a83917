"""Experiment orchestration: build the population, schedule it, probe it."""

from __future__ import annotations

import dataclasses
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import envs
from ..agent import eval_seeds, spread_rates, staggered
from ..baselines import VanillaDdpg, VanillaDqn
from ..ddpg import DdpgExplorer, DdpgSupervisor, actor_network
from ..dqn import DqnExplorer, DqnSupervisor, q_network
from ..errors import WorkerError
from ..paramsrv import ParameterServer
from .config import RunConfig, thread_cap

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Probe:
    step: int  # per-agent steps (total explorer steps / n_explorers)
    score: float
    version: int


@dataclass
class RunReport:
    config: RunConfig
    episodes: dict = field(default_factory=dict)  # agent id -> list[EpisodeRecord]
    candidate_evals: list = field(default_factory=list)
    supervisor_trace: list = field(default_factory=list)
    commit_log: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    final_eval_returns: list = field(default_factory=list)
    total_env_steps: int = 0
    wall_clock: float = 0.0

    @property
    def final_eval_mean(self) -> float:
        return float(np.mean(self.final_eval_returns)) if self.final_eval_returns else math.nan

    def steps_to(self, threshold: float | None) -> int | None:
        """First probed per-agent step whose greedy mean reached ``threshold``."""
        if threshold is None:
            return None
        for p in self.probes:
            if p.score >= threshold:
                return p.step
        return None

    @property
    def steps_to_threshold(self) -> int | None:
        return self.steps_to(self.config.score_threshold)


class Prober:
    """Greedy evaluation on a fixed seed set, cached per parameter object."""

    def __init__(self, cfg: RunConfig):
        spec = envs.env_spec(cfg.env)
        self.env = cfg.env
        self.bound = spec.action_bound
        algo_cfg = cfg.algo_config()
        if cfg.algo == "dqn":
            self.net = q_network(spec.obs_dim, spec.n_actions, algo_cfg)
        else:
            self.net = actor_network(spec.obs_dim, 1, algo_cfg)
        self.seeds = eval_seeds(cfg.seed, max(cfg.probe_episodes, cfg.final_episodes))
        self._last = None

    def returns(self, params, k: int) -> np.ndarray:
        if params is None:
            return np.full(k, np.nan)
        key = (k,)
        if self._last is not None and self._last[0] is params and self._last[1] == key:
            return self._last[2]
        self.net.unflatten(params[0] if isinstance(params, tuple) else params)
        if self.bound is None:
            policy = envs.greedy_q_policy(self.net)
        else:
            policy = envs.actor_policy(self.net, self.bound)
        out = envs.evaluate(self.env, policy, self.seeds[:k])
        self._last = (params, key, out)
        return out


def build_population(cfg: RunConfig):
    """Explorers for ``cfg``; the vanilla baseline is a one-agent population."""
    algo_cfg = cfg.algo_config()
    n = cfg.n_explorers
    if cfg.vanilla:
        cls = VanillaDqn if cfg.algo == "dqn" else VanillaDdpg
        return [cls(cfg.env, algo_cfg, cfg.seed, cfg.steps)]
    agents = []
    if cfg.algo == "dqn":
        rates = spread_rates(cfg.seed, n, k=1) if cfg.lr_spread else None
        for i in range(n):
            agents.append(DqnExplorer(
                i, cfg.env, algo_cfg, cfg.seed, cfg.steps,
                lr=None if rates is None else float(rates[i, 0]),
                eps_final=staggered(0.01, 0.2, i, n, algo_cfg.eps_final),
                c_override=cfg.c_pinned,
            ))
    else:
        rates = spread_rates(cfg.seed, n, k=2) if cfg.lr_spread else None
        for i in range(n):
            agents.append(DdpgExplorer(
                i, cfg.env, algo_cfg, cfg.seed, cfg.steps,
                actor_lr=None if rates is None else float(rates[i, 0]),
                critic_lr=None if rates is None else float(rates[i, 1]),
                noise_sigma=staggered(0.05, 0.3, i, n, algo_cfg.noise_sigma),
                c_override=cfg.c_pinned,
            ))
    return agents


def build_supervisor(cfg: RunConfig, server):
    if cfg.vanilla or not cfg.supervisor:
        return None
    cls = DqnSupervisor if cfg.algo == "dqn" else DdpgSupervisor
    return cls(
        server, cfg.env, cfg.algo_config(), b=cfg.b, schedule_divisor=cfg.schedule_divisor,
        episodes_per_candidate=cfg.candidate_episodes, keepalive_episodes=cfg.keepalive_episodes, seed=cfg.seed,
    )


def _resolve_config(cfg: RunConfig) -> RunConfig:
    cfg = dataclasses.replace(cfg)
    if cfg.lr is not None:
        cfg.dqn = dataclasses.replace(cfg.dqn, lr=cfg.lr)
    if cfg.actor_lr is not None:
        cfg.ddpg = dataclasses.replace(cfg.ddpg, actor_lr=cfg.actor_lr)
    if cfg.critic_lr is not None:
        cfg.ddpg = dataclasses.replace(cfg.ddpg, critic_lr=cfg.critic_lr)
    return cfg


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.server = None if cfg.vanilla else ParameterServer(cfg.queue_capacity)
        self.agents = build_population(cfg)
        self.supervisor = build_supervisor(cfg, self.server)
        self.prober = Prober(cfg)
        self.report = RunReport(cfg, episodes={a.agent_id: [] for a in self.agents})
        self.next_probe = cfg.probe_interval

    def clock(self) -> int:
        return sum(a.steps for a in self.agents) // len(self.agents)

    def target(self):
        """Parameters whose greedy score the run reports."""
        if self.supervisor is not None:
            rec = self.server.read_best()
            return rec.params, rec.version
        agent = self.agents[0]
        return agent.latest_params, agent.episodes

    def maybe_probe(self, final: bool = False) -> None:
        clock = self.clock()
        if not final and clock < self.next_probe:
            return
        self.next_probe = (clock // self.cfg.probe_interval + 1) * self.cfg.probe_interval
        params, version = self.target()
        score = float(np.mean(self.prober.returns(params, self.cfg.probe_episodes)))
        if self.report.probes and self.report.probes[-1].step == clock:
            return
        self.report.probes.append(Probe(clock, score, version))
        log.info("step %d: greedy mean %.2f (version %d)", clock, score, version)

    def supervise(self) -> None:
        clock = self.clock()
        self.supervisor.turn(clock, clock if self.cfg.keepalive_budget else None)

    def episode(self, agent, budget_left: int):
        try:
            rec = agent.run_episode(self.server, budget_left)
        except Exception as exc:
            raise WorkerError(agent.agent_id, agent.steps, exc) from exc
        self.report.episodes[agent.agent_id].append(rec)
        return rec

    def run_deterministic(self) -> None:
        """Fixed round-robin: one episode per agent per turn, then the supervisor drains."""
        steps = self.cfg.steps
        while True:
            active = [a for a in self.agents if a.steps < steps]
            if not active:
                break
            for agent in active:
                self.episode(agent, steps - agent.steps)
            if self.supervisor is not None:
                self.supervise()
            self.maybe_probe()

    def run_threaded(self) -> None:
        steps = self.cfg.steps
        done = threading.Event()
        failures = []

        def explore(agent):
            try:
                while agent.steps < steps and not failures:
                    self.episode(agent, steps - agent.steps)
            except WorkerError as exc:
                failures.append(exc)
                raise

        def supervisor_worker():
            while not done.is_set() and not failures:
                before = self.supervisor.episodes_run
                self.supervise()
                if self.supervisor.episodes_run == before:
                    done.wait(0.005)

        sup_thread = None
        if self.supervisor is not None:
            sup_thread = threading.Thread(target=supervisor_worker, name="supervisor", daemon=True)
            sup_thread.start()
        cap = thread_cap() or len(self.agents)
        with ThreadPoolExecutor(max_workers=min(cap, len(self.agents)), thread_name_prefix="explorer") as pool:
            futures = [pool.submit(explore, a) for a in self.agents]
            while not all(f.done() for f in futures):
                time.sleep(0.02)
                if not failures:
                    self.maybe_probe()
        done.set()
        if sup_thread is not None:
            sup_thread.join()
        if failures:
            raise failures[0]
        if self.supervisor is not None:
            # drain what arrived after the explorers stopped
            self.supervise()

    def execute(self) -> RunReport:
        start = time.perf_counter()
        if self.cfg.deterministic:
            self.run_deterministic()
        else:
            self.run_threaded()
        self.maybe_probe(final=True)
        report = self.report
        params, _ = self.target()
        report.final_eval_returns = [float(v) for v in self.prober.returns(params, self.cfg.final_episodes)]
        report.total_env_steps = sum(a.steps for a in self.agents)
        expected = self.cfg.steps * len(self.agents)
        if report.total_env_steps != expected:
            raise RuntimeError(f"step accounting broke: ran {report.total_env_steps}, budget {expected}")
        if self.supervisor is not None:
            report.candidate_evals = list(self.supervisor.evals)
            report.supervisor_trace = list(self.supervisor.trace)
        if self.server is not None:
            report.commit_log = list(self.server.commit_log[1:])
        report.wall_clock = time.perf_counter() - start
        return report


def run(config: RunConfig) -> RunReport:
    """Execute one run; writes CSVs and the SVG when ``out_dir`` is set."""
    config.validate()
    cfg = _resolve_config(config)
    report = _Run(cfg).execute()
    report.config = config
    if config.out_dir is not None:
        from .plot import emit_plot
        from .report import emit_csv

        emit_csv(report, config.out_dir)
        emit_plot(report, config.out_dir)
    return report


def baseline(config: RunConfig) -> RunReport:
    """The vanilla single-agent counterpart of ``config``."""
    return run(dataclasses.replace(config, vanilla=True, n_explorers=1, supervisor=False))
