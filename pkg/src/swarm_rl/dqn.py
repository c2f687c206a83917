"""Distributed DQN: explorer agents and their supervisor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import envs
from .agent import EpisodeRecord, ServerView, agent_streams, mean_or_nan
from .errors import ConfigError, NumericError
from .hybrid import R_MODES, hybrid_step_with_optimizer
from .nn import Network, make_optimizer
from .paramsrv import Candidate
from .replay import ReplayBuffer, SnapshotStore
from .supervisor import Supervisor

CANDIDATE_RULES = ("episode", "td_target")


@dataclass
class DqnConfig:
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    lr: float = 0.01
    optimizer: str = "sgd"
    gamma: float = 0.99
    batch_size: int = 32
    buffer_size: int = 50_000
    warmup: int = 1000
    target_sync: int = 500
    eps_start: float = 1.0
    eps_final: float = 0.05
    eps_anneal_frac: float = 0.2
    train_every: int = 1
    read_period: int = 1
    candidate_rule: str = "episode"
    snapshot_period: int = 0  # 0: one snapshot per episode
    snapshot_capacity: int = 64
    r_mode: str = "per-dim"

    def validate(self) -> None:
        problems = []
        if self.lr <= 0:
            problems.append(f"lr: must be > 0, got {self.lr}")
        if not 0.0 <= self.gamma <= 1.0:
            problems.append(f"gamma: must lie in [0, 1], got {self.gamma}")
        for name in ("batch_size", "buffer_size", "target_sync", "train_every", "read_period", "snapshot_capacity"):
            if getattr(self, name) < 1:
                problems.append(f"{name}: must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.eps_final <= self.eps_start <= 1.0:
            problems.append("eps_final/eps_start: need 0 <= eps_final <= eps_start <= 1")
        if self.candidate_rule not in CANDIDATE_RULES:
            problems.append(f"candidate_rule: expected one of {CANDIDATE_RULES}, got {self.candidate_rule!r}")
        if self.r_mode not in R_MODES:
            problems.append(f"r_mode: expected one of {R_MODES}, got {self.r_mode!r}")
        if self.optimizer not in ("sgd", "adam"):
            problems.append(f"optimizer: expected sgd or adam, got {self.optimizer!r}")
        if problems:
            raise ConfigError(problems)


def q_network(obs_dim: int, n_actions: int, cfg: DqnConfig, rng=None) -> Network:
    sizes = [obs_dim, *cfg.hidden, n_actions]
    return Network(sizes, [cfg.activation] * len(cfg.hidden) + ["identity"], rng=rng)


def td_target(r: float, s_next, done: bool, target_net: Network, gamma: float) -> float:
    if done:
        return float(r)
    return float(r + gamma * np.max(target_net.forward(s_next)))


def td_targets(rewards, next_states, dones, target_net: Network, gamma: float) -> np.ndarray:
    q_next = target_net.forward(next_states).max(axis=1)
    return rewards + gamma * (1.0 - dones) * q_next


def dqn_loss_grad(batch, net: Network, target_net: Network, gamma: float, targets=None):
    """Mean squared TD error and its semi-gradient w.r.t. ``net.params``.

    The bootstrapped targets are treated as constants. Returns
    ``(loss, grad)`` with ``grad`` a flat array in parameter order.
    """
    y = td_targets(batch.rewards, batch.next_states, batch.dones, target_net, gamma) if targets is None else targets
    q, acts = net.forward_cached(batch.states)
    n = q.shape[0]
    rows = np.arange(n)
    err = q[rows, batch.actions] - y
    loss = float(np.dot(err, err) / n)
    if not math.isfinite(loss):
        raise NumericError(
            f"non-finite DQN loss {loss}: max|q|={np.abs(q).max()}, max|y|={np.abs(y).max()}, "
            f"actions={batch.actions.tolist()}"
        )
    upstream = np.zeros_like(q)
    upstream[rows, batch.actions] = err * (2.0 / n)
    grad, _ = net.backward_cached(acts, upstream, input_grad=False)
    return loss, grad


def epsilon_at(step: int, total_steps: int, cfg: DqnConfig, eps_final: float) -> float:
    anneal = max(1, int(cfg.eps_anneal_frac * total_steps))
    if step >= anneal:
        return eps_final
    return cfg.eps_start + (eps_final - cfg.eps_start) * step / anneal


class DqnExplorer:
    """One explorer: epsilon-greedy DQN whose updates are pulled toward the global best."""

    def __init__(
        self,
        agent_id: int,
        env_tag: str,
        cfg: DqnConfig,
        seed: int,
        total_steps: int,
        lr: float | None = None,
        eps_final: float | None = None,
        c_override: float | None = None,
    ):
        cfg.validate()
        spec = envs.env_spec(env_tag)
        if not spec.discrete:
            raise ConfigError(f"env: dqn needs a discrete-action task, {env_tag!r} is continuous")
        self.agent_id = agent_id
        self.env_tag = env_tag
        self.cfg = cfg
        self.total_steps = total_steps
        self.n_actions = spec.n_actions
        self.rng = agent_streams(seed, agent_id)
        self.net = q_network(spec.obs_dim, spec.n_actions, cfg, rng=self.rng.init)
        self.target = self.net.copy()
        self.lr = cfg.lr if lr is None else lr
        self.eps_final = cfg.eps_final if eps_final is None else eps_final
        self.optimizer = make_optimizer(cfg.optimizer, self.lr, self.net.n_params)
        self.buffer = ReplayBuffer(cfg.buffer_size, spec.obs_dim)
        self.snapshots = SnapshotStore(cfg.snapshot_capacity)
        self.view = ServerView(c_override)
        self.steps = 0
        self.episodes = 0
        self.y_global = -math.inf
        self.latest_params = self.net.flatten()

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.steps, self.total_steps, self.cfg, self.eps_final)

    def act(self, obs) -> int:
        if self.rng.explore.random() < self.epsilon:
            return int(self.rng.explore.integers(self.n_actions))
        return int(np.argmax(self.net.forward(obs)))

    def learn(self, server=None) -> float | None:
        cfg = self.cfg
        if self.buffer.size < max(cfg.warmup, cfg.batch_size):
            return None
        batch = self.buffer.sample_batch(cfg.batch_size, self.rng.replay)
        y = td_targets(batch.rewards, batch.next_states, batch.dones, self.target, cfg.gamma)
        if cfg.candidate_rule == "td_target" and server is not None:
            self._td_candidate(batch, y, server)
        loss, grad = dqn_loss_grad(batch, self.net, self.target, cfg.gamma, targets=y)
        hybrid_step_with_optimizer(
            self.net, grad, self.view.star, self.optimizer, self.view.weight, self.rng.attract, cfg.r_mode
        )
        return loss

    def _td_candidate(self, batch, y, server):
        i = int(np.argmax(y))
        if y[i] < self.y_global:
            return
        self.y_global = float(y[i])
        params = self.snapshots.lookup(int(batch.snapshot_ids[i]))
        if params is not None:
            server.submit_candidate(Candidate(params, self.y_global, self.agent_id, self.steps))

    def run_episode(self, server=None, max_steps: int | None = None) -> EpisodeRecord:
        """Play one episode (learning online); stops early after ``max_steps`` steps."""
        cfg = self.cfg
        state = envs.reset(self.env_tag, int(self.rng.env.integers(0, 2**31 - 1)))
        obs = envs.observe(state)
        sid = self.snapshots.snapshot(self.net.flatten())
        ret = 0.0
        losses = []
        n = 0
        done = False
        while not done:
            if max_steps is not None and n >= max_steps:
                break
            a = self.act(obs)
            res = envs.step(state, a)
            nxt = envs.observe(res.next_state)
            self.buffer.add(obs, a, res.reward, nxt, res.done and not res.truncated, sid)
            self.steps += 1
            n += 1
            ret += res.reward
            if self.steps % cfg.read_period == 0:
                self.view.refresh(server)
            if self.steps % cfg.train_every == 0:
                loss = self.learn(server)
                if loss is not None:
                    losses.append(loss)
            if self.steps % cfg.target_sync == 0:
                self.target.params[...] = self.net.params
            if cfg.snapshot_period and self.steps % cfg.snapshot_period == 0:
                sid = self.snapshots.snapshot(self.net.flatten())
            state, obs, done = res.next_state, nxt, res.done
        self.episodes += 1
        self.latest_params = self.net.flatten()
        cut = not done
        if server is not None and not cut and cfg.candidate_rule == "episode":
            if ret > server.read_best().score:
                server.submit_candidate(Candidate(self.latest_params, ret, self.agent_id, self.steps))
        return EpisodeRecord(
            self.episodes, self.steps, ret, self.epsilon, mean_or_nan(losses),
            self.view.weight, self.view.version, cut,
        )


def explorer_episode(agent: DqnExplorer, server=None, max_steps=None) -> float:
    return agent.run_episode(server, max_steps).ret


class DqnSupervisor(Supervisor):
    """Replays candidate Q-networks greedily (no exploration)."""

    def __init__(self, server, env_tag, cfg: DqnConfig, **kwargs):
        super().__init__(server, env_tag, **kwargs)
        spec = envs.env_spec(env_tag)
        self.net = q_network(spec.obs_dim, spec.n_actions, cfg)

    def play_episode(self, params):
        self.net.unflatten(params)
        rets, lengths = envs.evaluate(self.env_tag, envs.greedy_q_policy(self.net), [self._episode_seed()], with_lengths=True)
        return float(rets[0]), int(lengths[0])


def supervisor_loop(sup: Supervisor, server=None, episodes_per_candidate: int | None = None, step: int = 0) -> None:
    """One supervisor turn: validate all pending candidates, then replay the best."""
    if episodes_per_candidate is not None:
        sup.episodes_per_candidate = episodes_per_candidate
    if server is not None:
        sup.server = server
    sup.turn(step)
