"""Distributed DDPG: actor-critic explorers and their supervisor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import envs
from .agent import EpisodeRecord, ServerView, agent_streams, mean_or_nan
from .errors import ConfigError, NumericError, ShapeError
from .hybrid import R_MODES, hybrid_step_with_optimizer
from .nn import Network, ParamVector, make_optimizer
from .paramsrv import Candidate
from .replay import ReplayBuffer, SnapshotStore
from .supervisor import Supervisor

TARGET_UPDATES = ("own", "global_best")


@dataclass
class DdpgConfig:
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    optimizer: str = "adam"
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 64
    buffer_size: int = 100_000
    warmup: int = 1000
    noise_sigma: float = 0.1  # fraction of the action bound
    train_every: int = 1
    read_period: int = 1
    candidate_rule: str = "episode"
    target_update: str = "own"
    snapshot_period: int = 0
    snapshot_capacity: int = 64
    r_mode: str = "per-dim"

    def validate(self) -> None:
        problems = []
        for name in ("actor_lr", "critic_lr"):
            if getattr(self, name) <= 0:
                problems.append(f"{name}: must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.gamma <= 1.0:
            problems.append(f"gamma: must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            problems.append(f"tau: must lie in (0, 1], got {self.tau}")
        if self.noise_sigma < 0:
            problems.append(f"noise_sigma: must be >= 0, got {self.noise_sigma}")
        for name in ("batch_size", "buffer_size", "train_every", "read_period", "snapshot_capacity"):
            if getattr(self, name) < 1:
                problems.append(f"{name}: must be >= 1, got {getattr(self, name)}")
        if self.candidate_rule not in ("episode", "td_target"):
            problems.append(f"candidate_rule: expected episode or td_target, got {self.candidate_rule!r}")
        if self.target_update not in TARGET_UPDATES:
            problems.append(f"target_update: expected one of {TARGET_UPDATES}, got {self.target_update!r}")
        if self.r_mode not in R_MODES:
            problems.append(f"r_mode: expected one of {R_MODES}, got {self.r_mode!r}")
        if self.optimizer not in ("sgd", "adam"):
            problems.append(f"optimizer: expected sgd or adam, got {self.optimizer!r}")
        if problems:
            raise ConfigError(problems)


def actor_network(obs_dim, act_dim, cfg: DdpgConfig, rng=None) -> Network:
    """Deterministic policy with a tanh output; scale by the action bound outside."""
    return Network([obs_dim, *cfg.hidden, act_dim], [cfg.activation] * len(cfg.hidden) + ["tanh"], rng=rng)


def critic_network(obs_dim, act_dim, cfg: DdpgConfig, rng=None) -> Network:
    """Q(s, a) on the concatenated state-action vector."""
    return Network(
        [obs_dim + act_dim, *cfg.hidden, 1], [cfg.activation] * len(cfg.hidden) + ["identity"], rng=rng
    )


def critic_target(r, s_next, actor_t: Network, critic_t: Network, gamma: float, done: bool, bound: float = 1.0) -> float:
    if done:
        return float(r)
    s_next = np.asarray(s_next, dtype=np.float64)
    a = bound * actor_t.forward(s_next)
    return float(r + gamma * critic_t.forward(np.concatenate([s_next, a]))[0])


def critic_targets(rewards, next_states, dones, actor_t, critic_t, gamma, bound=1.0) -> np.ndarray:
    a = bound * actor_t.forward(next_states)
    q = critic_t.forward(np.hstack([next_states, a]))[:, 0]
    return rewards + gamma * (1.0 - dones) * q


def critic_loss_grad(states, actions, targets, critic: Network):
    """Mean squared error of Q(s, a) against constant targets, and its gradient."""
    actions = np.asarray(actions, dtype=np.float64).reshape(len(states), -1)
    q, cache = critic.forward_cached(np.hstack([states, actions]))
    n = q.shape[0]
    err = q[:, 0] - targets
    loss = float(np.dot(err, err) / n)
    if not math.isfinite(loss):
        raise NumericError(f"non-finite critic loss {loss}: max|q|={np.abs(q).max()}, max|y|={np.abs(targets).max()}")
    grad, _ = critic.backward_cached(cache, (err * (2.0 / n))[:, None], input_grad=False)
    return loss, grad


def actor_grad(states, actor: Network, critic: Network, bound: float = 1.0):
    """Deterministic policy gradient of J = mean_i Q(s_i, bound * mu(s_i)).

    Returns ``(grad, J)``; ``grad`` is an ascent direction for ``J`` and a
    fresh array (safe to keep).
    """
    states = np.asarray(states, dtype=np.float64)
    mu, a_cache = actor.forward_cached(states)
    obs_dim = states.shape[1]
    q, c_cache = critic.forward_cached(np.hstack([states, bound * mu]))
    n = q.shape[0]
    _, dx = critic.backward_cached(c_cache, np.full((n, 1), 1.0 / n), param_grad=False)
    grad, _ = actor.backward_cached(a_cache, bound * dx[:, obs_dim:], input_grad=False)
    return grad.copy(), float(q.mean())


def soft_update(target, online, tau: float):
    """``tau * online + (1 - tau) * target`` on snapshots or arrays."""
    t = target.values if isinstance(target, ParamVector) else np.asarray(target, dtype=np.float64)
    o = online.values if isinstance(online, ParamVector) else np.asarray(online, dtype=np.float64)
    if t.shape != o.shape:
        raise ShapeError(f"soft update between shapes {t.shape} and {o.shape}")
    out = t * (1.0 - tau)
    out += tau * o
    return ParamVector(out, target.layout) if isinstance(target, ParamVector) else out


def soft_update_(target: np.ndarray, source: np.ndarray, tau: float) -> None:
    """In-place ``target <- tau * source + (1 - tau) * target``."""
    target *= 1.0 - tau
    target += tau * source


class DdpgExplorer:
    """One explorer; actor and critic are both pulled toward the global-best pair."""

    def __init__(
        self,
        agent_id: int,
        env_tag: str,
        cfg: DdpgConfig,
        seed: int,
        total_steps: int,
        actor_lr: float | None = None,
        critic_lr: float | None = None,
        noise_sigma: float | None = None,
        c_override: float | None = None,
    ):
        cfg.validate()
        spec = envs.env_spec(env_tag)
        if spec.discrete:
            raise ConfigError(f"env: ddpg needs a continuous-action task, {env_tag!r} is discrete")
        self.agent_id = agent_id
        self.env_tag = env_tag
        self.cfg = cfg
        self.total_steps = total_steps
        self.bound = spec.action_bound
        self.obs_dim = spec.obs_dim
        self.rng = agent_streams(seed, agent_id)
        self.actor = actor_network(spec.obs_dim, 1, cfg, rng=self.rng.init)
        self.critic = critic_network(spec.obs_dim, 1, cfg, rng=self.rng.init)
        self.actor_t = self.actor.copy()
        self.critic_t = self.critic.copy()
        self.actor_lr = cfg.actor_lr if actor_lr is None else actor_lr
        self.critic_lr = cfg.critic_lr if critic_lr is None else critic_lr
        self.sigma = cfg.noise_sigma if noise_sigma is None else noise_sigma
        self.actor_opt = make_optimizer(cfg.optimizer, self.actor_lr, self.actor.n_params)
        self.critic_opt = make_optimizer(cfg.optimizer, self.critic_lr, self.critic.n_params)
        self.buffer = ReplayBuffer(cfg.buffer_size, spec.obs_dim, action_dim=1)
        self.snapshots = SnapshotStore(cfg.snapshot_capacity)
        self.view = ServerView(c_override)
        self.steps = 0
        self.episodes = 0
        self.y_global = -math.inf
        self.latest_params = self.params()

    def params(self):
        return (self.actor.flatten(), self.critic.flatten())

    def act(self, obs) -> float:
        a = self.bound * self.actor.forward(obs)[0]
        if self.sigma > 0:
            a += self.rng.explore.normal(0.0, self.sigma * self.bound)
        return min(max(a, -self.bound), self.bound)

    def learn(self, server=None):
        """One actor-critic update; returns ``(critic_loss, -J)`` or ``None`` during warmup."""
        cfg = self.cfg
        if self.buffer.size < max(cfg.warmup, cfg.batch_size):
            return None
        batch = self.buffer.sample_batch(cfg.batch_size, self.rng.replay)
        y = critic_targets(batch.rewards, batch.next_states, batch.dones, self.actor_t, self.critic_t, cfg.gamma, self.bound)
        if cfg.candidate_rule == "td_target" and server is not None:
            self._td_candidate(batch, y, server)
        # one read of (star, c) serves both updates
        star = self.view.star
        c = self.view.weight
        star_actor, star_critic = (None, None) if star is None else star
        critic_loss, g_critic = critic_loss_grad(batch.states, batch.actions, y, self.critic)
        hybrid_step_with_optimizer(self.critic, g_critic, star_critic, self.critic_opt, c, self.rng.attract, cfg.r_mode)
        g_actor, j = actor_grad(batch.states, self.actor, self.critic, self.bound)
        np.negative(g_actor, out=g_actor)  # minimize -J
        hybrid_step_with_optimizer(self.actor, g_actor, star_actor, self.actor_opt, c, self.rng.attract, cfg.r_mode)
        if cfg.target_update == "global_best" and star is not None:
            # literal form: target <- tau * online + (1 - tau) * global best
            np.multiply(self.actor.params, cfg.tau, out=self.actor_t.params)
            self.actor_t.params += (1.0 - cfg.tau) * star_actor
            np.multiply(self.critic.params, cfg.tau, out=self.critic_t.params)
            self.critic_t.params += (1.0 - cfg.tau) * star_critic
        else:
            soft_update_(self.actor_t.params, self.actor.params, cfg.tau)
            soft_update_(self.critic_t.params, self.critic.params, cfg.tau)
        return critic_loss, -j

    def _td_candidate(self, batch, y, server):
        i = int(np.argmax(y))
        if y[i] < self.y_global:
            return
        self.y_global = float(y[i])
        params = self.snapshots.lookup(int(batch.snapshot_ids[i]))
        if params is not None:
            server.submit_candidate(Candidate(params, self.y_global, self.agent_id, self.steps))

    def run_episode(self, server=None, max_steps: int | None = None) -> EpisodeRecord:
        cfg = self.cfg
        state = envs.reset(self.env_tag, int(self.rng.env.integers(0, 2**31 - 1)))
        obs = envs.observe(state)
        sid = self.snapshots.snapshot(self.params())
        ret = 0.0
        critic_losses = []
        actor_losses = []
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
                out = self.learn(server)
                if out is not None:
                    critic_losses.append(out[0])
                    actor_losses.append(out[1])
            if cfg.snapshot_period and self.steps % cfg.snapshot_period == 0:
                sid = self.snapshots.snapshot(self.params())
            state, obs, done = res.next_state, nxt, res.done
        self.episodes += 1
        self.latest_params = self.params()
        cut = not done
        if server is not None and not cut and cfg.candidate_rule == "episode":
            if ret > server.read_best().score:
                server.submit_candidate(Candidate(self.latest_params, ret, self.agent_id, self.steps))
        critic_loss = mean_or_nan(critic_losses)
        return EpisodeRecord(
            self.episodes, self.steps, ret, self.sigma, critic_loss, self.view.weight, self.view.version, cut,
            actor_loss_proxy=mean_or_nan(actor_losses), critic_loss=critic_loss,
        )


def ddpg_explorer_episode(agent: DdpgExplorer, server=None, max_steps=None) -> float:
    return agent.run_episode(server, max_steps).ret


class DdpgSupervisor(Supervisor):
    """Replays candidate actors without exploration noise."""

    def __init__(self, server, env_tag, cfg: DdpgConfig, **kwargs):
        super().__init__(server, env_tag, **kwargs)
        spec = envs.env_spec(env_tag)
        self.bound = spec.action_bound
        self.actor = actor_network(spec.obs_dim, 1, cfg)

    def play_episode(self, params):
        actor_params = params[0] if isinstance(params, tuple) else params
        self.actor.unflatten(actor_params)
        policy = envs.actor_policy(self.actor, self.bound)
        rets, lengths = envs.evaluate(self.env_tag, policy, [self._episode_seed()], with_lengths=True)
        return float(rets[0]), int(lengths[0])


def ddpg_supervisor_loop(sup: Supervisor, server=None, episodes_per_candidate: int | None = None, step: int = 0) -> None:
    if episodes_per_candidate is not None:
        sup.episodes_per_candidate = episodes_per_candidate
    if server is not None:
        sup.server = server
    sup.turn(step)
