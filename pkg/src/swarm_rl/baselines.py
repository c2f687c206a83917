"""Plain single-agent DQN and DDPG with no server, supervisor or attraction.

They draw from the same per-agent random streams as the distributed
explorers, so with one explorer and a zero attraction weight the two
produce identical weight trajectories.
"""

from __future__ import annotations

import numpy as np

from . import envs
from .agent import EpisodeRecord, agent_streams, mean_or_nan
from .ddpg import DdpgConfig, actor_grad, actor_network, critic_loss_grad, critic_network, critic_targets, soft_update_
from .dqn import DqnConfig, dqn_loss_grad, epsilon_at, q_network, td_targets
from .errors import ConfigError
from .nn import make_optimizer
from .replay import ReplayBuffer


class VanillaDqn:
    def __init__(self, env_tag: str, cfg: DqnConfig, seed: int, total_steps: int, agent_id: int = 0):
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
        self.optimizer = make_optimizer(cfg.optimizer, cfg.lr, self.net.n_params)
        self.buffer = ReplayBuffer(cfg.buffer_size, spec.obs_dim)
        self.steps = 0
        self.episodes = 0
        self.latest_params = self.net.flatten()

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.steps, self.total_steps, self.cfg, self.cfg.eps_final)

    def act(self, obs) -> int:
        if self.rng.explore.random() < self.epsilon:
            return int(self.rng.explore.integers(self.n_actions))
        return int(np.argmax(self.net.forward(obs)))

    def learn(self):
        cfg = self.cfg
        if self.buffer.size < max(cfg.warmup, cfg.batch_size):
            return None
        batch = self.buffer.sample_batch(cfg.batch_size, self.rng.replay)
        loss, grad = dqn_loss_grad(batch, self.net, self.target, cfg.gamma)
        self.optimizer.step(self.net.params, grad)
        return loss

    def run_episode(self, server=None, max_steps: int | None = None) -> EpisodeRecord:
        cfg = self.cfg
        state = envs.reset(self.env_tag, int(self.rng.env.integers(0, 2**31 - 1)))
        obs = envs.observe(state)
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
            self.buffer.add(obs, a, res.reward, nxt, res.done and not res.truncated)
            self.steps += 1
            n += 1
            ret += res.reward
            if self.steps % cfg.train_every == 0:
                loss = self.learn()
                if loss is not None:
                    losses.append(loss)
            if self.steps % cfg.target_sync == 0:
                self.target.params[...] = self.net.params
            state, obs, done = res.next_state, nxt, res.done
        self.episodes += 1
        self.latest_params = self.net.flatten()
        return EpisodeRecord(self.episodes, self.steps, ret, self.epsilon, mean_or_nan(losses), 0.0, 0, not done)


class VanillaDdpg:
    def __init__(self, env_tag: str, cfg: DdpgConfig, seed: int, total_steps: int, agent_id: int = 0):
        cfg.validate()
        spec = envs.env_spec(env_tag)
        if spec.discrete:
            raise ConfigError(f"env: ddpg needs a continuous-action task, {env_tag!r} is discrete")
        self.agent_id = agent_id
        self.env_tag = env_tag
        self.cfg = cfg
        self.total_steps = total_steps
        self.bound = spec.action_bound
        self.rng = agent_streams(seed, agent_id)
        self.actor = actor_network(spec.obs_dim, 1, cfg, rng=self.rng.init)
        self.critic = critic_network(spec.obs_dim, 1, cfg, rng=self.rng.init)
        self.actor_t = self.actor.copy()
        self.critic_t = self.critic.copy()
        self.sigma = cfg.noise_sigma
        self.actor_opt = make_optimizer(cfg.optimizer, cfg.actor_lr, self.actor.n_params)
        self.critic_opt = make_optimizer(cfg.optimizer, cfg.critic_lr, self.critic.n_params)
        self.buffer = ReplayBuffer(cfg.buffer_size, spec.obs_dim, action_dim=1)
        self.steps = 0
        self.episodes = 0
        self.latest_params = self.params()

    def params(self):
        return (self.actor.flatten(), self.critic.flatten())

    def act(self, obs) -> float:
        a = self.bound * self.actor.forward(obs)[0]
        if self.sigma > 0:
            a += self.rng.explore.normal(0.0, self.sigma * self.bound)
        return min(max(a, -self.bound), self.bound)

    def learn(self):
        cfg = self.cfg
        if self.buffer.size < max(cfg.warmup, cfg.batch_size):
            return None
        batch = self.buffer.sample_batch(cfg.batch_size, self.rng.replay)
        y = critic_targets(batch.rewards, batch.next_states, batch.dones, self.actor_t, self.critic_t, cfg.gamma, self.bound)
        critic_loss, g_critic = critic_loss_grad(batch.states, batch.actions, y, self.critic)
        self.critic_opt.step(self.critic.params, g_critic)
        g_actor, j = actor_grad(batch.states, self.actor, self.critic, self.bound)
        np.negative(g_actor, out=g_actor)
        self.actor_opt.step(self.actor.params, g_actor)
        soft_update_(self.actor_t.params, self.actor.params, cfg.tau)
        soft_update_(self.critic_t.params, self.critic.params, cfg.tau)
        return critic_loss, -j

    def run_episode(self, server=None, max_steps: int | None = None) -> EpisodeRecord:
        state = envs.reset(self.env_tag, int(self.rng.env.integers(0, 2**31 - 1)))
        obs = envs.observe(state)
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
            self.buffer.add(obs, a, res.reward, nxt, res.done and not res.truncated)
            self.steps += 1
            n += 1
            ret += res.reward
            if self.steps % self.cfg.train_every == 0:
                out = self.learn()
                if out is not None:
                    critic_losses.append(out[0])
                    actor_losses.append(out[1])
            state, obs, done = res.next_state, nxt, res.done
        self.episodes += 1
        self.latest_params = self.params()
        critic_loss = mean_or_nan(critic_losses)
        return EpisodeRecord(
            self.episodes, self.steps, ret, self.sigma, critic_loss, 0.0, 0, not done,
            actor_loss_proxy=mean_or_nan(actor_losses), critic_loss=critic_loss,
        )
