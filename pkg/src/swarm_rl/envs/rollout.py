"""Greedy policy evaluation over several seeded episodes run in lockstep."""

from __future__ import annotations

import numpy as np

from .core import env_spec, observe, reset, step


def evaluate(tag: str, policy, seeds, with_lengths: bool = False):
    """Return per-episode returns of ``policy`` started from ``reset(tag, seed)``.

    ``policy`` maps a batch of observations ``(k, obs_dim)`` to ``k``
    actions; all live episodes are advanced together so the network runs
    once per time step. With ``with_lengths`` the episode lengths are
    returned as well.
    """
    states = [reset(tag, s) for s in seeds]
    returns = np.zeros(len(states))
    lengths = np.zeros(len(states), dtype=np.int64)
    live = list(range(len(states)))
    spec = env_spec(tag)
    while live:
        obs = np.stack([observe(states[i]) for i in live])
        actions = policy(obs)
        still = []
        for i, a in zip(live, actions):
            if not spec.discrete:
                a = float(np.clip(a, -spec.action_bound, spec.action_bound))
            res = step(states[i], a)
            returns[i] += res.reward
            lengths[i] += 1
            states[i] = res.next_state
            if not res.done:
                still.append(i)
        live = still
    return (returns, lengths) if with_lengths else returns


def greedy_q_policy(net):
    return lambda obs: np.argmax(net.forward(obs), axis=1)


def actor_policy(net, action_bound: float):
    return lambda obs: action_bound * net.forward(obs)[:, 0]
