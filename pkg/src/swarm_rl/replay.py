"""Bounded replay memory with uniform sampling, plus a small snapshot ring.

Transitions do not carry full parameter copies; they hold the id of a
parameter snapshot taken once per episode and kept in a ``SnapshotStore``.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

NO_SNAPSHOT = -1


@dataclass(frozen=True, eq=False)
class Transition:
    state: np.ndarray
    action: object  # int for discrete tasks, float vector for continuous ones
    reward: float
    next_state: np.ndarray
    done: bool
    snapshot_id: int = NO_SNAPSHOT


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    snapshot_ids: np.ndarray
    indices: np.ndarray


class ReplayBuffer:
    """Ring buffer of fixed capacity.

    All fields of a transition live in one row of a preallocated matrix, so
    a minibatch is gathered with a single fancy-index.
    """

    def __init__(self, capacity: int, obs_dim: int, action_dim: int | None = None):
        """``action_dim=None`` stores integer actions; otherwise float vectors."""
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.discrete = action_dim is None
        act_w = 1 if self.discrete else action_dim
        o = obs_dim
        # columns: state | next_state | action | reward | done | snapshot_id
        self._cols = (
            slice(0, o),
            slice(o, 2 * o),
            slice(2 * o, 2 * o + act_w),
            2 * o + act_w,
            2 * o + act_w + 1,
            2 * o + act_w + 2,
        )
        self.data = np.zeros((capacity, 2 * o + act_w + 3))
        self.data[:, self._cols[5]] = NO_SNAPSHOT
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, state, action, reward, next_state, done, snapshot_id=NO_SNAPSHOT) -> None:
        i = self.cursor
        row = self.data[i]
        s_c, n_c, a_c, r_c, d_c, id_c = self._cols
        row[s_c] = state
        row[n_c] = next_state
        row[a_c] = action
        row[r_c] = reward
        row[d_c] = done
        row[id_c] = snapshot_id
        self.cursor = (i + 1) % self.capacity
        if self.size < self.capacity:
            self.size += 1

    def push(self, t: Transition) -> None:
        self.add(t.state, t.action, t.reward, t.next_state, t.done, t.snapshot_id)

    def _unpack(self, rows, idx) -> Batch:
        s_c, n_c, a_c, r_c, d_c, id_c = self._cols
        actions = rows[:, a_c]
        actions = actions[:, 0].astype(np.intp) if self.discrete else actions
        return Batch(
            rows[:, s_c],
            actions,
            rows[:, r_c],
            rows[:, n_c],
            rows[:, d_c],
            rows[:, id_c].astype(np.int64),
            idx,
        )

    def get(self, i: int) -> Transition:
        b = self._unpack(self.data[i : i + 1], np.array([i]))
        action = int(b.actions[0]) if self.discrete else b.actions[0].copy()
        return Transition(
            b.states[0].copy(),
            action,
            float(b.rewards[0]),
            b.next_states[0].copy(),
            bool(b.dones[0]),
            int(b.snapshot_ids[0]),
        )

    def sample_batch(self, batch_size: int, rng: np.random.Generator, min_size: int | None = None) -> Batch | None:
        """Uniform sample with replacement.

        Returns ``None`` (not ready) while fewer than ``min_size`` items are
        stored; ``min_size`` defaults to ``batch_size``.
        """
        if self.size < max(1, batch_size if min_size is None else min_size):
            return None
        idx = rng.integers(0, self.size, batch_size)
        return self._unpack(self.data[idx], idx)

    def sample(self, batch_size: int, rng: np.random.Generator, min_size: int | None = None) -> list | None:
        """Same draw as ``sample_batch`` but as a list of ``Transition``."""
        batch = self.sample_batch(batch_size, rng, min_size)
        if batch is None:
            return None
        return [self.get(int(i)) for i in batch.indices]


class SnapshotStore:
    """Ring of the ``capacity`` most recent parameter snapshots, keyed by id."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: OrderedDict = OrderedDict()
        self._next_id = 1

    def __len__(self):
        return len(self._items)

    def snapshot(self, params) -> int:
        """Store ``params`` (a ParamVector, a tuple of them, or an array) and return its id."""
        if isinstance(params, np.ndarray):
            params = params.copy()
        sid = self._next_id
        self._next_id += 1
        self._items[sid] = params
        while len(self._items) > self.capacity:
            self._items.popitem(last=False)
        return sid

    def lookup(self, sid: int):
        """The stored params, or ``None`` when the id was evicted or never issued."""
        return self._items.get(sid)
