"""In-process parameter server holding the validated global best.

Explorers submit candidates and read the best record; one supervisor takes
candidates, validates them and commits. Every commit publishes a new
immutable ``BestRecord`` by swapping a single reference, so ``read_best``
never blocks and can never observe a half-written record. Writers are
serialized by a lock held only for the record swap and the log append.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import StaleCommitError

log = logging.getLogger(__name__)

SERVER_LOG_COLUMNS = ("version", "step", "score", "c", "x", "source_agent")


@dataclass(frozen=True, eq=False)
class BestRecord:
    version: int
    params: object  # ParamVector, (actor, critic) pair, or None before the first commit
    score: float
    c: float
    x: int
    step: int = 0
    source_agent: int = -1

    def row(self):
        return (self.version, self.step, self.score, self.c, self.x, self.source_agent)


@dataclass(frozen=True, eq=False)
class Candidate:
    params: object
    claimed_score: float
    source_agent: int
    submit_step: int = 0
    candidate_id: int = -1  # assigned by the server on submission


class ParameterServer:
    def __init__(self, queue_capacity: int = 4, log_path=None, initial_params=None, initial_score: float = -math.inf):
        """``initial_score`` seeds the sentinel record; ``+inf`` blocks every submission."""
        if queue_capacity < 1:
            raise ValueError("queue capacity must be positive")
        self.queue_capacity = queue_capacity
        self._record = BestRecord(0, initial_params, float(initial_score), 0.0, 0)
        self.commit_log = [self._record]
        self._pending: list = []
        self._commit_lock = threading.Lock()
        self._queue_lock = threading.Lock()
        self._ids = itertools.count(1)
        self.submitted: list = []  # every accepted candidate, in submission order
        self._log_fh = None
        self._log_writer = None
        if log_path is not None:
            self._log_fh = open(Path(log_path), "w", newline="")
            self._log_writer = csv.writer(self._log_fh)
            self._log_writer.writerow(SERVER_LOG_COLUMNS)

    def close(self):
        with self._commit_lock:
            if self._log_fh is not None:
                self._log_fh.close()
                self._log_fh = None
                self._log_writer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # --- explorer side ---------------------------------------------------------

    def read_best(self) -> BestRecord:
        """Consistent snapshot of the latest commit (wait-free)."""
        return self._record

    def submit_candidate(self, cand: Candidate) -> bool:
        """Queue ``cand`` iff its claimed score beats the current best score."""
        score = cand.claimed_score
        if not math.isfinite(score):
            log.warning("rejected candidate from agent %s: non-finite score %r", cand.source_agent, score)
            return False
        with self._queue_lock:
            if score <= self._record.score:
                return False
            if len(self._pending) >= self.queue_capacity:
                worst = min(range(len(self._pending)), key=lambda i: self._pending[i].claimed_score)
                if self._pending[worst].claimed_score >= score:
                    return False
                del self._pending[worst]
            cand = Candidate(cand.params, score, cand.source_agent, cand.submit_step, next(self._ids))
            self._pending.append(cand)
            self.submitted.append(cand)
            return True

    # --- supervisor side -------------------------------------------------------

    def pending(self) -> int:
        with self._queue_lock:
            return len(self._pending)

    def take_candidate(self) -> Candidate | None:
        """Remove and return the highest-claimed pending candidate (oldest first on ties)."""
        with self._queue_lock:
            if not self._pending:
                return None
            best = max(range(len(self._pending)), key=lambda i: (self._pending[i].claimed_score, -i))
            return self._pending.pop(best)

    def commit_best(self, params, score: float, c: float, x: int = 0, step: int = 0, source_agent: int = -1) -> int:
        """Publish a validated best; raises ``StaleCommitError`` if ``score`` is below the current best."""
        if not math.isfinite(score):
            raise ValueError(f"cannot commit non-finite score {score!r}")
        if not 0.0 <= c < math.pi / 2:
            raise ValueError(f"c must lie in [0, pi/2), got {c}")
        with self._commit_lock:
            cur = self._record
            if score < cur.score:
                raise StaleCommitError(f"score {score} is below the current best {cur.score}")
            rec = BestRecord(cur.version + 1, params, float(score), float(c), int(x), int(step), int(source_agent))
            self.commit_log.append(rec)
            if self._log_writer is not None:
                self._log_writer.writerow(rec.row())
                self._log_fh.flush()
            self._record = rec
            return rec.version
