"""Swarm-guided parameter update and the supervisor's confidence schedule.

The update moves parameters along a descent direction (the gradient step)
and, in the same update, pulls them toward the validated global best:

    theta_new = theta_old + lr * descent_dir + c * r * (theta_star - theta_old)

with ``r`` uniform in [0, 1], drawn per dimension by default. The pull
weight ``c`` grows as the global best keeps passing validation episodes:
``c = arctan(x / (divisor * b))``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError, ShapeError
from .nn import ParamVector

R_MODES = ("per-dim", "scalar")


def schedule_weight(x: int, b: int, divisor: float = 200.0) -> float:
    """Confidence weight after ``x`` successful validation episodes; lies in [0, pi/2)."""
    if x < 0 or b < 1:
        raise ValueError(f"need x >= 0 and b >= 1, got x={x}, b={b}")
    return math.atan(x / (divisor * b))


def draw_r(rng: np.random.Generator, n: int, mode: str = "per-dim"):
    if mode == "per-dim":
        return rng.random(n)
    if mode == "scalar":
        return rng.random()
    raise ValueError(f"unknown r mode {mode!r} (expected one of {R_MODES})")


def _values(v):
    return v.values if isinstance(v, ParamVector) else np.asarray(v, dtype=np.float64)


def hybrid_step(theta_old, descent_dir, theta_star, lr, c, rng=None, r=None, r_mode="per-dim") -> ParamVector:
    """Pure form of the update on snapshots; ``descent_dir`` is already sign-corrected.

    ``r`` may be pinned; otherwise it is drawn from ``rng``.
    """
    old = _values(theta_old)
    d = _values(descent_dir)
    star = _values(theta_star)
    if not (old.shape == d.shape == star.shape):
        raise ShapeError(f"shapes differ: {old.shape}, {d.shape}, {star.shape}")
    for name, arr in (("theta_old", old), ("descent_dir", d), ("theta_star", star)):
        if not np.isfinite(arr).all():
            raise NumericError(f"non-finite values in {name}")
    if not (math.isfinite(lr) and math.isfinite(c)):
        raise NumericError("learning rate and c must be finite")
    if r is None:
        r = draw_r(rng, old.size, r_mode)
    new = old + lr * d + c * r * (star - old)
    layout = theta_old.layout if isinstance(theta_old, ParamVector) else None
    return ParamVector(new, layout) if layout is not None else new


def hybrid_step_with_optimizer(net, grad, theta_star, optimizer, c, rng, r_mode="per-dim") -> None:
    """Optimizer step on a loss gradient plus the global-best pull, in place on ``net``.

    The pull is computed from the pre-step parameters and added after the
    optimizer transform; it never enters Adam's moment estimates. With
    ``c == 0`` (or no global best yet) this is exactly ``optimizer.step``,
    and ``rng`` is left untouched.
    """
    params = net.params if hasattr(net, "params") else net
    if c == 0.0 or theta_star is None:
        optimizer.step(params, grad)
        return
    star = _values(theta_star)
    if star.shape != params.shape:
        raise ShapeError(f"global best has shape {star.shape}, parameters {params.shape}")
    gap = star - params
    optimizer.step(params, grad)
    gap *= c * draw_r(rng, params.size, r_mode)
    params += gap
