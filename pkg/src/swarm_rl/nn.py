"""Dense networks with manual backpropagation over a single flat parameter array.

Every ``Network`` keeps all of its weights and biases in one contiguous
float64 vector (``net.params``); the per-layer matrices are views into it.
That makes flatten/unflatten a plain copy and lets optimizers and the hybrid
update act on whole-network vectors directly.

Inputs may be a single vector of shape ``(in,)`` or a batch ``(B, in)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericError, ShapeError

ACTIVATIONS = ("identity", "relu", "tanh")


@dataclass(frozen=True)
class Layout:
    """Layer sizes ``[in, h1, ..., out]`` plus one activation per layer."""

    sizes: tuple
    activations: tuple

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.sizes) < 2:
            raise ShapeError("a network needs at least an input and an output size")
        if any(s < 1 for s in self.sizes):
            raise ShapeError(f"layer sizes must be positive, got {self.sizes}")
        if len(self.activations) != len(self.sizes) - 1:
            raise ShapeError(
                f"{len(self.sizes) - 1} layers but {len(self.activations)} activations"
            )
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ShapeError(f"unknown activation {act!r}")

    @property
    def n_params(self) -> int:
        return sum(o * i + o for i, o in zip(self.sizes[:-1], self.sizes[1:]))

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Read-only snapshot of a network's parameters.

    Order is layer by layer: W1 stored transposed (row-major ``(in, out)``),
    then b1, then W2 transposed, and so on.
    """

    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if values.size != self.layout.n_params:
            raise ShapeError(
                f"vector has {values.size} entries, layout needs {self.layout.n_params}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def same_as(self, other: "ParamVector") -> bool:
        """Bitwise equality of values and identical layout."""
        return self.layout == other.layout and np.array_equal(self.values, other.values)


class ParamGrad(ParamVector):
    """Gradient with the same layout as the ParamVector it was taken against."""


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray  # (out, in) view into the owning network's params
    biases: np.ndarray  # (out,) view
    activation: str


def _layer_views(buf: np.ndarray, layout: Layout):
    """Per-layer ``(W, b)`` views; ``W`` is ``(out, in)`` but stored as W^T row-major."""
    views = []
    k = 0
    for n_in, n_out in zip(layout.sizes[:-1], layout.sizes[1:]):
        w = buf[k : k + n_out * n_in].reshape(n_in, n_out).T
        k += n_out * n_in
        b = buf[k : k + n_out]
        k += n_out
        views.append((w, b))
    return views


class Network:
    """Feed-forward stack of dense layers.

    Weights and biases are initialised uniform in +-1/sqrt(fan_in) from
    ``rng``; pass ``rng=None`` to start from all zeros.
    """

    def __init__(self, sizes, activations, rng: np.random.Generator | None = None):
        self.layout = Layout(tuple(sizes), tuple(activations))
        self.params = np.zeros(self.layout.n_params)
        self.layers = [
            DenseLayer(w, b, act)
            for (w, b), act in zip(_layer_views(self.params, self.layout), self.layout.activations)
        ]
        # contiguous (in, out) views used by the matmuls
        self._wt = [layer.weights.T for layer in self.layers]
        self._acts = self.layout.activations
        self._grad = np.empty(self.params.size)
        self._grad_views = [(w.T, b) for w, b in _layer_views(self._grad, self.layout)]
        if rng is not None:
            for layer in self.layers:
                bound = 1.0 / math.sqrt(layer.weights.shape[1])
                layer.weights[...] = rng.uniform(-bound, bound, layer.weights.shape)
                layer.biases[...] = rng.uniform(-bound, bound, layer.biases.shape)

    @classmethod
    def from_layout(cls, layout: Layout) -> "Network":
        return cls(layout.sizes, layout.activations)

    @property
    def n_params(self) -> int:
        return self.params.size

    def __repr__(self):
        return f"Network(sizes={list(self.layout.sizes)}, activations={list(self.layout.activations)})"

    def _check_input(self, x):
        if type(x) is not np.ndarray or x.dtype != np.float64:
            x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (1, 2) or x.shape[-1] != self.layout.sizes[0]:
            raise ShapeError(f"expected input of size {self.layout.n_in}, got shape {x.shape}")
        return x

    def forward(self, x) -> np.ndarray:
        a = self._check_input(x)
        for wt, layer, act in zip(self._wt, self.layers, self._acts):
            z = np.dot(a, wt)
            z += layer.biases
            if act == "tanh":
                a = np.tanh(z, out=z)
            elif act == "relu":
                a = np.maximum(z, 0.0, out=z)
            else:
                a = z
        return a

    __call__ = forward

    def forward_cached(self, x):
        """Forward pass that also returns the per-layer activations for backprop."""
        a = self._check_input(x)
        cache = [a]
        for wt, layer, act in zip(self._wt, self.layers, self._acts):
            z = np.dot(a, wt)
            z += layer.biases
            if act == "tanh":
                a = np.tanh(z, out=z)
            elif act == "relu":
                a = np.maximum(z, 0.0, out=z)
            else:
                a = z
            cache.append(a)
        return a, cache

    def backward_cached(self, cache, upstream, param_grad: bool = True, input_grad: bool = True):
        """Backpropagate ``upstream`` (dL/d output) through a cached forward pass.

        Returns ``(grad, input_grad)``; either is ``None`` when not requested.
        ``grad`` is a flat array in parameter
        order, summed over the batch, or ``None`` when ``param_grad`` is
        false. It is an internal buffer that the next call overwrites; copy
        it if it has to outlive that.
        """
        delta = upstream
        if type(delta) is not np.ndarray or delta.shape != cache[-1].shape:
            delta = np.asarray(upstream, dtype=np.float64)
            if delta.shape != cache[-1].shape:
                raise ShapeError(f"upstream gradient shape {delta.shape} != output shape {cache[-1].shape}")
        batched = delta.ndim == 2
        for j in range(len(self.layers) - 1, -1, -1):
            act = self._acts[j]
            out = cache[j + 1]
            if act == "tanh":
                delta = delta * (1.0 - out * out)
            elif act == "relu":
                delta = delta * (out > 0.0)
            if param_grad:
                gwt, gb = self._grad_views[j]
                if batched:
                    np.dot(cache[j].T, delta, out=gwt)
                    np.add.reduce(delta, axis=0, out=gb)
                else:
                    np.outer(cache[j], delta, out=gwt)
                    gb[...] = delta
            if j > 0 or input_grad:
                delta = np.dot(delta, self.layers[j].weights)
            else:
                delta = None
        return (self._grad if param_grad else None), delta

    def flatten(self) -> ParamVector:
        return ParamVector(self.params, self.layout)

    def unflatten(self, v: ParamVector) -> None:
        if v.layout != self.layout:
            raise ShapeError(f"layout mismatch: {v.layout} vs {self.layout}")
        self.params[...] = v.values

    def load_array(self, values: np.ndarray) -> None:
        """Copy raw parameter values in (hot path; only the length is checked)."""
        if values.shape != self.params.shape:
            raise ShapeError(f"expected {self.params.size} values, got {values.shape}")
        self.params[...] = values

    def copy(self) -> "Network":
        twin = Network.from_layout(self.layout)
        twin.params[...] = self.params
        return twin


def forward(net: Network, x) -> np.ndarray:
    return net.forward(x)


def backward(net: Network, x, upstream_grad) -> ParamGrad:
    """Gradient of <upstream_grad, net(x)> with respect to every parameter."""
    _, cache = net.forward_cached(x)
    grad, _ = net.backward_cached(cache, upstream_grad)
    return ParamGrad(grad, net.layout)


def flatten(net: Network) -> ParamVector:
    return net.flatten()


def unflatten(net: Network, v: ParamVector) -> None:
    net.unflatten(v)


def check_finite(values: np.ndarray, what: str = "gradient") -> None:
    if not np.isfinite(values).all():
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericError(f"non-finite {what} component at index {bad}: {values[bad]}")


# --- optimizers ---------------------------------------------------------------


@dataclass(eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, beta1, beta2, eps)


class SGD:
    """Plain gradient descent: ``params -= lr * grad`` in place."""

    def __init__(self, lr: float):
        self.lr = float(lr)

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        check_finite(grad)
        params -= self.lr * grad


class Adam:
    """Bias-corrected Adam acting in place on a flat parameter array."""

    def __init__(self, lr: float, n: int, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.state = AdamState.zeros(n, beta1, beta2, eps)
        self._tmp = np.empty(n)

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        check_finite(grad)
        st = self.state
        tmp = self._tmp
        st.t += 1
        st.m *= st.beta1
        np.multiply(grad, 1.0 - st.beta1, out=tmp)
        st.m += tmp
        st.v *= st.beta2
        np.multiply(grad, grad, out=tmp)
        tmp *= 1.0 - st.beta2
        st.v += tmp
        # sqrt(v_hat) + eps == sqrt(v) / sqrt(1 - b2^t) + eps
        np.sqrt(st.v, out=tmp)
        tmp *= 1.0 / math.sqrt(1.0 - st.beta2**st.t)
        tmp += st.eps
        np.divide(st.m, tmp, out=tmp)
        tmp *= self.lr / (1.0 - st.beta1**st.t)
        params -= tmp


def make_optimizer(name: str, lr: float, n: int):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr, n)
    raise ValueError(f"unknown optimizer {name!r}")


def _check_pair(v: ParamVector, g: ParamVector):
    if v.layout != g.layout:
        raise ShapeError("parameter and gradient layouts differ")


def sgd_step(v: ParamVector, g: ParamGrad, lr: float) -> ParamVector:
    _check_pair(v, g)
    out = np.array(v.values)
    SGD(lr).step(out, g.values)
    return ParamVector(out, v.layout)


def adam_step(v: ParamVector, g: ParamGrad, lr: float, state: AdamState) -> ParamVector:
    """One Adam step on a snapshot; ``state`` is advanced in place."""
    _check_pair(v, g)
    if state.m.size != v.values.size:
        raise ShapeError("Adam moments do not match the parameter layout")
    opt = Adam(lr, v.values.size)
    opt.state = state
    out = np.array(v.values)
    opt.step(out, g.values)
    return ParamVector(out, v.layout)


# --- checkpoints ----------------------------------------------------------------

_HEADER_RE = re.compile(r"^layout: \[([0-9,\s]+)\] activations: \[([a-z,\s]*)\]$")


def save_checkpoint(net_or_vector, path) -> Path:
    """Write a text header line followed by little-endian float64 parameters."""
    v = net_or_vector.flatten() if isinstance(net_or_vector, Network) else net_or_vector
    header = "layout: [{}] activations: [{}]\n".format(
        ",".join(str(s) for s in v.layout.sizes), ",".join(v.layout.activations)
    )
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(v.values.astype("<f8").tobytes())
    return path


def load_checkpoint(path) -> Network:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").rstrip("\n")
        payload = fh.read()
    m = _HEADER_RE.match(header)
    if m is None:
        raise ShapeError(f"malformed checkpoint header: {header!r}")
    sizes = [int(s) for s in m.group(1).split(",")]
    acts = [a.strip() for a in m.group(2).split(",") if a.strip()]
    net = Network(sizes, acts)
    values = np.frombuffer(payload, dtype="<f8")
    if values.size != net.n_params:
        raise ShapeError(f"checkpoint holds {values.size} values, layout needs {net.n_params}")
    net.params[...] = values
    return net
