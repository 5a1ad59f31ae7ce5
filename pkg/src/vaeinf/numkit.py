"""Numerical substrate: seeded streams, sphere sampling, dense nets, Adam.

Everything runs in float64 on numpy arrays. Networks accept either a single
input vector or a batch (rows are samples); gradients are exact reverse-mode
through the affine/activation chain.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ShapeError

ACTIVATIONS = ("relu", "tanh", "identity")

_SEED_MASK = (1 << 64) - 1


class RandomStream:
    """A named, seeded random stream.

    ``(seed, purpose_tag, counter)`` fully determines the draws. Different tags
    feed different entropy words into numpy's ``SeedSequence``, so streams with
    distinct tags are statistically independent.
    """

    def __init__(self, seed: int, purpose_tag: str, counter: int = 0):
        if counter < 0:
            raise ValueError("counter must be non-negative")
        self.seed = int(seed)
        self.purpose_tag = str(purpose_tag)
        self.counter = int(counter)
        tag_word = zlib.crc32(self.purpose_tag.encode("utf-8"))
        ss = np.random.SeedSequence([self.seed & _SEED_MASK, tag_word, self.counter])
        self._rng = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, purpose_tag={self.purpose_tag!r}, counter={self.counter})"

    def substream(self, counter: int) -> "RandomStream":
        """Fresh stream sharing seed and tag, keyed by ``counter`` (e.g. a sample index)."""
        return RandomStream(self.seed, self.purpose_tag, counter)

    def normal(self, size=None) -> np.ndarray:
        # numpy's ziggurat sampler; fixed for this implementation
        return self._rng.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._rng.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._rng.permutation(n)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._rng.integers(low, high, size)

    def choice(self, n: int, size: int, replace: bool) -> np.ndarray:
        return self._rng.choice(n, size=size, replace=replace)


def sample_unit_sphere(stream: RandomStream, k: int, n: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the unit sphere in R^k by normalizing Gaussian vectors.

    Returns shape ``(k,)`` when ``n`` is None, else ``(n, k)``.
    """
    if k < 1:
        raise ShapeError(f"invalid dimension k={k}")
    rows = 1 if n is None else int(n)
    out = np.empty((rows, k))
    for i in range(rows):
        g = stream.normal(k)
        norm = np.linalg.norm(g)
        while norm == 0.0:  # probability zero, but never divide by it
            g = stream.normal(k)
            norm = np.linalg.norm(g)
        out[i] = g / norm
    return out[0] if n is None else out


@dataclass
class DenseNet:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        n_layers = len(self.layer_dims) - 1
        if n_layers < 1 or any(d < 1 for d in self.layer_dims):
            raise ShapeError(f"bad layer_dims {self.layer_dims}")
        if not (len(self.weights) == len(self.biases) == len(self.activations) == n_layers):
            raise ShapeError("weights, biases and activations must have one entry per layer")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if w.shape != (self.layer_dims[i + 1], self.layer_dims[i]):
                raise ShapeError(f"layer {i}: weight shape {w.shape} does not chain with {self.layer_dims}")
            if b.shape != (self.layer_dims[i + 1],):
                raise ShapeError(f"layer {i}: bias shape {b.shape}")
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    @classmethod
    def init(cls, layer_dims, activations, stream: RandomStream) -> "DenseNet":
        """Glorot-uniform weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(stream.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_dims), weights, biases, list(activations))

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_parameters(self, params) -> "DenseNet":
        return DenseNet(
            list(self.layer_dims),
            [np.array(p, dtype=float) for p in params[0::2]],
            [np.array(p, dtype=float) for p in params[1::2]],
            list(self.activations),
        )

    def copy(self) -> "DenseNet":
        return self.with_parameters(self.parameters())


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each layer, 2-D
    pre: list[np.ndarray]  # pre-activations, 2-D
    squeeze: bool
    layer_dims: list[int] = field(default_factory=list)


def _activate(name, u):
    if name == "relu":
        return np.maximum(u, 0.0)
    if name == "tanh":
        return np.tanh(u)
    return u


def _activation_grad(name, u, out):
    if name == "relu":
        return (u > 0.0).astype(float)
    if name == "tanh":
        return 1.0 - out * out
    return np.ones_like(u)


def net_apply(net: DenseNet, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != net.input_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with input_dim {net.input_dim}")
    inputs, pre = [], []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        inputs.append(h)
        u = h @ w.T + b
        pre.append(u)
        h = _activate(act, u)
    cache = ForwardCache(inputs, pre, squeeze, list(net.layer_dims))
    return (h[0] if squeeze else h), cache


def net_gradients(net: DenseNet, cache: ForwardCache, output_gradient):
    """Backpropagate ``output_gradient`` (dL/d output) through ``net``.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` follows the
    ``[W0, b0, W1, b1, ...]`` layout of :meth:`DenseNet.parameters`. For a
    batch, parameter gradients are summed over rows.
    """
    if cache.layer_dims != list(net.layer_dims) or len(cache.pre) != len(net.weights):
        raise ShapeError("stale cache: produced by a network with a different architecture")
    g = np.asarray(output_gradient, dtype=float)
    g = g[None, :] if cache.squeeze else g
    if g.shape != cache.pre[-1].shape:
        raise ShapeError(f"output gradient shape {g.shape} does not match cached output {cache.pre[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))
    for i in reversed(range(len(net.weights))):
        u = cache.pre[i]
        out = _activate(net.activations[i], u)
        g = g * _activation_grad(net.activations[i], u, out)
        grads[2 * i] = g.T @ cache.inputs[i]
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ net.weights[i]
    return grads, (g[0] if cache.squeeze else g)


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
            0,
            learning_rate,
            beta1,
            beta2,
            eps,
        )


def adam_update(params, grads, state: AdamState):
    """One bias-corrected Adam step. Pure: inputs are not modified."""
    if state.learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params, grads and moments must align")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient entry")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch {p.shape} vs {g.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_params.append(p - state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(new_m, new_v, t, state.learning_rate, b1, b2, state.eps)
    return new_params, new_state
