"""Fully connected tanh network with a linear output layer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, NonFinite


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes: [n_x, h_1, ..., n_y]")
        if any(s < 1 for s in sizes):
            raise ValueError("all layer sizes must be >= 1")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum((a + 1) * b for a, b in zip(s[:-1], s[1:]))

    @property
    def sizes_array(self) -> np.ndarray:
        return np.asarray(self.layer_sizes, dtype=np.int64)


@dataclass(frozen=True)
class MlpParams:
    theta_a: np.ndarray
    spec: MlpSpec

    def __post_init__(self):
        theta = np.array(self.theta_a, dtype=np.float64).ravel()
        if theta.shape[0] != self.spec.n_params:
            raise DimensionMismatch(
                f"parameter vector has {theta.shape[0]} entries, spec needs {self.spec.n_params}"
            )
        if not np.all(np.isfinite(theta)):
            raise NonFinite("MLP parameters contain NaN or Inf")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_a", theta)

    def with_theta(self, theta_a) -> "MlpParams":
        return MlpParams(theta_a, self.spec)

    def unflatten(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-layer ``(W, b)`` with ``W`` of shape (out, in)."""
        return [(w.copy(), b.copy()) for w, b in _kernels._unpack_np(self.theta_a, self.spec.layer_sizes)]

    @classmethod
    def flatten(cls, layers, spec: MlpSpec) -> "MlpParams":
        parts = []
        for w, b in layers:
            parts.append(np.asarray(w, dtype=np.float64).ravel())
            parts.append(np.asarray(b, dtype=np.float64).ravel())
        return cls(np.concatenate(parts), spec)

    @classmethod
    def zeros(cls, spec: MlpSpec) -> "MlpParams":
        return cls(np.zeros(spec.n_params), spec)


def xavier_init(spec: MlpSpec, seed: int) -> MlpParams:
    """Glorot-uniform weights on +-sqrt(6/(fan_in+fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-limit, limit, size=(fan_out, fan_in)), np.zeros(fan_out)))
    return MlpParams.flatten(layers, spec)


def _states(p: MlpParams, states) -> np.ndarray:
    x = np.asarray(states, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None] if p.spec.n_in == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != p.spec.n_in:
        raise DimensionMismatch(f"states must have {p.spec.n_in} columns, got shape {x.shape}")
    return x


def forward(p: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != p.spec.n_in:
        raise DimensionMismatch(f"input has length {x.shape[0]}, network expects {p.spec.n_in}")
    return _kernels.mlp_forward(p.theta_a, p.spec.sizes_array, x[None, :])[0]


def forward_batch(p: MlpParams, states) -> np.ndarray:
    """Stacked outputs ``[f(x_0); f(x_1); ...]`` of length N*n_y."""
    x = _states(p, states)
    return _kernels.mlp_forward(p.theta_a, p.spec.sizes_array, x).ravel()


def backprop(p: MlpParams, states, upstream) -> np.ndarray:
    """Vector-Jacobian product ``sum_k J_f(x_k)^T upstream_k`` over theta_a."""
    x = _states(p, states)
    up = np.asarray(upstream, dtype=np.float64).ravel()
    if up.shape[0] != x.shape[0] * p.spec.n_out:
        raise DimensionMismatch(
            f"upstream has length {up.shape[0]}, batch output has {x.shape[0] * p.spec.n_out}"
        )
    return _kernels.mlp_vjp(p.theta_a, p.spec.sizes_array, x, up.reshape(x.shape[0], p.spec.n_out))


def forward_with_cache(p: MlpParams, states) -> tuple[np.ndarray, tuple]:
    """``forward_batch`` plus the activations needed by ``backprop_cached``."""
    x = _states(p, states)
    out, cache = _kernels.mlp_forward_cached(p.theta_a, p.spec.sizes_array, x)
    return out.ravel(), (x.shape[0], cache)


def backprop_cached(p: MlpParams, cache, upstream) -> np.ndarray:
    """``backprop`` at the states of an earlier ``forward_with_cache`` call, without a second forward pass."""
    n, kcache = cache
    up = np.asarray(upstream, dtype=np.float64).ravel()
    if up.shape[0] != n * p.spec.n_out:
        raise DimensionMismatch(f"upstream has length {up.shape[0]}, batch output has {n * p.spec.n_out}")
    return _kernels.mlp_vjp_cached(p.theta_a, p.spec.sizes_array, kcache, up.reshape(n, p.spec.n_out))


def jacobian_params(p: MlpParams, x) -> np.ndarray:
    """Jacobian of the output w.r.t. theta_a at one input, shape (n_y, n_theta_a)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != p.spec.n_in:
        raise DimensionMismatch(f"input has length {x.shape[0]}, network expects {p.spec.n_in}")
    return _kernels.mlp_jacobian(p.theta_a, p.spec.sizes_array, x[None, :])[0]


def jacobian_batch(p: MlpParams, states) -> np.ndarray:
    """Per-sample parameter Jacobians, shape (N, n_y, n_theta_a)."""
    x = _states(p, states)
    return _kernels.mlp_jacobian(p.theta_a, p.spec.sizes_array, x)
