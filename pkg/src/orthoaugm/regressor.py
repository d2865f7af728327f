"""Lagged state construction and the stacked baseline regressor matrix.

A state vector is ``x_k = [y_{k-1}, ..., y_{k-n_a}, u_k, u_{k-1}, ..., u_{k-n_b}]``
with every lag block newest first.  Samples without enough history are
dropped, so ``N = N_raw - max(n_a, n_b)``.

Baseline features are described by short names:

==================  ====================================================
``1``               constant
``u``, ``u1^3``     input channel (default 0) at lag 0, optional power
``u0[2]^2``         input channel 0 at lag 2, squared
``y[1]``, ``y1[2]``  output channel (default 0) at lag >= 1, optional power
``x3``, ``x3^2``    raw state coordinate, optional power
``poly(x0;a,b,c)``  ``a + b*x0 + c*x0**2`` (ascending coefficients)
==================  ====================================================

A trailing ``@c`` routes the feature to output channel ``c`` (default 0).
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InsufficientData, NonFinite


@dataclass(frozen=True)
class LagSpec:
    n_a: int = 0
    n_b: int = 0
    n_u: int = 1
    n_y: int = 1

    def __post_init__(self):
        if self.n_a < 0 or self.n_b < 0:
            raise ValueError("lag counts must be nonnegative")
        if self.n_u < 1 or self.n_y < 1:
            raise ValueError("input and output dimensions must be at least 1")

    @property
    def n_x(self) -> int:
        return self.n_a * self.n_y + (self.n_b + 1) * self.n_u

    @property
    def max_lag(self) -> int:
        return max(self.n_a, self.n_b)

    def y_index(self, lag: int, channel: int = 0) -> int:
        if not 1 <= lag <= self.n_a:
            raise ValueError(f"output lag {lag} outside 1..{self.n_a}")
        if not 0 <= channel < self.n_y:
            raise ValueError(f"output channel {channel} out of range")
        return (lag - 1) * self.n_y + channel

    def u_index(self, lag: int, channel: int = 0) -> int:
        if not 0 <= lag <= self.n_b:
            raise ValueError(f"input lag {lag} outside 0..{self.n_b}")
        if not 0 <= channel < self.n_u:
            raise ValueError(f"input channel {channel} out of range")
        return self.n_a * self.n_y + lag * self.n_u + channel


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray
    lag: LagSpec = field(default_factory=LagSpec)

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.outputs, dtype=np.float64)
        if u.ndim == 1:
            u = u[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if u.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"inputs have {u.shape[0]} samples, outputs {y.shape[0]}")
        if u.shape[1] != self.lag.n_u or y.shape[1] != self.lag.n_y:
            raise DimensionMismatch("data channel counts do not match the lag specification")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    @property
    def n_raw(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_samples(self) -> int:
        return self.n_raw - self.lag.max_lag


def build_states(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X, Y)`` with ``X`` of shape (N, n_x) and targets ``Y`` of shape (N, n_y)."""
    lag = ds.lag
    n = ds.n_samples
    if n < 1:
        raise InsufficientData(
            f"{ds.n_raw} raw samples leave no usable states with max lag {lag.max_lag}"
        )
    start = lag.max_lag
    cols = []
    for i in range(1, lag.n_a + 1):
        cols.append(ds.outputs[start - i:start - i + n])
    for i in range(lag.n_b + 1):
        cols.append(ds.inputs[start - i:start - i + n])
    x = np.concatenate(cols, axis=1) if cols else np.empty((n, 0))
    return x, ds.outputs[start:start + n].copy()


# --------------------------------------------------------------------------
# Baseline basis
# --------------------------------------------------------------------------

_MONO = re.compile(r"^(?P<kind>[uyx])(?P<ch>\d*)(?:\[(?P<lag>\d+)\])?(?:\^(?P<pow>\d+))?$")
_POLY = re.compile(r"^poly\(x(?P<idx>\d+);(?P<coefs>[^)]*)\)$")


@dataclass(frozen=True)
class Feature:
    """Scalar feature ``coef-polynomial(x[index])`` routed to one output channel."""

    name: str
    index: int  # -1 for the constant feature
    coefs: tuple[float, ...]  # ascending polynomial coefficients
    channel: int = 0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.index < 0:
            return np.full(x.shape[0], self.coefs[0])
        return np.polynomial.polynomial.polyval(x[:, self.index], self.coefs)


def parse_feature(name: str, lag: LagSpec) -> Feature:
    text = name.strip()
    channel = 0
    if "@" in text:
        text, ch = text.rsplit("@", 1)
        channel = int(ch)
        if not 0 <= channel < lag.n_y:
            raise ValueError(f"feature {name!r}: output channel {channel} out of range")
    if text == "1":
        return Feature(name, -1, (1.0,), channel)
    m = _POLY.match(text)
    if m:
        idx = int(m["idx"])
        if idx >= lag.n_x:
            raise ValueError(f"feature {name!r}: state coordinate {idx} >= n_x={lag.n_x}")
        coefs = tuple(float(c) for c in m["coefs"].split(","))
        return Feature(name, idx, coefs, channel)
    m = _MONO.match(text)
    if not m:
        raise ValueError(f"unrecognised feature name {name!r}")
    ch = int(m["ch"]) if m["ch"] else 0
    power = int(m["pow"]) if m["pow"] else 1
    kind = m["kind"]
    if kind == "u":
        idx = lag.u_index(int(m["lag"]) if m["lag"] else 0, ch)
    elif kind == "y":
        idx = lag.y_index(int(m["lag"]) if m["lag"] else 1, ch)
    else:
        if m["lag"]:
            raise ValueError(f"feature {name!r}: raw coordinates take no lag")
        idx = ch
        if idx >= lag.n_x:
            raise ValueError(f"feature {name!r}: state coordinate {idx} >= n_x={lag.n_x}")
    coefs = (0.0,) * power + (1.0,)
    return Feature(name, idx, coefs, channel)


@dataclass(frozen=True)
class BaselineBasis:
    """Linear-in-the-parameters baseline ``y_hat = phi(x) theta_b``."""

    features: tuple[Feature, ...]
    n_y: int = 1

    @classmethod
    def from_names(cls, names, lag: LagSpec) -> "BaselineBasis":
        return cls(tuple(parse_feature(n, lag) for n in names), lag.n_y)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def n_theta_b(self) -> int:
        return len(self.features)

    def regressor(self, states: np.ndarray) -> np.ndarray:
        """Per-sample regressor matrices, shape (N, n_y, n_theta_b)."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        out = np.zeros((states.shape[0], self.n_y, self.n_theta_b))
        for j, feat in enumerate(self.features):
            out[:, feat.channel, j] = feat.evaluate(states)
        return out


def assemble_phi(basis: BaselineBasis, states) -> np.ndarray:
    """Stacked regressor with N*n_y rows; row block k is ``phi(x_k)``."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if states.shape[0] == 0:
        raise InsufficientData("no states to assemble")
    blocks = basis.regressor(states)
    if not np.all(np.isfinite(blocks)):
        raise NonFinite("a baseline feature evaluated to NaN or Inf")
    return blocks.reshape(-1, basis.n_theta_b)


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_dataset_csv(path, ds: Dataset) -> None:
    path = Path(path)
    n_u, n_y = ds.lag.n_u, ds.lag.n_y
    header = ["k"] + [f"u_{i}" for i in range(n_u)] + [f"y_{i}" for i in range(n_y)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(ds.n_raw):
            row = [str(k)] + [_fmt(v) for v in ds.inputs[k]] + [_fmt(v) for v in ds.outputs[k]]
            writer.writerow(row)


def read_dataset_csv(path, n_a: int = 0, n_b: int = 0) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    if not header or header[0] != "k":
        raise ValueError(f"{path}: first column must be 'k'")
    u_cols = [i for i, h in enumerate(header) if h.startswith("u_")]
    y_cols = [i for i, h in enumerate(header) if h.startswith("y_")]
    if not u_cols or not y_cols or len(u_cols) + len(y_cols) + 1 != len(header):
        raise ValueError(f"{path}: header must be k,u_0..,y_0..")
    data = np.array([[float(v) for v in r] for r in rows], dtype=np.float64).reshape(-1, len(header))
    lag = LagSpec(n_a=n_a, n_b=n_b, n_u=len(u_cols), n_y=len(y_cols))
    return Dataset(data[:, u_cols], data[:, y_cols], lag)
