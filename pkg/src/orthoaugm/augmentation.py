"""Standard additive and orthogonal-by-construction augmented models.

In the orthogonal structure the network output stacked over the projection
data, ``F``, is replaced during training by its component orthogonal to
the baseline regressor columns.  Equivalently the model subtracts
``Phi theta_aux`` with ``theta_aux`` the least-squares coefficients of
``F`` on ``Phi``.  ``theta_aux`` is an implicit function of the network
parameters while training and is frozen afterwards for prediction on new
data.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, MissingThetaAux, NonFinite
from .linalg import (
    RegressorFactorization,
    apply_projector,
    factorize,
    gram_inverse_apply,
    solve_least_squares,
)
from .mlp import MlpParams, MlpSpec, backprop, backprop_cached, forward_batch, forward_with_cache
from .regressor import BaselineBasis, Dataset, LagSpec, assemble_phi, build_states


class Structure(str, enum.Enum):
    STANDARD = "standard"
    ORTHOGONAL = "orthogonal"


@dataclass(frozen=True)
class AugmentedModel:
    structure: Structure
    theta_b: np.ndarray
    mlp: MlpParams
    basis: BaselineBasis
    lag: LagSpec
    theta_aux: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "structure", Structure(self.structure))
        theta_b = np.array(self.theta_b, dtype=np.float64).ravel()
        if theta_b.shape[0] != self.basis.n_theta_b:
            raise DimensionMismatch(
                f"theta_b has {theta_b.shape[0]} entries, basis has {self.basis.n_theta_b} features"
            )
        if not np.all(np.isfinite(theta_b)):
            raise NonFinite("theta_b contains NaN or Inf")
        theta_b.setflags(write=False)
        object.__setattr__(self, "theta_b", theta_b)
        if self.theta_aux is not None:
            aux = np.array(self.theta_aux, dtype=np.float64).ravel()
            if aux.shape != theta_b.shape:
                raise DimensionMismatch("theta_aux must match theta_b in length")
            aux.setflags(write=False)
            object.__setattr__(self, "theta_aux", aux)

    @property
    def is_frozen(self) -> bool:
        return self.structure is Structure.STANDARD or self.theta_aux is not None

    def with_params(self, theta_b, theta_a) -> "AugmentedModel":
        """Copy with new trainable parameters; any frozen theta_aux is dropped."""
        return replace(self, theta_b=theta_b, mlp=self.mlp.with_theta(theta_a), theta_aux=None)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.value,
            "theta_b": self.theta_b.tolist(),
            "theta_aux": None if self.theta_aux is None else self.theta_aux.tolist(),
            "theta_a": self.mlp.theta_a.tolist(),
            "layer_sizes": list(self.mlp.spec.layer_sizes),
            "basis": self.basis.names,
            "lag": {"n_a": self.lag.n_a, "n_b": self.lag.n_b, "n_u": self.lag.n_u, "n_y": self.lag.n_y},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentedModel":
        lag = LagSpec(**d["lag"])
        spec = MlpSpec(tuple(d["layer_sizes"]))
        return cls(
            structure=Structure(d["structure"]),
            theta_b=np.asarray(d["theta_b"], dtype=np.float64),
            mlp=MlpParams(np.asarray(d["theta_a"], dtype=np.float64), spec),
            basis=BaselineBasis.from_names(d["basis"], lag),
            lag=lag,
            theta_aux=None if d.get("theta_aux") is None else np.asarray(d["theta_aux"], dtype=np.float64),
        )


@dataclass(frozen=True)
class _ProjectionSet:
    fact: RegressorFactorization
    states: np.ndarray


@dataclass(frozen=True)
class TrainingContext:
    """Cached training states, stacked targets and the factorized regressor.

    ``projection`` is ``None`` when theta_aux is built on the training set
    itself, which is the default and the only case the experiments use.
    """

    fact: RegressorFactorization
    states: np.ndarray
    targets: np.ndarray
    basis: BaselineBasis
    projection: _ProjectionSet | None = field(default=None)

    @classmethod
    def from_dataset(cls, ds: Dataset, basis: BaselineBasis, projection_ds: Dataset | None = None):
        x, y = build_states(ds)
        fact = factorize(assemble_phi(basis, x))
        proj = None
        if projection_ds is not None:
            xp, _ = build_states(projection_ds)
            proj = _ProjectionSet(factorize(assemble_phi(basis, xp)), xp)
        return cls(fact=fact, states=x, targets=y.ravel(), basis=basis, projection=proj)

    @property
    def phi(self) -> np.ndarray:
        return self.fact.phi

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]


def compute_theta_aux(ctx: TrainingContext, mlp: MlpParams) -> np.ndarray:
    """Least-squares coefficients of the stacked network output on ``Phi``."""
    if ctx.projection is None:
        return solve_least_squares(ctx.fact, forward_batch(mlp, ctx.states))
    return solve_least_squares(ctx.projection.fact, forward_batch(mlp, ctx.projection.states))


def _learning_term(ctx: TrainingContext, mlp: MlpParams, structure: Structure, f=None) -> np.ndarray:
    if f is None:
        f = forward_batch(mlp, ctx.states)
    if structure is Structure.STANDARD:
        return f
    if ctx.projection is None:
        return apply_projector(ctx.fact, f)
    return f - ctx.phi @ compute_theta_aux(ctx, mlp)


def predict_train(ctx: TrainingContext, theta_b, mlp: MlpParams, structure=Structure.ORTHOGONAL) -> np.ndarray:
    """Stacked training-set prediction with theta_aux recomputed from ``mlp``."""
    structure = Structure(structure)
    return ctx.phi @ np.asarray(theta_b, dtype=np.float64) + _learning_term(ctx, mlp, structure)


def predict_test_batch(model: AugmentedModel, states) -> np.ndarray:
    """Per-sample predictions with frozen theta_aux, shape (N, n_y)."""
    if not model.is_frozen:
        raise MissingThetaAux("orthogonal model must be frozen before predicting on new data")
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if states.shape[1] != model.lag.n_x:
        raise DimensionMismatch(f"states must have {model.lag.n_x} columns")
    phi = model.basis.regressor(states)
    coef = model.theta_b if model.theta_aux is None else model.theta_b - model.theta_aux
    f = forward_batch(model.mlp, states).reshape(states.shape[0], model.lag.n_y)
    return phi @ coef + f


def predict_test(model: AugmentedModel, x) -> np.ndarray:
    """One-step-ahead prediction at a single state vector."""
    return predict_test_batch(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def loss_and_grad(ctx: TrainingContext, theta_b, mlp: MlpParams, structure=Structure.ORTHOGONAL):
    """Return ``(V, g_b, g_a)`` for ``V = ||Y - Y_hat||^2 / N``."""
    structure = Structure(structure)
    theta_b = np.asarray(theta_b, dtype=np.float64)
    n = ctx.n_samples
    f, cache = forward_with_cache(mlp, ctx.states)
    r = ctx.targets - ctx.phi @ theta_b - _learning_term(ctx, mlp, structure, f)
    value = float(r @ r) / n
    phi_t_r = ctx.phi.T @ r
    g_b = (-2.0 / n) * phi_t_r
    if structure is Structure.STANDARD:
        g_a = backprop_cached(mlp, cache, r)
    elif ctx.projection is None:
        # projector is self-adjoint, so it moves onto the residual
        g_a = backprop_cached(mlp, cache, apply_projector(ctx.fact, r))
    else:
        pf = ctx.projection.fact
        w = gram_inverse_apply(pf, phi_t_r)
        g_a = backprop_cached(mlp, cache, r) - backprop(mlp, ctx.projection.states, pf.phi @ w)
    g_a = (-2.0 / n) * g_a
    return value, g_b, g_a


def freeze(ctx: TrainingContext, model: AugmentedModel) -> AugmentedModel:
    """Store theta_aux for orthogonal models; standard models are returned unchanged."""
    if model.structure is Structure.STANDARD:
        return replace(model, theta_aux=None)
    return replace(model, theta_aux=compute_theta_aux(ctx, model.mlp))
