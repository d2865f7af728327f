"""Full-batch Adam and L-BFGS over a flat parameter vector, plus the
two-phase training schedule (Adam warm-up followed by L-BFGS)."""
from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .augmentation import AugmentedModel, TrainingContext, freeze, loss_and_grad
from .errors import NonFiniteObjective

log = logging.getLogger(__name__)


class LineSearchWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Objective:
    eval: Callable[[np.ndarray], tuple[float, np.ndarray]]
    dim: int


@dataclass(frozen=True)
class TrainSchedule:
    adam_epochs: int = 500
    adam_lr: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    lbfgs_iters: int = 1000
    lbfgs_memory: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    grad_tol: float = 1e-10
    lbfgs_refine: bool = False

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be >= 1")
        if self.adam_epochs < 0 or self.lbfgs_iters < 0:
            raise ValueError("iteration counts must be >= 0")
        b1, b2 = self.adam_betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")


@dataclass
class OptimizeResult:
    theta: np.ndarray
    value: float
    grad: np.ndarray
    n_iter: int
    history: list[float] = field(default_factory=list)
    converged: bool = False
    line_search_failed: bool = False
    n_evals: int = 0


def _evaluate(obj: Objective, theta: np.ndarray) -> tuple[float, np.ndarray]:
    value, grad = obj.eval(theta)
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteObjective("objective value or gradient is not finite")
    return float(value), grad


def adam_run(obj: Objective, theta0, schedule: TrainSchedule) -> OptimizeResult:
    """``schedule.adam_epochs`` full-batch Adam steps with bias-corrected moments."""
    theta = np.array(theta0, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise NonFiniteObjective("initial parameters are not finite")
    lr, eps = schedule.adam_lr, schedule.adam_eps
    b1, b2 = schedule.adam_betas
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    history = []
    value, grad = float("nan"), np.zeros_like(theta)
    for t in range(1, schedule.adam_epochs + 1):
        value, grad = _evaluate(obj, theta)
        history.append(value)
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    if schedule.adam_epochs:
        value, grad = _evaluate(obj, theta)
    return OptimizeResult(theta, value, grad, schedule.adam_epochs, history, n_evals=schedule.adam_epochs + 1)


# --------------------------------------------------------------------------
# Strong Wolfe line search
# --------------------------------------------------------------------------

def _cubic_min(a, fa, da, b, fb, db):
    """Minimiser of the cubic interpolating two points with slopes, or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if np.isfinite(x) else None


# Function values are only trusted to this many ulps of |f0|; closer than
# that, sufficient decrease is judged from the slope instead.
_F_NOISE_ULPS = 1e3


class _LineSearch:
    def __init__(self, obj, x, f0, g0, d, c1, c2, max_steps=50):
        self.obj, self.x, self.d = obj, x, d
        self.f0, self.dphi0 = f0, float(g0 @ d)
        self.f_noise = _F_NOISE_ULPS * np.finfo(np.float64).eps * (1.0 + abs(f0))
        self.c1, self.c2 = c1, c2
        self.max_steps = max_steps
        self.steps = 0
        self.best = None  # (alpha, f, g) with the lowest value satisfying sufficient decrease

    def phi(self, alpha):
        self.steps += 1
        f, g = self.obj.eval(self.x + alpha * self.d)
        g = np.asarray(g, dtype=np.float64)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, g, np.nan
        f = float(f)
        dphi = float(g @ self.d)
        if self.armijo(alpha, f, dphi) and (self.best is None or f < self.best[1]):
            self.best = (alpha, f, g)
        return f, g, dphi

    def armijo(self, alpha, f, dphi):
        return sufficient_decrease(self.f0, self.dphi0, alpha, f, dphi, self.c1, self.f_noise)

    def not_lower(self, a, f, dphi, a_lo, f_lo):
        """``f(a) >= f(a_lo)``, decided by the slope at ``a`` when the values are within round-off."""
        if abs(f - f_lo) > self.f_noise:
            return f > f_lo
        return dphi * (a - a_lo) > 0.0

    def curvature(self, dphi):
        return abs(dphi) <= -self.c2 * self.dphi0

    def refine(self, a, f, g):
        """One secant step on the directional derivative from an accepted point.

        Exact along any direction of a quadratic; kept only if it also
        satisfies the strong Wolfe conditions with a smaller slope.
        """
        dphi = float(g @ self.d)
        if abs(dphi) <= 1e-3 * abs(self.dphi0) or self.steps >= self.max_steps:
            return a, f, g
        a_new = a * self.dphi0 / (self.dphi0 - dphi)
        if not np.isfinite(a_new) or a_new <= 0.0:
            return a, f, g
        f_new, g_new, d_new = self.phi(a_new)
        if self.armijo(a_new, f_new, d_new) and self.curvature(d_new) and abs(d_new) < abs(dphi):
            return a_new, f_new, g_new
        return a, f, g

    def search(self, alpha0):
        a_prev, f_prev, d_prev = 0.0, self.f0, self.dphi0
        a = alpha0
        first = True
        while self.steps < self.max_steps:
            f, g, dphi = self.phi(a)
            if not self.armijo(a, f, dphi) or (not first and f > f_prev + self.f_noise):
                return self.zoom(a_prev, f_prev, d_prev, a, f, dphi)
            if self.curvature(dphi):
                return a, f, g
            if dphi >= 0.0:
                return self.zoom(a, f, dphi, a_prev, f_prev, d_prev)
            a_prev, f_prev, d_prev = a, f, dphi
            a = 2.0 * a
            first = False
        return None

    def zoom(self, a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
        while self.steps < self.max_steps:
            lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
            width = hi - lo
            if width <= 1e-16 * max(1.0, hi):
                return None
            a = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            if a is None or not (lo + 0.1 * width <= a <= hi - 0.1 * width):
                a = 0.5 * (lo + hi)
            f, g, dphi = self.phi(a)
            if not self.armijo(a, f, dphi) or self.not_lower(a, f, dphi, a_lo, f_lo):
                a_hi, f_hi, d_hi = a, f, dphi
            else:
                if self.curvature(dphi):
                    return a, f, g
                if dphi * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, d_lo = a, f, dphi
        return None


def sufficient_decrease(f0, dphi0, alpha, f, dphi, c1, f_noise=0.0) -> bool:
    """Armijo condition, or its slope-based form once ``f`` is within round-off of ``f0``.

    The slope form ``dphi <= (2 c1 - 1) dphi0`` is what the Armijo condition
    reduces to on a quadratic, and unlike a difference of function values it
    stays accurate near a minimiser.
    """
    if f <= f0 + c1 * alpha * dphi0:
        return True
    return f <= f0 + f_noise and dphi <= (2.0 * c1 - 1.0) * dphi0


def strong_wolfe_line_search(obj, x, f0, g0, d, c1=1e-4, c2=0.9, alpha0=1.0, max_steps=50, refine=False):
    """Return ``(alpha, f, g, n_evals, best)``.

    With ``refine`` an accepted step gets one extra secant evaluation on the
    directional derivative (see ``_LineSearch.refine``).

    On failure ``alpha``, ``f`` and ``g`` are None and ``best`` holds the
    ``(alpha, f, g)`` with the lowest sufficient-decrease value seen, or None.
    """
    ls = _LineSearch(obj, x, f0, g0, d, c1, c2, max_steps)
    found = ls.search(alpha0)
    if found is not None:
        a, f, g = found
        if refine:
            a, f, g = ls.refine(a, f, g)
        return a, f, g, ls.steps, None
    return None, None, None, ls.steps, ls.best


def lbfgs_run(
    obj: Objective,
    theta0,
    schedule: TrainSchedule,
    check_wolfe: bool = False,
) -> OptimizeResult:
    """Limited-memory BFGS with two-loop recursion and a strong Wolfe line search.

    Stops after ``schedule.lbfgs_iters`` iterations or when the gradient
    max-norm drops below ``schedule.grad_tol``.  If the line search fails
    twice in a row (the second time along steepest descent with cleared
    memory) the best iterate is returned with ``line_search_failed`` set.
    """
    x = np.array(theta0, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteObjective("initial parameters are not finite")
    c1, c2 = schedule.wolfe_c1, schedule.wolfe_c2
    f, g = _evaluate(obj, x)
    n_evals = 1
    mem: deque = deque(maxlen=schedule.lbfgs_memory)
    history: list[float] = []
    failed = False
    it = 0

    def search(d, alpha0):
        return strong_wolfe_line_search(obj, x, f, g, d, c1, c2, alpha0, refine=schedule.lbfgs_refine)

    while it < schedule.lbfgs_iters:
        if np.max(np.abs(g), initial=0.0) < schedule.grad_tol:
            break
        d = _two_loop(g, mem)
        if mem:
            alpha0 = 1.0
        else:
            alpha0 = min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-300))
        if g @ d >= 0.0:
            mem.clear()
            d = -g
            alpha0 = min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-300))
        alpha, f_new, g_new, used, best = search(d, alpha0)
        n_evals += used
        if alpha is None and mem:
            mem.clear()
            d = -g
            alpha0 = min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-300))
            alpha, f_new, g_new, used, best = search(d, alpha0)
            n_evals += used
        if alpha is None:
            failed = True
            if best is not None and best[1] < f:
                x = x + best[0] * d
                f, g = best[1], best[2]
                history.append(f)
                it += 1
            warnings.warn("L-BFGS line search failed; returning best iterate", LineSearchWarning, stacklevel=2)
            break
        if check_wolfe:
            dphi0, dphi = float(g @ d), float(g_new @ d)
            noise = _F_NOISE_ULPS * np.finfo(np.float64).eps * (1.0 + abs(f))
            assert sufficient_decrease(f, dphi0, alpha, f_new, dphi, c1, noise), "sufficient decrease violated"
            assert abs(dphi) <= c2 * abs(dphi0), "curvature condition violated"
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            mem.append((s, y, 1.0 / sy))
        x = x + s
        f, g = f_new, g_new
        history.append(f)
        it += 1
    converged = bool(np.max(np.abs(g), initial=0.0) < schedule.grad_tol)
    return OptimizeResult(x, f, g, it, history, converged, failed, n_evals)


def _two_loop(g: np.ndarray, mem) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(mem):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if mem:
        s, y, _ = mem[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(mem, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


# --------------------------------------------------------------------------
# Two-phase training of an augmented model
# --------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: AugmentedModel
    history: list[tuple[int, str, float]]
    final_loss: float
    adam: OptimizeResult | None = None
    lbfgs: OptimizeResult | None = None


def model_objective(ctx: TrainingContext, model: AugmentedModel) -> Objective:
    """Loss over the joint flat vector ``[theta_b; theta_a]``."""
    n_b = model.basis.n_theta_b
    mlp0 = model.mlp
    structure = model.structure

    def evaluate(theta):
        v, g_b, g_a = loss_and_grad(ctx, theta[:n_b], mlp0.with_theta(theta[n_b:]), structure)
        return v, np.concatenate([g_b, g_a])

    return Objective(evaluate, n_b + mlp0.spec.n_params)


def train(
    ctx: TrainingContext,
    model0: AugmentedModel,
    schedule: TrainSchedule | None = None,
    check_wolfe: bool = False,
) -> TrainResult:
    """Adam then L-BFGS on the joint parameter vector, then freeze theta_aux."""
    schedule = schedule or TrainSchedule()
    n_b = model0.basis.n_theta_b
    obj = model_objective(ctx, model0)
    theta = np.concatenate([model0.theta_b, model0.mlp.theta_a])
    history: list[tuple[int, str, float]] = []
    adam_res = lbfgs_res = None
    if schedule.adam_epochs:
        adam_res = adam_run(obj, theta, schedule)
        theta = adam_res.theta
        history += [(i, "adam", v) for i, v in enumerate(adam_res.history)]
    if schedule.lbfgs_iters:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LineSearchWarning)
            lbfgs_res = lbfgs_run(obj, theta, schedule, check_wolfe=check_wolfe)
        theta = lbfgs_res.theta
        offset = len(history)
        history += [(offset + i, "lbfgs", v) for i, v in enumerate(lbfgs_res.history)]
        if lbfgs_res.line_search_failed:
            log.debug("line search stopped L-BFGS after %d iterations", lbfgs_res.n_iter)
    model = freeze(ctx, model0.with_params(theta[:n_b], theta[n_b:]))
    final_loss = obj.eval(theta)[0]
    return TrainResult(model, history, float(final_loss), adam_res, lbfgs_res)
