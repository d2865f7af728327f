import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import rosen, rosen_der

from orthoaugm.augmentation import AugmentedModel, TrainingContext, freeze
from orthoaugm.errors import NonFiniteObjective
from orthoaugm.experiments import make_dataset, nfir_basis
from orthoaugm.mlp import MlpParams, MlpSpec, xavier_init
from orthoaugm.optimize import (
    Objective,
    TrainSchedule,
    adam_run,
    lbfgs_run,
    strong_wolfe_line_search,
    train,
)
from orthoaugm.regressor import BaselineBasis, Dataset, LagSpec


def quadratic(a, b):
    return Objective(lambda t: (0.5 * t @ a @ t - b @ t, a @ t - b), b.size)


def spd(seed, dim, cond):
    g = np.random.default_rng(seed)
    q, _ = np.linalg.qr(g.standard_normal((dim, dim)))
    return q @ np.diag(np.geomspace(1.0, cond, dim)) @ q.T, g.standard_normal(dim)


def test_schedule_defaults_and_validation():
    s = TrainSchedule()
    assert (s.adam_epochs, s.adam_lr, s.adam_betas, s.adam_eps) == (500, 1e-3, (0.9, 0.999), 1e-8)
    assert (s.lbfgs_iters, s.lbfgs_memory, s.wolfe_c1, s.wolfe_c2, s.grad_tol) == (1000, 10, 1e-4, 0.9, 1e-10)
    with pytest.raises(ValueError):
        TrainSchedule(wolfe_c1=0.9, wolfe_c2=0.1)
    with pytest.raises(ValueError):
        TrainSchedule(adam_epochs=-1)


def test_adam_scalar_quadratic():
    obj = Objective(lambda t: (float((t[0] - 3) ** 2), np.array([2 * (t[0] - 3)])), 1)
    res = adam_run(obj, [0.0], TrainSchedule(adam_epochs=2000, adam_lr=0.05))
    assert abs(res.theta[0] - 3) < 1e-3
    assert len(res.history) == 2000


def test_adam_zero_gradient_keeps_theta():
    obj = Objective(lambda t: (1.0, np.zeros_like(t)), 3)
    res = adam_run(obj, [1.0, -2.0, 0.5], TrainSchedule(adam_epochs=50))
    np.testing.assert_array_equal(res.theta, [1.0, -2.0, 0.5])


def adam_ratio_bound(t, b1=0.9, b2=0.999):
    """Cauchy-Schwarz bound on |m_hat_t / sqrt(v_hat_t)| over all gradient sequences."""
    i = np.arange(1, t + 1)
    w = (1 - b1) * b1 ** (t - i) / (1 - b1**t)
    u = (1 - b2) * b2 ** (t - i) / (1 - b2**t)
    return float(np.sqrt(np.sum(w**2 / u)))


def test_adam_ratio_bound_values():
    assert adam_ratio_bound(1) == pytest.approx(1.0, rel=1e-12)
    assert adam_ratio_bound(2) > 1.0


@given(st.floats(1e-9, 1e-2), st.integers(1, 50), st.integers(0, 1000))
def test_adam_constant_gradient_moves_lr_per_step(lr, steps, seed):
    g = np.random.default_rng(seed).standard_normal(3) * 10.0
    obj = Objective(lambda t: (float(g @ t), g.copy()), 3)
    res = adam_run(obj, np.zeros(3), TrainSchedule(adam_epochs=steps, adam_lr=lr))
    assert np.max(np.abs(res.theta)) <= lr * steps * (1 + 1e-12)
    # eps = 1e-8 in the denominator shortens steps for small components
    np.testing.assert_allclose(np.abs(res.theta), lr * steps * np.abs(g) / (np.abs(g) + 1e-8), rtol=1e-9)


@given(st.floats(1e-9, 1e-4), st.integers(1, 50), st.integers(0, 1000))
def test_adam_step_bound(lr, steps, seed):
    # |m_hat / sqrt(v_hat)| can exceed 1 slightly when gradients shrink, so
    # the per-step factor is the rigorous Cauchy-Schwarz bound, not 1
    a, b = spd(seed, 4, 10.0)
    theta0 = np.random.default_rng(seed).standard_normal(4) * 10
    res = adam_run(quadratic(a, b), theta0, TrainSchedule(adam_epochs=steps, adam_lr=lr))
    factor = sum(adam_ratio_bound(t) for t in range(1, steps + 1))
    ulp = np.spacing(np.abs(theta0)).max() * steps
    assert np.max(np.abs(res.theta - theta0)) <= lr * factor + ulp


@given(st.integers(1, 30), st.integers(0, 1000))
def test_adam_worst_case_step_bound(steps, seed):
    g = np.random.default_rng(seed)
    noise = [g.standard_normal(3) * 10.0 ** g.uniform(-3, 3) for _ in range(steps + 1)]
    calls = iter(noise)
    obj = Objective(lambda t: (0.0, next(calls)), 3)
    lr = 1e-3
    res = adam_run(obj, np.zeros(3), TrainSchedule(adam_epochs=steps, adam_lr=lr))
    factor = sum(adam_ratio_bound(t) for t in range(1, steps + 1))
    assert np.max(np.abs(res.theta)) <= lr * factor * (1 + 1e-12)


def test_lbfgs_dim5_quadratic_oracle():
    a, b = spd(0, 5, 100.0)
    res = lbfgs_run(quadratic(a, b), np.zeros(5), TrainSchedule(grad_tol=1e-8), check_wolfe=True)
    assert res.converged and res.n_iter <= 30
    assert np.abs(res.grad).max() < 1e-8
    np.testing.assert_allclose(res.theta, np.linalg.solve(a, b), rtol=1e-7)


@given(st.integers(1, 10), st.floats(1.0, 1e3), st.integers(0, 10_000))
def test_lbfgs_finite_termination_on_quadratics(dim, cond, seed):
    a, b = spd(seed, dim, cond)
    sched = TrainSchedule(grad_tol=1e-8, lbfgs_refine=True)
    res = lbfgs_run(quadratic(a, b), np.zeros(dim), sched, check_wolfe=True)
    assert res.converged
    assert res.n_iter <= dim + 5


@given(st.integers(1, 10), st.floats(1.0, 1e3), st.integers(0, 10_000))
def test_lbfgs_converges_without_refinement(dim, cond, seed):
    a, b = spd(seed, dim, cond)
    res = lbfgs_run(quadratic(a, b), np.zeros(dim), TrainSchedule(grad_tol=1e-8), check_wolfe=True)
    assert res.converged and not res.line_search_failed


def test_lbfgs_starting_at_minimizer():
    a, b = spd(1, 4, 10.0)
    res = lbfgs_run(quadratic(a, b), np.linalg.solve(a, b), TrainSchedule(grad_tol=1e-8))
    assert res.n_iter == 0 and res.history == []


def test_lbfgs_rosenbrock():
    obj = Objective(lambda t: (rosen(t), rosen_der(t)), 2)
    res = lbfgs_run(obj, [-1.2, 1.0], TrainSchedule(), check_wolfe=True)
    np.testing.assert_allclose(res.theta, [1.0, 1.0], atol=1e-6)


def test_line_search_returns_strong_wolfe_point():
    obj = Objective(lambda t: (rosen(t), rosen_der(t)), 2)
    x = np.array([-1.2, 1.0])
    f0, g0 = rosen(x), rosen_der(x)
    d = -g0
    alpha, f, g, _, _ = strong_wolfe_line_search(obj, x, f0, g0, d, alpha0=1e-3)
    assert f <= f0 + 1e-4 * alpha * (g0 @ d)
    assert abs(g @ d) <= 0.9 * abs(g0 @ d)


def test_line_search_failure_on_ascent_direction_warns():
    obj = Objective(lambda t: (float(t @ t), 2 * t), 2)
    x = np.array([1.0, 1.0])
    alpha, *_ = strong_wolfe_line_search(obj, x, 2.0, 2 * x, x, max_steps=10)
    assert alpha is None


def test_nonfinite_objective_raises():
    obj = Objective(lambda t: (np.nan, np.zeros_like(t)), 2)
    with pytest.raises(NonFiniteObjective):
        lbfgs_run(obj, [0.0, 0.0], TrainSchedule())
    with pytest.raises(NonFiniteObjective):
        adam_run(obj, [0.0, 0.0], TrainSchedule(adam_epochs=1))


def _linear_ctx():
    u = np.random.default_rng(3).normal(0, 0.5, 200)
    lag = LagSpec()
    basis = BaselineBasis.from_names(["u"], lag)
    return TrainingContext.from_dataset(Dataset(u, 2 * u, lag), basis), basis, lag


def test_train_linear_system_orthogonal():
    ctx, basis, lag = _linear_ctx()
    model0 = AugmentedModel("orthogonal", [0.5], xavier_init(MlpSpec((1, 4, 1)), 0), basis, lag)
    res = train(ctx, model0, TrainSchedule(adam_epochs=100, lbfgs_iters=200))
    assert abs(res.model.theta_b[0] - 2) < 1e-6
    assert res.final_loss < 1e-10
    assert res.model.is_frozen and res.model.theta_aux is not None


def test_train_with_no_iterations_returns_frozen_init():
    ctx, basis, lag = _linear_ctx()
    mlp = xavier_init(MlpSpec((1, 4, 1)), 0)
    model0 = AugmentedModel("orthogonal", [0.5], mlp, basis, lag)
    res = train(ctx, model0, TrainSchedule(adam_epochs=0, lbfgs_iters=0))
    assert res.history == []
    np.testing.assert_array_equal(res.model.theta_b, [0.5])
    np.testing.assert_array_equal(res.model.mlp.theta_a, mlp.theta_a)
    np.testing.assert_array_equal(res.model.theta_aux, freeze(ctx, model0).theta_aux)


def test_training_is_bit_reproducible():
    ds, _ = make_dataset("D1", 256, 4, 30.0)
    basis = nfir_basis()
    ctx = TrainingContext.from_dataset(ds, basis)
    sched = TrainSchedule(adam_epochs=50, lbfgs_iters=50)
    outs = []
    for _ in range(2):
        model0 = AugmentedModel("standard", [0.8, 0.03], xavier_init(MlpSpec((1, 16, 1)), 9), basis, ds.lag)
        outs.append(train(ctx, model0, sched, check_wolfe=True))
    assert outs[0].model.theta_b.tobytes() == outs[1].model.theta_b.tobytes()
    assert outs[0].model.mlp.theta_a.tobytes() == outs[1].model.mlp.theta_a.tobytes()
    assert outs[0].history == outs[1].history


def test_history_phases():
    ctx, basis, lag = _linear_ctx()
    model0 = AugmentedModel("standard", [0.5], MlpParams.zeros(MlpSpec((1, 2, 1))), basis, lag)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = train(ctx, model0, TrainSchedule(adam_epochs=5, lbfgs_iters=5))
    phases = [p for _, p, _ in res.history]
    assert phases[:5] == ["adam"] * 5 and set(phases[5:]) <= {"lbfgs"}
    assert [i for i, _, _ in res.history] == list(range(len(res.history)))
