import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from orthoaugm.errors import DimensionMismatch, NonFinite, RankDeficient
from orthoaugm.linalg import (
    apply_projector,
    factorize,
    gram_inverse_apply,
    solve_least_squares,
)


def explicit_projector(phi):
    # independent oracle: I - Phi pinv(Phi)
    return np.eye(phi.shape[0]) - phi @ np.linalg.pinv(phi)


@st.composite
def tall_full_rank(draw):
    n_cols = draw(st.integers(1, 4))
    n_rows = draw(st.integers(n_cols + 1, 40))
    seed = draw(st.integers(0, 2**32 - 1))
    scale = draw(st.sampled_from([1e-3, 1.0, 1e3]))
    phi = np.random.default_rng(seed).standard_normal((n_rows, n_cols)) * scale
    return phi, seed


def test_padded_identity():
    phi = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    f = factorize(phi)
    np.testing.assert_allclose(f.q_thin, phi, atol=1e-15)
    np.testing.assert_allclose(f.r_upper, np.eye(2), atol=1e-15)


def test_ones_column():
    f = factorize([[1.0], [1.0]])
    np.testing.assert_allclose(f.q_thin, [[2**-0.5], [2**-0.5]], atol=1e-15)
    np.testing.assert_allclose(f.r_upper, [[2**0.5]], atol=1e-15)


def test_collinear_columns_rank_deficient():
    with pytest.raises(RankDeficient):
        factorize([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])


def test_rejects_wide_and_nonfinite():
    with pytest.raises(DimensionMismatch):
        factorize(np.ones((2, 2)))
    with pytest.raises(NonFinite):
        factorize([[1.0], [np.nan], [2.0]])


def test_least_squares_hand_values():
    f = factorize([[1.0], [1.0]])
    np.testing.assert_allclose(solve_least_squares(f, [1.0, 0.0]), [0.5])
    np.testing.assert_allclose(solve_least_squares(f, [3.0, 3.0]), [3.0])
    np.testing.assert_allclose(solve_least_squares(f, [1.0, -1.0]), [0.0], atol=1e-15)


def test_projector_hand_values():
    f = factorize([[1.0], [1.0]])
    np.testing.assert_allclose(apply_projector(f, [1.0, 0.0]), [0.5, -0.5])
    np.testing.assert_allclose(apply_projector(f, [2.0, 2.0]), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(apply_projector(f, [1.0, -1.0]), [1.0, -1.0])


def test_gram_inverse_apply(rng):
    phi = rng.standard_normal((30, 3))
    w = rng.standard_normal(3)
    f = factorize(phi)
    np.testing.assert_allclose(gram_inverse_apply(f, w), np.linalg.solve(phi.T @ phi, w), rtol=1e-10)


def test_wrong_length_rejected():
    f = factorize([[1.0], [1.0]])
    with pytest.raises(DimensionMismatch):
        apply_projector(f, [1.0, 2.0, 3.0])


def test_factorization_is_immutable():
    f = factorize([[1.0], [2.0]])
    with pytest.raises(ValueError):
        f.q_thin[0, 0] = 3.0


@given(tall_full_rank())
def test_factorization_invariants(case):
    phi, _ = case
    f = factorize(phi)
    k = phi.shape[1]
    assert np.max(np.abs(f.q_thin.T @ f.q_thin - np.eye(k))) <= 1e-12
    assert np.max(np.abs(f.q_thin @ f.r_upper - phi)) <= 1e-10 * (1 + np.max(np.abs(phi)))
    assert np.all(np.diag(f.r_upper) > 0)
    assert np.allclose(np.triu(f.r_upper), f.r_upper)
    assert f.cond_estimate >= 1.0


@given(tall_full_rank())
def test_projector_properties(case):
    phi, seed = case
    g = np.random.default_rng(seed + 1)
    u, v = g.standard_normal(phi.shape[0]), g.standard_normal(phi.shape[0])
    f = factorize(phi)
    pv, pu = apply_projector(f, v), apply_projector(f, u)
    # idempotence
    assert np.max(np.abs(apply_projector(f, pv) - pv)) <= 1e-12 * max(1.0, np.abs(v).max())
    # orthogonality to span(Phi)
    assert np.max(np.abs(phi.T @ pv)) <= 1e-10 * np.linalg.norm(phi) * np.linalg.norm(v)
    # self-adjointness
    assert abs(u @ pv - pu @ v) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v)
    # agrees with the explicit projector
    np.testing.assert_allclose(pv, explicit_projector(phi) @ v, atol=1e-10 * np.linalg.norm(v))


@given(tall_full_rank(), arrays(np.float64, 4, elements=st.floats(-5, 5)))
def test_span_is_annihilated(case, c):
    phi, _ = case
    c = c[: phi.shape[1]]
    f = factorize(phi)
    v = phi @ c
    assert np.max(np.abs(apply_projector(f, v))) <= 1e-10 * (1 + np.abs(v).max())
    np.testing.assert_allclose(solve_least_squares(f, v), c, atol=1e-8 * (1 + np.abs(c).max()) * f.cond_estimate)


@given(tall_full_rank())
def test_least_squares_optimality(case):
    phi, seed = case
    b = np.random.default_rng(seed + 2).standard_normal(phi.shape[0])
    f = factorize(phi)
    x = solve_least_squares(f, b)
    r = b - phi @ x
    assert np.max(np.abs(phi.T @ r)) <= 1e-10 * np.linalg.norm(phi) * np.linalg.norm(b)
    np.testing.assert_allclose(x, np.linalg.lstsq(phi, b, rcond=None)[0], rtol=1e-7, atol=1e-9 / np.abs(phi).max())


def test_matrix_columns_projected_independently(rng):
    phi = rng.standard_normal((20, 2))
    v = rng.standard_normal((20, 5))
    f = factorize(phi)
    out = apply_projector(f, v)
    for j in range(5):
        np.testing.assert_allclose(out[:, j], apply_projector(f, v[:, j]), atol=1e-14)
