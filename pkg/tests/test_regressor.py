import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orthoaugm.errors import InsufficientData
from orthoaugm.experiments import gen_input
from orthoaugm.regressor import (
    BaselineBasis,
    Dataset,
    LagSpec,
    assemble_phi,
    build_states,
    parse_feature,
    read_dataset_csv,
    write_dataset_csv,
)


def test_states_with_one_output_lag():
    ds = Dataset([1.0, 2.0, 3.0], [10.0, 20.0, 30.0], LagSpec(n_a=1, n_b=0))
    x, y = build_states(ds)
    np.testing.assert_array_equal(x, [[10.0, 2.0], [20.0, 3.0]])
    np.testing.assert_array_equal(y, [[20.0], [30.0]])


def test_state_count_drops_history():
    ds = Dataset([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], LagSpec(n_a=2, n_b=1))
    x, _ = build_states(ds)
    assert x.shape == (1, 4)
    # newest first in each block: y_{k-1}, y_{k-2}, u_k, u_{k-1}
    np.testing.assert_array_equal(x[0], [2.0, 1.0, 3.0, 2.0])


def test_lag_index_helpers_match_layout():
    lag = LagSpec(n_a=2, n_b=1, n_u=2, n_y=1)
    ds = Dataset(np.arange(10.0).reshape(5, 2), 100 + np.arange(5.0), lag)
    x, _ = build_states(ds)
    k = 2  # raw index of first usable sample
    assert x[0, lag.y_index(1)] == 100 + k - 1
    assert x[0, lag.y_index(2)] == 100 + k - 2
    assert x[0, lag.u_index(0, 1)] == ds.inputs[k, 1]
    assert x[0, lag.u_index(1, 0)] == ds.inputs[k - 1, 0]


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        build_states(Dataset([1.0, 2.0], [1.0, 2.0], LagSpec(n_a=2)))


def test_phi_hand_values():
    basis = BaselineBasis.from_names(["u", "u^3"], LagSpec())
    np.testing.assert_array_equal(assemble_phi(basis, [[1.0], [-1.0]]), [[1, 1], [-1, -1]])
    np.testing.assert_array_equal(assemble_phi(basis, [[1.0], [2.0]]), [[1, 1], [2, 8]])
    const = BaselineBasis.from_names(["1"], LagSpec())
    np.testing.assert_array_equal(assemble_phi(const, [[0.3], [7.0], [-2.0]]), [[1], [1], [1]])


def test_feature_catalog():
    lag = LagSpec(n_a=1, n_b=2)
    x = np.array([[2.0, 3.0, 5.0, 7.0]])  # y[1], u, u[1], u[2]
    cases = {"y[1]": 2.0, "u": 3.0, "u[2]^2": 49.0, "x2^3": 125.0, "poly(x1;1,2,3)": 1 + 6 + 27}
    for name, want in cases.items():
        assert parse_feature(name, lag).evaluate(x)[0] == want
    with pytest.raises(ValueError):
        parse_feature("z^2", lag)
    with pytest.raises(ValueError):
        parse_feature("x9", lag)


def test_channel_routing():
    lag = LagSpec(n_y=2)
    basis = BaselineBasis.from_names(["u", "u^2@1"], lag)
    phi = assemble_phi(basis, [[2.0], [3.0]])
    np.testing.assert_array_equal(phi, [[2, 0], [0, 4], [3, 0], [0, 9]])


@given(st.integers(1, 200), st.integers(0, 10_000))
def test_d1_column_sums_are_exactly_zero(half, seed):
    u = gen_input("D1", 2 * half, seed)
    basis = BaselineBasis.from_names(["u", "u^3"], LagSpec())
    x, _ = build_states(Dataset(u, np.zeros_like(u), LagSpec()))
    phi = assemble_phi(basis, x)
    assert [math.fsum(phi[:, j]) for j in range(2)] == [0.0, 0.0]


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 1000))
def test_windowing_consistency(n_a, n_b, extra, seed):
    g = np.random.default_rng(seed)
    lag = LagSpec(n_a=n_a, n_b=n_b)
    m = max(n_a, n_b)
    n_raw = m + 5 + extra
    u, y = g.standard_normal(n_raw + m), g.standard_normal(n_raw + m)
    x_full, t_full = build_states(Dataset(u, y, lag))
    x_tail, t_tail = build_states(Dataset(u[m:], y[m:], lag))
    np.testing.assert_array_equal(x_full[m:], x_tail)
    np.testing.assert_array_equal(t_full[m:], t_tail)


def test_csv_roundtrip_is_exact(tmp_path, rng):
    ds = Dataset(rng.standard_normal((7, 2)), rng.standard_normal((7, 1)) * 1e-7, LagSpec(n_u=2))
    path = tmp_path / "d.csv"
    write_dataset_csv(path, ds)
    assert path.read_text().splitlines()[0] == "k,u_0,u_1,y_0"
    back = read_dataset_csv(path)
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.outputs, ds.outputs)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,a,b\n0,1,2\n")
    with pytest.raises(ValueError):
        read_dataset_csv(path)
