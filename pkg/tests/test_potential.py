import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dense_utilities, incidence_matrix, kkt_utilities, sign_transitive
from prefarb.potential import consistent_preferences, solve_utilities
from prefarb.signal import PreferenceMatrix, n_pairs


def test_consistent_three_securities():
    u = solve_utilities(PreferenceMatrix.from_values(3, [1.0, 2.0, 1.0]))
    np.testing.assert_allclose(u, [1.0, 0.0, -1.0], atol=1e-15)


def test_contradictory_cycle_collapses():
    # rho(1,2) = rho(2,3) = 1 and rho(1,3) = -1 in 1-based labels
    u = solve_utilities(PreferenceMatrix.from_values(3, [1.0, -1.0, 1.0]))
    assert np.all(u == 0.0)
    np.testing.assert_allclose(dense_utilities([1.0, -1.0, 1.0], 3), 0.0, atol=1e-15)


@settings(max_examples=100)
@given(n=st.integers(2, 8), seed=st.integers(0, 2**31))
def test_matches_dense_least_squares(n, seed):
    rho = np.random.default_rng(seed).normal(0, 3, n_pairs(n))
    u = solve_utilities(PreferenceMatrix.from_values(n, rho))
    np.testing.assert_allclose(u, dense_utilities(rho, n), atol=1e-10, rtol=0)
    np.testing.assert_allclose(u, kkt_utilities(rho, n), atol=1e-10, rtol=0)


def test_array_and_batched_input(rng):
    rho = rng.normal(size=(5, n_pairs(7)))
    batched = solve_utilities(rho)
    assert batched.shape == (5, 7)
    for row, values in zip(batched, rho):
        np.testing.assert_array_equal(row, solve_utilities(PreferenceMatrix.from_values(7, values)))
    with pytest.raises(ValueError):
        solve_utilities(np.zeros(4))


def test_non_scoreable_pairs_keep_full_divisor():
    values = np.array([0.0, 3.0, 0.0])
    pm = PreferenceMatrix(3, values, np.array([False, True, False]))
    np.testing.assert_allclose(solve_utilities(pm), [1.0, 0.0, -1.0])


def test_consistent_preferences_examples():
    assert consistent_preferences([1.0, 0.0, -1.0]).values.tolist() == [1.0, 2.0, 1.0]
    assert np.all(consistent_preferences(np.zeros(3)).values == 0.0)
    with pytest.raises(ValueError):
        consistent_preferences([0.0, np.inf])


@settings(max_examples=30)
@given(n=st.integers(3, 10), seed=st.integers(0, 2**31))
def test_consistent_sign_relation_is_transitive(n, seed):
    u = np.random.default_rng(seed).normal(size=n)
    rel = np.sign(consistent_preferences(u).to_dense())
    assert sign_transitive(rel)


@given(arrays(float, st.integers(1, 45).map(lambda k: n_pairs(k + 1)), elements=st.floats(-1e6, 1e6)))
def test_zero_sum(rho):
    u = solve_utilities(rho)
    assert abs(u.sum()) <= 1e-9 * len(u) * max(1.0, np.abs(rho).max())


@given(arrays(float, st.integers(2, 12), elements=st.floats(-1e3, 1e3)))
def test_projection_idempotent(u):
    u = u - u.mean()
    np.testing.assert_allclose(solve_utilities(consistent_preferences(u)), u, atol=1e-9)


@pytest.mark.parametrize("n", [3, 5, 8])
def test_distance_optimality(rng, n):
    B = incidence_matrix(n)
    rho = rng.normal(0, 2, n_pairs(n))
    u = solve_utilities(rho)
    best = np.linalg.norm(B @ u - rho)
    v = rng.normal(0, 2, (1000, n))
    v -= v.mean(axis=1, keepdims=True)
    others = np.linalg.norm(v @ B.T - rho, axis=1)
    assert np.all(best <= others + 1e-12)


@pytest.mark.parametrize("n", range(2, 9))
def test_laplacian_identity(n):
    B = incidence_matrix(n)
    laplacian = n * np.eye(n) - np.ones((n, n))
    np.testing.assert_array_equal(B.T @ B, laplacian)
    np.testing.assert_allclose(np.linalg.inv(B.T @ B + np.ones((n, n))), np.eye(n) / n, atol=1e-14)


@given(
    rho=arrays(float, n_pairs(6), elements=st.floats(-100, 100)),
    alpha=st.floats(1e-3, 1e3),
)
def test_scaling_equivariance(rho, alpha):
    u = solve_utilities(rho)
    ua = solve_utilities(alpha * rho)
    np.testing.assert_allclose(ua, alpha * u, rtol=1e-12, atol=1e-9)


def test_consistent_values_are_differences(rng):
    u = rng.normal(size=9)
    pm = consistent_preferences(u)
    for i, j in itertools.combinations(range(9), 2):
        assert pm.get(i, j) == pytest.approx(u[i] - u[j], abs=1e-15)
