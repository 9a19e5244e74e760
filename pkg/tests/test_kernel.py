import json
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from cartanflow.errors import InputError, MatrixOverflowError
from cartanflow.kernel import (ToleranceConfig, as_matrix, ext_norm, mat_exp,
                               matrix_from_json, matrix_to_json, quad_integrate,
                               unitarity_defect)

from conftest import random_anti_hermitian


def test_exp_of_zero_is_identity():
    np.testing.assert_array_equal(mat_exp(np.zeros((2, 2))), np.eye(2))


def test_exp_of_diag_i_pi():
    np.testing.assert_allclose(mat_exp(np.diag([1j * np.pi, -1j * np.pi])), -np.eye(2), atol=1e-14)


def test_exp_of_nilpotent_terminates():
    np.testing.assert_allclose(mat_exp([[0, 1], [0, 0]]), [[1, 1], [0, 1]], atol=1e-15)


@pytest.mark.parametrize("scale", [1e-6, 0.1, 1.0, 5.0, 30.0, 200.0])
@pytest.mark.parametrize("n", [2, 3, 5])
def test_exp_matches_scipy(rng, n, scale):
    A = scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    expected = scipy.linalg.expm(A)
    assert np.linalg.norm(mat_exp(A) - expected) <= 1e-12 * max(1.0, np.linalg.norm(expected))


def test_exp_stack_matches_single(rng):
    S = rng.normal(size=(20, 3, 3)) * rng.uniform(0, 20, size=(20, 1, 1)) + 0j
    E = mat_exp(S)
    for A, e in zip(S, E):
        np.testing.assert_allclose(e, mat_exp(A), rtol=1e-13, atol=1e-13)


def test_exp_rejects_bad_input():
    with pytest.raises(InputError):
        mat_exp(np.zeros((2, 3)))
    with pytest.raises(InputError):
        mat_exp([[np.nan, 0], [0, 0]])
    with pytest.raises(MatrixOverflowError):
        mat_exp([[800.0, 0], [0, 0]])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), scale=st.floats(0.0, 10.0))
def test_exp_inverse_and_unitarity(seed, n, scale):
    rng = np.random.default_rng(seed)
    A = random_anti_hermitian(rng, n)
    A *= scale / max(np.linalg.norm(A), 1e-300)
    E = mat_exp(A)
    assert np.linalg.norm(E @ mat_exp(-A) - np.eye(n)) <= 1e-12
    assert unitarity_defect(E) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_exp_commutes_with_unitary_conjugation(seed):
    rng = np.random.default_rng(seed)
    A = random_anti_hermitian(rng, 3, 2.0)
    P = mat_exp(random_anti_hermitian(rng, 3, 2.0))
    lhs = mat_exp(P @ A @ P.conj().T)
    assert np.linalg.norm(lhs - P @ mat_exp(A) @ P.conj().T) <= 1e-12


def test_unitarity_defect_examples():
    assert unitarity_defect(np.eye(3)) == 0.0
    assert unitarity_defect(2 * np.eye(2)) == pytest.approx(3 * math.sqrt(2), rel=1e-15)


def test_ext_norm_is_half_trace():
    A = np.array([[1, 2j], [3, 4]])
    assert ext_norm(A) ** 2 == pytest.approx(0.5 * np.trace(A @ A.conj().T).real)


def test_quad_examples():
    C = np.array([[1, 2j], [3, 4]])
    np.testing.assert_allclose(quad_integrate(lambda s: C, 0.0, 1.0, 4), C, atol=1e-15)
    np.testing.assert_allclose(quad_integrate(lambda s: s * np.eye(2), 0.0, 1.0, 4), np.eye(2) / 2, atol=1e-15)
    np.testing.assert_allclose(quad_integrate(lambda s: s * np.eye(2), 1.0, 0.0, 4), -np.eye(2) / 2, atol=1e-15)
    with pytest.raises(InputError):
        quad_integrate(lambda s: s, 0.0, 1.0, 1)


def test_quad_self_refinement(rng):
    X, Y = random_anti_hermitian(rng, 2), random_anti_hermitian(rng, 2)

    def f(s):
        E = mat_exp(s * X)
        return E @ Y @ E.conj().T

    a = quad_integrate(f, 0.0, 1.0, 64)
    b = quad_integrate(f, 0.0, 1.0, 256)
    assert np.linalg.norm(a - b) <= 1e-12


def test_quad_doubling_gains_two_orders():
    X = np.array([[0, 20.0], [-20.0, 0]])
    f = lambda s: mat_exp(s * X)  # noqa: E731
    exact = np.linalg.solve(X, mat_exp(X) - np.eye(2))
    errs = [np.linalg.norm(quad_integrate(f, 0.0, 1.0, n) - exact) for n in (2, 4, 8)]
    assert errs[0] > 1e-10
    assert errs[1] <= max(errs[0] / 100, 1e-13) and errs[2] <= max(errs[1] / 100, 1e-13)


def test_quad_vectorized_matches_loop():
    f = lambda s: np.cos(np.asarray(s))[..., None, None] * np.eye(2)  # noqa: E731
    np.testing.assert_allclose(quad_integrate(f, 0.0, 2.0, 8, vectorized=True),
                               quad_integrate(f, 0.0, 2.0, 8), atol=1e-15)


def test_matrix_json_round_trip_is_bit_exact(rng):
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    back = matrix_from_json(json.loads(json.dumps(matrix_to_json(A))))
    assert np.array_equal(back, A)


@pytest.mark.parametrize("obj", [
    {"n": 2, "re": [[0, 0]], "im": [[0, 0]]},
    {"n": 2, "re": [[0, 0], [0, 0]], "im": [[0, 0], [0]]},
    {"re": [[0]]},
    [1, 2],
])
def test_matrix_json_malformed(obj):
    with pytest.raises(InputError):
        matrix_from_json(obj)


def test_tolerance_config_validation():
    ToleranceConfig()
    for bad in ({"abs_tol": 0.0}, {"ode_tol": -1.0}, {"quad_nodes": 1}, {"series_kmax": 0}):
        with pytest.raises(InputError):
            ToleranceConfig(**bad)


def test_as_matrix_rejects_non_square():
    with pytest.raises(InputError):
        as_matrix(np.zeros((2, 2, 2)))
