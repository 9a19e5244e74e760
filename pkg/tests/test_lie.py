import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartanflow.errors import InputError, NotInAlgebraError
from cartanflow.kernel import mat_exp
from cartanflow.lie import (Ad, LieAlgebraSpec, ad_matrix, bracket, cartan_split,
                            gell_mann_basis, inner_product, killing_form, norm)

PAULI = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]


def brute_killing(basis, X, Y):
    """tr(ad X ad Y) with ad matrices from a least-squares solve over real coordinates."""
    flat = np.array([np.concatenate([B.real.ravel(), B.imag.ravel()]) for B in basis]).T

    def coords(M):
        return np.linalg.lstsq(flat, np.concatenate([M.real.ravel(), M.imag.ravel()]), rcond=None)[0]

    def ad(Z):
        return np.column_stack([coords(Z @ B - B @ Z) for B in basis])

    return np.trace(ad(X) @ ad(Y))


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_gell_mann_count_and_trace_relation(n):
    basis = gell_mann_basis(n)
    assert len(basis) == n * n - 1
    lams = [-1j * B for B in basis]
    for j, k in itertools.product(range(len(lams)), repeat=2):
        assert np.trace(lams[j] @ lams[k]) == pytest.approx(2.0 * (j == k), abs=1e-14)
    for B in basis:
        assert np.allclose(B, -B.conj().T) and abs(np.trace(B)) < 1e-15


def test_gell_mann_n2_is_pauli():
    for B, s in zip(gell_mann_basis(2), PAULI):
        np.testing.assert_array_equal(B, 1j * s)


def test_gell_mann_n3_standard_ordering():
    lam = [-1j * B for B in gell_mann_basis(3)]
    np.testing.assert_allclose(lam[2], np.diag([1, -1, 0]))
    np.testing.assert_allclose(lam[7], np.diag([1, 1, -2]) / np.sqrt(3))
    np.testing.assert_allclose(lam[4], [[0, 0, -1j], [0, 0, 0], [1j, 0, 0]])


def test_gell_mann_rejects_small_n():
    with pytest.raises(InputError):
        gell_mann_basis(1)


def test_su3_dimension_and_cartan(su3):
    assert su3.dim == 8 and su3.cartan_indices == (2, 7)
    assert su3.rho == pytest.approx(1 / 12)


def test_bracket_examples(su2):
    X = su2.random_element(np.random.default_rng(0))
    assert np.all(bracket(X, X).matrix == 0)
    half = [0.5j * s for s in PAULI]
    # (i/2) sigma_1, (i/2) sigma_2 bracket to -(i/2) sigma_3
    B1, B2, B3 = (su2.element(h) for h in half)
    np.testing.assert_allclose(bracket(B1, B2).matrix, -B3.matrix, atol=1e-15)
    # with the basis i sigma_j the structure constant doubles
    E = [su2.from_coords(np.eye(3)[k]) for k in range(3)]
    np.testing.assert_allclose(bracket(E[0], E[1]).coords, [0, 0, -2], atol=1e-15)


def test_bracket_of_cartan_elements_vanishes(su3):
    T1, T2 = (su3.from_coords(np.eye(8)[k]) for k in su3.cartan_indices)
    assert np.linalg.norm(bracket(T1, T2).matrix) == 0.0


def test_bracket_rejects_mixed_algebras(su2, su3):
    with pytest.raises(InputError):
        bracket(su2.zero(), su3.zero())


def test_ad_matrix_examples(su3, rng):
    assert np.all(ad_matrix(su3.zero()) == 0)
    X = su3.random_element(rng)
    A = ad_matrix(X)
    G = su3.gram
    np.testing.assert_allclose(G @ A, -(G @ A).T, atol=1e-14)
    assert abs(np.trace(A)) < 1e-13
    Y = su3.random_element(rng)
    np.testing.assert_allclose(A @ Y.coords, bracket(X, Y).coords, atol=1e-14)


def test_Ad_examples(su3, rng):
    X, Y, Z = (su3.random_element(rng) for _ in range(3))
    np.testing.assert_allclose(Ad(np.eye(3), X).matrix, X.matrix, atol=1e-15)
    g = mat_exp(2 * Z.matrix)
    assert inner_product(Ad(g, X), Ad(g, Y)) == pytest.approx(inner_product(X, Y), abs=1e-13)
    H = cartan_split(X).H
    T = cartan_split(Y).T
    moved = Ad(mat_exp(T.matrix), H)
    assert norm(cartan_split(moved).T) <= 1e-13


def test_Ad_rejects_singular(su2):
    with pytest.raises(InputError):
        Ad(np.zeros((2, 2)), su2.zero())


def test_killing_su3_closed_form_on_basis(su3):
    B = [su3.from_coords(np.eye(8)[k]) for k in range(8)]
    for a, b in itertools.product(B, B):
        assert killing_form(a, b) == pytest.approx(6 * np.trace(a.matrix @ b.matrix).real, abs=1e-10)


def test_killing_su2_diag_example(su2):
    X = su2.element(np.diag([1j, -1j]))
    assert brute_killing(gell_mann_basis(2), X.matrix, X.matrix) == pytest.approx(-8.0)
    assert killing_form(X, X) == pytest.approx(-8.0, abs=1e-13)
    assert killing_form(su2.zero(), X) == 0.0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_killing_matches_brute_force(n, rng):
    spec = LieAlgebraSpec.su(n)
    X, Y = spec.random_element(rng), spec.random_element(rng)
    assert killing_form(X, Y) == pytest.approx(brute_killing(spec.basis, X.matrix, Y.matrix), abs=1e-10)
    assert killing_form(X, Y) == pytest.approx(2 * n * np.trace(X.matrix @ Y.matrix).real, abs=1e-9)


def test_inner_product_su3_normalization(rng):
    spec = LieAlgebraSpec.su(3, rho=1 / 12)
    X, Y = spec.random_element(rng), spec.random_element(rng)
    assert inner_product(X, Y) == pytest.approx(-0.5 * np.trace(X.matrix @ Y.matrix).real, abs=1e-14)
    np.testing.assert_allclose(spec.gram, np.eye(8), atol=1e-12)


def test_inner_product_positive(su3, rng):
    for _ in range(100):
        X = su3.from_coords(rng.normal(size=8))
        assert inner_product(X, X) > 0


def test_rho_scales_inner_product(rng):
    a, b = LieAlgebraSpec.su(2), LieAlgebraSpec.su(2, rho=1.0)
    c = rng.normal(size=3)
    assert inner_product(b.from_coords(c), b.from_coords(c)) == pytest.approx(
        8 * inner_product(a.from_coords(c), a.from_coords(c)))


def test_cartan_split_examples(su3, rng):
    D = su3.element(np.diag([1j, 2j, -3j]))
    sp = cartan_split(D)
    assert norm(sp.H) < 1e-15
    np.testing.assert_allclose(sp.T.matrix, D.matrix, atol=1e-15)
    X = su3.random_element(rng)
    off = su3.element(X.matrix - np.diag(np.diag(X.matrix)))
    sp = cartan_split(off)
    assert norm(sp.T) < 1e-15
    sp = cartan_split(X)
    assert abs(inner_product(sp.H, sp.T)) < 1e-14
    H, T = sp
    assert H is sp.H and T is sp.T
    np.testing.assert_allclose((sp.H + sp.T).matrix, X.matrix, atol=1e-15)


def _pair(seed, n):
    spec = LieAlgebraSpec.su(n)
    rng = np.random.default_rng(seed)
    return spec, [spec.random_element(rng) for _ in range(3)]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
def test_bracket_antisymmetry_and_jacobi(seed, n):
    _, (X, Y, Z) = _pair(seed, n)
    assert np.array_equal(bracket(X, Y).matrix, -bracket(Y, X).matrix)
    J = bracket(X, bracket(Y, Z)) + bracket(Y, bracket(Z, X)) + bracket(Z, bracket(X, Y))
    assert np.linalg.norm(J.matrix) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
def test_killing_invariance_and_skewness(seed, n):
    spec, (X, Y, Z) = _pair(seed, n)
    g = mat_exp(3 * Z.matrix)
    assert abs(killing_form(Ad(g, X), Ad(g, Y)) - killing_form(X, Y)) <= 1e-9
    assert abs(inner_product(bracket(X, Y), Z) + inner_product(Y, bracket(X, Z))) <= 1e-10
    assert killing_form(X, X) < 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
def test_cartan_split_idempotent(seed, n):
    _, (X, _, _) = _pair(seed, n)
    sp = cartan_split(X)
    again, t_again = cartan_split(sp.H), cartan_split(sp.T)
    assert norm(again.T) <= 1e-12 and norm(t_again.H) <= 1e-12
    np.testing.assert_allclose(again.H.matrix, sp.H.matrix, atol=1e-12)


def test_element_membership(su2):
    with pytest.raises(NotInAlgebraError):
        su2.element(np.eye(2))
    with pytest.raises(NotInAlgebraError):
        su2.element(PAULI[0])  # Hermitian, not anti-Hermitian
    with pytest.raises(InputError):
        su2.element(np.zeros((3, 3)))


def so3_basis():
    L = np.zeros((3, 3, 3))
    L[0, 1, 2], L[0, 2, 1] = -1, 1
    L[1, 0, 2], L[1, 2, 0] = 1, -1
    L[2, 0, 1], L[2, 1, 0] = -1, 1
    return list(L)


def test_custom_so3(rng):
    spec = LieAlgebraSpec.custom(so3_basis(), [2], rho=0.5)
    assert spec.family == "custom" and spec.dim == 3
    # Killing form of so(3) is K(X,Y) = tr(XY) for 3x3 real skew matrices
    X, Y = spec.random_element(rng), spec.random_element(rng)
    assert killing_form(X, Y) == pytest.approx(np.trace(X.matrix @ Y.matrix).real, abs=1e-13)
    assert norm(X) == pytest.approx(1.0)
    sp = cartan_split(X)
    assert abs(inner_product(sp.H, sp.T)) < 1e-14


def test_custom_validation():
    L = so3_basis()
    with pytest.raises(InputError, match="commute"):
        LieAlgebraSpec.custom(L, [0, 1])
    with pytest.raises(InputError, match="anti-Hermitian"):
        LieAlgebraSpec.custom([np.eye(2)], [0])
    with pytest.raises(InputError, match="dependent"):
        LieAlgebraSpec.custom(L + [L[0]], [2])
    with pytest.raises(InputError, match="closed"):
        LieAlgebraSpec.custom(L[:2], [0])
    with pytest.raises(InputError):
        LieAlgebraSpec.custom(L, [2], rho=0.0)
    # u(1) x su(2) has a degenerate Killing form
    u2 = [1j * np.eye(2)] + gell_mann_basis(2)
    with pytest.raises(InputError):
        LieAlgebraSpec.custom(u2, [0, 3])


def test_custom_cartan_must_be_maximal():
    # diag(i,-i,0) alone in su(3) is not maximal: diag(i,i,-2i) commutes with it
    with pytest.raises(InputError, match="maximal"):
        LieAlgebraSpec.custom(gell_mann_basis(3), [2])


def test_spec_json_round_trip(tmp_path):
    su = LieAlgebraSpec.su(3)
    assert LieAlgebraSpec.from_json(json.loads(json.dumps(su.to_json()))).rho == su.rho
    custom = LieAlgebraSpec.custom(so3_basis(), [2], rho=0.25)
    path = tmp_path / "so3.json"
    path.write_text(json.dumps(custom.to_json()))
    again = LieAlgebraSpec.parse_selector(f"custom:{path}")
    assert again.cartan_indices == (2,) and again.rho == 0.25
    for a, b in zip(again.basis, custom.basis):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("text", ["su", "su:x", "su:1", "so:3", "custom:/nonexistent.json"])
def test_bad_selectors(text):
    with pytest.raises(InputError):
        LieAlgebraSpec.parse_selector(text)
