"""Compact matrix Lie algebras: basis, bracket, ad/Ad, Killing form, Cartan split."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InputError, NotInAlgebraError
from .kernel import as_matrix, matrix_from_json, matrix_to_json

# Membership and validation checks use this absolute threshold on the
# residual norm; it is deliberately looser than ToleranceConfig.abs_tol since
# elements reaching here have been through flows and products.
MEMBERSHIP_TOL = 1e-8


def gell_mann_basis(n: int) -> list[np.ndarray]:
    """Anti-Hermitian basis ``i * lambda_k`` of su(n) from generalized Gell-Mann matrices.

    Ordering follows the usual su(3) labelling: for each column ``k`` the
    symmetric/antisymmetric pairs with rows ``j < k`` come first, then the
    diagonal matrix of level ``k - 1``.  Every ``lambda`` satisfies
    ``tr(lambda_j lambda_k) = 2 delta_jk``.
    """
    if int(n) != n or n < 2:
        raise InputError("gell_mann_basis needs n >= 2")
    n = int(n)
    out = []
    for k in range(1, n):
        for j in range(k):
            sym = np.zeros((n, n), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1.0
            asym = np.zeros((n, n), dtype=np.complex128)
            asym[j, k] = -1j
            asym[k, j] = 1j
            out.extend([sym, asym])
        d = np.zeros(n)
        d[:k] = 1.0
        d[k] = -k
        out.append(np.diag(d * np.sqrt(2.0 / (k * (k + 1)))).astype(np.complex128))
    return [1j * lam for lam in out]


def _gell_mann_diagonal_indices(n: int) -> tuple[int, ...]:
    # diagonal element of level k sits after the k(k+1)/2 * 2 off-diagonal ones
    idx, pos = [], 0
    for k in range(1, n):
        pos += 2 * k
        idx.append(pos)
        pos += 1
    return tuple(idx)


@dataclass(frozen=True, eq=False)
class LieAlgebraSpec:
    """A concrete compact matrix Lie algebra with a fixed basis and Cartan subalgebra.

    Build one with :meth:`su` or :meth:`custom`; both validate the basis.
    Structure data (ad matrices of the basis, Killing and inner-product Gram
    matrices) is computed once at construction.
    """

    family: str
    n: int
    basis: tuple
    rho: float
    cartan_indices: tuple
    _stack: np.ndarray = field(repr=False)
    _trace_gram: np.ndarray = field(repr=False)
    ad_basis: np.ndarray = field(repr=False)
    killing_gram: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @classmethod
    def su(cls, n: int, rho: float | None = None) -> "LieAlgebraSpec":
        """su(n) with the Gell-Mann basis and diagonal Cartan subalgebra.

        The default ``rho = 1/(4n)`` makes ``<X, Y> = -tr(XY)/2``.
        """
        if rho is None:
            rho = 1.0 / (4 * n)
        return cls._build("su", n, gell_mann_basis(n), rho, _gell_mann_diagonal_indices(n))

    @classmethod
    def custom(cls, basis: Sequence[Any], cartan_indices: Sequence[int],
               rho: float = 1.0) -> "LieAlgebraSpec":
        mats = [as_matrix(b) for b in basis]
        if not mats:
            raise InputError("custom algebra needs a non-empty basis")
        n = mats[0].shape[0]
        if any(m.shape != (n, n) for m in mats):
            raise InputError("basis matrices must share one size")
        return cls._build("custom", n, mats, rho, tuple(int(i) for i in cartan_indices))

    @classmethod
    def _build(cls, family, n, mats, rho, cartan_indices):
        if not rho > 0:
            raise InputError("rho must be positive")
        dim = len(mats)
        stack = np.array(mats, dtype=np.complex128)
        for B in stack:
            if np.linalg.norm(B + B.conj().T) > MEMBERSHIP_TOL:
                raise InputError("basis element is not anti-Hermitian")
            if family == "su" and abs(np.trace(B)) > MEMBERSHIP_TOL:
                raise InputError("su(n) basis element is not traceless")
        # Real trace pairing Re tr(A* B), used only to compute coordinates.
        flat = stack.reshape(dim, -1)
        trace_gram = np.real(flat.conj() @ flat.T)
        if np.linalg.matrix_rank(trace_gram, tol=1e-10 * np.abs(trace_gram).max()) < dim:
            raise InputError("basis is linearly dependent")

        def coords(M):
            rhs = np.real(flat.conj() @ M.reshape(-1))
            c = np.linalg.solve(trace_gram, rhs)
            if np.linalg.norm(M - np.tensordot(c, stack, axes=1)) > MEMBERSHIP_TOL * max(1.0, np.linalg.norm(M)):
                raise InputError("basis is not closed under the bracket")
            return c

        # ad_basis[i][:, j] = coordinates of [B_i, B_j]
        ad_basis = np.zeros((dim, dim, dim))
        for i in range(dim):
            for j in range(dim):
                ad_basis[i][:, j] = coords(stack[i] @ stack[j] - stack[j] @ stack[i])
        killing_gram = np.einsum("iab,jba->ij", ad_basis, ad_basis)
        gram = -rho * killing_gram
        try:
            np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            raise InputError("Killing form is not negative definite on this basis") from None

        idx = tuple(cartan_indices)
        if not idx or len(set(idx)) != len(idx) or min(idx) < 0 or max(idx) >= dim:
            raise InputError("cartan_indices must be distinct valid basis indices")
        for a in idx:
            for b in idx:
                if np.linalg.norm(stack[a] @ stack[b] - stack[b] @ stack[a]) > MEMBERSHIP_TOL:
                    raise InputError("Cartan basis elements do not commute")
        for k in range(dim):
            if k in idx:
                continue
            if all(np.linalg.norm(stack[k] @ stack[a] - stack[a] @ stack[k]) <= MEMBERSHIP_TOL for a in idx):
                raise InputError(f"Cartan set is not maximal: basis element {k} commutes with it")

        return cls(family=family, n=int(n), basis=tuple(stack), rho=float(rho),
                   cartan_indices=idx, _stack=stack, _trace_gram=trace_gram,
                   ad_basis=ad_basis, killing_gram=killing_gram, gram=gram)

    # -- elements ---------------------------------------------------------

    def coords_of(self, M: Any, check: bool = True) -> np.ndarray:
        M = np.asarray(M, dtype=np.complex128)
        if M.shape != (self.n, self.n):
            raise InputError(f"expected a {self.n}x{self.n} matrix, got {M.shape}")
        rhs = np.real(self._stack.reshape(self.dim, -1).conj() @ M.reshape(-1))
        c = np.linalg.solve(self._trace_gram, rhs)
        if check:
            resid = np.linalg.norm(M - np.tensordot(c, self._stack, axes=1))
            if not np.isfinite(resid) or resid > MEMBERSHIP_TOL * max(1.0, np.linalg.norm(M)):
                raise NotInAlgebraError(f"matrix is not in the algebra (residual {resid:.3e})")
        return c

    def element(self, M: Any) -> "AlgebraElement":
        """Wrap a matrix as an element, checking membership."""
        M = as_matrix(M)
        return AlgebraElement(self, M, self.coords_of(M))

    def from_coords(self, coords: Sequence[float]) -> "AlgebraElement":
        c = np.asarray(coords, dtype=float)
        if c.shape != (self.dim,):
            raise InputError(f"expected {self.dim} coordinates")
        return AlgebraElement(self, np.tensordot(c, self._stack, axes=1), c)

    def zero(self) -> "AlgebraElement":
        return self.from_coords(np.zeros(self.dim))

    def random_element(self, rng: np.random.Generator) -> "AlgebraElement":
        """Uniform coordinates on [-1, 1], rescaled to unit inner-product norm."""
        c = rng.uniform(-1.0, 1.0, self.dim)
        return self.from_coords(c / np.sqrt(c @ self.gram @ c))

    def is_cartan(self, X: "AlgebraElement", tol: float = MEMBERSHIP_TOL) -> bool:
        return norm(cartan_split(X).H) <= tol

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        if self.family == "su":
            return {"family": "su", "n": self.n, "rho": self.rho}
        return {"family": "custom", "basis": [matrix_to_json(B) for B in self.basis],
                "cartan_indices": list(self.cartan_indices), "rho": self.rho}

    @classmethod
    def from_json(cls, obj: Any) -> "LieAlgebraSpec":
        if not isinstance(obj, dict):
            raise InputError("algebra spec must be a JSON object")
        family = obj.get("family")
        if family == "su":
            n = obj.get("n")
            if not isinstance(n, int) or n < 2:
                raise InputError("su algebra needs integer n >= 2")
            return cls.su(n, obj.get("rho"))
        if family == "custom":
            try:
                basis = [matrix_from_json(b) for b in obj["basis"]]
                idx = obj["cartan_indices"]
            except (KeyError, TypeError) as exc:
                raise InputError(f"malformed custom algebra spec: {exc}") from exc
            return cls.custom(basis, idx, obj.get("rho", 1.0))
        raise InputError(f"unknown algebra family {family!r}")

    @classmethod
    def parse_selector(cls, text: str) -> "LieAlgebraSpec":
        """Parse ``su:N`` or ``custom:<path to spec JSON>``."""
        kind, _, arg = text.partition(":")
        if kind == "su":
            try:
                n = int(arg)
            except ValueError:
                raise InputError(f"bad algebra selector {text!r}") from None
            if n < 2:
                raise InputError("su:N needs N >= 2")
            return cls.su(n)
        if kind == "custom":
            try:
                obj = json.loads(Path(arg).read_text())
            except OSError as exc:
                raise InputError(f"cannot read algebra spec {arg!r}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise InputError(f"algebra spec {arg!r} is not valid JSON: {exc}") from exc
            return cls.from_json(obj)
        raise InputError(f"bad algebra selector {text!r}; expected su:N or custom:PATH")


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    spec: LieAlgebraSpec
    matrix: np.ndarray
    coords: np.ndarray

    def _same(self, other):
        if not isinstance(other, AlgebraElement) or other.spec is not self.spec:
            raise InputError("elements belong to different algebras")

    def __add__(self, other):
        self._same(other)
        return AlgebraElement(self.spec, self.matrix + other.matrix, self.coords + other.coords)

    def __sub__(self, other):
        self._same(other)
        return AlgebraElement(self.spec, self.matrix - other.matrix, self.coords - other.coords)

    def __neg__(self):
        return AlgebraElement(self.spec, -self.matrix, -self.coords)

    def __mul__(self, c):
        c = float(c)
        return AlgebraElement(self.spec, c * self.matrix, c * self.coords)

    __rmul__ = __mul__


@dataclass(frozen=True)
class CartanSplit:
    H: AlgebraElement
    T: AlgebraElement

    def __iter__(self):
        return iter((self.H, self.T))


def _check_pair(X, Y):
    if X.spec is not Y.spec:
        raise InputError("elements belong to different algebras")


def bracket(X: AlgebraElement, Y: AlgebraElement) -> AlgebraElement:
    _check_pair(X, Y)
    M = X.matrix @ Y.matrix - Y.matrix @ X.matrix
    return AlgebraElement(X.spec, M, X.spec.coords_of(M))


def ad_matrix(X: AlgebraElement) -> np.ndarray:
    """Real matrix of ``Y -> [X, Y]`` in the basis of ``X.spec``."""
    return np.tensordot(X.coords, X.spec.ad_basis, axes=1)


def Ad(g: Any, X: AlgebraElement) -> AlgebraElement:
    """Conjugation ``g X g^-1``."""
    g = as_matrix(g)
    try:
        M = np.linalg.solve(g.T, (g @ X.matrix).T).T
    except np.linalg.LinAlgError:
        raise InputError("Ad needs an invertible group element") from None
    return X.spec.element(M)


def killing_form(X: AlgebraElement, Y: AlgebraElement) -> float:
    """``tr(ad X . ad Y)``."""
    _check_pair(X, Y)
    return float(np.trace(ad_matrix(X) @ ad_matrix(Y)))


def inner_product(X: AlgebraElement, Y: AlgebraElement) -> float:
    """``-rho * K(X, Y)``, evaluated through the cached Gram matrix."""
    _check_pair(X, Y)
    return float(X.coords @ X.spec.gram @ Y.coords)


def norm(X: AlgebraElement) -> float:
    return float(np.sqrt(max(inner_product(X, X), 0.0)))


def cartan_split(X: AlgebraElement) -> CartanSplit:
    """Orthogonal split ``X = H + T`` with ``T`` in the Cartan subalgebra."""
    spec = X.spec
    idx = list(spec.cartan_indices)
    G = spec.gram
    try:
        a = np.linalg.solve(G[np.ix_(idx, idx)], G[idx] @ X.coords)
    except np.linalg.LinAlgError:
        raise InputError("degenerate Cartan Gram matrix") from None
    tc = np.zeros(spec.dim)
    tc[idx] = a
    T = AlgebraElement(spec, np.tensordot(tc, spec._stack, axes=1), tc)
    H = AlgebraElement(spec, X.matrix - T.matrix, X.coords - tc)
    return CartanSplit(H=H, T=T)
