"""Dense complex matrix primitives shared by the rest of the package.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import InputError, MatrixOverflowError


@dataclass(frozen=True)
class ToleranceConfig:
    abs_tol: float = 1e-12
    ode_tol: float = 1e-10
    quad_nodes: int = 64
    series_kmax: int = 12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.ode_tol > 0):
            raise InputError("tolerances must be strictly positive")
        if int(self.quad_nodes) != self.quad_nodes or self.quad_nodes < 2:
            raise InputError("quad_nodes must be an integer >= 2")
        if int(self.series_kmax) != self.series_kmax or self.series_kmax < 1:
            raise InputError("series_kmax must be an integer >= 1")


DEFAULT_CONFIG = ToleranceConfig()


def as_matrix(A: Any) -> np.ndarray:
    """Coerce ``A`` to a finite square complex128 array, or raise InputError."""
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InputError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    return M


# Pade(13) coefficients and the 1-norm threshold from Higham (2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


# Rows combine [I, A^2, A^4, A^6] into the four polynomial pieces of U and V.
_PADE13_MIX = np.array([
    [0.0, _PADE13[9], _PADE13[11], _PADE13[13]],
    [_PADE13[1], _PADE13[3], _PADE13[5], _PADE13[7]],
    [0.0, _PADE13[8], _PADE13[10], _PADE13[12]],
    [_PADE13[0], _PADE13[2], _PADE13[4], _PADE13[6]],
]) / _PADE13[0]


def mat_exp(A: Any) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [13/13] Pade approximant.

    Accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``; each matrix
    in a stack gets its own scaling exponent.
    """
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2] or A.shape[-1] == 0:
        raise InputError(f"expected square matrices, got shape {A.shape}")
    n = A.shape[-1]
    norm1 = np.abs(A).sum(axis=-2).max(axis=-1)
    if not np.all(np.isfinite(norm1)):
        raise InputError("matrix has non-finite entries")
    if A.ndim == 2:
        s = max(0, math.ceil(math.log2(norm1 / _THETA13))) if norm1 > _THETA13 else 0
        if s:
            A = A * 2.0**-s
    else:
        s = np.maximum(0, np.ceil(np.log2(np.maximum(norm1, 1e-300) / _THETA13))).astype(int)
        if s.any():
            A = A * np.ldexp(1.0, -s)[..., None, None]
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    powers = np.empty((4,) + A.shape, dtype=np.complex128)
    powers[0] = np.eye(n)
    powers[1], powers[2], powers[3] = A2, A4, A6
    u_hi, u_lo, v_hi, v_lo = (_PADE13_MIX @ powers.reshape(4, -1)).reshape(powers.shape)
    U = A @ (A6 @ u_hi + u_lo)
    V = A6 @ v_hi + v_lo
    R = np.linalg.solve(V - U, V + U)
    with np.errstate(over="ignore", invalid="ignore"):
        if R.ndim == 2:
            for _ in range(s):
                R = R @ R
        else:
            for k in range(int(s.max(initial=0))):
                mask = s > k
                R[mask] = R[mask] @ R[mask]
    if not np.all(np.isfinite(R)):
        raise MatrixOverflowError("matrix exponential overflowed")
    return R


def unitarity_defect(A: Any) -> float:
    """Frobenius norm of ``A* A - I``."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"expected a square matrix, got shape {A.shape}")
    return float(np.linalg.norm(A.conj().T @ A - np.eye(A.shape[0])))


def ext_norm(A: Any) -> float:
    """Norm on the full matrix space with ``||A||^2 = tr(A A*) / 2``.

    On su(n) this coincides with the Killing inner-product norm at the
    default normalization, and it is also defined for matrices such as
    ``H @ H`` that leave the algebra.
    """
    A = np.asarray(A, dtype=np.complex128)
    return float(np.linalg.norm(A) / math.sqrt(2.0))


def frobenius(A: Any) -> float:
    return float(np.linalg.norm(np.asarray(A)))


_GL5_X, _GL5_W = np.polynomial.legendre.leggauss(5)


def quad_integrate(f: Callable[[Any], Any], a: float, b: float,
                   nodes: int = DEFAULT_CONFIG.quad_nodes, *,
                   vectorized: bool = False) -> np.ndarray:
    """Composite 5-point Gauss-Legendre rule with ``nodes`` equal panels.

    ``f`` may return scalars or arrays of any fixed shape.  With
    ``vectorized=True`` it is called once on the array of all abscissae and
    must return the stacked values.  ``a > b`` gives the negated integral.
    """
    if int(nodes) != nodes or nodes < 2:
        raise InputError("nodes must be an integer >= 2")
    edges = np.linspace(a, b, int(nodes) + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    xs = (mid[:, None] + half[:, None] * _GL5_X[None, :]).ravel()
    ws = (half[:, None] * _GL5_W[None, :]).ravel()
    if vectorized:
        vals = np.asarray(f(xs), dtype=np.complex128)
    else:
        vals = np.array([np.asarray(f(x), dtype=np.complex128) for x in xs])
    return np.tensordot(ws, vals, axes=1)


def matrix_to_json(A: Any) -> dict:
    """Encode as ``{"n", "re", "im"}``; Python floats round-trip exactly."""
    A = np.asarray(A, dtype=np.complex128)
    return {
        "n": int(A.shape[0]),
        "re": [[float(v) for v in row] for row in A.real],
        "im": [[float(v) for v in row] for row in A.imag],
    }


def matrix_from_json(obj: Any) -> np.ndarray:
    try:
        n = obj["n"]
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (TypeError, KeyError, ValueError) as exc:
        raise InputError(f"malformed matrix JSON: {exc}") from exc
    if not isinstance(n, int) or re.shape != (n, n) or im.shape != (n, n):
        raise InputError(f"malformed matrix JSON: expected {n}x{n} 're' and 'im'")
    return as_matrix(re + 1j * im)
