"""Right/left chronological exponentials of time-dependent algebra fields.

The right chronological exponential of ``X`` is the solution of
``g'(t) = g(t) X(t)``, ``g(0) = I``.  It is computed here two ways: a
fixed-step RK4 integrator (:func:`flow_ode`) and the truncated Picard /
simplex-integral series (:func:`flow_series`).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import InputError, SeriesNotConvergedError, StepSizeUnderflowError
from .kernel import (DEFAULT_CONFIG, ToleranceConfig, as_matrix, mat_exp,
                     matrix_to_json, quad_integrate, unitarity_defect)
from .lie import AlgebraElement

MAX_STEPS = 2_000_000
# Points used to estimate sup ||X(t)|| when no norm_bound is supplied.
_NORM_SAMPLES = 33


def _as_field_matrix(value: Any) -> np.ndarray:
    if isinstance(value, AlgebraElement):
        return value.matrix
    return np.asarray(value, dtype=np.complex128)


@dataclass(frozen=True)
class TimeDependentField:
    """``t -> X(t)``; ``eval`` may return an AlgebraElement or a raw matrix.

    ``eval_many``, when given, maps an array of times to the stacked
    matrices in one call and is what the integrators use.  Both must be
    re-entrant: nothing here synchronizes access.
    """

    eval: Callable[[float], Any]
    smoothness_hint: str = "smooth"
    norm_bound: Optional[Callable[[float], float]] = None
    eval_many: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def matrix(self, t: float) -> np.ndarray:
        return _as_field_matrix(self.eval(t))

    def matrices(self, ts: Any) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.eval_many is not None:
            return np.asarray(self.eval_many(ts), dtype=np.complex128)
        return np.array([self.matrix(t) for t in ts])

    @classmethod
    def constant(cls, X: Any) -> "TimeDependentField":
        M = _as_field_matrix(X)
        nrm = float(np.linalg.norm(M))
        return cls(lambda t: M, "smooth", lambda t: nrm,
                   lambda ts: np.broadcast_to(M, (len(ts),) + M.shape))

    @classmethod
    def affine(cls, A: Any, B: Any) -> "TimeDependentField":
        """``X(t) = A + t B``."""
        MA, MB = _as_field_matrix(A), _as_field_matrix(B)
        return cls(lambda t: MA + t * MB, "smooth", None,
                   lambda ts: MA + ts[:, None, None] * MB)

    @classmethod
    def scalar_multiple(cls, f: Callable[[float], float], X0: Any) -> "TimeDependentField":
        """``X(t) = f(t) X0``; all values commute with each other."""
        M = _as_field_matrix(X0)
        return cls(lambda t: f(t) * M, "smooth")

    def __add__(self, other: "TimeDependentField") -> "TimeDependentField":
        hint = "continuous" if "continuous" in (self.smoothness_hint, other.smoothness_hint) else "smooth"
        return TimeDependentField(lambda t: self.matrix(t) + other.matrix(t), hint, None,
                                  lambda ts: self.matrices(ts) + other.matrices(ts))

    def __neg__(self) -> "TimeDependentField":
        return TimeDependentField(lambda t: -self.matrix(t), self.smoothness_hint,
                                  self.norm_bound, lambda ts: -self.matrices(ts))


def _as_field(X: Any) -> TimeDependentField:
    if isinstance(X, TimeDependentField):
        return X
    return TimeDependentField.constant(X)


@dataclass
class FlowTrace:
    """Flow sampled on a time grid.

    ``residual`` is the largest Simpson-rule mismatch
    ``||g(t+2h) - g(t) - int g X||`` over consecutive step pairs, and
    ``richardson_error`` the step-halving error estimate at the last time for
    the next-coarser step (the returned samples use the finer one).
    """

    times: np.ndarray
    elements: list
    defects: list
    residual: float = 0.0
    richardson_error: float = 0.0
    steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.elements[-1]

    @property
    def max_defect(self) -> float:
        return max(self.defects) if self.defects else 0.0

    def to_csv(self) -> str:
        n = self.elements[0].shape[0]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "unitarity_defect"]
        for i in range(n):
            for j in range(n):
                header += [f"re_{i}{j}", f"im_{i}{j}"]
        w.writerow(header)
        for t, d, g in zip(self.times, self.defects, self.elements):
            row = [repr(float(t)), repr(float(d))]
            for v in g.reshape(-1):
                row += [repr(float(v.real)), repr(float(v.imag))]
            w.writerow(row)
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "times": [float(t) for t in self.times],
            "defects": [float(d) for d in self.defects],
            "elements": [matrix_to_json(g) for g in self.elements],
            "residual": float(self.residual),
            "richardson_error": float(self.richardson_error),
        }


# -- fixed-step RK4 --------------------------------------------------------

def _sup_norm(fields: Sequence[TimeDependentField], a: float, b: float) -> float:
    ts = np.linspace(a, b, _NORM_SAMPLES)
    total = 0.0
    for F in fields:
        if F.norm_bound is not None:
            total += max(F.norm_bound(t) for t in ts)
        else:
            # 5% margin for the gaps between samples
            total += 1.05 * float(np.linalg.norm(F.matrices(ts), axis=(1, 2)).max())
    return total


def _step_size(sup: float, cfg: ToleranceConfig) -> float:
    """Largest h with ``(h * sup)**5 <= ode_tol``."""
    if sup <= 0.0:
        return math.inf
    return cfg.ode_tol ** 0.2 / sup


def _schedule(targets: Sequence[float], nsteps: Sequence[int]) -> list:
    """``(h, t_mid, t_end, first, last)`` for every RK4 step, in order.

    ``first``/``last`` flag the steps that open and close a segment.

    Step times are ``start + j * h``, so doubling every step count
    reproduces each coarse time bit-for-bit.
    """
    out = []
    start = 0.0
    for target, n in zip(targets, nsteps):
        h = (target - start) / n
        for j in range(n):
            out.append((h, start + (j + 0.5) * h,
                        target if j == n - 1 else start + (j + 1) * h, j == 0, j == n - 1))
        start = target
    return out


class _FieldCache:
    """Batch-evaluates fields at the times a schedule needs, once per time."""

    def __init__(self, fields: Sequence[TimeDependentField]):
        self.fields = fields
        self.values: dict[float, Any] = {}

    def ensure(self, times: Sequence[float]) -> None:
        missing = np.array(sorted({t for t in times if t not in self.values}))
        if missing.size == 0:
            return
        stacks = [F.matrices(missing) for F in self.fields]
        for i, t in enumerate(missing):
            self.values[float(t)] = stacks[0][i] if len(stacks) == 1 else tuple(st[i] for st in stacks)

    def __call__(self, t: float):
        return self.values[t]


def _rk4(rhs: Callable[[np.ndarray, Any], np.ndarray], cache: _FieldCache,
         y0: np.ndarray, targets: Sequence[float], nsteps: Sequence[int]):
    """Integrate ``y' = rhs(y, X(t))`` from 0 through the sorted ``targets``.

    Segment ``i`` takes ``nsteps[i]`` equal steps; all targets share one sign
    and backward integration takes negative steps.  Returns the states at
    the targets and the largest Simpson residual
    ``||y(t+2h) - y(t) - int y'||`` over consecutive step pairs.
    """
    sched = _schedule(targets, nsteps)
    cache.ensure([0.0] + [s[1] for s in sched] + [s[2] for s in sched])
    y = y0.copy()
    fy = rhs(y, cache(0.0))
    ys, fs = [y], [fy]
    out = []
    for h, t_mid, t_end, first, last in sched:
        c_mid = cache(t_mid)
        c_end = cache(t_end)
        k2 = rhs(y + 0.5 * h * fy, c_mid)
        k3 = rhs(y + 0.5 * h * k2, c_mid)
        k4 = rhs(y + h * k3, c_end)
        y = y + (h / 6.0) * (fy + 2.0 * k2 + 2.0 * k3 + k4)
        fy = rhs(y, c_end)
        ys.append(y)
        fs.append(fy)
        if last:
            out.append(y.copy())
    # Simpson residual on pairs of equal steps (both inside one segment)
    ys, fs = np.array(ys), np.array(fs)
    hs = np.array([s[0] for s in sched])
    ok = ~np.array([s[3] for s in sched])[1:]
    resid = 0.0
    if ok.any():
        h = hs[1:][ok].reshape((-1,) + (1,) * (ys.ndim - 1))
        i = np.nonzero(ok)[0]
        simpson = (h / 3.0) * (fs[i] + 4.0 * fs[i + 1] + fs[i + 2])
        diff = (ys[i + 2] - ys[i] - simpson).reshape(len(i), -1)
        resid = float(np.linalg.norm(diff, axis=1).max())
    return out, resid


def _integrate(rhs, fields, y0, times, cfg):
    """Integrate on an arbitrary grid (splitting at 0 if it changes sign).

    Each direction first runs at the step from :func:`_step_size`, then with
    every step halved; the difference at the last time is the Richardson
    estimate of the coarse error.  While the estimate exceeds
    ``ode_tol * max(1, |t|)`` the step keeps halving.  The states returned
    are from the finest run.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or not np.all(np.isfinite(times)):
        raise InputError("time grid must be a non-empty finite 1-D sequence")
    results = {}
    resid = 0.0
    steps = 0
    rich = 0.0
    for sign in (1.0, -1.0):
        part = sorted({float(t) for t in times if (t > 0 if sign > 0 else t < 0)},
                      key=abs)
        if not part:
            continue
        reach = part[-1]
        h = _step_size(_sup_norm(fields, min(0.0, reach), max(0.0, reach)), cfg)
        spans = np.abs(np.diff([0.0] + part))
        if math.isinf(h):
            nsteps = [1] * len(part)
        else:
            nsteps = [max(1, math.ceil(sp / h - 1e-9)) for sp in spans]
        cache = _FieldCache(fields)
        est = 0.0
        if 2 * sum(nsteps) > MAX_STEPS:
            raise StepSizeUnderflowError(
                f"field needs more than {MAX_STEPS} RK4 steps at this tolerance")
        states, r = _rk4(rhs, cache, y0, part, nsteps)
        if not math.isinf(h):
            target = cfg.ode_tol * max(1.0, abs(reach))
            prev_est = math.inf
            while True:
                nsteps = [2 * n for n in nsteps]
                if sum(nsteps) > MAX_STEPS:
                    raise StepSizeUnderflowError(
                        f"field needs more than {MAX_STEPS} RK4 steps at this tolerance")
                fine, r = _rk4(rhs, cache, y0, part, nsteps)
                est = float(np.linalg.norm(fine[-1] - states[-1])) * 16.0 / 15.0
                states = fine
                # stop once within target, or once halving stops paying off
                # because rounding dominates the estimate
                if est <= target or est > 0.5 * prev_est:
                    break
                prev_est = est
        resid = max(resid, r)
        rich = max(rich, est)
        steps += sum(nsteps)
        results.update(zip(part, states))
    return [y0.copy() if t == 0.0 else results[float(t)] for t in times], resid, rich, steps


def _grid(t_end: float, samples: int | None, times: Sequence[float] | None) -> np.ndarray:
    if times is not None:
        return np.asarray(times, dtype=float)
    if samples is None:
        samples = 2
    if samples < 2:
        raise InputError("samples must be >= 2")
    return np.linspace(0.0, float(t_end), int(samples))


def _trace(times, mats, resid, rich, steps) -> FlowTrace:
    return FlowTrace(times=np.asarray(times, dtype=float), elements=mats,
                     defects=[unitarity_defect(g) for g in mats],
                     residual=resid, richardson_error=rich, steps=steps)


def flow_ode(X: Any, t_end: float, cfg: ToleranceConfig = DEFAULT_CONFIG, *,
             samples: int | None = None, times: Sequence[float] | None = None) -> FlowTrace:
    """Right chronological exponential by fixed-step RK4.

    The step obeys ``(h * sup||X||_F)**5 <= cfg.ode_tol``.  By default the trace
    holds the two samples ``0`` and ``t_end``; pass ``samples`` for a uniform
    grid or ``times`` for an explicit one (negative times integrate backward).
    """
    F = _as_field(X)
    grid = _grid(t_end, samples, times)
    n = F.matrix(0.0).shape[0]
    mats, resid, rich, steps = _integrate(
        lambda y, x: y @ x, [F], np.eye(n, dtype=np.complex128), grid, cfg)
    return _trace(grid, mats, resid, rich, steps)


def inverse_flow(X: Any, t_end: float, cfg: ToleranceConfig = DEFAULT_CONFIG, *,
                 samples: int | None = None, times: Sequence[float] | None = None) -> FlowTrace:
    """Inverse of the flow, from ``(g^-1)' = -X(t) g^-1``, ``g^-1(0) = I``."""
    F = _as_field(X)
    grid = _grid(t_end, samples, times)
    n = F.matrix(0.0).shape[0]
    mats, resid, rich, steps = _integrate(
        lambda y, x: -(x @ y), [F], np.eye(n, dtype=np.complex128), grid, cfg)
    return _trace(grid, mats, resid, rich, steps)


def flow_between(X: Any, t0: float, t1: float,
                 cfg: ToleranceConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Flow of ``X`` from time ``t0`` to ``t1``: ``g(t0)^-1 g(t1)``."""
    if t0 == t1:
        n = _as_field(X).matrix(t0).shape[0]
        return np.eye(n, dtype=np.complex128)
    left = inverse_flow(X, t0, cfg).final if t0 != 0.0 else None
    right = flow_ode(X, t1, cfg).final if t1 != 0.0 else None
    if left is None:
        return right
    if right is None:
        return left
    return left @ right


# -- series ----------------------------------------------------------------

def _cheb_cumulative(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto points on [-1, 1] and the matrix of ``int_{-1}^{x_i}``."""
    C = np.polynomial.chebyshev
    x = -np.cos(np.pi * np.arange(npts) / (npts - 1))
    V = C.chebvander(x, npts - 1)
    integ = np.zeros((npts + 1, npts))
    for j in range(npts):
        e = np.zeros(npts)
        e[j] = 1.0
        integ[:, j] = C.chebint(e, lbnd=-1.0)
    S = C.chebvander(x, npts) @ integ @ np.linalg.inv(V)
    return x, S


_CHEB_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _cheb(npts: int):
    if npts not in _CHEB_CACHE:
        _CHEB_CACHE[npts] = _cheb_cumulative(npts)
    return _CHEB_CACHE[npts]


def series_error_bound(X: Any, t: float, kmax: int,
                       cfg: ToleranceConfig = DEFAULT_CONFIG) -> float:
    """Tail ``sum_{k>kmax} m**k / k!`` with ``m = int_0^t ||X(s)||_F ds``.

    Equal to ``e**m`` minus its degree-``kmax`` Taylor polynomial; the tail is
    summed directly so small bounds are not lost to cancellation.
    """
    return tail_of_exp(_norm_integral(_as_field(X), t, cfg), kmax)


def _norm_integral(F: TimeDependentField, t: float, cfg: ToleranceConfig) -> float:
    """``|int_0^t ||X(s)||_F ds|``."""
    m = quad_integrate(lambda s: np.linalg.norm(F.matrices(s), axis=(1, 2)),
                       0.0, float(t), cfg.quad_nodes, vectorized=True)
    return abs(float(np.real(m)))


def tail_of_exp(m: float, kmax: int) -> float:
    if m == 0.0:
        return 0.0
    k = kmax + 1
    term = math.exp(k * math.log(m) - math.lgamma(k + 1))
    total = 0.0
    while term > 1e-17 * total or k <= m:
        total += term
        k += 1
        term *= m / k
    return total


def flow_series(X: Any, t: float, kmax: int | None = None,
                cfg: ToleranceConfig = DEFAULT_CONFIG, *,
                target_tol: float | None = None, grid_points: int = 64) -> np.ndarray:
    """Truncated chronological series ``I + sum_{k<=kmax}`` of simplex integrals.

    Computed by Picard iteration ``G_{j+1}(s) = I + int_0^s G_j(u) X(u) du``
    on Chebyshev points of ``[0, t]`` with spectral cumulative integration,
    so iterate ``j`` is the order-``j`` truncation (exact for polynomial
    fields of modest degree).  With ``target_tol`` the iteration stops as soon
    as :func:`series_error_bound` drops below it, and raises
    SeriesNotConvergedError if ``kmax`` is reached first.
    """
    if kmax is None:
        kmax = cfg.series_kmax
    if kmax < 1:
        raise InputError("kmax must be >= 1")
    F = _as_field(X)
    x, S = _cheb(grid_points)
    s = 0.5 * t * (x + 1.0)
    Xs = F.matrices(s)
    n = Xs.shape[1]
    ident = np.broadcast_to(np.eye(n, dtype=np.complex128), Xs.shape)
    if target_tol is not None:
        m = _norm_integral(F, t, cfg)
    G = ident.copy()
    for k in range(1, kmax + 1):
        G = ident + (0.5 * t) * np.einsum("ij,jab->iab", S, G @ Xs)
        if target_tol is not None and tail_of_exp(m, k) <= target_tol:
            return G[-1].copy()
    if target_tol is not None:
        raise SeriesNotConvergedError(
            f"series bound still above {target_tol:g} after {kmax} terms")
    return G[-1].copy()


# -- identities built on flows ---------------------------------------------

def _mat(X: Any) -> np.ndarray:
    return as_matrix(X.matrix if isinstance(X, AlgebraElement) else X)


def variations_rhs(X: Any, Y: Any, t: float,
                   cfg: ToleranceConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Right side of the variations formula at time ``t``.

    Returns ``Psi(t) Phi(t)`` where ``Phi`` is the flow of ``X`` and ``Psi``
    the flow of ``s -> Phi(s) Y(s) Phi(s)^-1``.  ``Phi``, ``Phi^-1`` and
    ``Psi`` are integrated together as one coupled linear system.
    """
    FX, FY = _as_field(X), _as_field(Y)
    n = FX.matrix(0.0).shape[0]
    eye = np.eye(n, dtype=np.complex128)
    y0 = np.array([eye, eye, eye])

    def rhs(y, c):
        x, yy = c
        phi, phi_inv, psi = y
        return np.array([phi @ x, -(x @ phi_inv), psi @ (phi @ yy @ phi_inv)])

    (yt,), _, _, _ = _integrate(rhs, [FX, FY], y0, [float(t)], cfg)
    return yt[2] @ yt[0]


def _conjugation_field(M: np.ndarray, sign: float, Y: np.ndarray) -> TimeDependentField:
    """``s -> e^{sign s M} Y e^{-sign s M}``, with a norm bound for step selection.

    The inverse is the adjoint when ``M`` is anti-Hermitian.
    """
    skew = np.allclose(M, -M.conj().T, rtol=0.0, atol=1e-13)
    ny, nm = float(np.linalg.norm(Y)), float(np.linalg.norm(M))

    def many(ts):
        E = mat_exp((sign * np.asarray(ts, dtype=float))[:, None, None] * M)
        Einv = np.swapaxes(E.conj(), -1, -2) if skew else np.linalg.inv(E)
        return E @ Y @ Einv

    # ||e^{sM} Y e^{-sM}|| <= e^{2|s| ||M||} ||Y||, with equality to ||Y|| when unitary
    bound = (lambda s: ny) if skew else (lambda s: ny * math.exp(2.0 * abs(s) * nm))
    return TimeDependentField(lambda s: many([s])[0], "smooth", bound, many)


def conjugated_flow(X: Any, Y: Any, t: float,
                    cfg: ToleranceConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Flow of the constant-pair field ``s -> e^{sX} Y e^{-sX}`` at time ``t``."""
    return flow_ode(_conjugation_field(_mat(X), 1.0, _mat(Y)), t, cfg).final


def bch_product(Z: Any, W: Any, cfg: ToleranceConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Flow over ``[0, 1]`` of ``s -> e^{-sW} (Z + W) e^{sW}``; equals ``e^Z e^W``."""
    MZ, MW = _mat(Z), _mat(W)
    return flow_ode(_conjugation_field(MW, -1.0, MZ + MW), 1.0, cfg).final


def d_exp(X: Any, Y: Any, cfg: ToleranceConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Differential of ``exp`` at ``X`` applied to ``Y``, as a tangent at ``e^X``.

    ``(int_0^1 e^{sX} Y e^{-sX} ds) e^X``, with composite Gauss-Legendre.
    """
    MX, MY = _mat(X), _mat(Y)
    integrand = _conjugation_field(MX, 1.0, MY).matrices
    return quad_integrate(integrand, 0.0, 1.0, cfg.quad_nodes, vectorized=True) @ mat_exp(MX)
