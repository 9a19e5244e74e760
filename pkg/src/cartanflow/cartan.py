"""Cartan exponential, sub-Riemannian geodesics through the identity, and the
Riemannian comparison geodesics.

For ``X = H + T`` (``T`` in the Cartan subalgebra, ``H`` orthogonal to it) the
Cartan exponential is ``hexp(X) = e^X e^{-T}``; the curve ``t -> hexp(tX)``
has body tangent ``e^{tT} H e^{-tT}``, constant speed ``||H||`` and constant
curvature ``||H^2 - [H, T]|| / ||H||^2``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateGeodesicError, InputError
from .flows import FlowTrace, TimeDependentField, flow_ode
from .kernel import (DEFAULT_CONFIG, ToleranceConfig, ext_norm, mat_exp,
                     matrix_to_json)
from .lie import AlgebraElement, cartan_split, norm

CURVATURE_FD_STEP = 1e-4


@dataclass
class GeodesicTrace:
    times: np.ndarray
    elements: list
    body_tangents: list
    speeds: list
    curvature: Optional[float]
    horizontality_defects: list
    curvature_fd: list = field(default_factory=list)

    @property
    def speed_spread(self) -> float:
        """Relative spread ``(max - min) / max`` of the sampled speeds."""
        hi, lo = max(self.speeds), min(self.speeds)
        return 0.0 if hi == 0.0 else (hi - lo) / hi

    def to_csv(self) -> str:
        n = self.elements[0].shape[0]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "speed", "horizontality_defect", "curvature_fd_estimate"]
        for i in range(n):
            for j in range(n):
                header += [f"re_{i}{j}", f"im_{i}{j}"]
        w.writerow(header)
        fd = self.curvature_fd or [None] * len(self.times)
        for t, sp, hd, k, g in zip(self.times, self.speeds, self.horizontality_defects, fd, self.elements):
            row = [repr(float(t)), repr(float(sp)), repr(float(hd)), "" if k is None else repr(float(k))]
            for v in g.reshape(-1):
                row += [repr(float(v.real)), repr(float(v.imag))]
            w.writerow(row)
        return buf.getvalue()

    def to_json(self) -> dict:
        fd = self.curvature_fd or [None] * len(self.times)
        return {
            "times": [float(t) for t in self.times],
            "speeds": [float(s) for s in self.speeds],
            "horizontality_defects": [float(d) for d in self.horizontality_defects],
            "curvature": None if self.curvature is None else float(self.curvature),
            "curvature_fd_estimates": [None if k is None else float(k) for k in fd],
            "elements": [matrix_to_json(g) for g in self.elements],
            "body_tangents": [matrix_to_json(b.matrix) for b in self.body_tangents],
        }


def _check_grid(t_grid: Sequence[float]) -> np.ndarray:
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or ts[0] != 0.0:
        raise InputError("geodesic grids must start at t = 0")
    return ts


def hexp(X: AlgebraElement) -> np.ndarray:
    """Cartan exponential ``e^X e^{-T}``."""
    T = cartan_split(X).T
    return mat_exp(X.matrix) @ mat_exp(-T.matrix)


def hexp_flow(X: AlgebraElement, t_end: float = 1.0,
              cfg: ToleranceConfig = DEFAULT_CONFIG, *,
              samples: int | None = None,
              times: Sequence[float] | None = None) -> FlowTrace:
    """Cartan exponential flow as the chronological exponential of ``s -> e^{sT} H e^{-sT}``."""
    sp = cartan_split(X)
    H, T = sp.H.matrix, sp.T.matrix
    nrm = float(np.linalg.norm(H))

    def many(ts):
        E = mat_exp(np.asarray(ts, dtype=float)[:, None, None] * T)
        return E @ H @ np.swapaxes(E.conj(), -1, -2)

    field_ = TimeDependentField(lambda s: many([s])[0], "smooth", lambda s: nrm, many)
    return flow_ode(field_, t_end, cfg, samples=samples, times=times)


def geodesic_speed(X: AlgebraElement) -> float:
    return norm(cartan_split(X).H)


def _curvature(H: np.ndarray, T: np.ndarray, speed: float, abs_tol: float) -> float:
    if speed <= abs_tol:
        raise DegenerateGeodesicError("curvature is undefined: horizontal part is zero")
    return ext_norm(H @ H - (H @ T - T @ H)) / speed**2


def geodesic_curvature(X: AlgebraElement, cfg: ToleranceConfig = DEFAULT_CONFIG) -> float:
    """``||H^2 - [H, T]|| / ||H||^2``; the numerator uses :func:`ext_norm`.

    Raises DegenerateGeodesicError when ``||H|| <= cfg.abs_tol``.
    """
    sp = cartan_split(X)
    return _curvature(sp.H.matrix, sp.T.matrix, norm(sp.H), cfg.abs_tol)


def riemannian_curvature(X: AlgebraElement, cfg: ToleranceConfig = DEFAULT_CONFIG) -> float:
    """``||X^2|| / ||X||^2`` for the one-parameter subgroup ``e^{tX}``."""
    speed = norm(X)
    if speed <= cfg.abs_tol:
        raise DegenerateGeodesicError("curvature is undefined for X = 0")
    return ext_norm(X.matrix @ X.matrix) / speed**2


def d_hexp_at_zero(X: AlgebraElement) -> AlgebraElement:
    """Differential of hexp at 0: orthogonal projection onto the horizontal subspace."""
    return cartan_split(X).H


def hexp_difference_quotient(X: AlgebraElement, h: float) -> np.ndarray:
    """``(hexp(hX) - I) / h``, which tends to the horizontal part as ``h -> 0``."""
    n = X.spec.n
    return (hexp(h * X) - np.eye(n)) / h


def _fd_curvature(position, tangent, speed: float, t: float,
                  h: float = CURVATURE_FD_STEP) -> float:
    """``||sigma(t)^-1 V'(t)|| / speed`` with ``V = sigma'/speed`` differenced centrally."""
    dV = (tangent(t + h) - tangent(t - h)) / (2.0 * h * speed)
    return ext_norm(np.linalg.solve(position(t), dV)) / speed


def geodesic_curvature_fd(X: AlgebraElement, t: float,
                          h: float = CURVATURE_FD_STEP) -> float:
    """Finite-difference curvature of ``hexp(tX)`` at ``t``.

    Differentiates the ambient unit tangent ``V(s) = sigma(s) b(s) / ||H||``
    where ``b(s) = e^{sT} H e^{-sT}``; it never evaluates the closed form.
    """
    sp = cartan_split(X)
    H, T, Xm = sp.H.matrix, sp.T.matrix, X.matrix
    speed = norm(sp.H)
    if speed == 0.0:
        raise DegenerateGeodesicError("curvature is undefined: horizontal part is zero")

    def position(s):
        return mat_exp(s * Xm) @ mat_exp(-s * T)

    def tangent(s):
        E = mat_exp(s * T)
        return position(s) @ E @ H @ np.linalg.inv(E)

    return _fd_curvature(position, tangent, speed, t, h)


def geodesic(X: AlgebraElement, t_grid: Sequence[float],
             cfg: ToleranceConfig = DEFAULT_CONFIG, *, fd_curvature: bool = True) -> GeodesicTrace:
    """Sample ``sigma(t) = e^{tX} e^{-tT}`` with its body tangents and diagnostics.

    Degenerate inputs (``H = 0``) give a constant trace at ``I`` with speed 0
    and ``curvature = None``.
    """
    ts = _check_grid(t_grid)
    spec = X.spec
    sp = cartan_split(X)
    H, T = sp.H, sp.T
    speed = norm(H)
    degenerate = speed <= cfg.abs_tol
    curvature = None if degenerate else _curvature(H.matrix, T.matrix, speed, cfg.abs_tol)

    elements, tangents, speeds, hdefects, fd = [], [], [], [], []
    for t in ts:
        E = mat_exp(t * T.matrix)
        Einv = mat_exp(-t * T.matrix)
        elements.append(mat_exp(t * X.matrix) @ Einv)
        b = spec.element(E @ H.matrix @ Einv)
        tangents.append(b)
        speeds.append(norm(b))
        hdefects.append(norm(cartan_split(b).T))
        fd.append(None if degenerate or not fd_curvature
                  else geodesic_curvature_fd(X, float(t)))
    return GeodesicTrace(times=ts, elements=elements, body_tangents=tangents,
                         speeds=speeds, curvature=curvature,
                         horizontality_defects=hdefects, curvature_fd=fd)


def riemannian_geodesic(X: AlgebraElement, t_grid: Sequence[float],
                        cfg: ToleranceConfig = DEFAULT_CONFIG, *,
                        fd_curvature: bool = True) -> GeodesicTrace:
    """Sample the one-parameter subgroup ``e^{tX}``; body tangent is ``X`` throughout."""
    ts = _check_grid(t_grid)
    Xm = X.matrix
    speed = norm(X)
    degenerate = speed <= cfg.abs_tol
    curvature = None if degenerate else riemannian_curvature(X, cfg)
    tdefect = norm(cartan_split(X).T)

    def position(s):
        return mat_exp(s * Xm)

    def tangent(s):
        return position(s) @ Xm

    elements = [position(t) for t in ts]
    fd = [None if degenerate or not fd_curvature
          else _fd_curvature(position, tangent, speed, float(t)) for t in ts]
    return GeodesicTrace(times=ts, elements=elements, body_tangents=[X] * len(ts),
                         speeds=[speed] * len(ts), curvature=curvature,
                         horizontality_defects=[tdefect] * len(ts), curvature_fd=fd)
