"""Orthonormal and complex triads adapted to a congruence.

Given a chart and a unit (timelike, or unit spacelike on a Riemannian
chart) field T, this module completes T to an orthonormal triad
{T, X, Y}, forms the complex pair m = (X - iY)/sqrt(2), and computes the
normal-bundle endomorphism v -> nabla_v T, its kinematic scalars
(divergence, twist, shear), and the five spin coefficients

    kappa   = -<nabla_T T, m>
    rho     = -<nabla_mbar T, m>
    sigma   = -<nabla_m T, m>
    epsilon =  <nabla_T m, mbar>
    beta    =  <nabla_m m, mbar>

where <.,.> is the complex-bilinear extension of the metric.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import exprlang, geometry, jets
from .geometry import Chart, ChartError

__all__ = [
    "FrameError",
    "Triad",
    "KinematicScalars",
    "SpinCoefficients",
    "complete_frame",
    "d_matrix",
    "kinematics",
    "spin_coefficients",
    "shear_eigenframe",
    "covariant_derivative",
    "frame_inner",
]

_DEGENERATE = 1e-10


class FrameError(ValueError):
    """Frame construction or eigenframe hypothesis failure."""


@dataclass(frozen=True)
class Triad:
    """Evaluated orthonormal frame at a point.

    ``t``, ``x``, ``y`` are coordinate components; ``jac_t[k, i] =
    d_i t^k`` and likewise for the others.  ``eps_t`` is g(T, T), -1 on
    Lorentzian charts and +1 on Riemannian ones.
    """

    point: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    jac_t: np.ndarray
    jac_x: np.ndarray
    jac_y: np.ndarray
    eps_t: float
    angle: float
    pivots: Tuple[int, int]

    @property
    def m(self) -> np.ndarray:
        return (self.x - 1j * self.y) / math.sqrt(2.0)

    @property
    def jac_m(self) -> np.ndarray:
        return (self.jac_x - 1j * self.jac_y) / math.sqrt(2.0)


@dataclass(frozen=True)
class KinematicScalars:
    """Trace, twist, shear components and determinant of the D matrix."""

    div: float
    omega: float
    sigma1: float
    sigma2: float
    detD: float


@dataclass(frozen=True)
class SpinCoefficients:
    kappa: complex
    rho: complex
    sigma: complex
    epsilon: complex
    beta: complex


def _jet_ip(g, u, v):
    acc = None
    for i in range(3):
        for j in range(3):
            term = g[i][j] * u[i] * v[j]
            acc = term if acc is None else acc + term
    return acc


def complete_frame(
    chart: Chart,
    point,
    field: str = "T",
    angle: float = 0.0,
    pivots: Optional[Tuple[int, int]] = None,
) -> Triad:
    """Complete the named field to an orthonormal triad at ``point``.

    The construction is deterministic: T is normalized to unit length,
    the coordinate basis vector whose T-orthogonal part has the largest
    norm is projected and normalized to X0, the next admissible basis
    vector is orthogonalized to Y0, and (X, Y) is (X0, Y0) rotated by
    ``angle``.  Component first partials come from evaluating the same
    construction on jets.  ``pivots`` pins the two basis-vector choices,
    which keeps the frame field smooth across finite-difference stencils.
    """
    point = np.asarray(point, dtype=float)
    geometry._require_in_domain(chart, point)
    if field not in chart.fields:
        raise ChartError(f"chart {chart.name!r} has no field {field!r}")
    env = {c: jets.seed(point, k) for k, c in enumerate(chart.coords)}
    gj = geometry._metric_jets(chart, point)
    tj = [jets.as_jet(exprlang.evaluate(c, env)) for c in chart.fields[field]]

    tt = _jet_ip(gj, tj, tj)
    if chart.signature == geometry.LORENTZIAN:
        if tt.value >= -_DEGENERATE:
            raise FrameError(
                f"field {field!r} is not timelike at {point.tolist()} (g(T,T)={tt.value:.6g})"
            )
        eps_t = -1.0
        norm = jets.sqrt(-tt)
    else:
        if tt.value <= _DEGENERATE:
            raise FrameError(f"field {field!r} vanishes at {point.tolist()}")
        eps_t = 1.0
        norm = jets.sqrt(tt)
    tn = [c / norm for c in tj]

    def project(v):
        # remove the T-component: v - eps_t * <v, T> T
        coef = _jet_ip(gj, v, tn)
        return [v[k] - eps_t * coef * tn[k] for k in range(3)]

    basis = [
        [jets.constant(1.0 if k == i else 0.0) for k in range(3)] for i in range(3)
    ]
    if pivots is None:
        projections = [project(b) for b in basis]
        norms = [_jet_ip(gj, p, p).value for p in projections]
        i0 = int(np.argmax(norms))
        if norms[i0] < _DEGENERATE:
            raise FrameError("all coordinate directions are parallel to the field")
        x0 = projections[i0]
        nx = jets.sqrt(_jet_ip(gj, x0, x0))
        x0 = [c / nx for c in x0]
        j0 = None
        for j in range(3):
            if j == i0:
                continue
            w = project(basis[j])
            coef = _jet_ip(gj, w, x0)
            w = [w[k] - coef * x0[k] for k in range(3)]
            if _jet_ip(gj, w, w).value >= _DEGENERATE:
                j0 = j
                y0 = w
                break
        if j0 is None:
            raise FrameError("could not complete the frame: degenerate projections")
        pivots = (i0, j0)
    else:
        i0, j0 = pivots
        x0 = project(basis[i0])
        n2 = _jet_ip(gj, x0, x0)
        if n2.value < _DEGENERATE:
            raise FrameError("pinned pivot became degenerate")
        nx = jets.sqrt(n2)
        x0 = [c / nx for c in x0]
        w = project(basis[j0])
        coef = _jet_ip(gj, w, x0)
        y0 = [w[k] - coef * x0[k] for k in range(3)]
        if _jet_ip(gj, y0, y0).value < _DEGENERATE:
            raise FrameError("pinned pivot became degenerate")
    ny = jets.sqrt(_jet_ip(gj, y0, y0))
    y0 = [c / ny for c in y0]

    ca, sa = math.cos(angle), math.sin(angle)
    xr = [ca * x0[k] + sa * y0[k] for k in range(3)]
    yr = [-sa * x0[k] + ca * y0[k] for k in range(3)]

    def unpack(comps):
        vec = np.array([c.value for c in comps])
        jac = np.array([c.grad for c in comps])  # jac[k, i] = d_i comp^k
        return vec, jac

    tv, tjac = unpack(tn)
    xv, xjac = unpack(xr)
    yv, yjac = unpack(yr)
    return Triad(
        point=point,
        t=tv,
        x=xv,
        y=yv,
        jac_t=tjac,
        jac_x=xjac,
        jac_y=yjac,
        eps_t=eps_t,
        angle=float(angle),
        pivots=pivots,
    )


def covariant_derivative(gamma: np.ndarray, u, w, jac_w) -> np.ndarray:
    """(nabla_u w)^k for vectors given by components and w's Jacobian."""
    return np.einsum("i,ki->k", u, jac_w) + np.einsum("i,kij,j->k", u, gamma, w)


def frame_inner(g: np.ndarray, u, v):
    """Complex-bilinear metric pairing of component vectors."""
    return np.einsum("i,ij,j->", u, g, v)


def d_matrix(chart: Chart, triad: Triad, mv=None) -> np.ndarray:
    """Matrix of v -> nabla_v T on span{X, Y}:
    [[<nabla_X T, X>, <nabla_Y T, X>], [<nabla_X T, Y>, <nabla_Y T, Y>]]."""
    if mv is None:
        mv = geometry.metric_at(chart, triad.point)
    gamma = geometry.christoffel(mv)
    dxt = covariant_derivative(gamma, triad.x, triad.t, triad.jac_t)
    dyt = covariant_derivative(gamma, triad.y, triad.t, triad.jac_t)
    g = mv.g
    return np.array(
        [
            [frame_inner(g, dxt, triad.x), frame_inner(g, dyt, triad.x)],
            [frame_inner(g, dxt, triad.y), frame_inner(g, dyt, triad.y)],
        ]
    )


def kinematics(d: np.ndarray) -> KinematicScalars:
    """Divergence, twist, shear components and determinant of a D matrix."""
    d = np.asarray(d, dtype=float)
    return KinematicScalars(
        div=float(d[0, 0] + d[1, 1]),
        omega=float(d[0, 1] - d[1, 0]),
        sigma1=float((d[1, 1] - d[0, 0]) / 2.0),
        sigma2=float((d[0, 1] + d[1, 0]) / 2.0),
        detD=float(d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]),
    )


def spin_coefficients(chart: Chart, triad: Triad, mv=None) -> SpinCoefficients:
    """The five spin coefficients of the complex frame {T, m, mbar}."""
    if mv is None:
        mv = geometry.metric_at(chart, triad.point)
    gamma = geometry.christoffel(mv)
    g = mv.g
    m = triad.m
    mbar = np.conj(m)
    jac_m = triad.jac_m
    jac_mbar = np.conj(jac_m)

    ctt = covariant_derivative(gamma, triad.t, triad.t, triad.jac_t)
    cmt = covariant_derivative(gamma, m, triad.t, triad.jac_t)
    cmbt = covariant_derivative(gamma, mbar, triad.t, triad.jac_t)
    ctm = covariant_derivative(gamma, triad.t, m, jac_m)
    cmm = covariant_derivative(gamma, m, m, jac_m)

    return SpinCoefficients(
        kappa=-frame_inner(g, ctt, m),
        rho=-frame_inner(g, cmbt, m),
        sigma=-frame_inner(g, cmt, m),
        epsilon=frame_inner(g, ctm, mbar),
        beta=frame_inner(g, cmm, mbar),
    )


def shear_eigenframe(d: np.ndarray, mu: float, tol: float = 1e-8) -> float:
    """Rotation angle a (mod pi) after which the frame diagonalizes the
    shear: sigma1 -> -sqrt(mu/2) and sigma2 -> omega/2, equivalently the
    rotated X spans the +sqrt(mu/2) eigenline of D.

    Requires trace(D) ~ 0 and 2|sigma|^2 - omega^2/2 = mu > 0 (the
    condition for D to have the real eigenvalue pair +-sqrt(mu/2)).
    """
    kin = kinematics(d)
    if abs(kin.div) > tol:
        raise FrameError(f"eigenframe requires a trace-free D (div = {kin.div:.3e})")
    mu_d = 2.0 * (kin.sigma1**2 + kin.sigma2**2) - kin.omega**2 / 2.0
    if abs(mu_d - mu) > tol:
        raise FrameError(
            f"inconsistent mu: matrix gives {mu_d:.6g}, caller supplied {mu:.6g}"
        )
    if mu <= tol:
        raise FrameError(
            "D has no distinct real eigenvalues (2|sigma|^2 - omega^2/2 must be positive)"
        )
    target = complex(-math.sqrt(mu / 2.0), kin.omega / 2.0)
    current = complex(kin.sigma1, kin.sigma2)
    # rotating the frame by a rotates (sigma1, sigma2) by 2a
    a = 0.5 * (cmath.phase(target) - cmath.phase(current))
    return a % math.pi
