"""Structure identities of the three-dimensional Newman-Penrose formalism,
evaluated as numerical residuals.

For a smooth frame field {T, m, mbar} built around a unit congruence the
covariant-derivative and Lie-bracket tables, the Ricci curvature
relations, the four structure equations S1..S4 (S4 is a stacked pair,
labelled S4a and S4b here) and the two differential Bianchi identities
all hold identically.  This module evaluates |LHS - RHS| for each of
them at a point: derivative-free identities come out at rounding level,
while the S/Bianchi equations differentiate spin-coefficient and Ricci
component fields by Richardson-extrapolated central differences.

Several terms flip sign between metric signatures; :data:`LORENTZIAN`
and :data:`RIEMANNIAN` hold the two sign sets and the right one is
picked from the chart unless overridden.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional

import numpy as np

from . import geometry
from .frames import Triad, complete_frame, covariant_derivative, frame_inner, kinematics, spin_coefficients
from .geometry import Chart, OutOfDomainError

__all__ = [
    "SignConvention",
    "LORENTZIAN",
    "RIEMANNIAN",
    "signs_for",
    "PreconditionError",
    "ResidualReport",
    "directional_derivative",
    "np_residuals",
    "structure_residuals",
    "full_residuals",
    "killing_residual",
    "bochner_check",
    "ricci_from_frame",
    "reports_to_json",
    "reports_to_csv_summary",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-5
_SQRT2 = math.sqrt(2.0)


class PreconditionError(ValueError):
    """A stated hypothesis of a check failed (reported, never ignored)."""


@dataclass(frozen=True)
class SignConvention:
    """Signature-dependent signs of the structure identities.

    Each field multiplies the term it is named after; the Riemannian
    convention is the Lorentzian one with every entry flipped.
    """

    name: str
    s1_kappa2: float      # |kappa|^2 in S1
    s2_kappa2: float      # kappa^2 in S2
    s2_ric: float         # Ric(m,m) in S2
    s3_rhokappa: float    # (rhobar-rho)kappa in S3
    s4a_eps: float        # epsilon inside kappa(. - rhobar) in S4a
    s4b_sigma2: float     # |sigma|^2 in S4b
    s4b_rho2: float       # |rho|^2 in S4b
    s4b_rhoeps: float     # (rho-rhobar)epsilon in S4b
    s4b_ric_tt: float     # (1/2)Ric(T,T) in S4b
    cov_tm_kappa: float   # kappa T in nabla_T m
    cov_mm_sigma: float   # sigma T in nabla_m m
    cov_mmbar_rho: float  # rhobar T in nabla_m mbar
    ric_trace_tt: float   # R(T,.,.,T) in the frame trace for Ric
    ric_mm: float         # R(T,m,T,m) in the Ric(m,m) relation
    ric_mmbar_tt: float   # (1/2)Ric(T,T) in the Ric(m,mbar) relation
    bid_lhs_mbar: float   # mbar(Ric(m,m)) on the first Bianchi LHS
    bid_kappa_tt: float   # Ric(T,T) inside -kappa(...) on its RHS
    bid_beta: float       # 2 betabar inside -(kappabar + . )Ric(m,m)
    bid2_lhs_tt: float    # (1/2)Ric(T,T) inside the T(...) on the second LHS
    bid2_rho: float       # (rho+rhobar)(...) on the second RHS
    bid2_mmbar: float     # Ric(m,mbar) inside that factor
    bid2_kappa: float     # 2 kappabar inside -( . + betabar)Ric(T,m)


LORENTZIAN = SignConvention(
    name="lorentzian",
    s1_kappa2=-1.0,
    s2_kappa2=-1.0,
    s2_ric=-1.0,
    s3_rhokappa=-1.0,
    s4a_eps=-1.0,
    s4b_sigma2=-1.0,
    s4b_rho2=+1.0,
    s4b_rhoeps=-1.0,
    s4b_ric_tt=-1.0,
    cov_tm_kappa=-1.0,
    cov_mm_sigma=-1.0,
    cov_mmbar_rho=-1.0,
    ric_trace_tt=-1.0,
    ric_mm=+1.0,
    ric_mmbar_tt=-1.0,
    bid_lhs_mbar=-1.0,
    bid_kappa_tt=+1.0,
    bid_beta=-1.0,
    bid2_lhs_tt=+1.0,
    bid2_rho=-1.0,
    bid2_mmbar=+1.0,
    bid2_kappa=-1.0,
)

RIEMANNIAN = SignConvention(
    name="riemannian",
    **{
        k: -v
        for k, v in LORENTZIAN.__dict__.items()
        if k != "name"
    },
)


def signs_for(chart: Chart) -> SignConvention:
    return LORENTZIAN if chart.signature == geometry.LORENTZIAN else RIEMANNIAN


@dataclass
class ResidualReport:
    """Named residual magnitudes at one point, with pass/fail bookkeeping."""

    point: np.ndarray
    angle: float
    residuals: Dict[str, float] = field(default_factory=dict)
    fd_errors: Dict[str, float] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def passes(self) -> Dict[str, bool]:
        return {k: v <= self.tolerances.get(k, DEFAULT_TOL) for k, v in self.residuals.items()}

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())

    def merged_with(self, other: "ResidualReport") -> "ResidualReport":
        out = ResidualReport(point=self.point, angle=self.angle)
        out.residuals = {**self.residuals, **other.residuals}
        out.fd_errors = {**self.fd_errors, **other.fd_errors}
        out.tolerances = {**self.tolerances, **other.tolerances}
        return out


def default_fd_step(chart: Chart) -> float:
    return 1e-3 * geometry.min_extent(chart)


def directional_derivative(
    chart: Chart,
    fieldfn: Callable[[np.ndarray], complex],
    point,
    direction,
    h: Optional[float] = None,
):
    """Derivative of a scalar field along a (constant-component) direction.

    Central differences at steps h and h/2 with one Richardson
    extrapolation; returns ``(value, error_estimate)``.
    """
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if h is None:
        h = default_fd_step(chart)
    for s in (h, -h, h / 2.0, -h / 2.0):
        if not geometry.in_domain(chart, point + s * direction):
            raise OutOfDomainError("finite-difference stencil leaves the domain box")
    d1 = (fieldfn(point + h * direction) - fieldfn(point - h * direction)) / (2.0 * h)
    d2 = (fieldfn(point + 0.5 * h * direction) - fieldfn(point - 0.5 * h * direction)) / h
    value = (4.0 * d2 - d1) / 3.0
    return value, abs(d2 - d1) / 3.0


# -- pointwise frame/curvature bundle ----------------------------------------


@dataclass
class _Bundle:
    triad: Triad
    mv: geometry.MetricValue
    curv: geometry.CurvatureValue
    spin: object
    ric: Dict[str, complex]  # frame components of the Ricci tensor


_FIELD_NAMES = ("kappa", "rho", "sigma", "epsilon", "beta", "ric_tt", "ric_tm", "ric_mm", "ric_mmbar")


def _bundle(chart: Chart, point, tname: str, angle: float, pivots=None) -> _Bundle:
    triad = complete_frame(chart, point, tname, angle, pivots=pivots)
    mv = geometry.metric_at(chart, point)
    curv = geometry.curvature_at(chart, point, mv=mv)
    spin = spin_coefficients(chart, triad, mv=mv)
    m = triad.m
    ric = curv.ricci
    ricf = {
        "ric_tt": complex(np.einsum("a,ab,b->", triad.t, ric, triad.t)),
        "ric_tm": complex(np.einsum("a,ab,b->", triad.t, ric, m)),
        "ric_mm": complex(np.einsum("a,ab,b->", m, ric, m)),
        "ric_mmbar": complex(np.einsum("a,ab,b->", m, ric, np.conj(m))),
    }
    return _Bundle(triad=triad, mv=mv, curv=curv, spin=spin, ric=ricf)


def _bundle_values(b: _Bundle) -> Dict[str, complex]:
    s = b.spin
    return {
        "kappa": s.kappa,
        "rho": s.rho,
        "sigma": s.sigma,
        "epsilon": s.epsilon,
        "beta": s.beta,
        **b.ric,
    }


class _Derivatives:
    """T-, m- and mbar-derivatives of the bundled scalar fields at a point,
    assembled from one shared set of finite-difference stencil evaluations."""

    def __init__(self, chart, tname, point, angle, pivots, h):
        self.h = h
        base = _bundle(chart, point, tname, angle, pivots)
        self.base = base
        self.values = _bundle_values(base)
        dirs = {"T": base.triad.t, "X": base.triad.x, "Y": base.triad.y}
        point = np.asarray(point, dtype=float)
        for dvec in dirs.values():
            for s in (h, -h, h / 2.0, -h / 2.0):
                if not geometry.in_domain(chart, point + s * dvec):
                    raise OutOfDomainError("finite-difference stencil leaves the domain box")
        self.deriv: Dict[str, Dict[str, complex]] = {}
        self.err: Dict[str, Dict[str, float]] = {}
        for dname, dvec in dirs.items():
            evals = {}
            for s in (h, -h, h / 2.0, -h / 2.0):
                evals[s] = _bundle_values(
                    _bundle(chart, point + s * dvec, tname, angle, base.triad.pivots)
                )
            dd, ee = {}, {}
            for fname in _FIELD_NAMES:
                d1 = (evals[h][fname] - evals[-h][fname]) / (2.0 * h)
                d2 = (evals[h / 2.0][fname] - evals[-h / 2.0][fname]) / h
                dd[fname] = (4.0 * d2 - d1) / 3.0
                ee[fname] = abs(d2 - d1) / 3.0
            self.deriv[dname] = dd
            self.err[dname] = ee

    def along(self, direction: str, fname: str, conjugate: bool = False) -> complex:
        """Derivative of a field (or its conjugate) along T, m or mbar."""
        if direction == "T":
            x = self.deriv["T"][fname]
            return np.conj(x) if conjugate else x
        dx, dy = self.deriv["X"][fname], self.deriv["Y"][fname]
        if conjugate:
            dx, dy = np.conj(dx), np.conj(dy)
        if direction == "m":
            return (dx - 1j * dy) / _SQRT2
        if direction == "mbar":
            return (dx + 1j * dy) / _SQRT2
        raise ValueError(direction)

    def err_along(self, direction: str, fname: str) -> float:
        if direction == "T":
            return self.err["T"][fname]
        return (self.err["X"][fname] + self.err["Y"][fname]) / _SQRT2


def np_residuals(
    chart: Chart,
    tname: str,
    point,
    angle: float = 0.0,
    signs: Optional[SignConvention] = None,
    h: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> ResidualReport:
    """Residuals of the structure equations S1, S2, S3, S4a, S4b and of the
    two differential Bianchi identities at a point."""
    sg = signs or signs_for(chart)
    if h is None:
        h = default_fd_step(chart)
    D = _Derivatives(chart, tname, point, angle, None, h)
    v = D.values
    kap, rho, sig, eps, bet = (v[k] for k in ("kappa", "rho", "sigma", "epsilon", "beta"))
    rtt, rtm, rmm, rmmb = (v[k] for k in ("ric_tt", "ric_tm", "ric_mm", "ric_mmbar"))
    rtmb = np.conj(rtm)
    rmbmb = np.conj(rmm)

    res: Dict[str, float] = {}
    err: Dict[str, float] = {}

    lhs = D.along("T", "rho") - D.along("mbar", "kappa")
    rhs = sg.s1_kappa2 * abs(kap) ** 2 + abs(sig) ** 2 + rho**2 + kap * np.conj(bet) + 0.5 * rtt
    res["S1"] = abs(lhs - rhs)
    err["S1"] = D.err_along("T", "rho") + D.err_along("mbar", "kappa")

    lhs = D.along("T", "sigma") - D.along("m", "kappa")
    rhs = sg.s2_kappa2 * kap**2 + 2.0 * sig * eps + sig * (rho + np.conj(rho)) - kap * bet + sg.s2_ric * rmm
    res["S2"] = abs(lhs - rhs)
    err["S2"] = D.err_along("T", "sigma") + D.err_along("m", "kappa")

    lhs = D.along("m", "rho") - D.along("mbar", "sigma")
    rhs = 2.0 * sig * np.conj(bet) + sg.s3_rhokappa * (np.conj(rho) - rho) * kap + rtm
    res["S3"] = abs(lhs - rhs)
    err["S3"] = D.err_along("m", "rho") + D.err_along("mbar", "sigma")

    lhs = D.along("T", "beta") - D.along("m", "epsilon")
    rhs = (
        sig * (np.conj(kap) - np.conj(bet))
        + kap * (sg.s4a_eps * eps - np.conj(rho))
        + bet * (eps + np.conj(rho))
        - rtm
    )
    res["S4a"] = abs(lhs - rhs)
    err["S4a"] = D.err_along("T", "beta") + D.err_along("m", "epsilon")

    lhs = D.along("m", "beta", conjugate=True) + D.along("mbar", "beta")
    rhs = (
        sg.s4b_sigma2 * abs(sig) ** 2
        + sg.s4b_rho2 * abs(rho) ** 2
        - 2.0 * abs(bet) ** 2
        + sg.s4b_rhoeps * (rho - np.conj(rho)) * eps
        - rmmb
        + sg.s4b_ric_tt * 0.5 * rtt
    )
    res["S4b"] = abs(lhs - rhs)
    err["S4b"] = 2.0 * D.err_along("m", "beta")

    lhs = (
        D.along("T", "ric_tm")
        - 0.5 * D.along("m", "ric_tt")
        + sg.bid_lhs_mbar * D.along("mbar", "ric_mm")
    )
    rhs = (
        -kap * (sg.bid_kappa_tt * rtt + rmmb)
        + (eps + 2.0 * rho + np.conj(rho)) * rtm
        + sig * rtmb
        - (np.conj(kap) + sg.bid_beta * 2.0 * np.conj(bet)) * rmm
    )
    res["bid"] = abs(lhs - rhs)
    err["bid"] = (
        D.err_along("T", "ric_tm")
        + 0.5 * D.err_along("m", "ric_tt")
        + D.err_along("mbar", "ric_mm")
    )

    lhs = (
        D.along("m", "ric_tm", conjugate=True)
        + D.along("mbar", "ric_tm")
        - D.along("T", "ric_mmbar")
        - sg.bid2_lhs_tt * 0.5 * D.along("T", "ric_tt")
    )
    rhs = (
        sg.bid2_rho * (rho + np.conj(rho)) * (rtt + sg.bid2_mmbar * rmmb)
        - np.conj(sig) * rmm
        - sig * rmbmb
        - (sg.bid2_kappa * 2.0 * np.conj(kap) + np.conj(bet)) * rtm
        - (sg.bid2_kappa * 2.0 * kap + bet) * rtmb
    )
    res["bid2"] = abs(lhs - rhs)
    err["bid2"] = (
        2.0 * D.err_along("m", "ric_tm")
        + D.err_along("T", "ric_mmbar")
        + 0.5 * D.err_along("T", "ric_tt")
    )

    report = ResidualReport(point=np.asarray(point, dtype=float), angle=float(angle))
    report.residuals = res
    report.fd_errors = err
    report.tolerances = {k: tol for k in res}
    return report


def structure_residuals(
    chart: Chart,
    tname: str,
    point,
    angle: float = 0.0,
    signs: Optional[SignConvention] = None,
    tol: float = DEFAULT_TOL,
) -> ResidualReport:
    """Residuals of the pointwise (derivative-free) structure identities:
    the five covariant-derivative rows, the two Lie brackets, and the four
    Ricci curvature relations."""
    sg = signs or signs_for(chart)
    b = _bundle(chart, point, tname, angle)
    tr, mv, curv, s = b.triad, b.mv, b.curv, b.spin
    gamma = curv.gamma
    g = mv.g
    t, m = tr.t, tr.m
    mbar = np.conj(m)
    jt, jm = tr.jac_t, tr.jac_m
    jmbar = np.conj(jm)
    kap, rho, sig, eps, bet = s.kappa, s.rho, s.sigma, s.epsilon, s.beta

    def vmax(vec) -> float:
        return float(np.max(np.abs(vec)))

    res: Dict[str, float] = {}

    ctt = covariant_derivative(gamma, t, t, jt)
    res["cov_tt"] = vmax(ctt - (-np.conj(kap) * m - kap * mbar))
    cmt = covariant_derivative(gamma, m, t, jt)
    res["cov_mt"] = vmax(cmt - (-np.conj(rho) * m - sig * mbar))
    ctm = covariant_derivative(gamma, t, m, jm)
    res["cov_tm"] = vmax(ctm - (sg.cov_tm_kappa * kap * t + eps * m))
    cmm = covariant_derivative(gamma, m, m, jm)
    res["cov_mm"] = vmax(cmm - (sg.cov_mm_sigma * sig * t + bet * m))
    cmmb = covariant_derivative(gamma, m, mbar, jmbar)
    res["cov_mmbar"] = vmax(cmmb - (sg.cov_mmbar_rho * np.conj(rho) * t - bet * mbar))

    def bracket(u, ju, w, jw):
        return np.einsum("i,ki->k", u, jw) - np.einsum("i,ki->k", w, ju)

    lie_tm = bracket(t, jt, m, jm)
    res["lie_tm"] = vmax(lie_tm - (sg.cov_tm_kappa * kap * t + (eps + np.conj(rho)) * m + sig * mbar))
    lie_mmb = bracket(m, jm, mbar, jmbar)
    res["lie_mmbar"] = vmax(
        lie_mmb - (sg.cov_mmbar_rho * (np.conj(rho) - rho) * t + np.conj(bet) * m - bet * mbar)
    )

    R = curv.riemann

    def r4(a, bb, c, d):
        return complex(np.einsum("i,j,k,l,ijkl->", a, bb, c, d, R))

    rtt = b.ric["ric_tt"]
    rtm = b.ric["ric_tm"]
    rmm = b.ric["ric_mm"]
    rmmb = b.ric["ric_mmbar"]
    res["ric_mm"] = abs(rmm - sg.ric_mm * r4(t, m, t, m))
    res["ric_tt"] = abs(rtt - (-2.0) * r4(t, m, t, mbar))
    res["ric_tm"] = abs(rtm - (-1.0) * r4(t, m, m, mbar))
    res["ric_mmbar"] = abs(rmmb - (sg.ric_mmbar_tt * 0.5 * rtt - r4(mbar, m, m, mbar)))

    report = ResidualReport(point=np.asarray(point, dtype=float), angle=float(angle))
    report.residuals = res
    report.tolerances = {k: tol for k in res}
    return report


def full_residuals(
    chart: Chart,
    tname: str,
    point,
    angle: float = 0.0,
    signs: Optional[SignConvention] = None,
    h: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> ResidualReport:
    """All eighteen residuals (structure tables plus S/Bianchi equations)."""
    a = np_residuals(chart, tname, point, angle, signs=signs, h=h, tol=tol)
    b = structure_residuals(chart, tname, point, angle, signs=signs, tol=tol)
    return a.merged_with(b)


def ricci_from_frame(curv: geometry.CurvatureValue, triad: Triad, signs: SignConvention) -> np.ndarray:
    """Ricci tensor rebuilt from the frame trace of the Riemann tensor;
    must agree with the coordinate trace."""
    R = curv.riemann
    m = triad.m
    mbar = np.conj(m)

    def contract(a, b):
        return np.einsum("i,ivwj,j->vw", a, R, b)

    out = signs.ric_trace_tt * contract(triad.t, triad.t) + contract(m, mbar) + contract(mbar, m)
    return out.real


def killing_residual(chart: Chart, vname: str, point) -> float:
    """max |nabla_a V_b + nabla_b V_a| over coordinate index pairs (the
    Lie derivative of the metric along V)."""
    point = np.asarray(point, dtype=float)
    geometry._require_in_domain(chart, point)
    if vname not in chart.fields:
        raise geometry.ChartError(f"chart {chart.name!r} has no field {vname!r}")
    from . import exprlang, jets  # local import keeps module load light

    env = {c: jets.seed(point, k) for k, c in enumerate(chart.coords)}
    vj = [jets.as_jet(exprlang.evaluate(c, env)) for c in chart.fields[vname]]
    v = np.array([c.value for c in vj])
    jac = np.array([c.grad for c in vj])  # jac[k, i] = d_i V^k
    mv = geometry.metric_at(chart, point)
    gamma = geometry.christoffel(mv)
    v_low = mv.g @ v
    dv_low = np.einsum("bka,k->ab", mv.dg, v) + np.einsum("bk,ka->ab", mv.g, jac)
    nabla = dv_low - np.einsum("cab,c->ab", gamma, v_low)
    return float(np.max(np.abs(nabla + nabla.T)))


def bochner_check(
    chart: Chart,
    tname: str,
    point,
    angle: float = 0.0,
    killing_tol: float = 1e-8,
) -> float:
    """|Ric(T,T) - omega^2 / 2| for a unit Killing congruence."""
    kr = killing_residual(chart, tname, point)
    if kr > killing_tol:
        raise PreconditionError(
            f"field {tname!r} is not Killing at {np.asarray(point).tolist()} "
            f"(residual {kr:.3e} > {killing_tol:.0e})"
        )
    mv = geometry.metric_at(chart, point)
    v = geometry.field_at(chart, tname, point)
    unit = -1.0 if chart.signature == geometry.LORENTZIAN else 1.0
    if abs(float(v @ mv.g @ v) - unit) > killing_tol:
        raise PreconditionError(f"field {tname!r} is not of unit length at the point")
    triad = complete_frame(chart, point, tname, angle)
    from .frames import d_matrix

    kin = kinematics(d_matrix(chart, triad, mv=mv))
    curv = geometry.curvature_at(chart, point, mv=mv)
    ric_tt = float(triad.t @ curv.ricci @ triad.t)
    return abs(ric_tt - kin.omega**2 / 2.0)


# -- report serialization -----------------------------------------------------


def _report_obj(r: ResidualReport) -> dict:
    return {
        "point": [float(x) for x in r.point],
        "angle": float(r.angle),
        "residuals": {k: float(v) for k, v in sorted(r.residuals.items())},
        "fd_errors": {k: float(v) for k, v in sorted(r.fd_errors.items())},
        "tolerances": {k: float(v) for k, v in sorted(r.tolerances.items())},
        "pass": {k: bool(v) for k, v in sorted(r.passes.items())},
        "all_pass": r.all_pass,
    }


def reports_to_json(reports, extra: Optional[dict] = None) -> str:
    """One JSON object per point, wrapped with a summary block."""
    obj = {
        "records": [_report_obj(r) for r in reports],
        "summary": _summary(reports),
        "all_pass": all(r.all_pass for r in reports),
    }
    if extra:
        obj.update(extra)
    return json.dumps(obj, sort_keys=True, indent=2)


def _summary(reports) -> dict:
    names = sorted({k for r in reports for k in r.residuals})
    out = {}
    for n in names:
        vals = [r.residuals[n] for r in reports if n in r.residuals]
        out[n] = {"max": float(max(vals)), "mean": float(sum(vals) / len(vals))}
    return out


def reports_to_csv_summary(reports) -> str:
    lines = ["identity,max,mean"]
    for n, s in sorted(_summary(reports).items()):
        lines.append(f"{n},{s['max']!r},{s['mean']!r}")
    return "\n".join(lines) + "\n"
