"""Pointwise fit and global verdict for the generalized Einstein condition

    Ric = f g + (f - lambda) T-flat (x) T-flat

with T a unit timelike field and lambda constant.  At each point the fit
reads off lambda_p = -Ric(T,T) and f_p = (Ric(X,X) + Ric(Y,Y))/2 together
with the residual of the remaining components; the aggregate decides
between the closed-manifold trichotomy verdicts (lambda > 0 excluded,
lambda = 0 forces a metric product, lambda < 0 unobstructed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import geometry
from .frames import complete_frame, d_matrix
from .geometry import Chart

__all__ = [
    "NotUnitTimelike",
    "PointFit",
    "FitResult",
    "Verdict",
    "QuasiEinsteinNote",
    "OBSTRUCTED",
    "SPLIT_CASE",
    "NO_OBSTRUCTION",
    "HYPOTHESIS_FAILED",
    "pointwise_fit",
    "aggregate_fits",
    "verdict_from_fit",
    "classify_metric",
    "quasi_einstein_interpret",
    "reconstruction_residual",
    "fit_to_json",
]

OBSTRUCTED = "ObstructedByTheorem"
SPLIT_CASE = "SplitCase"
NO_OBSTRUCTION = "NoObstruction"
HYPOTHESIS_FAILED = "HypothesisFailed"

_UNIT_TOL = 1e-8


class NotUnitTimelike(ValueError):
    """The congruence field is not unit timelike where required."""


@dataclass(frozen=True)
class PointFit:
    point: np.ndarray
    lambda_p: float
    f_p: float
    offdiag: float


@dataclass
class FitResult:
    points: List[PointFit]
    lam: float
    lam_spread: float
    f_min: float
    f_max: float
    max_offdiag: float
    grid_shape: Optional[tuple] = None


@dataclass
class Verdict:
    kind: str  # one of the four module constants
    reason: str
    tolerances: Dict[str, float] = field(default_factory=dict)
    extras: Dict[str, float] = field(default_factory=dict)


@dataclass
class QuasiEinsteinNote:
    applies: bool
    reason: str
    mu_min: Optional[float] = None
    mu_max: Optional[float] = None
    m_min: Optional[float] = None
    m_max: Optional[float] = None
    ill_defined_points: int = 0


def pointwise_fit(chart: Chart, tname: str, point, angle: float = 0.0) -> PointFit:
    """Fit coefficients and residual of the Ricci decomposition at a point."""
    point = np.asarray(point, dtype=float)
    mv = geometry.metric_at(chart, point)
    v = geometry.field_at(chart, tname, point)
    norm = float(v @ mv.g @ v)
    if abs(norm + 1.0) > _UNIT_TOL:
        raise NotUnitTimelike(
            f"field {tname!r} has g(T,T) = {norm:.8g} at {point.tolist()} (need -1)"
        )
    triad = complete_frame(chart, point, tname, angle)
    ric = geometry.curvature_at(chart, point, mv=mv).ricci

    def rc(a, b) -> float:
        return float(a @ ric @ b)

    r_tt = rc(triad.t, triad.t)
    r_xx = rc(triad.x, triad.x)
    r_yy = rc(triad.y, triad.y)
    offdiag = max(
        abs(rc(triad.t, triad.x)),
        abs(rc(triad.t, triad.y)),
        abs(rc(triad.x, triad.y)),
        abs(r_xx - r_yy) / 2.0,
    )
    return PointFit(point=point, lambda_p=-r_tt, f_p=(r_xx + r_yy) / 2.0, offdiag=offdiag)


def aggregate_fits(fits: List[PointFit], grid_shape=None) -> FitResult:
    lams = [f.lambda_p for f in fits]
    fs = [f.f_p for f in fits]
    return FitResult(
        points=fits,
        lam=float(np.mean(lams)),
        lam_spread=float(max(lams) - min(lams)),
        f_min=float(min(fs)),
        f_max=float(max(fs)),
        max_offdiag=float(max(f.offdiag for f in fits)),
        grid_shape=grid_shape,
    )


def verdict_from_fit(
    fit: FitResult,
    closed: bool,
    lam_tol: float = 1e-6,
    f_tol: float = 1e-6,
    offdiag_tol: float = 1e-6,
    parallel_diag: Optional[float] = None,
) -> Verdict:
    """Decide the trichotomy verdict from an aggregated fit.

    The closed-manifold conclusions only apply when the caller asserts
    compactness (a single chart cannot certify it).
    """
    tols = {"lambda": lam_tol, "f": f_tol, "offdiag": offdiag_tol}
    if fit.max_offdiag > offdiag_tol:
        return Verdict(
            HYPOTHESIS_FAILED,
            f"Ricci tensor does not have the required form "
            f"(max off-form residual {fit.max_offdiag:.3e})",
            tols,
        )
    if fit.lam_spread > lam_tol:
        return Verdict(
            HYPOTHESIS_FAILED,
            f"lambda is not constant on the grid (spread {fit.lam_spread:.3e})",
            tols,
        )
    lam = fit.lam
    f_hits_zero = fit.f_min < f_tol and fit.f_max > -f_tol
    f_hits_lam = fit.f_min - lam < f_tol and fit.f_max - lam > -f_tol
    if f_hits_zero or f_hits_lam:
        which = "0" if f_hits_zero else "lambda"
        return Verdict(
            HYPOTHESIS_FAILED,
            f"f attains the excluded value {which} on the grid "
            f"(f in [{fit.f_min:.6g}, {fit.f_max:.6g}], lambda = {lam:.6g})",
            tols,
        )
    if lam > lam_tol:
        if closed:
            return Verdict(
                OBSTRUCTED,
                "lambda > 0 with f avoiding {0, lambda}: no closed Lorentzian "
                "3-manifold satisfies this, so the inputs are mutually "
                "inconsistent (numerics and the closedness claim cannot both hold)",
                tols,
                extras={"lambda": lam},
            )
        return Verdict(
            NO_OBSTRUCTION,
            "lambda > 0 but the manifold is not asserted closed; "
            "the obstruction needs compactness",
            tols,
            extras={"lambda": lam},
        )
    if lam < -lam_tol:
        return Verdict(
            NO_OBSTRUCTION,
            "lambda < 0: metrics of this type exist on closed manifolds",
            tols,
            extras={"lambda": lam},
        )
    if closed:
        extras = {"lambda": lam}
        if parallel_diag is not None:
            extras["max_d_entry"] = parallel_diag
        return Verdict(
            SPLIT_CASE,
            "lambda = 0: the manifold splits as a metric product "
            "(S^1 x N, -dt^2 + h) with T parallel",
            tols,
            extras=extras,
        )
    return Verdict(
        NO_OBSTRUCTION,
        "lambda = 0 but the manifold is not asserted closed; "
        "the splitting conclusion needs compactness",
        tols,
        extras={"lambda": lam},
    )


def classify_metric(
    chart: Chart,
    tname: str,
    grid_n: int = 7,
    closed: bool = False,
    lam_tol: float = 1e-6,
    f_tol: float = 1e-6,
    offdiag_tol: float = 1e-6,
    margin: float = 0.0,
):
    """Aggregate pointwise fits over a probe grid and return
    ``(FitResult, Verdict)``."""
    if grid_n < 2:
        raise ValueError("grid resolution must be at least 2 per axis")
    pts = geometry.grid_points(chart, grid_n, margin=margin)
    fits = []
    try:
        for p in pts:
            fits.append(pointwise_fit(chart, tname, p))
    except NotUnitTimelike as e:
        fit = aggregate_fits(fits or [PointFit(pts[0], float("nan"), float("nan"), float("inf"))])
        return fit, Verdict(HYPOTHESIS_FAILED, str(e), {"unit": _UNIT_TOL})
    fit = aggregate_fits(fits, grid_shape=(grid_n, grid_n, grid_n))
    parallel_diag = None
    if abs(fit.lam) <= lam_tol:
        # lambda = 0 candidate: report how close T is to parallel
        dmax = 0.0
        for p in pts:
            triad = complete_frame(chart, p, tname)
            dmax = max(dmax, float(np.max(np.abs(d_matrix(chart, triad)))))
        parallel_diag = dmax
    verdict = verdict_from_fit(
        fit,
        closed,
        lam_tol=lam_tol,
        f_tol=f_tol,
        offdiag_tol=offdiag_tol,
        parallel_diag=parallel_diag,
    )
    return fit, verdict


def quasi_einstein_interpret(fit: FitResult, killing_max: float) -> QuasiEinsteinNote:
    """Reading of the fit as a quasi-Einstein structure with X = T.

    When T is Killing the decomposition matches
    Ric = mu g - (1/2) L_X g + (1/m) X-flat (x) X-flat with mu = f and
    1/m = f - lambda pointwise; m is flagged ill-defined where f ~ lambda.
    """
    if killing_max > _UNIT_TOL:
        return QuasiEinsteinNote(
            applies=False,
            reason=f"T is not Killing (residual {killing_max:.3e}); note suppressed",
        )
    ms = []
    ill = 0
    for p in fit.points:
        inv_m = p.f_p - p.lambda_p
        if abs(inv_m) <= 1e-10:
            ill += 1
        else:
            ms.append(1.0 / inv_m)
    return QuasiEinsteinNote(
        applies=True,
        reason="unit timelike Killing T: quasi-Einstein reading with mu = f, m = 1/(f - lambda)",
        mu_min=fit.f_min,
        mu_max=fit.f_max,
        m_min=min(ms) if ms else None,
        m_max=max(ms) if ms else None,
        ill_defined_points=ill,
    )


def reconstruction_residual(chart: Chart, tname: str, point, angle: float = 0.0) -> float:
    """max frame component of Ric - (f g + (f - lambda) T-flat (x) T-flat)
    with the pointwise-fitted coefficients."""
    fit = pointwise_fit(chart, tname, point, angle=angle)
    mv = geometry.metric_at(chart, point)
    ric = geometry.curvature_at(chart, point, mv=mv).ricci
    triad = complete_frame(chart, point, tname, angle)
    tb = mv.g @ triad.t
    model = fit.f_p * mv.g + (fit.f_p - fit.lambda_p) * np.outer(tb, tb)
    diff = ric - model
    frame = [triad.t, triad.x, triad.y]
    return max(abs(float(a @ diff @ b)) for a in frame for b in frame)


def fit_to_json(fit: FitResult, verdict: Verdict, extra: Optional[dict] = None) -> str:
    obj = {
        "points": [
            {
                "point": [float(x) for x in p.point],
                "lambda": float(p.lambda_p),
                "f": float(p.f_p),
                "offdiag": float(p.offdiag),
            }
            for p in fit.points
        ],
        "aggregate": {
            "lambda": float(fit.lam),
            "lambda_spread": float(fit.lam_spread),
            "f_min": float(fit.f_min),
            "f_max": float(fit.f_max),
            "max_offdiag": float(fit.max_offdiag),
            "grid_shape": list(fit.grid_shape) if fit.grid_shape else None,
        },
        "verdict": {
            "kind": verdict.kind,
            "reason": verdict.reason,
            "tolerances": {k: float(v) for k, v in sorted(verdict.tolerances.items())},
            "extras": {k: float(v) for k, v in sorted(verdict.extras.items())},
        },
    }
    if extra:
        obj.update(extra)
    return json.dumps(obj, sort_keys=True, indent=2)
