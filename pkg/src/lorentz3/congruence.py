"""Flow of the congruence: integral curves, the coupled evolution system
for (divergence, twist^2, shear^2, f, H), its closed-form solution
catalog, and finite-time blow-up detection for the associated Riccati
equations.

The evolved state is (theta, omega2, s, f, H) where theta is the
divergence, omega2 >= 0 the squared twist, s = |sigma|^2 >= 0 the squared
shear, f the curvature potential and H = det D - mu/2.  The system is

    theta'  = omega2/2 - 2 s - theta^2/2 + mu
    omega2' = -2 theta omega2
    s'      = -2 theta s
    f'      = -theta (f - mu)
    H'      = -theta H

with the algebraic companion theta' = 2H - theta^2 + 2 mu, which holds
whenever H = omega2/4 - s + theta^2/4 - mu/2 (an invariant manifold of
the flow, monitored during integration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import geometry
from .geometry import Chart, OutOfDomainError

__all__ = [
    "FlowState",
    "EvolutionRates",
    "Trajectory",
    "CurveResult",
    "evolution_rhs",
    "consistent_h",
    "integrate_evolution",
    "integrate_curve",
    "closed_form",
    "oracle_residual",
    "riccati_blowup",
    "flow_scalars_at",
    "sample_along_curve",
    "trajectory_to_csv",
    "BLOWUP_THRESHOLD",
    "CLOSED_FORM_KINDS",
]

BLOWUP_THRESHOLD = 1e8

CLOSED_FORM_KINDS = (
    "theta_tanh",
    "theta_const",
    "f_exp",
    "f_sech",
    "H_exp",
    "theta_rational",
    "H_quadratic",
    "f_rational",
    "H_trig",
    "f_trig",
)


@dataclass(frozen=True)
class FlowState:
    t: float
    theta: float
    omega2: float
    s: float
    f: float
    H: float

    def vector(self) -> np.ndarray:
        return np.array([self.theta, self.omega2, self.s, self.f, self.H])


@dataclass(frozen=True)
class EvolutionRates:
    theta: float
    omega2: float
    s: float
    f: float
    H: float
    theta_h1: float  # cross-check value from the det-D form of theta'


@dataclass
class Trajectory:
    states: List[FlowState]
    mu: float
    blowup: bool = False
    blowup_time: Optional[float] = None
    h_drift: float = 0.0  # max |H - (omega2/4 - s + theta^2/4 - mu/2)|


@dataclass
class CurveResult:
    samples: List[Tuple[float, np.ndarray]]
    exited: bool = False


def evolution_rhs(state: FlowState, mu: float) -> EvolutionRates:
    """Time derivatives of the flow state, plus the det-D cross-check."""
    th = state.theta
    return EvolutionRates(
        theta=state.omega2 / 2.0 - 2.0 * state.s - th * th / 2.0 + mu,
        omega2=-2.0 * th * state.omega2,
        s=-2.0 * th * state.s,
        f=-th * (state.f - mu),
        H=-th * state.H,
        theta_h1=2.0 * state.H - th * th + 2.0 * mu,
    )


def consistent_h(theta: float, omega2: float, s: float, mu: float) -> float:
    """H on the invariant manifold: det D - mu/2 expressed through the
    kinematic scalars."""
    return omega2 / 4.0 - s + theta * theta / 4.0 - mu / 2.0


def _rhs_vec(y: np.ndarray, mu: float) -> np.ndarray:
    th = y[0]
    return np.array(
        [
            y[1] / 2.0 - 2.0 * y[2] - th * th / 2.0 + mu,
            -2.0 * th * y[1],
            -2.0 * th * y[2],
            -th * (y[3] - mu),
            -th * y[4],
        ]
    )


def _rk4_step(y: np.ndarray, mu: float, dt: float) -> np.ndarray:
    k1 = _rhs_vec(y, mu)
    k2 = _rhs_vec(y + 0.5 * dt * k1, mu)
    k3 = _rhs_vec(y + 0.5 * dt * k2, mu)
    k4 = _rhs_vec(y + dt * k3, mu)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _bad(y: np.ndarray) -> bool:
    return not np.all(np.isfinite(y)) or abs(y[0]) >= BLOWUP_THRESHOLD


def integrate_evolution(state0: FlowState, mu: float, t_end: float, dt: float) -> Trajectory:
    """Fixed-step RK4 integration of the evolution system.

    Stops early with a blow-up flag once |theta| crosses the hard
    threshold; the crossing time is refined by bisecting the offending
    step.  Blow-up is a result, not an error.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    y = state0.vector()
    t = float(state0.t)
    traj = Trajectory(states=[state0], mu=mu)
    drift = abs(state0.H - consistent_h(state0.theta, state0.omega2, state0.s, mu))
    n = max(1, int(round((t_end - t) / dt)))
    for _ in range(n):
        y_new = _rk4_step(y, mu, dt)
        if _bad(y_new):
            traj.blowup = True
            traj.blowup_time = _refine_blowup(y, t, dt, lambda yy, hh: _rk4_step(yy, mu, hh), _bad)
            break
        t += dt
        y = y_new
        traj.states.append(FlowState(t, *y))
        drift = max(drift, abs(y[4] - consistent_h(y[0], y[1], y[2], mu)))
    traj.h_drift = drift
    return traj


def _refine_blowup(y_good, t_good, dt, step, bad, iters: int = 60) -> float:
    """Bisect inside the first bad step for the threshold-crossing time."""
    lo_t, lo_y = t_good, y_good
    hi_t = t_good + dt
    for _ in range(iters):
        mid = 0.5 * (lo_t + hi_t)
        span = mid - lo_t
        if span <= 0.0:
            break
        y_mid = lo_y
        ok = True
        for k in range(4):  # a few substeps keep the probe accurate
            y_mid = step(y_mid, span / 4.0)
            if bad(y_mid):
                ok = False
                break
        if ok:
            lo_t, lo_y = mid, y_mid
        else:
            hi_t = mid
    return hi_t


def integrate_curve(chart: Chart, vname: str, p0, t_end: float, dt: float) -> CurveResult:
    """Classical RK4 on x' = V(x) inside the chart's domain box.

    Starting outside the box is an error; leaving it later just stops the
    integration with ``exited=True``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    p = np.asarray(p0, dtype=float)
    geometry._require_in_domain(chart, p)
    if vname not in chart.fields:
        raise geometry.ChartError(f"chart {chart.name!r} has no field {vname!r}")

    def rhs(x):
        return geometry.field_at(chart, vname, x)

    out = CurveResult(samples=[(0.0, p.copy())])
    t = 0.0
    n = max(1, int(round(t_end / dt)))
    for _ in range(n):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * dt * k1)
        k3 = rhs(p + 0.5 * dt * k2)
        k4 = rhs(p + dt * k3)
        p_new = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not geometry.in_domain(chart, p_new):
            out.exited = True
            break
        t += dt
        p = p_new
        out.samples.append((t, p.copy()))
    return out


# -- closed-form solution catalog ---------------------------------------------


def _sqrt2mu(mu: float) -> float:
    if mu <= 0.0:
        raise ValueError("this branch requires mu > 0")
    return math.sqrt(2.0 * mu)


def _quad_u(params, t: float) -> float:
    c1, c2 = params["c1"], params["c2"]
    if c1 * c1 >= 4.0 * c2:
        raise ValueError("nonvanishing branch requires c1^2 < 4 c2")
    return t * t + c1 * t + c2


def _trig_u(params, t: float) -> float:
    mu = params["mu"]
    if mu >= 0.0:
        raise ValueError("trigonometric branch requires mu < 0")
    w = math.sqrt(2.0 * abs(mu))
    return -1.0 / mu + params["c1"] * math.sin(w * t) + params["c2"] * math.cos(w * t)


def _exp_u(params, t: float) -> float:
    r = _sqrt2mu(params["mu"])
    return -1.0 / params["mu"] + params["c1"] * math.exp(r * t) + params["c2"] * math.exp(-r * t)


def closed_form(kind: str, params: dict, t: float) -> float:
    """Value of a closed-form solution branch at time t.

    Kinds and parameters:
      theta_tanh     mu > 0, c       theta = sqrt(2mu) tanh(sqrt(2mu) t + c)
      theta_const    mu > 0, sign    theta = sign * sqrt(2mu)
      f_exp          mu > 0, f0, sign   f - mu = (f0-mu) exp(-sign sqrt(2mu) t)
      f_sech         mu > 0, f0, c   f - mu = (f0-mu) cosh(c) sech(sqrt(2mu) t + c)
      H_exp          mu > 0, c1, c2  1/H = -1/mu + c1 e^{rt} + c2 e^{-rt}
      theta_rational c1, c2          theta = (2t+c1)/(t^2+c1 t+c2), c1^2 < 4 c2
      H_quadratic    c1, c2          1/H = t^2 + c1 t + c2
      f_rational     c1, c2, c3      f = c3/(t^2+c1 t+c2)
      H_trig         mu < 0, c1, c2  1/H = -1/mu + c1 sin(wt) + c2 cos(wt)
      f_trig         mu < 0, c1, c2, c3   f = mu + c3 * H
    """
    if kind == "theta_tanh":
        r = _sqrt2mu(params["mu"])
        return r * math.tanh(r * t + params["c"])
    if kind == "theta_const":
        sign = params["sign"]
        if sign not in (-1, 1, -1.0, 1.0):
            raise ValueError("sign must be +1 or -1")
        return sign * _sqrt2mu(params["mu"])
    if kind == "f_exp":
        mu = params["mu"]
        r = _sqrt2mu(mu)
        sign = params["sign"]
        return mu + (params["f0"] - mu) * math.exp(-sign * r * t)
    if kind == "f_sech":
        mu = params["mu"]
        r = _sqrt2mu(mu)
        c = params["c"]
        amp = (params["f0"] - mu) * math.cosh(c)
        return mu + amp / math.cosh(r * t + c)
    if kind == "H_exp":
        return 1.0 / _exp_u(params, t)
    if kind == "theta_rational":
        u = _quad_u(params, t)
        return (2.0 * t + params["c1"]) / u
    if kind == "H_quadratic":
        return 1.0 / _quad_u(params, t)
    if kind == "f_rational":
        return params["c3"] / _quad_u(params, t)
    if kind == "H_trig":
        return 1.0 / _trig_u(params, t)
    if kind == "f_trig":
        return params["mu"] + params["c3"] / _trig_u(params, t)
    raise ValueError(f"unknown closed-form kind {kind!r}; choose from {CLOSED_FORM_KINDS}")


def oracle_residual(kind: str, params: dict, t: float) -> float:
    """|d/dt(closed form) - ODE right-hand side| from analytic derivatives.

    This is the anti-drift oracle: each branch formula is differentiated
    in closed form and substituted back into the equation it solves, so a
    transcription error in either side shows up as an O(1) residual.
    """
    if kind == "theta_tanh":
        mu = params["mu"]
        r = _sqrt2mu(mu)
        u = r * t + params["c"]
        th = r * math.tanh(u)
        dth = r * r / math.cosh(u) ** 2
        return abs(dth - (-th * th + 2.0 * mu))
    if kind == "theta_const":
        th = closed_form(kind, params, t)
        return abs(0.0 - (-th * th + 2.0 * params["mu"]))
    if kind == "f_exp":
        mu = params["mu"]
        th = params["sign"] * _sqrt2mu(mu)
        f = closed_form(kind, params, t)
        df = -th * (params["f0"] - mu) * math.exp(-params["sign"] * _sqrt2mu(mu) * t)
        return abs(df - (-th * (f - mu)))
    if kind == "f_sech":
        mu = params["mu"]
        r = _sqrt2mu(mu)
        u = r * t + params["c"]
        th = r * math.tanh(u)
        amp = (params["f0"] - mu) * math.cosh(params["c"])
        f = mu + amp / math.cosh(u)
        df = -amp * r * math.tanh(u) / math.cosh(u)
        return abs(df - (-th * (f - mu)))
    if kind in ("H_exp", "H_quadratic", "H_trig"):
        # second-order form: (1/H)'' = 2 + 2 mu (1/H is u below)
        if kind == "H_exp":
            mu = params["mu"]
            r = _sqrt2mu(mu)
            u = _exp_u(params, t)
            ddu = r * r * (params["c1"] * math.exp(r * t) + params["c2"] * math.exp(-r * t))
        elif kind == "H_quadratic":
            mu = 0.0
            u = _quad_u(params, t)
            ddu = 2.0
        else:
            mu = params["mu"]
            w = math.sqrt(2.0 * abs(mu))
            u = _trig_u(params, t)
            ddu = -w * w * (params["c1"] * math.sin(w * t) + params["c2"] * math.cos(w * t))
        return abs(ddu - (2.0 + 2.0 * mu * u))
    if kind == "theta_rational":
        u = _quad_u(params, t)
        du = 2.0 * t + params["c1"]
        th = du / u
        dth = 2.0 / u - th * th
        H = 1.0 / u
        return abs(dth - (2.0 * H - th * th))
    if kind == "f_rational":
        u = _quad_u(params, t)
        du = 2.0 * t + params["c1"]
        th = du / u
        f = params["c3"] / u
        df = -params["c3"] * du / (u * u)
        return abs(df - (-th * f))
    if kind == "f_trig":
        mu = params["mu"]
        w = math.sqrt(2.0 * abs(mu))
        u = _trig_u(params, t)
        du = w * (params["c1"] * math.cos(w * t) - params["c2"] * math.sin(w * t))
        th = du / u
        f = mu + params["c3"] / u
        df = -params["c3"] * du / (u * u)
        return abs(df - (-th * (f - mu)))
    raise ValueError(f"unknown closed-form kind {kind!r}; choose from {CLOSED_FORM_KINDS}")


def riccati_blowup(
    kind: str,
    coeff: float,
    theta0: float,
    horizon: float,
    dt: float = 1e-3,
) -> Optional[float]:
    """Integrate theta' = -theta^2 + 2 mu (kind ``theta_mu``) or
    theta' = -theta^2 - f (kind ``theta_f``) forward from theta0.

    Returns the finite blow-up time if |theta| crosses the threshold
    within the horizon, else None ("complete on horizon").  Blow-up is
    guaranteed for mu < 0, and for f > 0.
    """
    if kind == "theta_mu":
        c = 2.0 * coeff
    elif kind == "theta_f":
        if coeff < 0.0:
            raise ValueError("theta_f expects a nonnegative constant f")
        c = -coeff
    else:
        raise ValueError(f"unknown riccati kind {kind!r}")

    def step(th, h):
        def f(x):
            return -x * x + c

        k1 = f(th)
        k2 = f(th + 0.5 * h * k1)
        k3 = f(th + 0.5 * h * k2)
        k4 = f(th + h * k3)
        return th + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def bad(th):
        return not math.isfinite(th) or abs(th) >= BLOWUP_THRESHOLD

    th = float(theta0)
    t = 0.0
    n = max(1, int(round(horizon / dt)))
    for _ in range(n):
        th_new = step(th, dt)
        if bad(th_new):
            return _refine_blowup(th, t, dt, step, bad)
        t += dt
        th = th_new
    return None


# -- sampling the scalars of a concrete congruence -----------------------------


def flow_scalars_at(chart: Chart, tname: str, point, mu: float, angle: float = 0.0) -> FlowState:
    """(theta, omega^2, |sigma|^2, f, H) of the congruence at one point,
    with H = det D - mu/2 for the supplied constant mu."""
    from . import classify
    from .frames import complete_frame, d_matrix, kinematics

    triad = complete_frame(chart, point, tname, angle)
    mv = geometry.metric_at(chart, point)
    kin = kinematics(d_matrix(chart, triad, mv=mv))
    fit = classify.pointwise_fit(chart, tname, point, angle=angle)
    return FlowState(
        t=0.0,
        theta=kin.div,
        omega2=kin.omega**2,
        s=kin.sigma1**2 + kin.sigma2**2,
        f=fit.f_p,
        H=kin.detD - mu / 2.0,
    )


def sample_along_curve(
    chart: Chart,
    tname: str,
    p0,
    t_end: float,
    dt: float,
    mu: float,
    sample_every: int = 100,
) -> List[FlowState]:
    """Integrate the congruence's integral curve and sample the flow
    scalars every ``sample_every`` steps."""
    curve = integrate_curve(chart, tname, p0, t_end, dt)
    out = []
    for idx in range(0, len(curve.samples), sample_every):
        t, p = curve.samples[idx]
        st = flow_scalars_at(chart, tname, p, mu)
        out.append(FlowState(t=t, theta=st.theta, omega2=st.omega2, s=st.s, f=st.f, H=st.H))
    return out


def trajectory_to_csv(traj: Trajectory) -> str:
    lines = ["t,theta,omega2,s,f,H"]
    for st in traj.states:
        lines.append(f"{st.t!r},{st.theta!r},{st.omega2!r},{st.s!r},{st.f!r},{st.H!r}")
    return "\n".join(lines) + "\n"
