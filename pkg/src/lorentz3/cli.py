"""Command-line front end.

Subcommands:

    inspect    triad, D matrix, kinematics and spin coefficients at a point
    check-np   structure-identity residual suite over a probe grid
    verify-s3  golden-value curvature check of the flipped round 3-sphere
    flow       evolution-system integration (abstract or field-sampled)
    classify   generalized-Einstein fit and verdict

Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3
numerical/domain error.  Reports embed the resolved run configuration,
and a fixed seed makes the JSON output byte-identical across runs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import classify, congruence, exprlang, frames, geometry, jets, npcore

__all__ = ["main", "entry", "RunConfig"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass
class RunConfig:
    """Resolved run options, embedded in every report for provenance."""

    command: str
    chart: Optional[str] = None
    config: Optional[str] = None
    field: str = "T"
    grid: int = 7
    fd_step: Optional[float] = None
    tol: float = npcore.DEFAULT_TOL
    seed: int = 0
    out: Optional[str] = None
    format: str = "json"

    def validate(self):
        if self.grid < 2:
            raise ValueError("grid resolution must be at least 2 per axis")
        if self.tol <= 0 or (self.fd_step is not None and self.fd_step <= 0):
            raise ValueError("tolerances and steps must be positive")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--chart", help=f"catalog chart name {geometry.CATALOG_NAMES}")
    p.add_argument("--config", help="path to a chart config file")
    p.add_argument("--field", default="T", help="congruence field name (default T)")
    p.add_argument("--grid", type=int, default=7, help="probe grid resolution per axis")
    p.add_argument("--fd-step", type=float, default=None, help="finite-difference step override")
    p.add_argument("--tol", type=float, default=npcore.DEFAULT_TOL, help="pass tolerance")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for sampled angles/points")
    p.add_argument("--out", default=None, help="write the report to this path")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lorentz3", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="frame data at a point")
    _add_common(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--angle", type=float, default=0.0, help="frame rotation angle")

    p = sub.add_parser("check-np", help="structure-identity residual suite")
    _add_common(p)

    p = sub.add_parser("verify-s3", help="flipped round-sphere golden values")
    _add_common(p)

    p = sub.add_parser("flow", help="evolution system / congruence flow")
    _add_common(p)
    p.add_argument("--mu", type=float, default=None, help="constant mu of the evolution system")
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--omega20", type=float, default=0.0)
    p.add_argument("--s0", type=float, default=0.0)
    p.add_argument("--f0", type=float, default=0.0)
    p.add_argument("--h0", type=float, default=None, help="default: consistent with the state")
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--point", default=None, help="sample a chart congruence from this point")

    p = sub.add_parser("classify", help="generalized-Einstein fit and verdict")
    _add_common(p)
    p.add_argument("--closed", action="store_true", help="assert the manifold is closed")

    return ap


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        chart=getattr(args, "chart", None),
        config=getattr(args, "config", None),
        field=args.field,
        grid=args.grid,
        fd_step=args.fd_step,
        tol=args.tol,
        seed=args.seed,
        out=args.out,
        format=args.format,
    )
    cfg.validate()
    return cfg


def _load_chart(cfg: RunConfig) -> geometry.Chart:
    if cfg.chart and cfg.config:
        raise geometry.ChartError("give either --chart or --config, not both")
    if cfg.chart:
        return geometry.catalog_chart(cfg.chart)
    if cfg.config:
        return geometry.load_chart(cfg.config)
    raise geometry.ChartError("a chart is required: --chart NAME or --config PATH")


def _parse_point(text: str) -> np.ndarray:
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise geometry.ChartError(f"bad point {text!r}; expected x,y,z") from None
    if len(parts) != 3:
        raise geometry.ChartError(f"bad point {text!r}; expected three coordinates")
    return np.array(parts)


def _emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text)


# -- subcommands ---------------------------------------------------------------


def cmd_inspect(cfg: RunConfig, chart: geometry.Chart, point, angle: float = 0.0) -> int:
    triad = frames.complete_frame(chart, point, cfg.field, angle)
    mv = geometry.metric_at(chart, point)
    d = frames.d_matrix(chart, triad, mv=mv)
    kin = frames.kinematics(d)
    spin = frames.spin_coefficients(chart, triad, mv=mv)
    print(f"chart {chart.name} ({chart.signature}), point {list(point)}, angle {angle}")
    print(f"T = {triad.t.tolist()}")
    print(f"X = {triad.x.tolist()}")
    print(f"Y = {triad.y.tolist()}")
    print(f"D = [[{d[0, 0]: .6e}, {d[0, 1]: .6e}], [{d[1, 0]: .6e}, {d[1, 1]: .6e}]]")
    print(
        f"div = {kin.div:.6e}  omega = {kin.omega:.6e}  omega^2 = {kin.omega**2:.6e}  "
        f"|sigma|^2 = {kin.sigma1**2 + kin.sigma2**2:.6e}  det D = {kin.detD:.6e}"
    )
    for name in ("kappa", "rho", "sigma", "epsilon", "beta"):
        print(f"{name} = {getattr(spin, name):.6e}")
    return EXIT_OK


def run_check_np(cfg: RunConfig, chart: geometry.Chart):
    """Residual suite over the probe grid; returns (reports, all_pass)."""
    rng = np.random.default_rng(cfg.seed)
    pts = geometry.grid_points(chart, cfg.grid, margin=0.05)
    reports = []
    for p in pts:
        angle = float(rng.uniform(0.0, math.pi))
        reports.append(
            npcore.full_residuals(chart, cfg.field, p, angle, h=cfg.fd_step, tol=cfg.tol)
        )
    return reports, all(r.all_pass for r in reports)


def cmd_check_np(cfg: RunConfig, chart: geometry.Chart) -> int:
    reports, ok = run_check_np(cfg, chart)
    if cfg.format == "csv":
        _emit(cfg, npcore.reports_to_csv_summary(reports))
    else:
        _emit(cfg, npcore.reports_to_json(reports, extra={"config": asdict(cfg)}))
    if not ok:
        print(f"check-np: FAILED on chart {chart.name}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def run_verify_s3(cfg: RunConfig, chart: Optional[geometry.Chart] = None):
    """Golden-value check of the flipped round sphere; returns a dict."""
    chart = chart or geometry.catalog_chart("hopf_lorentz")
    pts = geometry.grid_points(chart, cfg.grid)
    max_dev = 0.0
    max_rtt = 0.0
    max_omega2 = 0.0
    max_rtxxt = 0.0
    max_ryxxy = 0.0
    max_rxx = 0.0
    for p in pts:
        mv = geometry.metric_at(chart, p)
        curv = geometry.curvature_at(chart, p, mv=mv)
        tvec = geometry.field_at(chart, cfg.field, p)
        tb = mv.g @ tvec
        model = 8.0 * mv.g + 10.0 * np.outer(tb, tb)
        max_dev = max(max_dev, float(np.max(np.abs(curv.ricci - model))))
        triad = frames.complete_frame(chart, p, cfg.field)
        kin = frames.kinematics(frames.d_matrix(chart, triad, mv=mv))
        r4 = curv.riemann

        def comp(a, b, c, d):
            return float(np.einsum("i,j,k,l,ijkl->", a, b, c, d, r4))

        t, x, y = triad.t, triad.x, triad.y
        max_rtt = max(max_rtt, abs(float(t @ curv.ricci @ t) - 2.0))
        max_omega2 = max(max_omega2, abs(kin.omega**2 - 4.0))
        max_rtxxt = max(max_rtxxt, abs(comp(t, x, x, t) - (-1.0)))
        max_ryxxy = max(max_ryxxy, abs(comp(y, x, x, y) - 7.0))
        max_rxx = max(max_rxx, abs(float(x @ curv.ricci @ x) - 8.0))
        max_rxx = max(max_rxx, abs(float(y @ curv.ricci @ y) - 8.0))
    return {
        "max_ricci_deviation": max_dev,
        "max_ric_tt_deviation": max_rtt,
        "max_omega2_deviation": max_omega2,
        "max_r_txxt_deviation": max_rtxxt,
        "max_r_yxxy_deviation": max_ryxxy,
        "max_ric_xx_deviation": max_rxx,
        "grid": cfg.grid,
    }


def cmd_verify_s3(cfg: RunConfig) -> int:
    res = run_verify_s3(cfg)
    print("flipped round-sphere check (Ric = 8 g + 10 Tb(x)Tb, f = 8, lambda = -2):")
    print(f"  max |Ric - model|      = {res['max_ricci_deviation']:.3e}  (tol 1e-7)")
    print(f"  max |Ric(T,T) - 2|     = {res['max_ric_tt_deviation']:.3e}  (tol 1e-8)")
    print(f"  max |omega^2 - 4|      = {res['max_omega2_deviation']:.3e}  (tol 1e-8)")
    print(f"  max |R(T,X,X,T) + 1|   = {res['max_r_txxt_deviation']:.3e}  (tol 1e-7)")
    print(f"  max |R(Y,X,X,Y) - 7|   = {res['max_r_yxxy_deviation']:.3e}  (tol 1e-7)")
    print(f"  max |Ric(X,X) - 8|     = {res['max_ric_xx_deviation']:.3e}")
    if cfg.out:
        _emit(cfg, json.dumps({**res, "config": asdict(cfg)}, sort_keys=True, indent=2))
    ok = (
        res["max_ricci_deviation"] <= 1e-7
        and res["max_ric_tt_deviation"] <= 1e-8
        and res["max_omega2_deviation"] <= 1e-8
        and res["max_r_txxt_deviation"] <= 1e-7
        and res["max_r_yxxy_deviation"] <= 1e-7
    )
    print("verify-s3:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _oracle_comparison(traj: congruence.Trajectory, mu: float, state0: congruence.FlowState):
    """Compare a trajectory against the matching closed-form branch."""
    h0 = state0.H
    if mu > 0.0 and abs(h0) <= 1e-12:
        r = math.sqrt(2.0 * mu)
        if abs(abs(state0.theta) - r) <= 1e-12:
            kind = "theta_const"
            params = {"mu": mu, "sign": 1.0 if state0.theta > 0 else -1.0}
        else:
            ratio = state0.theta / r
            if abs(ratio) >= 1.0:
                return None
            kind = "theta_tanh"
            params = {"mu": mu, "c": math.atanh(ratio)}
        sup = max(
            abs(st.theta - congruence.closed_form(kind, params, st.t)) for st in traj.states
        )
        return {"oracle": kind, "sup_error_theta": sup}
    return None


def cmd_flow(cfg: RunConfig, args) -> int:
    if args.point is not None:
        chart = _load_chart(cfg)
        p0 = _parse_point(args.point)
        mu = args.mu
        if mu is None:
            mu = -classify.pointwise_fit(chart, cfg.field, p0).lambda_p * 1.0
            mu = -mu  # lambda_p = -Ric(T,T) and mu plays the same role
        states = congruence.sample_along_curve(
            chart, cfg.field, p0, args.t_end, args.dt, mu=mu, sample_every=100
        )
        traj = congruence.Trajectory(states=states, mu=mu)
        _emit(cfg, congruence.trajectory_to_csv(traj))
        return EXIT_OK
    if args.mu is None:
        raise geometry.ChartError("flow needs --mu (abstract mode) or --point (chart mode)")
    h0 = args.h0
    if h0 is None:
        h0 = congruence.consistent_h(args.theta0, args.omega20, args.s0, args.mu)
    state0 = congruence.FlowState(0.0, args.theta0, args.omega20, args.s0, args.f0, h0)
    traj = congruence.integrate_evolution(state0, args.mu, args.t_end, args.dt)
    _emit(cfg, congruence.trajectory_to_csv(traj))
    if traj.blowup:
        print(f"flow: blow-up at t = {traj.blowup_time:.6f}", file=sys.stderr)
    cmp = _oracle_comparison(traj, args.mu, state0)
    if cmp is not None:
        print(
            f"flow: matches closed form {cmp['oracle']} "
            f"(sup |theta - oracle| = {cmp['sup_error_theta']:.3e})",
            file=sys.stderr,
        )
        if cmp["sup_error_theta"] > 1e-6:
            return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_classify(cfg: RunConfig, chart: geometry.Chart, closed: bool) -> int:
    fit, verdict = classify.classify_metric(
        chart, cfg.field, grid_n=cfg.grid, closed=closed
    )
    text = classify.fit_to_json(fit, verdict, extra={"config": asdict(cfg)})
    _emit(cfg, text)
    if cfg.out:
        # still give a human-readable line on stdout
        print(f"classify {chart.name}: {verdict.kind} ({verdict.reason})")
    return EXIT_OK


# -- entry ----------------------------------------------------------------------


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = e.code if isinstance(e.code, int) else 0
        return EXIT_CONFIG if code not in (0, None) else EXIT_OK
    try:
        cfg = _config_from_args(args)
        if args.command == "inspect":
            chart = _load_chart(cfg)
            return cmd_inspect(cfg, chart, _parse_point(args.point), args.angle)
        if args.command == "check-np":
            return cmd_check_np(cfg, _load_chart(cfg))
        if args.command == "verify-s3":
            if cfg.chart is None and cfg.config is None:
                cfg.chart = "hopf_lorentz"
            return cmd_verify_s3(cfg)
        if args.command == "flow":
            return cmd_flow(cfg, args)
        if args.command == "classify":
            return cmd_classify(cfg, _load_chart(cfg), args.closed)
        raise AssertionError(args.command)
    except (geometry.ChartError, exprlang.ParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        geometry.OutOfDomainError,
        geometry.SingularMetricError,
        jets.DomainError,
        exprlang.EvalError,
        frames.FrameError,
        npcore.PreconditionError,
        ArithmeticError,
    ) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
