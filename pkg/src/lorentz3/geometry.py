"""Charts, the built-in metric catalog, connection and curvature.

Conventions.  Lorentzian charts have signature (-,+,+); Riemannian
(+,+,+) charts are admitted as well so the positive-definite companions
of the catalog can be analyzed with the same machinery.  Derivative
index order: ``dg[i, j, k] = d_k g_ij`` and ``ddg[i, j, k, l] =
d_k d_l g_ij``.  The fully covariant curvature is stored in operator
order,

    riemann[u, v, w, z] = < (nabla_u nabla_v - nabla_v nabla_u
                             - nabla_[u,v]) e_w , e_z >,

and ``ricci`` is its metric trace over the (u, z) pair; with this choice
the unit round 3-sphere has Ric = 2 g.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import exprlang, jets
from .exprlang import Expression

__all__ = [
    "Chart",
    "MetricValue",
    "CurvatureValue",
    "ChartError",
    "ChartConfigError",
    "OutOfDomainError",
    "SingularMetricError",
    "make_chart",
    "catalog_chart",
    "CATALOG_NAMES",
    "metric_at",
    "christoffel",
    "curvature_at",
    "flip_metric",
    "riemannianize",
    "field_at",
    "grid_points",
    "random_interior_points",
    "load_chart",
    "load_chart_text",
    "min_extent",
]

LORENTZIAN = "lorentzian"
RIEMANNIAN = "riemannian"

CATALOG_NAMES = ("minkowski", "euclidean", "hopf_round", "hopf_lorentz", "product_cylinder")


class ChartError(ValueError):
    """Invalid chart definition or chart-level precondition failure."""


class ChartConfigError(ChartError):
    """Config file problem; carries the 1-based source line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OutOfDomainError(ValueError):
    """A point (or finite-difference stencil) left the chart's domain box."""


class SingularMetricError(ArithmeticError):
    """The metric failed to invert at an evaluation point."""


@dataclass(frozen=True)
class Chart:
    """A coordinate box with metric component expressions and named fields.

    Immutable after construction; all evaluations are pure.
    ``metric_value_hook`` is a test hook: ``hook(i, j, point)`` is added
    to the evaluated value of ``g_ij`` (derivatives are left untouched,
    deliberately breaking internal consistency for fault-injection tests).
    """

    name: str
    coords: tuple
    domain: tuple  # ((lo, hi),) * 3
    metric: tuple  # 3x3 nested tuple of Expression, symmetric
    fields: Mapping[str, tuple]
    signature: str = LORENTZIAN
    metric_value_hook: Optional[Callable[[int, int, np.ndarray], float]] = field(
        default=None, compare=False
    )


def _as_expression(entry, coords) -> Expression:
    if isinstance(entry, str):
        return exprlang.parse(entry, coords)
    if isinstance(entry, (int, float)):
        return exprlang.num(entry)
    return entry


def make_chart(
    name: str,
    coords: Sequence[str],
    domain: Sequence,
    metric: Sequence,
    fields: Optional[Mapping[str, Sequence]] = None,
    metric_value_hook=None,
) -> Chart:
    """Build and validate a chart.

    Metric entries and field components may be expression strings,
    numbers, or already-parsed expressions.  Validation checks the
    signature at the domain center and metric invertibility on a 5^3
    probe grid.
    """
    coords = tuple(coords)
    if len(coords) != 3 or len(set(coords)) != 3:
        raise ChartError("exactly three distinct coordinate names are required")
    dom = []
    for k, (lo, hi) in enumerate(domain):
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise ChartError(f"empty domain interval for coordinate {coords[k]!r}")
        dom.append((lo, hi))
    m = [[exprlang.num(0.0)] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            m[i][j] = _as_expression(metric[i][j], coords)
    flds = {}
    for fname, comps in (fields or {}).items():
        flds[fname] = tuple(_as_expression(c, coords) for c in comps)
        if len(flds[fname]) != 3:
            raise ChartError(f"field {fname!r} needs exactly three components")
    chart = Chart(
        name=name,
        coords=coords,
        domain=tuple(dom),
        metric=tuple(tuple(row) for row in m),
        fields=flds,
        signature=LORENTZIAN,
        metric_value_hook=metric_value_hook,
    )
    center = np.array([0.5 * (lo + hi) for lo, hi in chart.domain])
    g0 = metric_at(chart, center).g
    eig = np.linalg.eigvalsh(g0)
    if np.any(np.abs(eig) < 1e-10):
        raise ChartError(f"metric of {name!r} is degenerate at the domain center")
    negatives = int(np.sum(eig < 0.0))
    if negatives == 0:
        signature = RIEMANNIAN
    elif negatives == 1:
        signature = LORENTZIAN
    else:
        raise ChartError(
            f"metric of {name!r} has signature with {negatives} negative directions"
        )
    chart = Chart(
        name=name,
        coords=chart.coords,
        domain=chart.domain,
        metric=chart.metric,
        fields=chart.fields,
        signature=signature,
        metric_value_hook=metric_value_hook,
    )
    for p in grid_points(chart, 5):
        metric_at(chart, p)  # raises SingularMetricError on failure
    return chart


def in_domain(chart: Chart, point) -> bool:
    return all(lo <= x <= hi for x, (lo, hi) in zip(point, chart.domain))


def _require_in_domain(chart: Chart, point):
    if not in_domain(chart, point):
        raise OutOfDomainError(
            f"point {np.asarray(point).tolist()} outside domain of chart {chart.name!r}"
        )


def min_extent(chart: Chart) -> float:
    return min(hi - lo for lo, hi in chart.domain)


def grid_points(chart: Chart, n: int, margin: float = 0.0) -> np.ndarray:
    """Uniform n^3 grid over the domain box, optionally inset by a
    fraction ``margin`` of each extent on both sides.  Fixed C order."""
    axes = []
    for lo, hi in chart.domain:
        pad = margin * (hi - lo)
        axes.append(np.linspace(lo + pad, hi - pad, n))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return pts


def random_interior_points(chart: Chart, n: int, rng, margin: float = 0.05) -> np.ndarray:
    lo = np.array([a + margin * (b - a) for a, b in chart.domain])
    hi = np.array([b - margin * (b - a) for a, b in chart.domain])
    return lo + (hi - lo) * rng.random((n, 3))


@dataclass(frozen=True)
class MetricValue:
    """Metric, its first two derivative arrays, and the inverse at a point."""

    g: np.ndarray  # (3,3)
    dg: np.ndarray  # (3,3,3), dg[i,j,k] = d_k g_ij
    ddg: np.ndarray  # (3,3,3,3), ddg[i,j,k,l] = d_k d_l g_ij
    ginv: np.ndarray  # (3,3)


@dataclass(frozen=True)
class CurvatureValue:
    """Christoffel symbols and curvature tensors at a point."""

    gamma: np.ndarray  # (3,3,3), gamma[k,i,j] = Gamma^k_ij
    riemann: np.ndarray  # (3,3,3,3), operator ordering (see module docstring)
    ricci: np.ndarray  # (3,3)
    scalar: float


def _metric_jets(chart: Chart, point: np.ndarray):
    env = {c: jets.seed(point, k) for k, c in enumerate(chart.coords)}
    out = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            jv = jets.as_jet(exprlang.evaluate(chart.metric[i][j], env))
            if chart.metric_value_hook is not None:
                bias = chart.metric_value_hook(i, j, point)
                if bias:
                    jv = jets.Jet2(jv.value + bias, jv.grad, jv.hess)
            out[i][j] = jv
            out[j][i] = jv
    return out


def _inverse3(g: np.ndarray) -> np.ndarray:
    # closed-form adjugate inverse of a 3x3 matrix
    a, b, c = g[0]
    d, e, f = g[1]
    h, i, k = g[2]
    det = a * (e * k - f * i) - b * (d * k - f * h) + c * (d * i - e * h)
    if abs(det) < 1e-14 * max(1.0, float(np.max(np.abs(g))) ** 3):
        raise SingularMetricError("metric is numerically singular")
    adj = np.array(
        [
            [e * k - f * i, c * i - b * k, b * f - c * e],
            [f * h - d * k, a * k - c * h, c * d - a * f],
            [d * i - e * h, b * h - a * i, a * e - b * d],
        ]
    )
    return adj / det


def metric_at(chart: Chart, point) -> MetricValue:
    """Metric components with exact first and second partials at a point."""
    point = np.asarray(point, dtype=float)
    _require_in_domain(chart, point)
    J = _metric_jets(chart, point)
    g = np.empty((3, 3))
    dg = np.empty((3, 3, 3))
    ddg = np.empty((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            g[i, j] = J[i][j].value
            dg[i, j] = J[i][j].grad
            ddg[i, j] = J[i][j].hess
    return MetricValue(g=g, dg=dg, ddg=ddg, ginv=_inverse3(g))


def christoffel(mv: MetricValue) -> np.ndarray:
    """Levi-Civita connection coefficients Gamma^k_ij from (g, dg)."""
    dg = mv.dg
    t1 = np.einsum("kl,lji->kij", mv.ginv, dg)
    t2 = np.einsum("kl,lij->kij", mv.ginv, dg)
    t3 = np.einsum("kl,ijl->kij", mv.ginv, dg)
    return 0.5 * (t1 + t2 - t3)


def curvature_at(chart: Chart, point, mv: Optional[MetricValue] = None) -> CurvatureValue:
    """Connection, covariant Riemann tensor, Ricci tensor and scalar."""
    if mv is None:
        mv = metric_at(chart, point)
    gamma = christoffel(mv)
    dginv = -np.einsum("ac,cdm,db->abm", mv.ginv, mv.dg, mv.ginv)
    s1 = np.einsum("klm,lji->kijm", dginv, mv.dg)
    s2 = np.einsum("klm,lij->kijm", dginv, mv.dg)
    s3 = np.einsum("klm,ijl->kijm", dginv, mv.dg)
    u1 = np.einsum("kl,ljim->kijm", mv.ginv, mv.ddg)
    u2 = np.einsum("kl,lijm->kijm", mv.ginv, mv.ddg)
    u3 = np.einsum("kl,ijlm->kijm", mv.ginv, mv.ddg)
    dgamma = 0.5 * (s1 + s2 - s3 + u1 + u2 - u3)  # dgamma[k,i,j,m] = d_m Gamma^k_ij
    rup = (
        np.einsum("adbc->abcd", dgamma)
        - np.einsum("acbd->abcd", dgamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )
    riemann = np.einsum("za,awuv->uvwz", mv.g, rup)
    ricci = np.einsum("ab,avwb->vw", mv.ginv, riemann)
    scalar = float(np.einsum("vw,vw->", mv.ginv, ricci))
    return CurvatureValue(gamma=gamma, riemann=riemann, ricci=ricci, scalar=scalar)


def field_at(chart: Chart, name: str, point, env=None) -> np.ndarray:
    """Coordinate components of a named vector field at a point."""
    if name not in chart.fields:
        raise ChartError(f"chart {chart.name!r} has no field {name!r}")
    point = np.asarray(point, dtype=float)
    if env is None:
        env = dict(zip(chart.coords, point))
    return np.array([exprlang.evaluate(c, env) for c in chart.fields[name]])


def _covector_expressions(chart: Chart, fname: str):
    """Expressions for the lowered field (g contracted with the field)."""
    comps = chart.fields[fname]
    out = []
    for i in range(3):
        acc = exprlang.num(0.0)
        for j in range(3):
            acc = exprlang.add(acc, exprlang.mul(chart.metric[i][j], comps[j]))
        out.append(acc)
    return out


def _field_norm_on_probe(chart: Chart, fname: str) -> np.ndarray:
    vals = []
    for p in grid_points(chart, 5):
        g = metric_at(chart, p).g
        v = field_at(chart, fname, p)
        vals.append(float(v @ g @ v))
    return np.array(vals)


def flip_metric(chart: Chart, fname: str, name: Optional[str] = None) -> Chart:
    """Lorentzian companion g' = g - 2 (g T) (x) (g T) of a Riemannian chart.

    Requires the field to have unit (+1) length on the probe grid; in the
    new chart it is unit timelike.
    """
    if fname not in chart.fields:
        raise ChartError(f"chart {chart.name!r} has no field {fname!r}")
    norms = _field_norm_on_probe(chart, fname)
    if np.max(np.abs(norms - 1.0)) > 1e-8:
        raise ChartError(
            f"field {fname!r} is not unit spacelike on the probe grid "
            f"(max |g(T,T)-1| = {np.max(np.abs(norms - 1.0)):.3e})"
        )
    tb = _covector_expressions(chart, fname)
    metric = [
        [
            exprlang.sub(chart.metric[i][j], exprlang.mul(exprlang.num(2.0), exprlang.mul(tb[i], tb[j])))
            for j in range(3)
        ]
        for i in range(3)
    ]
    return make_chart(
        name or f"{chart.name}_flipped",
        chart.coords,
        chart.domain,
        metric,
        chart.fields,
    )


def riemannianize(chart: Chart, fname: str, name: Optional[str] = None) -> Chart:
    """Riemannian companion h = g + 2 T-flat (x) T-flat of a Lorentzian chart.

    Requires the field to be unit timelike; it has h-unit length afterwards.
    """
    if fname not in chart.fields:
        raise ChartError(f"chart {chart.name!r} has no field {fname!r}")
    norms = _field_norm_on_probe(chart, fname)
    if np.max(np.abs(norms + 1.0)) > 1e-8:
        raise ChartError(
            f"field {fname!r} is not unit timelike on the probe grid "
            f"(max |g(T,T)+1| = {np.max(np.abs(norms + 1.0)):.3e})"
        )
    tb = _covector_expressions(chart, fname)
    metric = [
        [
            exprlang.add(chart.metric[i][j], exprlang.mul(exprlang.num(2.0), exprlang.mul(tb[i], tb[j])))
            for j in range(3)
        ]
        for i in range(3)
    ]
    out = make_chart(
        name or f"{chart.name}_riemannianized",
        chart.coords,
        chart.domain,
        metric,
        chart.fields,
    )
    for p in grid_points(out, 5):
        if np.min(np.linalg.eigvalsh(metric_at(out, p).g)) <= 0.0:
            raise ChartError("riemannianized metric is not positive definite on the probe grid")
    return out


# -- built-in catalog --------------------------------------------------------

_HOPF_ETA = (0.15, np.pi / 2 - 0.15)
_CIRCLE = (0.0, 2 * np.pi)


def catalog_chart(name: str) -> Chart:
    """One of the built-in charts: minkowski, euclidean, hopf_round,
    hopf_lorentz, product_cylinder."""
    if name == "minkowski":
        return make_chart(
            "minkowski",
            ("t", "x", "y"),
            ((-2.0, 2.0),) * 3,
            [[-1, 0, 0], [0, 1, 0], [0, 0, 1]],
            {"T": ("1", "0", "0")},
        )
    if name == "euclidean":
        return make_chart(
            "euclidean",
            ("x", "y", "z"),
            ((-2.0, 2.0),) * 3,
            [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            {"T": ("1", "0", "0")},
        )
    if name == "hopf_round":
        return make_chart(
            "hopf_round",
            ("eta", "xi1", "xi2"),
            (_HOPF_ETA, _CIRCLE, _CIRCLE),
            [[1, 0, 0], [0, "cos(eta)^2", 0], [0, 0, "sin(eta)^2"]],
            {"T": ("0", "1", "1")},
        )
    if name == "hopf_lorentz":
        return flip_metric(catalog_chart("hopf_round"), "T", name="hopf_lorentz")
    if name == "product_cylinder":
        return make_chart(
            "product_cylinder",
            ("t", "theta", "phi"),
            (_CIRCLE, (0.15, np.pi - 0.15), _CIRCLE),
            [[-1, 0, 0], [0, 1, 0], [0, 0, "sin(theta)^2"]],
            {"T": ("1", "0", "0")},
        )
    raise ChartError(f"unknown catalog chart {name!r}; choose from {CATALOG_NAMES}")


# -- chart config files ------------------------------------------------------

def load_chart_text(text: str, default_name: str = "chart") -> Chart:
    """Parse the plain-text chart format.

    Statements, one per line (``#`` starts a comment):

        chart NAME
        coord NAME MIN MAX          (exactly three, in coordinate order)
        g I J = EXPRESSION          (symmetric; unset entries are zero)
        field NAME = E1, E2, E3
    """
    name = default_name
    coords: list = []
    domain: list = []
    metric_entries: dict = {}
    fields: dict = {}
    pending_fields: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "chart":
            if not rest:
                raise ChartConfigError("chart statement needs a name", lineno)
            name = rest
        elif head == "coord":
            parts = rest.split()
            if len(parts) != 3:
                raise ChartConfigError("expected: coord NAME MIN MAX", lineno)
            if len(coords) == 3:
                raise ChartConfigError("more than three coordinates declared", lineno)
            try:
                lo, hi = float(parts[1]), float(parts[2])
            except ValueError:
                raise ChartConfigError("coordinate bounds must be numbers", lineno) from None
            coords.append(parts[0])
            domain.append((lo, hi))
        elif head == "g":
            lhs, eq, expr_text = rest.partition("=")
            if not eq:
                raise ChartConfigError("expected: g I J = EXPRESSION", lineno)
            idx = lhs.split()
            if len(idx) != 2 or not all(s in ("0", "1", "2") for s in idx):
                raise ChartConfigError("metric indices must be 0, 1 or 2", lineno)
            metric_entries[(int(idx[0]), int(idx[1]))] = (expr_text.strip(), lineno)
        elif head == "field":
            fname, eq, comps = rest.partition("=")
            fname = fname.strip()
            if not eq or not fname:
                raise ChartConfigError("expected: field NAME = E1, E2, E3", lineno)
            parts = [c.strip() for c in comps.split(",")]
            if len(parts) != 3:
                raise ChartConfigError("a field needs exactly three components", lineno)
            pending_fields.append((fname, parts, lineno))
        else:
            raise ChartConfigError(f"unknown statement {head!r}", lineno)
    if len(coords) != 3:
        raise ChartConfigError(f"expected three coord statements, found {len(coords)}", 0)

    def _parse(src: str, lineno: int) -> Expression:
        try:
            return exprlang.parse(src, coords)
        except exprlang.ParseError as e:
            raise ChartConfigError(str(e), lineno) from None

    metric = [[exprlang.num(0.0)] * 3 for _ in range(3)]
    for (i, j), (src, lineno) in metric_entries.items():
        e = _parse(src, lineno)
        metric[i][j] = e
        metric[j][i] = e
    for fname, parts, lineno in pending_fields:
        fields[fname] = tuple(_parse(p, lineno) for p in parts)
    return make_chart(name, coords, domain, metric, fields)


def load_chart(path) -> Chart:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    import os

    default = os.path.splitext(os.path.basename(str(path)))[0]
    return load_chart_text(text, default_name=default)
