"""Second-order jet arithmetic in three variables.

A ``Jet2`` packs a scalar value together with its exact gradient and
Hessian at a point.  Arithmetic and the elementary functions propagate
both derivative orders through the chain rule, so any composite built
from them carries machine-precision first and second partials.  This is
the substrate used to differentiate metric components twice, which is
all the curvature pipeline ever needs.

Jets are plain immutable values and safe to share between threads.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DomainError",
    "Jet2",
    "as_jet",
    "constant",
    "seed",
    "power",
    "FUNCTIONS",
]

N = 3  # number of independent variables


class DomainError(ArithmeticError):
    """Evaluation left the domain of an elementary operation."""


def _make(value: float, grad: np.ndarray, hess: np.ndarray) -> "Jet2":
    # fast path for internally built (already symmetric) results
    j = Jet2.__new__(Jet2)
    j.value = value
    j.grad = grad
    j.hess = hess
    return j


class Jet2:
    """Value, gradient and symmetric Hessian of a scalar at a point."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float).reshape(N)
        h = np.asarray(hess, dtype=float).reshape(N, N)
        # only the symmetric part is meaningful; enforce it on construction
        self.hess = 0.5 * (h + h.T)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        o = as_jet(other)
        return _make(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return _make(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        o = as_jet(other)
        return _make(self.value - o.value, self.grad - o.grad, self.hess - o.hess)

    def __rsub__(self, other):
        return as_jet(other) - self

    def __mul__(self, other):
        o = as_jet(other)
        g = self.grad * o.value + o.grad * self.value
        h = (
            self.hess * o.value
            + o.hess * self.value
            + np.outer(self.grad, o.grad)
            + np.outer(o.grad, self.grad)
        )
        return _make(self.value * o.value, g, h)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = as_jet(other)
        if o.value == 0.0:
            raise DomainError("division by zero")
        return self * _reciprocal(o)

    def __rtruediv__(self, other):
        return as_jet(other) / self

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(as_jet(other), self)

    def __repr__(self):
        return f"Jet2({self.value!r}, grad={self.grad.tolist()}, hess={self.hess.tolist()})"


def as_jet(x) -> Jet2:
    """Coerce a plain number to a constant jet; jets pass through."""
    if isinstance(x, Jet2):
        return x
    return constant(x)


def constant(value: float) -> Jet2:
    return _make(float(value), np.zeros(N), np.zeros((N, N)))


def seed(point, axis: int) -> Jet2:
    """Jet of the coordinate function ``x[axis]`` at ``point``."""
    if not 0 <= axis < N:
        raise ValueError(f"axis must be in 0..{N - 1}, got {axis}")
    g = np.zeros(N)
    g[axis] = 1.0
    return _make(float(point[axis]), g, np.zeros((N, N)))


def _chain(u: Jet2, f0: float, f1: float, f2: float) -> Jet2:
    """Propagate u through a scalar function with derivatives f0, f1, f2."""
    g = u.grad
    return _make(f0, f1 * g, f1 * u.hess + f2 * np.outer(g, g))


def _reciprocal(u: Jet2) -> Jet2:
    v = u.value
    return _chain(u, 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))


def power(base, exponent):
    """``base ** exponent`` with the domain rules of the expression language.

    Negative bases are only permitted for integer exponents; a variable
    (non-constant jet) exponent requires a strictly positive base.
    """
    b = as_jet(base) if isinstance(base, Jet2) or isinstance(exponent, Jet2) else None
    if b is None:
        return _float_pow(float(base), float(exponent))
    if isinstance(exponent, Jet2):
        if np.any(exponent.grad) or np.any(exponent.hess):
            if b.value <= 0.0:
                raise DomainError("variable exponent requires a positive base")
            return exp(exponent * log(b))
        exponent = exponent.value
    p = float(exponent)
    v = b.value
    if p == round(p):
        n = int(round(p))
        if v == 0.0 and n < 2:
            if n in (0, 1):
                return _chain(b, 0.0 if n == 1 else 1.0, float(n == 1), 0.0)
            raise DomainError("zero base with negative exponent")
        f0 = math.pow(v, n)
        f1 = n * math.pow(v, n - 1) if n != 0 else 0.0
        f2 = n * (n - 1) * math.pow(v, n - 2) if n not in (0, 1) else 0.0
        return _chain(b, f0, f1, f2)
    if v <= 0.0:
        raise DomainError("negative or zero base with non-integer exponent")
    f0 = math.pow(v, p)
    return _chain(b, f0, p * f0 / v, p * (p - 1.0) * f0 / (v * v))


def _float_pow(b: float, p: float) -> float:
    if b < 0.0 and p != round(p):
        raise DomainError("negative base with non-integer exponent")
    if b == 0.0 and p < 0.0:
        raise DomainError("zero base with negative exponent")
    return math.pow(b, p)


# -- elementary functions (accept jets or plain floats) ---------------------


def sin(x):
    if isinstance(x, Jet2):
        s = math.sin(x.value)
        return _chain(x, s, math.cos(x.value), -s)
    return math.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        c = math.cos(x.value)
        return _chain(x, c, -math.sin(x.value), -c)
    return math.cos(x)


def tan(x):
    if isinstance(x, Jet2):
        c = math.cos(x.value)
        if c == 0.0:
            raise DomainError("tan evaluated at a pole")
        t = math.tan(x.value)
        d = 1.0 + t * t
        return _chain(x, t, d, 2.0 * t * d)
    if math.cos(x) == 0.0:
        raise DomainError("tan evaluated at a pole")
    return math.tan(x)


def sinh(x):
    if isinstance(x, Jet2):
        s = math.sinh(x.value)
        return _chain(x, s, math.cosh(x.value), s)
    return math.sinh(x)


def cosh(x):
    if isinstance(x, Jet2):
        c = math.cosh(x.value)
        return _chain(x, c, math.sinh(x.value), c)
    return math.cosh(x)


def tanh(x):
    if isinstance(x, Jet2):
        t = math.tanh(x.value)
        d = 1.0 - t * t
        return _chain(x, t, d, -2.0 * t * d)
    return math.tanh(x)


def exp(x):
    if isinstance(x, Jet2):
        e = math.exp(x.value)
        return _chain(x, e, e, e)
    return math.exp(x)


def log(x):
    if isinstance(x, Jet2):
        v = x.value
        if v <= 0.0:
            raise DomainError("log of a non-positive value")
        return _chain(x, math.log(v), 1.0 / v, -1.0 / (v * v))
    if x <= 0.0:
        raise DomainError("log of a non-positive value")
    return math.log(x)


def sqrt(x):
    if isinstance(x, Jet2):
        v = x.value
        if v <= 0.0:
            # derivatives of sqrt are singular at 0, so 0 is rejected too
            raise DomainError("sqrt of a non-positive value")
        r = math.sqrt(v)
        return _chain(x, r, 0.5 / r, -0.25 / (r * v))
    if x < 0.0:
        raise DomainError("sqrt of a negative value")
    return math.sqrt(x)


FUNCTIONS = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "sinh": sinh,
    "cosh": cosh,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
}
