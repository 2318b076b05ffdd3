"""Parser and evaluator for scalar expressions in chart coordinates.

Grammar (standard precedence; ``^`` is right-associative and binds
tightest, unary minus binds below ``^``):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | 'pi' | NAME | FUNC '(' expr ')' | '(' expr ')'

Functions: sin cos tan sinh cosh tanh exp log sqrt.  Angles are radians
and ``pi`` is the only built-in constant.  Any other NAME must be one of
the declared coordinates.

Parsed expressions are immutable; evaluation is pure and reentrant.  The
evaluator is generic over the scalar: pass plain floats for values only,
or :class:`~lorentz3.jets.Jet2` seeds to obtain derivatives as well.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import pi as _PI
from typing import Mapping, Union

from . import jets

__all__ = [
    "ParseError",
    "EvalError",
    "Expression",
    "Num",
    "Pi",
    "Coord",
    "Neg",
    "BinOp",
    "Call",
    "parse",
    "evaluate",
    "to_str",
    "num",
    "add",
    "sub",
    "mul",
    "neg",
]


class ParseError(ValueError):
    """Syntax or name error, with the offending position in the source."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalError(ArithmeticError):
    """Domain error during evaluation, naming the offending subexpression."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Coord:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"


Expression = Union[Num, Pi, Coord, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            # skip any trailing whitespace before declaring failure
            rest = text[pos:]
            if rest.strip() == "":
                break
            raise ParseError(f"unexpected character {rest.strip()[0]!r}", pos)
        if m.lastgroup == "num":
            out.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name"), m.start("name")))
        else:
            out.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, tokens, coords):
        self.tokens = tokens
        self.i = 0
        self.coords = frozenset(coords)

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos)
        self.advance()

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self):
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(val)
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in jets.FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            if val == "pi":
                return Pi()
            if val not in self.coords:
                raise ParseError(f"unknown identifier {val!r}", pos)
            return Coord(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected {val!r}" if val else "unexpected end of input", pos)


def parse(text: str, coords) -> Expression:
    """Parse ``text`` into an expression tree over the given coordinates."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    p = _Parser(_tokenize(text), coords)
    node = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r} after expression", pos)
    return node


def evaluate(expr: Expression, env: Mapping[str, object]):
    """Evaluate ``expr`` with coordinate bindings ``env``.

    The scalar type follows the bindings: floats give a float, jet seeds
    give a jet with exact partials.  Domain violations raise
    :class:`EvalError` naming the subexpression that failed.
    """
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Pi):
        return _PI
    if isinstance(expr, Coord):
        try:
            return env[expr.name]
        except KeyError:
            raise EvalError(f"unbound coordinate {expr.name!r}") from None
    if isinstance(expr, Neg):
        return -evaluate(expr.arg, env)
    if isinstance(expr, BinOp):
        a = evaluate(expr.left, env)
        b = evaluate(expr.right, env)
        try:
            if expr.op == "+":
                return a + b
            if expr.op == "-":
                return a - b
            if expr.op == "*":
                return a * b
            if expr.op == "/":
                return a / b
            return jets.power(a, b)
        except (jets.DomainError, ZeroDivisionError, OverflowError, ValueError) as e:
            raise EvalError(f"{e} in {to_str(expr)!r}") from None
    if isinstance(expr, Call):
        arg = evaluate(expr.arg, env)
        try:
            return jets.FUNCTIONS[expr.fn](arg)
        except (jets.DomainError, ZeroDivisionError, OverflowError, ValueError) as e:
            raise EvalError(f"{e} in {to_str(expr)!r}") from None
    raise TypeError(f"not an expression node: {expr!r}")


# -- pretty printing ---------------------------------------------------------

_PREC = {BinOp: None, Num: 5, Pi: 5, Coord: 5, Call: 5, Neg: 3}
_OP_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _OP_PREC[node.op]
    return _PREC[type(node)]


def to_str(expr: Expression) -> str:
    """Render an expression; ``parse(to_str(e))`` reproduces ``e`` exactly."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Pi):
        return "pi"
    if isinstance(expr, Coord):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.fn}({to_str(expr.arg)})"
    if isinstance(expr, Neg):
        inner = to_str(expr.arg)
        if _prec(expr.arg) < 3 or isinstance(expr.arg, Neg):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, BinOp):
        p = _OP_PREC[expr.op]
        left, right = to_str(expr.left), to_str(expr.right)
        if expr.op == "^":
            if _prec(expr.left) < 5:
                left = f"({left})"
            if _prec(expr.right) < 3:
                right = f"({right})"
        else:
            if _prec(expr.left) < p:
                left = f"({left})"
            # left-associative ops: an equal-precedence right child would
            # re-parse as a left-nested tree, so it keeps its parentheses
            if _prec(expr.right) <= p:
                right = f"({right})"
        return f"{left} {expr.op} {right}" if expr.op in "+-" else f"{left}{expr.op}{right}"
    raise TypeError(f"not an expression node: {expr!r}")


# -- programmatic construction (used to compose metrics) ---------------------


def num(v) -> Expression:
    return Num(float(v))


def _is_zero(e) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e) -> bool:
    return isinstance(e, Num) and e.value == 1.0


def add(a: Expression, b: Expression) -> Expression:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if _is_zero(a) or _is_zero(b):
        return Num(0.0)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return BinOp("*", a, b)


def neg(a: Expression) -> Expression:
    if _is_zero(a):
        return a
    return Neg(a)
