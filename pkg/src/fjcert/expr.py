"""Scalar expressions over named real variables.

Parsing, float evaluation, forward-mode directional derivatives (dual
numbers), central finite differences and an empirical Frechet remainder
probe.  Expression trees are immutable; every operation here is a pure
function.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

__all__ = [
    "Const", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "Expr", "FUNCTIONS", "ExprError", "ExprSyntaxError",
    "UndeclaredVariableError", "DomainError", "Dual", "FrechetReport",
    "parse_expression", "to_string", "variables_of", "evaluate",
    "directional_derivative", "gradient", "fd_directional", "fd_gradient",
    "frechet_probe",
]


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UndeclaredVariableError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"undeclared variable {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class DomainError(ExprError):
    """Raised when evaluation leaves the domain of an expression.

    ``subtree`` is the printed form of the offending node.
    """

    def __init__(self, message: str, subtree: str):
        super().__init__(f"{message} in {subtree}")
        self.subtree = subtree


# ---------------------------------------------------------------------------
# tree nodes


@dataclass(frozen=True)
class Const:
    value: float
    text: str = field(compare=False, default="")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")

_BINARY_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def to_string(e: Expr) -> str:
    """Print ``e`` so that parsing the result gives back the same tree."""
    if isinstance(e, Const):
        return e.text or repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"-({to_string(e.arg)})"
    if isinstance(e, Pow):
        return f"({to_string(e.base)})^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.fn}({to_string(e.arg)})"
    sym = _BINARY_SYMBOL[type(e)]
    return f"({to_string(e.left)} {sym} {to_string(e.right)})"


def variables_of(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables_of(e.arg)
    if isinstance(e, Pow):
        return variables_of(e.base)
    return variables_of(e.left) | variables_of(e.right)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = set(variables)

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, text, pos = self.tok
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)
        self.i += 1

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self) -> Expr:
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.take()
            return Pow(base, self.integer())
        return base

    def integer(self) -> int:
        # accepts 2, -2, (2), (-2)
        paren = self.tok[1] == "(" and self.tok[0] == "op"
        if paren:
            self.take()
        sign = 1
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.take()
            sign = -1
        kind, text, pos = self.tok
        if kind != "num" or not text.isdigit():
            raise ExprSyntaxError("expected integer exponent", pos)
        self.take()
        if paren:
            self.expect(")")
        return sign * int(text)

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text), text)
        if kind == "ident":
            if self.tok[0] == "op" and self.tok[1] == "(":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text not in self.variables:
                raise UndeclaredVariableError(text, pos)
            return Var(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse_expression(text: str, variables: Sequence[str]) -> Expr:
    """Parse ``text`` with the usual precedence.

    Unary minus binds looser than ``^`` (so ``-x^2`` is ``-(x^2)``) and
    tighter than ``*``/``/``.  Exponents must be integer literals.
    """
    return _Parser(text, variables).parse()


# ---------------------------------------------------------------------------
# dual numbers


class Dual:
    """First-order dual number ``val + der*eps``."""

    __slots__ = ("val", "der")

    def __init__(self, val: float, der: float = 0.0):
        self.val = val
        self.der = der

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        return Dual(self.val + other, self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        return Dual(self.val - other, self.der)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.der)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.val * other.der + self.der * other.val)
        return Dual(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            return Dual(q, (self.der - q * other.der) / other.val)
        return Dual(self.val / other, self.der / other)

    def __rtruediv__(self, other):
        q = other / self.val
        return Dual(q, -q * self.der / self.val)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pow__(self, k: int):
        if k == 0:
            return Dual(1.0, 0.0)
        return Dual(self.val ** k, k * self.val ** (k - 1) * self.der)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.der!r})"


def _value(x) -> float:
    return x.val if isinstance(x, Dual) else x


def _apply(fn: str, x):
    if isinstance(x, Dual):
        v = x.val
        if fn == "sin":
            return Dual(math.sin(v), math.cos(v) * x.der)
        if fn == "cos":
            return Dual(math.cos(v), -math.sin(v) * x.der)
        if fn == "exp":
            ev = math.exp(v)
            return Dual(ev, ev * x.der)
        if fn == "log":
            return Dual(math.log(v), x.der / v)
        r = math.sqrt(v)
        return Dual(r, x.der / (2.0 * r))
    return getattr(math, fn)(x)


# ---------------------------------------------------------------------------
# evaluation


def _check_finite(x, node: Expr):
    if not math.isfinite(_value(x)) or (isinstance(x, Dual) and not math.isfinite(x.der)):
        raise DomainError("non-finite value", to_string(node))
    return x


def _eval(e: Expr, env: Mapping[str, object]):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Pow):
        b = _eval(e.base, env)
        if e.exponent < 0 and _value(b) == 0.0:
            raise DomainError("zero raised to a negative power", to_string(e))
        try:
            if e.exponent < 0:
                return _check_finite(1.0 / b ** (-e.exponent), e)
            return _check_finite(b ** e.exponent, e)
        except (OverflowError, ZeroDivisionError):
            raise DomainError("overflow", to_string(e)) from None
    if isinstance(e, Call):
        a = _eval(e.arg, env)
        v = _value(a)
        if e.fn == "log" and v <= 0.0:
            raise DomainError(f"log of non-positive value {v!r}", to_string(e))
        if e.fn == "sqrt":
            if v < 0.0:
                raise DomainError(f"sqrt of negative value {v!r}", to_string(e))
            if v == 0.0 and isinstance(a, Dual):
                raise DomainError("sqrt is not differentiable at 0", to_string(e))
        try:
            return _check_finite(_apply(e.fn, a), e)
        except OverflowError:
            raise DomainError("overflow", to_string(e)) from None
    left = _eval(e.left, env)
    right = _eval(e.right, env)
    if isinstance(e, Add):
        return _check_finite(left + right, e)
    if isinstance(e, Sub):
        return _check_finite(left - right, e)
    if isinstance(e, Mul):
        return _check_finite(left * right, e)
    if _value(right) == 0.0:
        raise DomainError("division by zero", to_string(e))
    return _check_finite(left / right, e)


def evaluate(e: Expr, p: Mapping[str, float]) -> float:
    return float(_eval(e, p))


def directional_derivative(e: Expr, p: Mapping[str, float], v: Sequence[float]) -> float:
    """d/dt e(p + t v) at t = 0, by one forward-mode pass.

    ``v`` is aligned with the key order of ``p``.
    """
    if len(v) != len(p):
        raise ValueError(f"direction has {len(v)} entries, point has {len(p)}")
    env = {name: Dual(float(x), float(d)) for (name, x), d in zip(p.items(), v)}
    out = _eval(e, env)
    return float(out.der) if isinstance(out, Dual) else 0.0


def gradient(e: Expr, p: Mapping[str, float]) -> tuple[float, ...]:
    n = len(p)
    return tuple(
        directional_derivative(e, p, [1.0 if k == j else 0.0 for k in range(n)])
        for j in range(n)
    )


def fd_directional(e: Expr, p: Mapping[str, float], v: Sequence[float], h: float = 1e-5) -> float:
    """Central difference ``(e(p+hv) - e(p-hv)) / 2h``."""
    names = list(p)
    plus = {k: p[k] + h * d for k, d in zip(names, v)}
    minus = {k: p[k] - h * d for k, d in zip(names, v)}
    return (evaluate(e, plus) - evaluate(e, minus)) / (2.0 * h)


def fd_gradient(e: Expr, p: Mapping[str, float], h: float = 1e-5) -> tuple[float, ...]:
    n = len(p)
    return tuple(
        fd_directional(e, p, [1.0 if k == j else 0.0 for k in range(n)], h)
        for j in range(n)
    )


# ---------------------------------------------------------------------------
# Frechet remainder probe


@dataclass(frozen=True)
class FrechetReport:
    radii: tuple[float, ...]
    ratios: tuple[float, ...]
    tolerance: float
    passed: bool


def _sample_directions(n: int, count: int, rng: random.Random) -> list[list[float]]:
    # coordinate axes (both signs) first, then gaussian directions
    dirs = []
    for j in range(n):
        for s in (1.0, -1.0):
            dirs.append([s if k == j else 0.0 for k in range(n)])
    while len(dirs) < 2 * n + count:
        d = [rng.gauss(0.0, 1.0) for _ in range(n)]
        norm = math.sqrt(sum(x * x for x in d))
        if norm > 1e-12:
            dirs.append([x / norm for x in d])
    return dirs


def frechet_probe(
    e: Expr,
    p: Mapping[str, float],
    candidate_gradient: Sequence[float],
    radii: Sequence[float] = (1e-2, 1e-3, 1e-4),
    samples_per_radius: int = 16,
    seed: int = 0,
    tolerance: float = 1e-3,
) -> FrechetReport:
    """Estimate sup over |v| = r of |e(p+v) - e(p) - g.v| / |v| for each r.

    Passes when the ratios never increase (up to ``tolerance``) and the
    last one is below ``tolerance``.  Evidence only, not a proof.
    """
    radii = tuple(float(r) for r in radii)
    if not radii or any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if samples_per_radius < 1:
        raise ValueError("samples_per_radius must be at least 1")
    if len(candidate_gradient) != len(p):
        raise ValueError("gradient dimension does not match point")

    rng = random.Random(seed)
    names = list(p)
    base = evaluate(e, p)
    ratios = []
    for r in radii:
        worst = 0.0
        for d in _sample_directions(len(names), samples_per_radius, rng):
            q = {k: p[k] + r * dk for k, dk in zip(names, d)}
            lin = r * sum(g * dk for g, dk in zip(candidate_gradient, d))
            worst = max(worst, abs(evaluate(e, q) - base - lin) / r)
        ratios.append(worst)

    monotone = all(b <= a or b <= tolerance for a, b in zip(ratios, ratios[1:]))
    passed = monotone and ratios[-1] <= tolerance
    return FrechetReport(radii, tuple(ratios), tolerance, passed)
