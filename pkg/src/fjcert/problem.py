"""Problems of the form

    maximize phi(x)  subject to  g_i(x) >= 0,  h_j(x) = 0

plus the line-oriented problem file format, feasibility checks and
active-set detection.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .expr import (Const, Expr, ExprSyntaxError, Neg, Sub,
                   UndeclaredVariableError, evaluate, parse_expression,
                   to_string)

__all__ = [
    "DEFAULT_TOL_ACTIVE", "DEFAULT_TOL_FEAS", "Constraint", "Problem",
    "ActiveSet", "FeasibilityReport", "ProblemParseError",
    "InfeasiblePointError", "load_problem", "parse_point",
    "check_feasibility", "detect_active_set",
]

DEFAULT_TOL_ACTIVE = 1e-8
DEFAULT_TOL_FEAS = 1e-9


class ProblemParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class InfeasiblePointError(ValueError):
    def __init__(self, report: "FeasibilityReport"):
        super().__init__(
            f"point is infeasible (worst inequality violation "
            f"{report.worst_inequality:.3g}, worst equality violation "
            f"{report.worst_equality:.3g})")
        self.report = report


@dataclass(frozen=True)
class Constraint:
    label: str
    expr: Expr  # g >= 0 or h == 0 after desugaring
    source: str = field(default="", compare=False)


@dataclass(frozen=True)
class Problem:
    variables: tuple[str, ...]
    objective: Expr
    inequalities: tuple[Constraint, ...] = ()
    equalities: tuple[Constraint, ...] = ()
    minimize: bool = False  # the objective is already negated when True

    def __post_init__(self):
        if not self.variables:
            raise ValueError("a problem needs at least one variable")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def p(self) -> int:
        return len(self.inequalities)

    @property
    def q(self) -> int:
        return len(self.equalities)

    def describe(self) -> dict:
        return {
            "variables": list(self.variables),
            "maximize": to_string(self.objective),
            "inequalities": {c.label: to_string(c.expr) for c in self.inequalities},
            "equalities": {c.label: to_string(c.expr) for c in self.equalities},
        }


@dataclass(frozen=True)
class FeasibilityReport:
    inequality_values: dict
    equality_values: dict
    worst_inequality: float  # max(0, -min g_i)
    worst_equality: float  # max |h_j|
    tolerance: float
    feasible: bool


@dataclass(frozen=True)
class ActiveSet:
    active: tuple[int, ...]  # 0-based indices into Problem.inequalities
    values: tuple[float, ...]
    tolerance: float

    @property
    def inactive(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.values)) if i not in self.active)


# ---------------------------------------------------------------------------
# problem files

_LINE = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*)\s*:(.*)$")
_RELATION = re.compile(r">=|<=|==")


def _expr(text: str, variables, lineno: int, col0: int) -> Expr:
    try:
        return parse_expression(text, variables)
    except UndeclaredVariableError as exc:
        raise ProblemParseError(f"undeclared variable {exc.name!r}", lineno,
                                col0 + exc.offset + 1) from None
    except ExprSyntaxError as exc:
        raise ProblemParseError(str(exc).rsplit(" at offset", 1)[0], lineno,
                                col0 + exc.offset + 1) from None


def parse_point(text: str, variables: Sequence[str], lineno: int = 1, col0: int = 0) -> dict:
    """Parse ``x = 1, y = -2.5`` into an ordered point over ``variables``."""
    values = {}
    offset = col0
    for part in text.split(","):
        col = offset + len(part) - len(part.lstrip()) + 1
        offset += len(part) + 1
        if "=" not in part:
            raise ProblemParseError(f"expected name = value, got {part.strip()!r}", lineno, col)
        name, _, val = part.partition("=")
        name = name.strip()
        if name not in variables:
            raise ProblemParseError(f"undeclared variable {name!r} in point", lineno, col)
        if name in values:
            raise ProblemParseError(f"variable {name!r} assigned twice", lineno, col)
        try:
            values[name] = float(val)
        except ValueError:
            raise ProblemParseError(f"bad number {val.strip()!r}", lineno, col) from None
    missing = [v for v in variables if v not in values]
    if missing:
        raise ProblemParseError(f"point misses {', '.join(missing)}", lineno, col0 + 1)
    return {v: values[v] for v in variables}


def load_problem(text: str) -> tuple[Problem, dict | None]:
    """Read a problem file; returns the problem and the embedded point (or None).

    ``minimize:`` and ``<=`` are rewritten by negation so the result is
    always a maximization with ``g >= 0`` constraints.
    """
    variables: list[str] | None = None
    objective = None
    minimize = False
    ineqs: list[Constraint] = []
    eqs: list[Constraint] = []
    labels: set[str] = set()
    point_line = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if m is None:
            raise ProblemParseError("expected 'key: value'", lineno, 1)
        key, body = m.group(1), m.group(2)
        col0 = m.start(2)
        if key == "vars":
            if variables is not None:
                raise ProblemParseError("vars declared twice", lineno, 1)
            names = [s.strip() for s in body.split(",")]
            if not all(re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", s) for s in names):
                raise ProblemParseError("bad variable list", lineno, col0 + 1)
            if len(set(names)) != len(names):
                raise ProblemParseError("duplicate variable name", lineno, col0 + 1)
            variables = names
            continue
        if variables is None:
            raise ProblemParseError("'vars:' must come first", lineno, 1)
        if key in ("maximize", "minimize"):
            if objective is not None:
                raise ProblemParseError("objective declared twice", lineno, 1)
            objective = _expr(body, variables, lineno, col0)
            minimize = key == "minimize"
            if minimize:
                objective = Neg(objective)
        elif key == "point":
            point_line = (body, lineno, col0)
        elif key[0] in "gh":
            if key in labels:
                raise ProblemParseError(f"duplicate constraint label {key!r}", lineno, 1)
            labels.add(key)
            rels = list(_RELATION.finditer(body))
            if len(rels) != 1:
                raise ProblemParseError("constraint needs exactly one of >=, <=, ==",
                                        lineno, col0 + 1)
            rel = rels[0]
            lhs_text, rhs_text = body[:rel.start()], body[rel.end():]
            lhs = _expr(lhs_text, variables, lineno, col0)
            rhs = _expr(rhs_text, variables, lineno, col0 + rel.end())
            op = rel.group()
            if key[0] == "h" and op != "==":
                raise ProblemParseError(f"equality label {key!r} needs '=='", lineno,
                                        col0 + rel.start() + 1)
            if key[0] == "g" and op == "==":
                raise ProblemParseError(f"inequality label {key!r} needs '>=' or '<='",
                                        lineno, col0 + rel.start() + 1)
            if op == "<=":
                lhs, rhs = rhs, lhs
            e = lhs if rhs == Const(0.0) else Sub(lhs, rhs)
            (eqs if key[0] == "h" else ineqs).append(Constraint(key, e, body.strip()))
        else:
            raise ProblemParseError(f"unknown key {key!r}", lineno, 1)

    if variables is None:
        raise ProblemParseError("missing 'vars:' line", 1, 1)
    if objective is None:
        raise ProblemParseError("missing 'maximize:' or 'minimize:' line", 1, 1)
    problem = Problem(tuple(variables), objective, tuple(ineqs), tuple(eqs), minimize)
    point = None
    if point_line is not None:
        body, lineno, col0 = point_line
        point = parse_point(body, variables, lineno, col0)
    return problem, point


# ---------------------------------------------------------------------------
# feasibility and active set


def check_feasibility(pr: Problem, x: Mapping[str, float],
                      tol_feas: float = DEFAULT_TOL_FEAS) -> FeasibilityReport:
    g = {c.label: evaluate(c.expr, x) for c in pr.inequalities}
    h = {c.label: evaluate(c.expr, x) for c in pr.equalities}
    worst_g = max([0.0] + [-v for v in g.values()])
    worst_h = max([0.0] + [abs(v) for v in h.values()])
    feasible = all(v >= -tol_feas for v in g.values()) and all(abs(v) <= tol_feas for v in h.values())
    return FeasibilityReport(g, h, worst_g, worst_h, tol_feas, feasible)


def detect_active_set(pr: Problem, x: Mapping[str, float],
                      tol_active: float = DEFAULT_TOL_ACTIVE,
                      tol_feas: float = DEFAULT_TOL_FEAS) -> ActiveSet:
    """Indices i with |g_i(x)| <= tol_active.  Refuses infeasible points."""
    report = check_feasibility(pr, x, tol_feas)
    if not report.feasible:
        raise InfeasiblePointError(report)
    values = tuple(report.inequality_values[c.label] for c in pr.inequalities)
    active = tuple(i for i, v in enumerate(values) if abs(v) <= tol_active)
    return ActiveSet(active, values, tol_active)
