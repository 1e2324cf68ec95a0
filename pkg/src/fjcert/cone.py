"""Exact rational linear algebra and cone decisions.

Everything runs on :class:`fractions.Fraction`.  Floats are converted
exactly (every finite binary float is a rational), so the Farkas
alternative is decided without tolerances: a combination reproduces the
target with zero residual, a separator satisfies its sign conditions
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from numbers import Rational
from typing import Iterable, Sequence, Union

__all__ = [
    "LinFunc", "to_rational", "as_linfunc", "dot", "DimensionError",
    "SingularMatrixError", "SimplexIterationError", "DimensionGuardError",
    "LPResult", "solve_lp", "Combination", "Separator", "ConeCertificate",
    "StrictWitness", "farkas_decide", "find_combination", "find_separator",
    "strict_feasibility", "rref", "nullspace_basis", "rank_independent",
    "solve_square", "fm_oracle", "fm_strict_empty",
]

LinFunc = tuple  # tuple[Fraction, ...]; a row functional on R^n


class DimensionError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    def __init__(self, rank: int, size: int):
        super().__init__(f"matrix is singular (rank {rank} < {size})")
        self.rank = rank
        self.size = size


class SimplexIterationError(RuntimeError):
    pass


class DimensionGuardError(ValueError):
    pass


def to_rational(x) -> Fraction:
    """Exact conversion of ints, floats, Fractions and "p/q" / decimal strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, float):
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError(f"cannot rationalize non-finite value {x!r}")
        return Fraction(x)
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot rationalize {type(x).__name__}")


def as_linfunc(coeffs: Iterable) -> LinFunc:
    return tuple(to_rational(c) for c in coeffs)


def dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def _common_dim(rows: Sequence[Sequence], dim: int | None = None) -> int:
    dims = {len(r) for r in rows}
    if dim is not None:
        dims.add(dim)
    if len(dims) > 1:
        raise DimensionError(f"functionals of differing dimensions {sorted(dims)}")
    if not dims:
        raise DimensionError("dimension cannot be inferred from an empty family")
    return dims.pop()


# ---------------------------------------------------------------------------
# simplex


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible", "unbounded"
    x: tuple | None = None
    value: Fraction | None = None
    # for "infeasible": y with y.A <= 0 componentwise and y.b > 0
    farkas_ray: tuple | None = None
    iterations: int = 0


class _Tableau:
    def __init__(self, rows, rhs, basis, cost_row, cost_rhs, limit):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.cost = cost_row
        self.cost_rhs = cost_rhs  # equals -(objective value)
        self.iterations = 0
        self.limit = limit

    def pivot(self, r: int, c: int):
        row = self.rows[r]
        piv = row[c]
        self.rows[r] = row = [a / piv for a in row]
        self.rhs[r] /= piv
        for i, other in enumerate(self.rows):
            f = other[c]
            if i != r and f:
                self.rows[i] = [a - f * b for a, b in zip(other, row)]
                self.rhs[i] -= f * self.rhs[r]
        f = self.cost[c]
        if f:
            self.cost = [a - f * b for a, b in zip(self.cost, row)]
            self.cost_rhs -= f * self.rhs[r]
        self.basis[r] = c

    def run(self, allowed: int) -> bool:
        """Bland's rule on columns < allowed.  Returns False if unbounded."""
        while True:
            enter = next((j for j in range(allowed) if self.cost[j] < 0), None)
            if enter is None:
                return True
            best = None
            for i, row in enumerate(self.rows):
                if row[enter] > 0:
                    key = (self.rhs[i] / row[enter], self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return False
            self.iterations += 1
            if self.iterations > self.limit:
                raise SimplexIterationError(
                    f"simplex exceeded {self.limit} pivots; Bland's rule should prevent this")
            self.pivot(best[1], enter)


def solve_lp(A: Sequence[Sequence], b: Sequence, c: Sequence) -> LPResult:
    """Minimize c.z subject to A z = b, z >= 0, exactly (two-phase simplex)."""
    A = [[to_rational(v) for v in row] for row in A]
    b = [to_rational(v) for v in b]
    c = [to_rational(v) for v in c]
    m, N = len(A), len(c)
    if len(b) != m or any(len(row) != N for row in A):
        raise DimensionError("inconsistent LP dimensions")
    # per-phase pivot bound; Bland's rule keeps every run far below it
    limit = 2 ** (m + N)

    sign = [(-1 if bi < 0 else 1) for bi in b]
    rows = [[s * v for v in row] + [Fraction(int(i == r)) for i in range(m)]
            for r, (s, row) in enumerate(zip(sign, A))]
    rhs = [s * bi for s, bi in zip(sign, b)]
    cost = [-sum((rows[r][j] for r in range(m)), Fraction(0)) for j in range(N)]
    cost += [Fraction(0)] * m
    t = _Tableau(rows, rhs, [N + r for r in range(m)], cost,
                 -sum(rhs, Fraction(0)), limit)
    t.run(N + m)

    if t.cost_rhs < 0:
        # phase-1 optimum positive; duals of the artificial rows give a ray
        y = tuple(s * (1 - t.cost[N + r]) for r, s in enumerate(sign))
        return LPResult("infeasible", farkas_ray=y, iterations=t.iterations)

    # drive zero-level artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(t.rows):
        if t.basis[r] >= N:
            col = next((j for j in range(N) if t.rows[r][j] != 0), None)
            if col is None:
                del t.rows[r], t.rhs[r], t.basis[r]
                continue
            t.pivot(r, col)
        r += 1
    t.rows = [row[:N] for row in t.rows]
    t.cost = [c[j] - sum((c[t.basis[i]] * t.rows[i][j] for i in range(len(t.rows))), Fraction(0))
              for j in range(N)]
    t.cost_rhs = -sum((c[t.basis[i]] * t.rhs[i] for i in range(len(t.rows))), Fraction(0))
    phase1 = t.iterations
    t.iterations = 0
    bounded = t.run(N)
    t.iterations += phase1
    if not bounded:
        return LPResult("unbounded", iterations=t.iterations)
    x = [Fraction(0)] * N
    for i, j in enumerate(t.basis):
        x[j] = t.rhs[i]
    return LPResult("optimal", x=tuple(x), value=-t.cost_rhs, iterations=t.iterations)


# ---------------------------------------------------------------------------
# Farkas alternative


@dataclass(frozen=True)
class Combination:
    """``a = sum(lam[i] * phis[i])`` with every ``lam[i] >= 0``."""

    lam: tuple

    def verify(self, phis: Sequence[LinFunc], a: LinFunc) -> bool:
        if len(self.lam) != len(phis) or any(l < 0 for l in self.lam):
            return False
        n = len(a)
        combo = [sum((l * phi[j] for l, phi in zip(self.lam, phis)), Fraction(0))
                 for j in range(n)]
        return all(cj == aj for cj, aj in zip(combo, a))


@dataclass(frozen=True)
class Separator:
    """``phi.x >= 0`` for every phi and ``a.x < 0``."""

    x: tuple

    def verify(self, phis: Sequence[LinFunc], a: LinFunc) -> bool:
        if len(self.x) != len(a):
            return False
        return all(dot(phi, self.x) >= 0 for phi in phis) and dot(a, self.x) < 0


ConeCertificate = Union[Combination, Separator]


def _prepare(phis, a):
    a = as_linfunc(a)
    phis = [as_linfunc(p) for p in phis]
    n = _common_dim(phis + [a])
    if n < 1:
        raise DimensionError("ambient dimension must be at least 1")
    return phis, a, n


def _scale_inf(v: Sequence[Fraction]) -> tuple:
    big = max((abs(x) for x in v), default=Fraction(0))
    return tuple(v) if big == 0 else tuple(x / big for x in v)


def find_combination(phis, a) -> Combination | None:
    """Phase-1 search for lam >= 0 with sum lam_i phi_i = a."""
    phis, a, n = _prepare(phis, a)
    A = [[phi[j] for phi in phis] for j in range(n)]
    res = solve_lp(A, a, [0] * len(phis))
    if res.status != "optimal":
        return None
    return Combination(res.x)


def find_separator(phis, a) -> Separator | None:
    """Minimize a.x over {phi.x >= 0, -1 <= x <= 1}; a negative optimum separates.

    Independent of :func:`farkas_decide`'s dual-ray construction.
    """
    phis, a, n = _prepare(phis, a)
    m = len(phis)
    # x = u - 1, u in [0, 2]; columns: u (n), t (n), slack (m)
    A, b = [], []
    for i, phi in enumerate(phis):
        A.append(list(phi) + [0] * n + [-(k == i) for k in range(m)])
        b.append(sum(phi, Fraction(0)))
    for j in range(n):
        A.append([int(k == j) for k in range(n)] + [int(k == j) for k in range(n)] + [0] * m)
        b.append(2)
    res = solve_lp(A, b, list(a) + [0] * (n + m))
    if res.status != "optimal" or res.value - sum(a, Fraction(0)) >= 0:
        return None
    return Separator(tuple(u - 1 for u in res.x[:n]))


def farkas_decide(phis: Sequence, a) -> ConeCertificate:
    """Decide whether ``a`` lies in the cone generated by ``phis``.

    Returns a :class:`Combination` when it does and a :class:`Separator`
    otherwise.  The separator is read off the phase-1 dual and scaled to
    unit max-norm.
    """
    phis, a, n = _prepare(phis, a)
    A = [[phi[j] for phi in phis] for j in range(n)]
    res = solve_lp(A, a, [0] * len(phis))
    if res.status == "optimal":
        cert = Combination(res.x)
    else:
        cert = Separator(_scale_inf([-y for y in res.farkas_ray]))
    assert cert.verify(phis, a), "internal error: Farkas certificate failed verification"
    return cert


# ---------------------------------------------------------------------------
# strict feasibility of open polyhedral cones


@dataclass(frozen=True)
class StrictWitness:
    """``phi.v >= margin > 0`` for every phi, ``max|v_j| <= 1``.

    For an empty family the witness is vacuous: ``v = 0`` and ``margin``
    is ``None`` (read as +infinity).
    """

    v: tuple
    margin: Fraction | None
    vacuous: bool = False

    def verify(self, phis: Sequence[LinFunc]) -> bool:
        if self.vacuous:
            return not phis
        return (self.margin > 0 and all(abs(x) <= 1 for x in self.v)
                and all(dot(phi, self.v) >= self.margin for phi in phis))


def strict_feasibility(phis: Sequence, dim: int | None = None) -> StrictWitness | None:
    """Find v with phi.v > 0 for every phi, or prove there is none.

    Solved as: maximize s subject to phi.v >= s, -1 <= v <= 1, 0 <= s <= 1.
    The strict system is feasible exactly when the optimum s is positive.
    """
    phis = [as_linfunc(p) for p in phis]
    if not phis:
        if dim is None:
            raise DimensionError("dimension required for an empty family")
        return StrictWitness(tuple(Fraction(0) for _ in range(dim)), None, vacuous=True)
    n = _common_dim(phis, dim)
    m = len(phis)
    # columns: u (n), t (n), s, sigma, slack (m); v = u - 1
    A, b = [], []
    for i, phi in enumerate(phis):
        A.append(list(phi) + [0] * n + [-1, 0] + [-(k == i) for k in range(m)])
        b.append(sum(phi, Fraction(0)))
    for j in range(n):
        A.append([int(k == j) for k in range(n)] * 2 + [0, 0] + [0] * m)
        b.append(2)
    A.append([0] * (2 * n) + [1, 1] + [0] * m)
    b.append(1)
    res = solve_lp(A, b, [0] * (2 * n) + [-1, 0] + [0] * m)
    assert res.status == "optimal"
    if -res.value <= 0:
        return None
    v = tuple(u - 1 for u in res.x[:n])
    w = StrictWitness(v, min(dot(phi, v) for phi in phis))
    assert w.verify(phis)
    return w


# ---------------------------------------------------------------------------
# elimination


def rref(rows: Sequence[Sequence], ncols: int | None = None) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form (zero rows dropped) and pivot columns."""
    M = [[to_rational(v) for v in row] for row in rows]
    n = _common_dim(M, ncols)
    pivots: list[int] = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        piv = M[r][c]
        M[r] = [x / piv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    return M[:r], pivots


def nullspace_basis(rows: Sequence[Sequence], dim: int | None = None) -> tuple[list[tuple], list[int]]:
    """Basis of {v : row.v = 0 for all rows} and the pivot columns.

    One basis vector per free column ``f``: ``v[f] = 1`` and the pivot
    coordinates are read from the reduced rows.
    """
    R, pivots = rref(rows, dim)
    n = dim if not rows else len(rows[0])
    pivset = set(pivots)
    basis = []
    for f in range(n):
        if f in pivset:
            continue
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for row, p in zip(R, pivots):
            v[p] = -row[f]
        basis.append(tuple(v))
    return basis, pivots


def rank_independent(rows: Sequence[Sequence], dim: int | None = None) -> tuple[bool, int]:
    if not rows:
        return True, 0
    _, pivots = rref(rows, dim)
    return len(pivots) == len(rows), len(pivots)


def solve_square(matrix: Sequence[Sequence], rhs: Sequence) -> tuple:
    q = len(matrix)
    if len(rhs) != q or any(len(row) != q for row in matrix):
        raise DimensionError("solve_square needs a q x q matrix and a length-q rhs")
    aug = [list(row) + [b] for row, b in zip(matrix, rhs)]
    R, pivots = rref(aug, q + 1) if q else ([], [])
    if len(pivots) < q or (pivots and pivots[-1] == q):
        _, p = rref(matrix, q) if q else ([], [])
        raise SingularMatrixError(len(p), q)
    return tuple(row[q] for row in R)


# ---------------------------------------------------------------------------
# Fourier-Motzkin oracle

FM_MAX_DIM = 6


def _fm_normalize(coeffs: tuple) -> tuple:
    big = max((abs(c) for c in coeffs), default=Fraction(0))
    return coeffs if big == 0 else tuple(c / big for c in coeffs)


def _fm_empty(system: list[tuple[tuple, bool]], n: int) -> bool:
    """Emptiness of a homogeneous system of ``coeffs.x >= 0`` / ``> 0`` rows."""
    if n > FM_MAX_DIM:
        raise DimensionGuardError(f"Fourier-Motzkin limited to n <= {FM_MAX_DIM}, got {n}")
    rows = {(_fm_normalize(c), s) for c, s in system}
    for k in range(n):
        pos = [r for r in rows if r[0][k] > 0]
        neg = [r for r in rows if r[0][k] < 0]
        new = {r for r in rows if r[0][k] == 0}
        for (pc, ps), (nc, ns) in product(pos, neg):
            combo = tuple(-nc[k] * a + pc[k] * b for a, b in zip(pc, nc))
            new.add((_fm_normalize(combo), ps or ns))
        rows = set()
        for c, s in new:
            if all(x == 0 for x in c):
                if s:
                    return True
                continue
            rows.add((c, s))
        # drop non-strict rows that duplicate a strict one
        rows = {(c, s) for c, s in rows if s or (c, True) not in rows}
    return False


def fm_oracle(phis: Sequence, a) -> bool:
    """True iff {x : phi.x >= 0 for all phi, a.x < 0} is empty (so a is in the cone)."""
    phis, a, n = _prepare(phis, a)
    system = [(p, False) for p in phis] + [(tuple(-x for x in a), True)]
    return _fm_empty(system, n)


def fm_strict_empty(phis: Sequence, dim: int | None = None) -> bool:
    """True iff {x : phi.x > 0 for all phi} is empty."""
    phis = [as_linfunc(p) for p in phis]
    if not phis:
        return False
    n = _common_dim(phis, dim)
    return _fm_empty([(p, True) for p in phis], n)
