"""Fritz John / KKT multiplier certificates.

Gradients come from forward-mode AD in floats and are rationalized
exactly; all multiplier algebra downstream is exact, so every emitted
certificate has a stationarity residual of exactly zero against the
rationalized gradients.

Multipliers are indexed with 0 for the objective and ``1..`` for the
inequalities of whatever gradient table they were computed for.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

from . import cone
from .cone import (Combination, StrictWitness, as_linfunc, dot, farkas_decide,
                   nullspace_basis, rank_independent, solve_lp, solve_square,
                   strict_feasibility)
from .expr import evaluate, fd_gradient, gradient
from .problem import (DEFAULT_TOL_ACTIVE, DEFAULT_TOL_FEAS, ActiveSet, Problem,
                      detect_active_set)

__all__ = [
    "DEFAULT_TOL_STAT", "LICQError", "ContractViolation", "EngineFault",
    "GradientTable", "FJCertificate", "Refutation", "QualificationReport",
    "ReducedProblem", "CertifyResult", "VerificationReport",
    "gradient_table", "stationarity_residual", "exact_flags",
    "normalize_maxnorm", "fj_inequality_direct", "fj_inequality_staircase",
    "mfcq_witness_inequality", "normalize_lambda0", "reduce_equalities",
    "recover_mu", "licq_check", "mfcq_witness_equality", "certify_gradients",
    "full_certify",
    "verify_certificate",
]

DEFAULT_TOL_STAT = 1e-6


class LICQError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


class EngineFault(RuntimeError):
    """Internal cross-check failed; never silently resolved."""


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class GradientTable:
    objective: tuple
    inequalities: tuple = ()  # active inequality gradients only
    equalities: tuple = ()
    active: tuple = ()  # original (0-based) index of each active inequality
    p: int | None = None  # total inequality count in the source problem

    def __post_init__(self):
        object.__setattr__(self, "objective", as_linfunc(self.objective))
        object.__setattr__(self, "inequalities", tuple(as_linfunc(g) for g in self.inequalities))
        object.__setattr__(self, "equalities", tuple(as_linfunc(h) for h in self.equalities))
        if not self.active:
            object.__setattr__(self, "active", tuple(range(len(self.inequalities))))
        if self.p is None:
            object.__setattr__(self, "p", len(self.inequalities))
        n = len(self.objective)
        if any(len(r) != n for r in self.inequalities + self.equalities):
            raise cone.DimensionError("gradients of differing dimensions")
        if len(self.active) != len(self.inequalities):
            raise ValueError("one active index per inequality gradient")

    @property
    def n(self) -> int:
        return len(self.objective)

    @property
    def e(self) -> int:
        return len(self.inequalities)

    @property
    def q(self) -> int:
        return len(self.equalities)


@dataclass(frozen=True)
class FJCertificate:
    lam: tuple
    mu: tuple = ()
    normalization: str = "raw"  # raw, sum-one, maxnorm-one, lambda0-one
    regime: str = "direct"
    flags: Mapping[str, bool] = field(default_factory=dict, compare=False)
    k: int | None = None  # staircase pivot index, when regime == "staircase"


@dataclass(frozen=True)
class Refutation:
    """No Fritz John multipliers exist at these gradients.

    ``witness`` (when known) is a direction on which every listed
    gradient is strictly positive.
    """

    reason: str
    witness: tuple | None = None


@dataclass(frozen=True)
class ReducedProblem:
    basis: tuple  # spans the kernel of the equality gradients
    pivots: tuple  # coordinate axes spanning the complement
    objective: tuple  # objective gradient in basis coordinates
    inequalities: tuple

    @property
    def dim(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class QualificationReport:
    licq: bool
    rank: int
    mfcq: bool | None  # None when not evaluated (LICQ fails)
    witness: StrictWitness | None
    mfcq_variant: str  # "active-gradients" (no equalities) or "equality-kernel"


# ---------------------------------------------------------------------------
# helpers


def gradient_table(pr: Problem, x: Mapping[str, float], active: ActiveSet) -> GradientTable:
    obj = gradient(pr.objective, x)
    ineq = [gradient(pr.inequalities[i].expr, x) for i in active.active]
    eq = [gradient(c.expr, x) for c in pr.equalities]
    return GradientTable(obj, tuple(ineq), tuple(eq), tuple(active.active), pr.p)


def stationarity_residual(table: GradientTable, lam: Sequence, mu: Sequence = ()) -> tuple:
    """lam0*Dphi + sum lam_i*Dg_i + sum mu_j*Dh_j, exactly."""
    if len(lam) != table.e + 1 or len(mu) != table.q:
        raise cone.DimensionError("multiplier lengths do not match the gradient table")
    rows = (table.objective,) + table.inequalities + table.equalities
    coeffs = tuple(lam) + tuple(mu)
    return tuple(sum((c * r[j] for c, r in zip(coeffs, rows)), Fraction(0))
                 for j in range(table.n))


def exact_flags(table: GradientTable, lam: Sequence, mu: Sequence = ()) -> dict:
    """Conclusions (a)..(d) checked exactly on a table of active gradients.

    (b) holds by construction here: the table only carries active
    constraints, so inactive multipliers are structurally zero.
    """
    nonneg = all(l >= 0 for l in lam)
    return {
        "a": any(v != 0 for v in tuple(lam) + tuple(mu)),
        "b": nonneg,
        "c": all(r == 0 for r in stationarity_residual(table, lam, mu)),
        "d": any(l != 0 for l in lam),
    }


def normalize_maxnorm(lam: Sequence, mu: Sequence = ()) -> tuple[tuple, tuple]:
    """Scale so the largest |entry| is 1.

    A positive factor is used whenever some lam is nonzero (lam >= 0 must
    survive); with lam all zero the sign is chosen so the first largest
    entry becomes +1.
    """
    entries = list(lam) + list(mu)
    big = max((abs(v) for v in entries), default=Fraction(0))
    if big == 0:
        raise ValueError("cannot normalize the zero multiplier")
    scale = 1 / Fraction(big)
    if all(l == 0 for l in lam):
        first = next(v for v in entries if abs(v) == big)
        if first < 0:
            scale = -scale
    return tuple(l * scale for l in lam), tuple(m * scale for m in mu)


def _lift(coords: Sequence, basis: Sequence) -> tuple:
    n = len(basis[0]) if basis else 0
    return tuple(sum((c * b[j] for c, b in zip(coords, basis)), Fraction(0)) for j in range(n))


def _dim(objective, grads, dim):
    n = len(objective) if dim is None else dim
    if len(objective) != n or any(len(g) != n for g in grads):
        raise cone.DimensionError("gradients of differing dimensions")
    return n


# ---------------------------------------------------------------------------
# inequality-only engines


def _interior(objective) -> FJCertificate | Refutation:
    if any(c != 0 for c in objective):
        return Refutation("objective gradient is nonzero and no constraint is active")
    return FJCertificate((Fraction(1),), normalization="lambda0-one", regime="interior")


def fj_inequality_direct(objective, grads: Sequence = (), dim: int | None = None
                         ) -> FJCertificate | Refutation:
    """Find lam >= 0 with sum(lam) = 1 and lam0*f0' + sum lam_i*f_i' = 0.

    One exact phase-1 simplex solve.  On failure the LP's dual ray gives a
    direction that increases the objective and every active constraint.
    """
    objective = as_linfunc(objective)
    grads = [as_linfunc(g) for g in grads]
    n = _dim(objective, grads, dim)
    if not grads:
        return _interior(objective)
    if n == 0:
        lam = (Fraction(1),) + (Fraction(0),) * len(grads)
        return FJCertificate(lam, normalization="lambda0-one", regime="direct")
    fs = [objective] + grads
    A = [[f[j] for f in fs] for j in range(n)] + [[1] * len(fs)]
    b = [0] * n + [1]
    res = solve_lp(A, b, [0] * len(fs))
    if res.status != "optimal":
        w = tuple(-y for y in res.farkas_ray[:n])
        assert all(dot(f, w) > 0 for f in fs)
        return Refutation("no nonnegative combination of the gradients vanishes",
                          cone._scale_inf(w))
    return FJCertificate(res.x, normalization="sum-one", regime="direct")


def fj_inequality_staircase(objective, grads: Sequence = (), dim: int | None = None
                            ) -> FJCertificate | Refutation:
    """The nested open-cone construction.

    With f_0 the objective and f_1..f_e the active constraints, let A_k be
    the set of v with f_i'.v > 0 for all i >= k.  A_0 must be empty (else
    refute).  If A_e is empty then f_e' = 0 and lam_e = 1.  Otherwise take
    the smallest k >= 1 with A_k nonempty: then -f_{k-1}' lies in the cone
    of f_k'..f_e' and lam = (0,..,0, 1, alpha_k, .., alpha_e).
    """
    objective = as_linfunc(objective)
    grads = [as_linfunc(g) for g in grads]
    n = _dim(objective, grads, dim)
    if not grads:
        return _interior(objective)
    fs = [objective] + grads
    e = len(grads)
    nonempty = [strict_feasibility(fs[i:], n) for i in range(e + 1)]
    for i in range(e):
        if nonempty[i] is not None and nonempty[i + 1] is None:
            raise EngineFault(f"nested cones not monotone at index {i}")
    if nonempty[0] is not None:
        return Refutation("some direction increases the objective and every active constraint",
                          nonempty[0].v)
    zero = Fraction(0)
    if nonempty[e] is None:
        if any(c != 0 for c in fs[e]):
            raise EngineFault("last open cone empty but its gradient is nonzero")
        lam = (zero,) * e + (Fraction(1),)
        return FJCertificate(lam, regime="degenerate")
    k = next(i for i in range(1, e + 1) if nonempty[i] is not None)
    cert = farkas_decide(fs[k:], tuple(-c for c in fs[k - 1]))
    if not isinstance(cert, Combination):
        raise EngineFault("cone step returned a separator where a combination must exist")
    lam = (zero,) * (k - 1) + (Fraction(1),) + tuple(cert.lam)
    return FJCertificate(lam, regime="staircase", k=k)


def mfcq_witness_inequality(grads: Sequence, dim: int | None = None) -> StrictWitness | None:
    """w with g'.w > 0 for every active gradient, or None if there is none."""
    grads = [as_linfunc(g) for g in grads]
    if dim is None and not grads:
        raise cone.DimensionError("dimension required for an empty family")
    return strict_feasibility(grads, dim)


def normalize_lambda0(cert: FJCertificate, objective, grads: Sequence = (),
                      dim: int | None = None) -> FJCertificate:
    """Recompute the certificate with the objective multiplier fixed to 1.

    Requires a strictly feasible direction for the active gradients.
    """
    objective = as_linfunc(objective)
    grads = [as_linfunc(g) for g in grads]
    n = _dim(objective, grads, dim)
    if grads and mfcq_witness_inequality(grads, n) is None:
        raise ContractViolation("lambda0 = 1 needs a strictly feasible direction")
    if len(cert.lam) != len(grads) + 1:
        raise cone.DimensionError("certificate does not match the gradients")
    one = Fraction(1)
    if not grads:
        if any(c != 0 for c in objective):
            raise EngineFault("interior certificate with nonzero objective gradient")
        return replace(cert, lam=(one,), normalization="lambda0-one")
    if n == 0:
        return replace(cert, lam=(one,) + (Fraction(0),) * len(grads),
                       normalization="lambda0-one")
    combo = farkas_decide(grads, tuple(-c for c in objective))
    if not isinstance(combo, Combination):
        raise EngineFault("certificate exists under MFCQ but lambda0 = 1 has no solution")
    return replace(cert, lam=(one,) + tuple(combo.lam), normalization="lambda0-one", k=None)


# ---------------------------------------------------------------------------
# equality constraints


def licq_check(eq_grads: Sequence, dim: int | None = None) -> tuple[bool, int]:
    return rank_independent([as_linfunc(h) for h in eq_grads], dim)


def reduce_equalities(table: GradientTable) -> ReducedProblem:
    """Restrict the objective and inequality gradients to the kernel of Dh.

    The complement is spanned by the pivot axes of the elimination, so the
    pivot columns of Dh form an invertible q x q block.
    """
    ok, rank = licq_check(table.equalities, table.n)
    if not ok:
        raise LICQError(f"equality gradients are dependent (rank {rank} < {table.q})")
    basis, pivots = nullspace_basis(list(table.equalities), table.n)

    def project(g):
        return tuple(dot(g, b) for b in basis)

    return ReducedProblem(tuple(basis), tuple(pivots), project(table.objective),
                          tuple(project(g) for g in table.inequalities))


def recover_mu(lam: Sequence, table: GradientTable, red: ReducedProblem) -> tuple:
    """Equality multipliers from a solution of the reduced stationarity system.

    On the complement axes, solve (D2h)^T mu = -(lam0*D2phi + sum lam_i*D2g_i).
    """
    if len(lam) != table.e + 1:
        raise cone.DimensionError("lambda length does not match the table")
    reduced = tuple(sum((l * g[k] for l, g in zip(lam, (red.objective,) + red.inequalities)),
                        Fraction(0)) for k in range(red.dim))
    if any(r != 0 for r in reduced):
        raise ValueError("lambda does not solve the reduced stationarity system")
    c = stationarity_residual(table, lam, (Fraction(0),) * table.q)
    pv = red.pivots
    matrix = [[table.equalities[j][pv[k]] for j in range(table.q)] for k in range(len(pv))]
    try:
        mu = solve_square(matrix, [-c[p] for p in pv])
    except cone.SingularMatrixError as exc:  # pragma: no cover - pivots are invertible
        raise EngineFault(str(exc)) from exc
    if any(r != 0 for r in stationarity_residual(table, lam, mu)):
        raise EngineFault("recovered multipliers leave a nonzero residual")
    return mu


def mfcq_witness_equality(ineq_grads: Sequence, eq_grads: Sequence,
                          dim: int | None = None) -> StrictWitness | None:
    """w in Ker Dh with g'.w > 0 for every active gradient, or None."""
    ineq = [as_linfunc(g) for g in ineq_grads]
    eq = [as_linfunc(h) for h in eq_grads]
    n = dim if dim is not None else len((ineq + eq)[0])
    if not ineq:
        return strict_feasibility([], n)
    ok, rank = licq_check(eq, n)
    if not ok:
        raise LICQError(f"equality gradients are dependent (rank {rank} < {len(eq)})")
    basis, _ = nullspace_basis(eq, n)
    projected = [tuple(dot(g, b) for b in basis) for g in ineq]
    sw = strict_feasibility(projected, len(basis))
    if sw is None:
        return None
    w = cone._scale_inf(_lift(sw.v, basis))
    out = StrictWitness(w, min(dot(g, w) for g in ineq))
    assert out.verify(ineq) and all(dot(h, w) == 0 for h in eq)
    return out


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class CertifyResult:
    table: GradientTable
    qualification: QualificationReport
    certificate: FJCertificate | None = None  # full length p+1, max-norm scaled
    kkt: FJCertificate | None = None  # lambda0 = 1, when MFCQ holds
    refutation: Refutation | None = None
    direct: FJCertificate | Refutation | None = None  # on the reduced problem
    staircase: FJCertificate | Refutation | None = None
    problem: Problem | None = None
    point: dict | None = None
    active: ActiveSet | None = None

    @property
    def certified(self) -> bool:
        return self.certificate is not None

    @property
    def staircase_regime(self) -> str | None:
        return getattr(self.staircase, "regime", None)


def _expand(lam_local: Sequence, table: GradientTable) -> tuple:
    full = [Fraction(0)] * (table.p + 1)
    full[0] = lam_local[0]
    for l, i in zip(lam_local[1:], table.active):
        full[i + 1] = l
    return tuple(full)


def _check_reduced(cert, red: ReducedProblem, name: str):
    if isinstance(cert, Refutation):
        return
    sub = GradientTable(red.objective, red.inequalities) if red.dim else None
    ok = (all(l >= 0 for l in cert.lam) and any(l != 0 for l in cert.lam)
          and (sub is None or all(r == 0 for r in stationarity_residual(sub, cert.lam))))
    if not ok:
        raise EngineFault(f"{name} certificate fails its exact checks")


def certify_gradients(table: GradientTable) -> CertifyResult:
    """Multipliers for a table of active gradients.

    Dependent equality gradients give a pure-mu certificate.  Otherwise the
    problem is restricted to the kernel of the equality gradients, both
    inequality algorithms run there and must agree, mu is recovered on the
    complement, and the lambda0 = 1 form is added when MFCQ holds.
    """
    licq, rank = licq_check(table.equalities, table.n)
    variant = "equality-kernel" if table.q else "active-gradients"

    if not licq:
        cols = [[h[i] for h in table.equalities] for i in range(table.n)]
        basis, _ = nullspace_basis(cols, table.q)
        lam_local = (Fraction(0),) * (table.e + 1)
        mu = basis[0]
        if any(r != 0 for r in stationarity_residual(table, lam_local, mu)):
            raise EngineFault("dependent-equality combination does not vanish")
        lam, mu = normalize_maxnorm(_expand(lam_local, table), mu)
        flags = {**exact_flags(table, lam_local, mu), "e": False}
        qual = QualificationReport(False, rank, None, None, variant)
        cert = FJCertificate(lam, mu, "maxnorm-one", "dependent-equalities", flags)
        return CertifyResult(table, qual, certificate=cert)

    red = reduce_equalities(table)
    direct = fj_inequality_direct(red.objective, red.inequalities, red.dim)
    stair = fj_inequality_staircase(red.objective, red.inequalities, red.dim)
    if isinstance(direct, Refutation) != isinstance(stair, Refutation):
        raise EngineFault("direct and staircase algorithms disagree on existence")
    _check_reduced(direct, red, "direct")
    _check_reduced(stair, red, "staircase")

    if table.q:
        witness = mfcq_witness_equality(table.inequalities, table.equalities, table.n)
    else:
        witness = mfcq_witness_inequality(table.inequalities, table.n)
    qual = QualificationReport(True, rank, witness is not None, witness, variant)

    if isinstance(direct, Refutation):
        w = _lift(direct.witness, red.basis) if direct.witness is not None else None
        ref = Refutation(direct.reason, cone._scale_inf(w) if w else None)
        return CertifyResult(table, qual, refutation=ref, direct=direct, staircase=stair)

    mu = recover_mu(direct.lam, table, red)
    lam, mu_n = normalize_maxnorm(_expand(direct.lam, table), mu)
    kkt = None
    if witness is not None:
        k_local = normalize_lambda0(direct, red.objective, red.inequalities, red.dim)
        k_mu = recover_mu(k_local.lam, table, red)
        kflags = {**exact_flags(table, k_local.lam, k_mu), "e": True}
        kkt = FJCertificate(_expand(k_local.lam, table), k_mu, "lambda0-one",
                            direct.regime, kflags)
    flags = {**exact_flags(table, direct.lam, mu), "e": kkt is not None}
    if not (flags["a"] and flags["b"] and flags["c"]):
        raise EngineFault(f"emitted certificate fails exact checks: {flags}")
    cert = FJCertificate(lam, mu_n, "maxnorm-one", direct.regime, flags)
    return CertifyResult(table, qual, certificate=cert, kkt=kkt, direct=direct,
                         staircase=stair)


def full_certify(pr: Problem, x: Mapping[str, float],
                 tol_active: float = DEFAULT_TOL_ACTIVE,
                 tol_feas: float = DEFAULT_TOL_FEAS) -> CertifyResult:
    """Feasibility, active set, AD gradients, then :func:`certify_gradients`.

    Raises :class:`~fjcert.problem.InfeasiblePointError` for infeasible
    points and :class:`EngineFault` if the two inequality algorithms
    disagree.
    """
    x = {v: float(x[v]) for v in pr.variables}
    active = detect_active_set(pr, x, tol_active, tol_feas)
    table = gradient_table(pr, x, active)
    return replace(certify_gradients(table), problem=pr, point=x, active=active)


# ---------------------------------------------------------------------------
# independent verification


@dataclass(frozen=True)
class VerificationReport:
    wellformed: bool
    a: bool
    b: bool
    c: bool
    d: bool
    e: bool
    residual: tuple  # floats, one per variable
    residual_norm: float
    tol_stat: float

    @property
    def passed(self) -> bool:
        return self.wellformed and self.a and self.b and self.c


def verify_certificate(pr: Problem, x: Mapping[str, float], cert: FJCertificate,
                       tol_stat: float = DEFAULT_TOL_STAT,
                       tol_active: float = DEFAULT_TOL_ACTIVE,
                       h: float = 1e-5) -> VerificationReport:
    """Re-check (a), (b), (c) with central-difference gradients (no AD)."""
    x = {v: float(x[v]) for v in pr.variables}
    lam = [float(l) for l in cert.lam]
    mu = [float(m) for m in cert.mu]
    wellformed = (len(lam) == pr.p + 1 and len(mu) == pr.q
                  and all(Fraction(l) >= 0 for l in cert.lam))
    if not wellformed:
        return VerificationReport(False, False, False, False, False, False, (),
                                  float("inf"), tol_stat)
    grads = [fd_gradient(pr.objective, x, h)]
    grads += [fd_gradient(c.expr, x, h) for c in pr.inequalities]
    grads += [fd_gradient(c.expr, x, h) for c in pr.equalities]
    coeffs = lam + mu
    residual = tuple(sum(c * g[j] for c, g in zip(coeffs, grads)) for j in range(pr.n))
    norm = max((abs(r) for r in residual), default=0.0)
    slack_ok = all(l == 0 or abs(evaluate(c.expr, x)) <= tol_active
                   for l, c in zip(cert.lam[1:], pr.inequalities))
    return VerificationReport(
        wellformed=True,
        a=any(v != 0 for v in tuple(cert.lam) + tuple(cert.mu)),
        b=slack_ok,
        c=norm <= tol_stat,
        d=any(l != 0 for l in cert.lam),
        e=Fraction(cert.lam[0]) == 1,
        residual=residual,
        residual_norm=norm,
        tol_stat=tol_stat,
    )
