"""Acceptance criteria, one check per criterion.

Run with pytest (a summary line per criterion is printed at the end) or
directly: ``python tests/test_acceptance.py``.
"""

import random
import sys
import time
from fractions import Fraction as F
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fjcert.cone import (Combination, as_linfunc, farkas_decide,  # noqa: E402
                         find_combination, find_separator, fm_oracle)
from fjcert.engine import (FJCertificate, GradientTable, Refutation,  # noqa: E402
                           certify_gradients, exact_flags,
                           fj_inequality_direct, fj_inequality_staircase,
                           full_certify, mfcq_witness_inequality,
                           recover_mu, reduce_equalities, stationarity_residual,
                           verify_certificate)
from fjcert.expr import directional_derivative, fd_directional  # noqa: E402
from fjcert.problem import load_problem  # noqa: E402

from generators import (VARS, combine, expression_corpus,  # noqa: E402
                        farkas_instances, inequality_tables, licq_tables,
                        mfcq_tables, opposite_tables, problem_from_table,
                        random_point)

FARKAS_SUITE = farkas_instances(600, seed=2024)


def _exact(table, lam, mu=()):
    f = exact_flags(table, lam, mu)
    return f["a"] and f["b"] and f["c"]


def criterion_1():
    """Farkas variant matches Fourier-Motzkin; certificates exact."""
    bad = 0
    for phis, a in FARKAS_SUITE:
        cert = farkas_decide(phis, a)
        ok = isinstance(cert, Combination) == fm_oracle(phis, a)
        ok &= cert.verify([as_linfunc(p) for p in phis], as_linfunc(a))
        bad += not ok
    return bad == 0, f"{len(FARKAS_SUITE)} instances, {bad} mismatches"


def criterion_2():
    """The opposite certificate can never be constructed."""
    violations = 0
    for phis, a in FARKAS_SUITE:
        phis = [as_linfunc(p) for p in phis]
        a = as_linfunc(a)
        if isinstance(farkas_decide(phis, a), Combination):
            violations += find_separator(phis, a) is not None
        else:
            violations += find_combination(phis, a) is not None
    return violations == 0, f"{len(FARKAS_SUITE)} instances, {violations} violations"


def criterion_3():
    """AD vs central differences (h = 1e-5), relative error <= 1e-6."""
    rng = random.Random(99)
    corpus = expression_corpus(60, seed=5)
    worst, count = 0.0, 0
    for e in corpus:
        for _ in range(6):
            p = random_point(rng)
            v = [rng.uniform(-1, 1) for _ in VARS]
            ad = directional_derivative(e, p, v)
            fd = fd_directional(e, p, v, 1e-5)
            worst = max(worst, abs(ad - fd) / max(1.0, abs(fd)))
            count += 1
    return worst <= 1e-6, f"{len(corpus)} expressions x 6 points, max rel err {worst:.2e}"


def criterion_4():
    """Direct and staircase agree on existence; both exact; staircase shape."""
    tables = inequality_tables(240, seed=77)
    bad, zero_grad, certified = 0, 0, 0
    for t in tables:
        zero_grad += any(all(c == 0 for c in g) for g in t.inequalities)
        d = fj_inequality_direct(t.objective, t.inequalities, t.n)
        s = fj_inequality_staircase(t.objective, t.inequalities, t.n)
        ok = isinstance(d, Refutation) == isinstance(s, Refutation)
        for cert in (d, s):
            if isinstance(cert, FJCertificate):
                ok &= _exact(t, cert.lam)
        if isinstance(s, FJCertificate) and s.regime == "staircase":
            ok &= s.lam[s.k - 1] == 1 and all(l == 0 for l in s.lam[:s.k - 1])
        if isinstance(d, FJCertificate):
            certified += 1
            res = certify_gradients(t)
            pr, x = problem_from_table(t)
            ok &= verify_certificate(pr, x, res.certificate).passed
        bad += not ok
    return bad == 0, (f"{len(tables)} tables ({zero_grad} with zero gradients, "
                      f"{certified} certified), {bad} failures")


def criterion_5():
    """Textbook instances."""
    circle, x = load_problem("vars: x, y\nmaximize: x + y\n"
                             "h1: x^2 + y^2 - 2 == 0\npoint: x = 1, y = 1\n")
    r1 = full_certify(circle, x)
    ok1 = r1.kkt.lam == (1,) and r1.kkt.mu == (F(-1, 2),)
    box, x = load_problem("vars: x\nmaximize: x\ng1: 1 - x >= 0\npoint: x = 1\n")
    r2 = full_certify(box, x)
    ok2 = r2.qualification.mfcq and r2.kkt.lam == (1, 1)
    dep, x = load_problem("vars: x\nmaximize: x\nh1: x == 0\nh2: 2*x == 0\npoint: x = 0\n")
    c3 = full_certify(dep, x).certificate
    ok3 = (c3.regime == "dependent-equalities" and all(l == 0 for l in c3.lam)
           and c3.mu[0] * -1 == c3.mu[1] * 2 and c3.mu[0] != 0)
    return ok1 and ok2 and ok3, f"circle={ok1} box={ok2} dependent={ok3}"


def criterion_6():
    """Reduced stationarity plus recovered mu gives exact full stationarity."""
    tables = licq_tables(120, seed=606)
    bad, certified = 0, 0
    for t in tables:
        res = certify_gradients(t)
        if not res.certified:
            continue
        certified += 1
        red = reduce_equalities(t)
        mu = recover_mu(res.direct.lam, t, red)
        bad += any(r != 0 for r in stationarity_residual(t, res.direct.lam, mu))
    ok = bad == 0 and certified >= 100
    return ok, f"{len(tables)} LICQ tables, {certified} certified, {bad} nonzero residuals"


def criterion_7():
    """Planted MFCQ normalizes to lambda0 = 1; opposite gradients refute."""
    fails = 0
    planted = mfcq_tables(100, seed=707)
    for t, _ in planted:
        res = certify_gradients(t)
        fails += not (res.qualification.mfcq and res.kkt is not None
                      and res.kkt.lam[0] == 1 and _exact(t, res.kkt.lam, res.kkt.mu))
    opposite = opposite_tables(100, seed=708)
    missed = sum(mfcq_witness_inequality(t.inequalities, t.n) is not None for t in opposite)
    ok = fails == 0 and missed == 0
    return ok, (f"{len(planted)} MFCQ instances, {fails} normalization failures; "
                f"{len(opposite)} opposite-gradient instances, {missed} missed")


def criterion_8():
    """Rescale one active constraint by c; lambda_i / c re-verifies exactly."""
    rng = random.Random(808)
    done, bad = 0, 0
    pool = licq_tables(400, seed=809, integer=True)
    for t in pool:
        if done == 50:
            break
        if t.e == 0:
            continue
        res = certify_gradients(t)
        if not res.certified:
            continue
        done += 1
        i = rng.randrange(t.e)
        c = rng.choice([F(1, 3), F(2), F(7)])
        scaled = GradientTable(t.objective,
                               tuple(tuple(c * v for v in g) if j == i else g
                                     for j, g in enumerate(t.inequalities)),
                               t.equalities)
        lam = list(res.certificate.lam)
        lam[i + 1] /= c
        ok = _exact(scaled, lam, res.certificate.mu)
        ok &= all(r == 0 for r in stationarity_residual(scaled, lam, res.certificate.mu))
        pr, x = problem_from_table(scaled)
        ok &= verify_certificate(pr, x, FJCertificate(tuple(lam), res.certificate.mu)).passed
        bad += not ok
    return done == 50 and bad == 0, f"{done} rescaled instances, {bad} failures"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4,
            criterion_5, criterion_6, criterion_7, criterion_8]


def _line(num, ok, detail, seconds):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail} ({seconds:.2f}s)"


@pytest.mark.parametrize("num", range(1, 9))
def test_criterion(num):
    from conftest import ACCEPTANCE_LINES

    start = time.perf_counter()
    ok, detail = CRITERIA[num - 1]()
    ACCEPTANCE_LINES.append(_line(num, ok, detail, time.perf_counter() - start))
    assert ok, detail


if __name__ == "__main__":
    total = time.perf_counter()
    all_ok = True
    for num, crit in enumerate(CRITERIA, start=1):
        start = time.perf_counter()
        ok, detail = crit()
        all_ok &= ok
        print(_line(num, ok, detail, time.perf_counter() - start))
    print(f"total {time.perf_counter() - total:.1f}s")
    sys.exit(0 if all_ok else 1)
