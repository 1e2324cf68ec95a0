"""Command-line front end.

    fjcert certify   PROBLEM [--point "x=1,y=1"] [--format json]
    fjcert qualify   PROBLEM
    fjcert gradcheck PROBLEM [--tol 1e-6] [--seed N]
    fjcert farkas    MATRIX

Exit codes: 0 success (certificate emitted / all checks pass / Farkas
answered), 1 necessary condition or check refuted, 2 infeasible point or
domain error, 3 input error, 4 internal engine fault.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Sequence

from . import cone
from .cone import Combination, farkas_decide
from .engine import (DEFAULT_TOL_STAT, CertifyResult, EngineFault,
                     FJCertificate, full_certify, licq_check,
                     mfcq_witness_equality, mfcq_witness_inequality,
                     gradient_table, stationarity_residual,
                     verify_certificate)
from .expr import DomainError, fd_gradient, frechet_probe, gradient, to_string
from .problem import (DEFAULT_TOL_ACTIVE, DEFAULT_TOL_FEAS,
                      InfeasiblePointError, ProblemParseError,
                      detect_active_set, load_problem, parse_point)

EXIT_OK, EXIT_REFUTED, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_FAULT = range(5)


class InputError(Exception):
    pass


def rat(x) -> str:
    return str(Fraction(x))


def rats(xs) -> list[str]:
    return [rat(x) for x in xs]


# ---------------------------------------------------------------------------
# shared loading


def _load(args):
    try:
        with open(args.input, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc.strerror}") from None
    try:
        problem, point = load_problem(text)
        if args.point:
            point = parse_point(args.point, problem.variables)
    except ProblemParseError as exc:
        raise InputError(str(exc)) from None
    if point is None:
        raise InputError("no point given: add a 'point:' line or pass --point")
    return problem, point


def _emit(args, payload: dict, text: str):
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def _labels(problem):
    return (["objective"] + [c.label for c in problem.inequalities],
            [c.label for c in problem.equalities])


def _infeasible_payload(problem, point, report) -> dict:
    return {
        "problem": problem.describe(),
        "point": point,
        "status": "infeasible",
        "inequality_values": report.inequality_values,
        "equality_values": report.equality_values,
        "worst_inequality_violation": report.worst_inequality,
        "worst_equality_violation": report.worst_equality,
        "tol_feas": report.tolerance,
    }


def _witness_json(w):
    if w is None:
        return None, None
    if w.vacuous:
        return rats(w.v), None
    return rats(w.v), rat(w.margin)


# ---------------------------------------------------------------------------
# certify


def certificate_from_json(payload: dict) -> FJCertificate:
    """Rebuild the reported certificate from a ``certify --format json`` report."""
    return FJCertificate(
        tuple(Fraction(s) for s in payload["lambda"]),
        tuple(Fraction(s) for s in payload["mu"]),
        payload.get("normalization", "raw"),
        payload.get("regime", "direct"),
        dict(payload.get("flags", {})),
    )


def certify_report(res: CertifyResult, tol_stat: float) -> dict:
    pr = res.problem
    lam_labels, mu_labels = _labels(pr)
    witness, margin = _witness_json(res.qualification.witness)
    payload = {
        "problem": pr.describe(),
        "point": res.point,
        "status": "certified" if res.certified else "refuted",
        "active_set": {
            "active": [pr.inequalities[i].label for i in res.active.active],
            "values": {c.label: v for c, v in zip(pr.inequalities, res.active.values)},
            "tol_active": res.active.tolerance,
        },
        "qualifications": {
            "licq": res.qualification.licq,
            "rank": res.qualification.rank,
            "mfcq": res.qualification.mfcq,
            "mfcq_variant": res.qualification.mfcq_variant,
            "witness": witness,
            "witness_margin": margin,
            "witness_vacuous": bool(res.qualification.witness
                                    and res.qualification.witness.vacuous),
        },
        "lambda_labels": lam_labels,
        "mu_labels": mu_labels,
    }
    if not res.certified:
        ref = res.refutation
        payload.update({
            "regime": None,
            "lambda": None,
            "mu": None,
            "flags": {k: False for k in "abcde"},
            "refutation": {
                "reason": ref.reason,
                "ascent_direction": rats(ref.witness) if ref.witness else None,
            },
        })
        return payload

    cert = res.kkt or res.certificate
    exact = _exact_residual(res, cert)
    check = verify_certificate(pr, res.point, cert, tol_stat, res.active.tolerance)
    payload.update({
        "regime": cert.regime,
        "staircase_regime": res.staircase_regime,
        "normalization": cert.normalization,
        "lambda": rats(cert.lam),
        "mu": rats(cert.mu),
        "lambda_float": [float(v) for v in cert.lam],
        "mu_float": [float(v) for v in cert.mu],
        "flags": {k: bool(res.certificate.flags.get(k)) for k in "abcde"},
        "fritz_john": {
            "normalization": res.certificate.normalization,
            "lambda": rats(res.certificate.lam),
            "mu": rats(res.certificate.mu),
        },
        "residuals": {
            "exact": rats(exact),
            "finite_difference": list(check.residual),
            "finite_difference_norm": check.residual_norm,
            "tol_stat": tol_stat,
            "verified": check.passed,
        },
    })
    return payload


def _exact_residual(res: CertifyResult, cert: FJCertificate):
    table = res.table
    lam_local = (cert.lam[0],) + tuple(cert.lam[i + 1] for i in table.active)
    return stationarity_residual(table, lam_local, cert.mu)


def _certify_text(payload: dict) -> str:
    out = [f"status: {payload['status']}"]
    act = payload["active_set"]["active"]
    out.append(f"active set: {', '.join(act) if act else '(none)'}")
    if payload["status"] == "certified":
        extra = payload.get("staircase_regime")
        out.append(f"regime: {payload['regime']}" + (f" (staircase path: {extra})" if extra else ""))
        out.append(f"normalization: {payload['normalization']}")
        for label, v in zip(payload["lambda_labels"], payload["lambda"]):
            out.append(f"  lambda[{label}] = {v}")
        for label, v in zip(payload["mu_labels"], payload["mu"]):
            out.append(f"  mu[{label}] = {v}")
        out.append("flags: " + " ".join(f"{k}={'yes' if v else 'no'}"
                                        for k, v in payload["flags"].items()))
        r = payload["residuals"]
        zero = all(Fraction(s) == 0 for s in r["exact"])
        out.append(f"stationarity: exact residual {'0' if zero else r['exact']}, "
                   f"finite-difference residual {r['finite_difference_norm']:.3g}")
    else:
        ref = payload["refutation"]
        out.append(f"necessary condition fails: {ref['reason']}")
        if ref["ascent_direction"]:
            out.append(f"  ascent direction: ({', '.join(ref['ascent_direction'])})")
    q = payload["qualifications"]
    mf = {True: "yes", False: "no", None: "not evaluated"}[q["mfcq"]]
    out.append(f"LICQ: {'yes' if q['licq'] else 'no'} (rank {q['rank']}); MFCQ: {mf}")
    if q["witness_vacuous"]:
        out.append("  witness: vacuous (no active inequality)")
    elif q["witness"] is not None and q["mfcq"]:
        out.append(f"  witness: ({', '.join(q['witness'])})")
    return "\n".join(out)


def cmd_certify(args) -> int:
    problem, point = _load(args)
    try:
        res = full_certify(problem, point, args.tol_active, args.tol_feas)
    except InfeasiblePointError as exc:
        payload = _infeasible_payload(problem, point, exc.report)
        _emit(args, payload, f"status: infeasible\n{exc}")
        return EXIT_INFEASIBLE
    payload = certify_report(res, args.tol_stat)
    _emit(args, payload, _certify_text(payload))
    return EXIT_OK if res.certified else EXIT_REFUTED


# ---------------------------------------------------------------------------
# qualify


def cmd_qualify(args) -> int:
    problem, point = _load(args)
    try:
        active = detect_active_set(problem, point, args.tol_active, args.tol_feas)
    except InfeasiblePointError as exc:
        payload = _infeasible_payload(problem, point, exc.report)
        _emit(args, payload, f"status: infeasible\n{exc}")
        return EXIT_INFEASIBLE
    table = gradient_table(problem, point, active)
    licq, rank = licq_check(table.equalities, table.n)
    mfcq = None
    witness = None
    if licq:
        if table.q:
            witness = mfcq_witness_equality(table.inequalities, table.equalities, table.n)
        else:
            witness = mfcq_witness_inequality(table.inequalities, table.n)
        mfcq = witness is not None
    w, margin = _witness_json(witness)
    payload = {
        "problem": problem.describe(),
        "point": point,
        "active_set": [problem.inequalities[i].label for i in active.active],
        "licq": licq,
        "rank": rank,
        "mfcq": mfcq,
        "mfcq_variant": "equality-kernel" if table.q else "active-gradients",
        "witness": w,
        "witness_margin": margin,
        "witness_vacuous": bool(witness and witness.vacuous),
    }
    mf = {True: "yes", False: "no", None: "not evaluated (LICQ fails)"}[mfcq]
    text = [f"active set: {', '.join(payload['active_set']) or '(none)'}",
            f"LICQ: {'yes' if licq else 'no'} (rank {rank} of {table.q})",
            f"MFCQ: {mf}"]
    if mfcq and witness.vacuous:
        text.append("  witness: vacuous (no active inequality)")
    elif mfcq:
        text.append(f"  witness: ({', '.join(w)}), margin {margin}")
    _emit(args, payload, "\n".join(text))
    return EXIT_OK if licq and mfcq else EXIT_REFUTED


# ---------------------------------------------------------------------------
# gradcheck


def cmd_gradcheck(args) -> int:
    problem, point = _load(args)
    functions = [("objective", problem.objective)]
    functions += [(c.label, c.expr) for c in problem.inequalities]
    functions += [(c.label, c.expr) for c in problem.equalities]
    rows = []
    ok = True
    try:
        for label, e in functions:
            ad = gradient(e, point)
            fd = fd_gradient(e, point, args.h)
            disc = max((abs(a - f) / (1.0 + abs(f)) for a, f in zip(ad, fd)), default=0.0)
            probe = frechet_probe(e, point, ad, args.radii, args.samples, args.seed,
                                  args.probe_tol)
            passed = disc <= args.tol and probe.passed
            ok &= passed
            rows.append({
                "function": label,
                "expression": to_string(e),
                "ad": list(ad),
                "fd": list(fd),
                "max_rel_discrepancy": disc,
                "probe_radii": list(probe.radii),
                "probe_ratios": list(probe.ratios),
                "probe_passed": probe.passed,
                "passed": passed,
            })
    except DomainError as exc:
        payload = {"status": "domain-error", "message": str(exc), "subtree": exc.subtree}
        _emit(args, payload, f"domain error: {exc}")
        return EXIT_INFEASIBLE
    payload = {"point": point, "tol": args.tol, "h": args.h, "seed": args.seed,
               "functions": rows, "passed": ok}
    lines = [f"{'function':<12} {'max rel AD/FD':>14}  {'probe ratios':<32} result"]
    for r in rows:
        ratios = ", ".join(f"{v:.2e}" for v in r["probe_ratios"])
        lines.append(f"{r['function']:<12} {r['max_rel_discrepancy']:>14.3e}  {ratios:<32} "
                     f"{'pass' if r['passed'] else 'FAIL'}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if ok else EXIT_REFUTED


# ---------------------------------------------------------------------------
# farkas


def parse_farkas_input(text: str):
    """``phi: 1, 0`` lines (any number) and one ``a: ...`` line."""
    phis, target = [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, body = line.partition(":")
        key = key.strip()
        if not sep or key not in ("phi", "a"):
            raise InputError(f"line {lineno}: expected 'phi: ...' or 'a: ...'")
        try:
            row = cone.as_linfunc(s for s in body.split(",") if s.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(f"line {lineno}: entries must be rationals or decimals") from None
        if key == "a":
            if target is not None:
                raise InputError(f"line {lineno}: target given twice")
            target = row
        else:
            phis.append(row)
    if target is None:
        raise InputError("missing 'a:' line")
    if not target:
        raise InputError("target must have at least one entry")
    if any(len(p) != len(target) for p in phis):
        raise InputError("ragged input: every row must have the target's dimension")
    return phis, target


def cmd_farkas(args) -> int:
    try:
        with open(args.input, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc.strerror}") from None
    phis, a = parse_farkas_input(text)
    cert = farkas_decide(phis, a)
    if isinstance(cert, Combination):
        payload = {"result": "combination", "lambda": rats(cert.lam)}
        text = f"combination: {', '.join(payload['lambda'])}"
    else:
        payload = {"result": "separator", "x": rats(cert.x)}
        text = f"separator: {', '.join(payload['x'])}"
    _emit(args, payload, text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _positive(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fjcert", description="Fritz John / KKT multiplier certificates")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="problem file")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--point", help='override the point, e.g. "x=1,y=2"')
    common.add_argument("--tol-active", type=_positive, default=DEFAULT_TOL_ACTIVE)
    common.add_argument("--tol-feas", type=_positive, default=DEFAULT_TOL_FEAS)
    common.add_argument("--tol-stat", type=_positive, default=DEFAULT_TOL_STAT)
    common.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("certify", parents=[common], help="compute a multiplier certificate")
    p.set_defaults(func=cmd_certify)
    p = sub.add_parser("qualify", parents=[common], help="check LICQ and MFCQ only")
    p.set_defaults(func=cmd_qualify)
    p = sub.add_parser("gradcheck", parents=[common],
                       help="compare AD gradients with finite differences")
    p.add_argument("--tol", type=_positive, default=1e-6,
                   help="relative AD/FD tolerance (default 1e-6)")
    p.add_argument("--h", type=_positive, default=1e-5, help="central-difference step")
    p.add_argument("--radii", type=_positive, nargs="+", default=[1e-2, 1e-3, 1e-4])
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--probe-tol", type=_positive, default=1e-3)
    p.set_defaults(func=cmd_gradcheck)
    p = sub.add_parser("farkas", help="decide cone membership for a matrix file")
    p.add_argument("input", help="file with 'phi:' rows and an 'a:' row")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_farkas)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EngineFault as exc:
        print(f"engine fault: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
