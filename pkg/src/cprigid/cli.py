"""Command-line entry point.

``cprigid verify`` runs verification suites and writes a report;
``cprigid show`` prints one exact object.  Exit codes: 0 when every check
passes, 1 when any check fails, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from . import __version__
from .deformation_basis import BASIS_NAMES, l_inverse, l_matrix, solve_h0
from .exact import RatFn, RatMatrix
from .numeric_harness import FDConfig, MCConfig, RunParams, UnknownSuiteError, run_suites, suite_ids
from .obstruction import compute_i1, compute_i2, total_obstruction
from .product_rigidity import ProductConfig, product_obstruction
from .scalar_algebra import GlobalParams, UPoly
from .variational import ftt_source, phi_tt

SCHEMA_VERSION = 1
SHOW_OBJECTS = ("h0", "ftt", "l-matrix", "l-inverse", "i1", "i2", "total", "psi")
CSV_COLUMNS = ("id", "kind", "status", "observed", "tolerance", "seed")


class UsageError(Exception):
    pass


def parse_m(text: str) -> int | str:
    if text == "sym":
        return "sym"
    try:
        m = int(text)
    except ValueError:
        raise UsageError(f"--m must be an integer or 'sym', got {text!r}") from None
    if m < 2:
        raise UsageError(
            f"--m {m}: m must be >= 2; m = 1 would be CP^1, which is excluded "
            "(the suites cover CP^(2m-1) and CP^(2m) for m >= 2)"
        )
    return m


# ---------------------------------------------------------------------------
# formatting exact objects


def fmt(x) -> str:
    """Canonical text for an exact value."""
    if isinstance(x, RatFn):
        return str(x.constant_value()) if x.is_constant() else x.factored_str()
    if isinstance(x, Fraction):
        return str(x)
    return str(x)


def _params(m) -> GlobalParams:
    return GlobalParams(m=m)


def closed_forms(m, n2: int | None = None) -> dict:
    """Named exact values echoed into every report."""
    p = _params(m)
    rep = total_obstruction(p, table_range=range(0))
    out = {
        "h0": {name: fmt(c) for name, c in zip(BASIS_NAMES, solve_h0(p))},
        "f_tt": str(ftt_source_solution(p)),
        "f_tt_records": ftt_source_solution(p).to_records(),
        "I1": fmt(rep.I1),
        "I2": fmt(rep.I2),
        "total": fmt(rep.total),
        "total_canonical": rep.total.canonical_str(),
    }
    if n2:
        out["psi"] = psi_forms(m, n2)
    return out


def ftt_source_solution(p: GlobalParams) -> UPoly:
    """The closed form of ``f_tt``."""
    return phi_tt(p).scalars.f_tt


def psi_forms(m, n2: int) -> dict:
    po = product_obstruction(ProductConfig(m, n2))

    def form(q):
        return {"uu": fmt(q.uu), "uv": fmt(q.uv), "vv": fmt(q.vv)}

    return {
        "n2": n2,
        "psi1": form(po.psi1),
        "psi2": form(po.psi2),
        "lambda": fmt(po.lam),
        "x": _ext_str(po.x),
        "y": _ext_str(po.y),
        "x_relation": f"x^2 = x + {fmt(po.x.d)}",
    }


def _ext_str(q) -> str:
    """``a + b x`` with ``x`` the larger root of ``X² - X - λ``."""
    parts = [] if q.a.is_zero() else [fmt(q.a)]
    if not q.b.is_zero():
        b = fmt(q.b)
        parts.append("x" if b == "1" else "-x" if b == "-1" else f"({b})*x")
    return " + ".join(parts).replace("+ -", "- ") or "0"


def _matrix_text(M: RatMatrix) -> str:
    rows = [[fmt(M[i, j]) for j in range(M.shape[1])] for i in range(M.shape[0])]
    width = max(len(c) for r in rows for c in r)
    return "\n".join("  ".join(c.rjust(width) for c in r) for r in rows)


def show_text(obj: str, m, n2: int) -> str:
    p = _params(m)
    if obj == "h0":
        return "\n".join(f"{name}: {fmt(c)}" for name, c in zip(BASIS_NAMES, solve_h0(p)))
    if obj == "ftt":
        return f"f_tt = {ftt_source_solution(p)}\n(Δ + 1/2) f_tt = {ftt_source(p)}"
    if obj == "l-matrix":
        return _matrix_text(l_matrix(p))
    if obj == "l-inverse":
        return _matrix_text(l_inverse(p))
    if obj == "i1":
        return fmt(compute_i1(p))
    if obj == "i2":
        return fmt(compute_i2(p))
    if obj == "total":
        return fmt(total_obstruction(p, table_range=range(0)).total)
    if obj == "psi":
        f = psi_forms(m, n2)
        lines = [f"{k}: {v['uu']} u^2 + {v['uv']} uv + {v['vv']} v^2" for k, v in (("psi1", f["psi1"]), ("psi2", f["psi2"]))]
        lines += [f"lambda: {f['lambda']}", f"x: {f['x']}  ({f['x_relation']})", f"y: {f['y']}"]
        return "\n".join(lines)
    raise UsageError(f"unknown object {obj!r}")


# ---------------------------------------------------------------------------
# reports


def build_report(names: list[str], params: RunParams) -> dict:
    results = [r.to_dict() for r in run_suites(names, params)]
    passed = sum(r["status"] == "pass" for r in results)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "params": {"m": params.m, "n2": params.n2, "suites": names},
        "config": {
            "fd_step": params.fd.step,
            "richardson": params.fd.richardson,
            "samples": params.mc.samples,
            "seed": params.mc.seed,
            "points": params.points,
        },
        "results": results,
        "closed_forms": closed_forms(params.m, params.n2),
        "summary": {"pass": passed, "fail": len(results) - passed},
    }


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report["results"]:
        w.writerow(["" if r[c] is None else r[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def to_text(report: dict) -> str:
    lines = []
    for r in report["results"]:
        obs = r["observed"]
        obs = f"{obs:.3e}" if isinstance(obs, float) else str(obs)
        tol = "" if r["tolerance"] is None else f" (tol {r['tolerance']:g})"
        lines.append(f"{r['status'].upper():4}  {r['id']}  [{r['kind']}]  {obs}{tol}")
    s = report["summary"]
    lines.append(f"{s['pass']} passed, {s['fail']} failed")
    lines.append(f"total obstruction: {report['closed_forms']['total']}")
    return "\n".join(lines) + "\n"


FORMATTERS = {"json": to_json, "csv": to_csv, "text": to_text}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cprigid", description="Verify the rigidity computations for complex projective spaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--suite", default="all", help="suite id or 'all'")
    v.add_argument("--m", default="2", help="integer >= 2 or 'sym' (exact checks only)")
    v.add_argument("--n2", type=int, default=3, help="dimension of the second product factor")
    v.add_argument("--samples", type=int, default=MCConfig.samples)
    v.add_argument("--seed", type=int, default=MCConfig.seed)
    v.add_argument("--fd-step", type=float, default=FDConfig.step)
    v.add_argument("--points", type=int, default=10, help="random points for the FD suites")
    v.add_argument("--workers", type=int, default=1, help="process pool size (does not change the report)")
    v.add_argument("--out", help="report path (default: stdout)")
    v.add_argument("--format", choices=sorted(FORMATTERS), default="json")

    s = sub.add_parser("show", help="print one exact object")
    s.add_argument("--object", required=True, choices=SHOW_OBJECTS)
    s.add_argument("--m", default="sym")
    s.add_argument("--n2", type=int, default=3, help="used by --object psi")

    sub.add_parser("list", help="list suite ids")
    return ap


def cmd_verify(args) -> int:
    m = parse_m(args.m)
    names = suite_ids() if args.suite == "all" else [args.suite]
    if args.n2 < 1:
        raise UsageError("--n2 must be >= 1")
    try:
        params = RunParams(
            m=m,
            n2=args.n2,
            fd=FDConfig(step=args.fd_step),
            mc=MCConfig(samples=args.samples, seed=args.seed),
            points=args.points,
            workers=args.workers,
        )
        report = build_report(names, params)
    except UnknownSuiteError as exc:
        raise UsageError(exc.args[0]) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = FORMATTERS[args.format](report)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
        s = report["summary"]
        print(f"{s['pass']} passed, {s['fail']} failed -> {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0 if report["summary"]["fail"] == 0 else 1


def cmd_show(args) -> int:
    m = parse_m(args.m)
    if args.object == "psi" and args.n2 < 1:
        raise UsageError("--n2 must be >= 1 for psi")
    print(show_text(args.object, m, args.n2))
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "show":
            return cmd_show(args)
        print("\n".join(suite_ids()))
        return 0
    except UsageError as exc:
        print(f"cprigid: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
