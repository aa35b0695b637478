"""Command-line front end.

Exit codes for ``test``: 0 copositive, 1 not copositive, 2 inconclusive,
3 bad input (unreadable file, parse error, inhomogeneous polynomial),
4 solver failure, 5 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, corpus
from .conegen import NotHomogeneousError, build_problem_spec
from .copotest import (
    NotCopositive,
    TestOptions,
    is_valid_witness,
    sample_generic_direction,
    test_copositivity,
)
from .poly import ParseError, Polynomial, VarSpace, parse_polynomial
from .sdp import OrderTooSmall, SolverOptions, assemble_auxiliary, assemble_relaxation
from .sdp.sdpa import export_sdpa

EXIT_INPUT = 3
EXIT_SOLVER = 4
EXIT_USAGE = 5

FORMS = ("poly", "quadratic", "trace-square", "horn-trace")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_matrix(path: Path) -> np.ndarray:
    """Plain text: the size on the first line, then one row per line."""
    lines = [ln.split("#", 1)[0].strip() for ln in path.read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InputError(f"{path}: empty matrix file")
    try:
        size = int(lines[0])
        rows = [[float(t) for t in ln.replace(",", " ").split()] for ln in lines[1:]]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if len(rows) != size or any(len(r) != size for r in rows):
        raise InputError(f"{path}: expected {size} rows of {size} numbers")
    A = np.array(rows)
    if not np.allclose(A, A.T):
        raise InputError(f"{path}: matrix is not symmetric")
    return A


def load_polynomial(path: str, n: int, m: int, form: str) -> Polynomial:
    p = Path(path)
    try:
        if form == "poly":
            text = "\n".join(ln.split("#", 1)[0] for ln in p.read_text().splitlines())
            return parse_polynomial(" ".join(text.split()), VarSpace(n, m))
        A = read_matrix(p)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if form == "quadratic":
        try:
            return corpus.quadratic_form(A, n, m)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    if m:
        raise InputError(f"form {form!r} has no orthant part; drop --m")
    if A.shape[0] != n:
        raise InputError(f"matrix is {A.shape[0]}x{A.shape[0]} but --n is {n}")
    if form == "trace-square":
        return corpus.trace_square_form(A)
    return corpus.horn_trace_form(A)


def _add_input(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="polynomial text file or matrix file")
    p.add_argument("--n", type=int, required=True, help="size of the matrix variable")
    p.add_argument("--m", type=int, default=0, help="number of orthant variables")
    p.add_argument("--form", choices=FORMS, default="poly", help="how to read --input (default: poly)")
    p.add_argument("--allow-inhomogeneous", action="store_true",
                   help="accept polynomials mixing degrees; uses the total degree for the multipliers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psdcopo", description="Copositivity tests over S^n_+ and S^n_+ x R^m_+.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver iterations")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test one polynomial")
    _add_input(t)
    t.add_argument("--kmax", type=int, help="highest relaxation order (default d0+4)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--backend", default="internal", help="internal | cvxopt | sdpa:CMD")
    t.add_argument("--json", metavar="PATH", help="write the verdict as JSON ('-' for stdout)")

    c = sub.add_parser("corpus", help="run a suite of reference instances")
    c.add_argument("--suite", choices=corpus.SUITES, default="all")
    c.add_argument("--slow", action="store_true", help="include cases tagged slow")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--backend", default="internal")
    c.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    c.add_argument("--json", metavar="PATH", help="write the report as JSON ('-' for stdout)")

    e = sub.add_parser("emit", help="write a relaxation in sparse SDPA format")
    _add_input(e)
    e.add_argument("--order", type=int, required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--aux", type=float, metavar="BOUND", help="emit the witness program with f <= BOUND")
    e.add_argument("--seed", type=int, default=0)
    return parser


def _write_json(path: str, doc: dict):
    text = json.dumps(doc, indent=2)
    if path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def cmd_test(args) -> int:
    try:
        f = load_polynomial(args.input, args.n, args.m, args.form)
        opts = TestOptions(k_max=args.kmax, seed=args.seed, backend=args.backend,
                           allow_inhomogeneous=args.allow_inhomogeneous,
                           solver=SolverOptions(verbose=args.verbose))
        verdict = test_copositivity(f, VarSpace(args.n, args.m), opts)
    except (InputError, ParseError, NotHomogeneousError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(verdict.summary())
    for rec in verdict.orders:
        print(f"  k={rec.order}: bound {rec.bound:+.6e}" if rec.bound is not None else f"  k={rec.order}: no bound")
    if args.json:
        _write_json(args.json, verdict.to_dict())
    return verdict.exit_code


def run_case(case: corpus.CorpusCase, seed: int = 0, backend: str = "internal") -> dict:
    """Run one corpus case and score it against its expectations."""
    t0 = time.perf_counter()
    opts = TestOptions(seed=seed, backend=backend, allow_inhomogeneous=case.allow_inhomogeneous)
    verdict = test_copositivity(case.polynomial(), case.space, opts)
    elapsed = time.perf_counter() - t0
    bounds = {rec.order: rec.bound for rec in verdict.orders if rec.bound is not None}
    checks = []
    for k, (value, tol) in case.expected_bounds.items():
        if k in bounds:
            checks.append(abs(bounds[k] - value) <= tol)
        elif k <= getattr(verdict, "order", -1):
            checks.append(False)
    checks.append(verdict.kind == case.verdict)
    checks.append(getattr(verdict, "order", math.inf) <= case.verdict_order)
    row = {
        "name": case.name,
        "n": case.n,
        "m": case.m,
        "verdict": verdict.kind,
        "order": getattr(verdict, "order", None),
        "bounds_by_order": {str(k): v for k, v in bounds.items()},
        "expected": {"verdict": case.verdict, "order": case.verdict_order,
                     "bounds": {str(k): list(v) for k, v in case.expected_bounds.items()}},
        "time_s": elapsed,
    }
    if isinstance(verdict, NotCopositive):
        row["witness"] = {"u": verdict.witness_u, "v": verdict.witness_v, "value": verdict.value}
        checks.append(verdict.value < 0 and is_valid_witness(
            np.array(verdict.witness_u), np.array(verdict.witness_v), case.space))
    row["pass"] = all(checks)
    return row


def _run_case_star(item):
    return run_case(*item)


def format_table(rows: list[dict], skipped: list[str]) -> str:
    head = f"{'case':24s} {'n':>2s} {'m':>2s} {'k':>2s}  {'lower bound':>12s}  {'time':>8s}  {'verdict':14s} result"
    out = [head, "-" * len(head)]
    for r in rows:
        k = r["order"]
        b = r["bounds_by_order"].get(str(k)) if k is not None else None
        if b is None and r["bounds_by_order"]:
            b = list(r["bounds_by_order"].values())[-1]
        bound = f"{b:+.4e}" if b is not None else "-"
        out.append(f"{r['name']:24s} {r['n']:2d} {r['m']:2d} {str(k or '-'):>2s}  {bound:>12s}  "
                   f"{r['time_s']:7.2f}s  {r['verdict']:14s} {'pass' if r['pass'] else 'FAIL'}")
    for name in skipped:
        out.append(f"{name:24s} skipped (slow; pass --slow)")
    return "\n".join(out)


def cmd_corpus(args) -> int:
    picked = corpus.suite(args.suite, include_slow=args.slow)
    skipped = [c.name for c in corpus.suite(args.suite, include_slow=True) if c not in picked]
    items = [(c, args.seed, args.backend) for c in picked]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_run_case_star, items))
    else:
        rows = []
        for item in items:
            rows.append(run_case(*item))
            print(format_table(rows[-1:], []).splitlines()[-1], flush=True)
    print()
    print(format_table(rows, skipped))
    passed = sum(r["pass"] for r in rows)
    print(f"\n{passed}/{len(rows)} cases passed")
    if args.json:
        _write_json(args.json, {"suite": args.suite, "seed": args.seed, "cases": rows, "skipped": skipped})
    return 0 if passed == len(rows) else 1


def cmd_emit(args) -> int:
    try:
        f = load_polynomial(args.input, args.n, args.m, args.form)
        spec = build_problem_spec(f, VarSpace(args.n, args.m), allow_inhomogeneous=args.allow_inhomogeneous)
        if args.aux is None:
            prob = assemble_relaxation(spec, args.order)
            note = f"moment relaxation, order {args.order}"
        else:
            xi = sample_generic_direction(spec.space, spec.degree, args.seed)
            prob = assemble_auxiliary(spec, xi, args.aux, args.order)
            note = f"witness program, order {args.order}, bound {args.aux!r}, seed {args.seed}"
    except OrderTooSmall as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ParseError, NotHomogeneousError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    labels = ", ".join(f"{lab}:{size}" for lab, size in zip(prob.block_labels, prob.block_sizes))
    Path(args.out).write_text(export_sdpa(prob, comment=f"{note}\nblocks {labels}"))
    print(f"wrote {args.out}: nz={prob.nz}, {prob.n_eq} equality rows, blocks {labels}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"test": cmd_test, "corpus": cmd_corpus, "emit": cmd_emit}[args.command]
    return handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
