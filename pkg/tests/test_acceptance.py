"""Acceptance criteria, one test per criterion.

Each test records its outcome in ``RESULTS``; the hook in ``conftest.py``
prints one pass/fail line per criterion at the end of the session.  Running
this file directly does the same without pytest's filtering of slow cases.
"""

import time

import numpy as np
import pytest

from conftest import random_form
from psdcopo import corpus
from psdcopo.conegen import build_problem_spec
from psdcopo.copotest import NotCopositive, TestOptions, is_valid_witness
from psdcopo.copotest import test_copositivity as decide
from psdcopo.moment import MonomialBasis, localizing_map
from psdcopo.poly import VarSpace
from psdcopo.sdp import assemble_relaxation, solve_ipm

RESULTS: dict[int, list[tuple[bool, str]]] = {}

TITLES = {
    1: "cubic forms f1-f3 refuted with valid witnesses (n=2, k=2)",
    2: "f4 and f5 certified at k=2, det(X) bound at k=2 and certified at k=3 (n=3)",
    3: "chained 2x2 minors certified at k=2",
    4: "perturbed Hoffman-Pereira sweep over alpha (n=2, m=4, k=2)",
    5: "mixed Horn case refuted with a valid witness",
    6: "mixed Hoffman-Pereira case refuted with a valid witness",
    7: "n=5 Horn trace form refuted at k=2",
    8: "property suites",
}


class Check:
    """Collects sub-checks so a criterion reports every failure, not the first."""

    def __init__(self, criterion):
        self.criterion = criterion
        self.failures = []
        self.notes = []

    def that(self, ok, message):
        if not ok:
            self.failures.append(message)

    def note(self, message):
        self.notes.append(message)

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if exc is not None:
            self.failures.append(f"{exc_type.__name__}: {exc}")
        ok = not self.failures
        detail = "; ".join(self.failures) if self.failures else ", ".join(self.notes)
        RESULTS.setdefault(self.criterion, []).append((ok, f"{detail} [{elapsed:.1f}s]"))
        if exc is None and self.failures:
            pytest.fail("; ".join(self.failures))
        return False


def run(name, **kw):
    c = corpus.case(name)
    opts = TestOptions(allow_inhomogeneous=c.allow_inhomogeneous, **kw)
    return c, decide(c.polynomial(), c.space, opts)


def bound_at(verdict, k):
    for rec in verdict.orders:
        if rec.order == k:
            return rec.bound
    return None


def witness_ok(c, verdict):
    u, v = np.array(verdict.witness_u), np.array(verdict.witness_v)
    value = c.polynomial().evaluate(np.concatenate([u, v]))
    return is_valid_witness(u, v, c.space) and value < 0, value


def test_criterion_1_cubics():
    with Check(1) as chk:
        t0 = time.perf_counter()
        for name, expect in (("f1", -0.1213), ("f2", -0.5000), ("f3", -0.1629)):
            c, v = run(name)
            b = bound_at(v, 2)
            chk.that(isinstance(v, NotCopositive) and v.order == 2, f"{name}: {v.kind}")
            chk.that(b is not None and abs(b - expect) <= 1e-3, f"{name}: bound {b}")
            if isinstance(v, NotCopositive):
                u = np.array(v.witness_u)
                X = c.space.matrix_of(u)
                chk.that(np.linalg.eigvalsh(X).min() >= -1e-6, f"{name}: witness not PSD")
                chk.that(abs(np.trace(X) - 1) <= 1e-6, f"{name}: trace {np.trace(X)}")
                fu = c.polynomial().evaluate(u)
                chk.that(fu < 0 and abs(fu - b) <= 1e-2, f"{name}: f(u)={fu}")
                chk.note(f"{name} {b:+.4f}")
        elapsed = time.perf_counter() - t0
        chk.that(elapsed < 10, f"took {elapsed:.1f}s")


def test_criterion_2_n3_forms():
    with Check(2) as chk:
        t0 = time.perf_counter()
        c, v = run("f4")
        chk.that(v.kind == "Copositive" and v.order == 2 and v.bound >= -1e-5, f"f4: {v.kind}")
        c, v = run("f5")
        chk.that(v.kind == "Copositive" and v.order == 2 and v.bound >= -1e-5, f"f5: {v.kind}")
        c, v = run("f6")
        b2 = bound_at(v, 2)
        chk.that(b2 is not None and abs(b2 - (-0.0208)) <= 2e-3, f"f6: k=2 bound {b2}")
        chk.that(v.kind == "Copositive" and v.order == 3 and v.bound >= -1e-5, f"f6: {v.kind}")
        chk.note(f"f6 k=2 {b2:+.4f}")
        elapsed = time.perf_counter() - t0
        chk.that(elapsed < 120, f"took {elapsed:.1f}s")


@pytest.mark.parametrize("n", [2, 3, pytest.param(4, marks=pytest.mark.slow)])
def test_criterion_3_chain_minors(n):
    with Check(3) as chk:
        c, v = run(f"chain_n{n}")
        chk.that(v.kind == "Copositive" and v.order == 2 and v.bound >= -1e-5, f"n={n}: {v.kind}")
        chk.note(f"n={n} certified")


def test_criterion_4_alpha_sweep():
    with Check(4) as chk:
        t0 = time.perf_counter()
        for alpha, expect, kind in corpus.TABLE4:
            c, v = run(f"hp_alpha_{alpha:.2f}")
            b = bound_at(v, 2)
            chk.that(v.kind == kind and v.order == 2, f"alpha={alpha}: {v.kind} at k={getattr(v, 'order', None)}")
            chk.that(b is not None and abs(b - expect) <= 2e-3, f"alpha={alpha}: bound {b}")
            if isinstance(v, NotCopositive):
                ok, value = witness_ok(c, v)
                chk.that(ok, f"alpha={alpha}: bad witness ({value})")
        elapsed = time.perf_counter() - t0
        chk.that(elapsed < 120, f"took {elapsed:.1f}s")
        chk.note("10 values of alpha")


def test_criterion_5_mixed_horn():
    with Check(5) as chk:
        t0 = time.perf_counter()
        c, v = run("mixed_horn")
        chk.that(isinstance(v, NotCopositive), f"{v.kind}")
        if isinstance(v, NotCopositive):
            ok, value = witness_ok(c, v)
            chk.that(ok, f"bad witness ({value})")
            chk.note(f"refuted at k={v.order}")
        # the procedure stops at the first order that refutes; check k=3 too
        c, v3 = run("mixed_horn", k_start=3, k_max=3)
        chk.that(isinstance(v3, NotCopositive), f"k=3: {v3.kind}")
        if isinstance(v3, NotCopositive):
            ok, value = witness_ok(c, v3)
            chk.that(ok, f"k=3: bad witness ({value})")
            chk.note("also at k=3")
        elapsed = time.perf_counter() - t0
        chk.that(elapsed < 60, f"took {elapsed:.1f}s")


def test_criterion_6_hoffman_pereira():
    with Check(6) as chk:
        t0 = time.perf_counter()
        c, v = run("mixed_hoffman_pereira")
        chk.that(isinstance(v, NotCopositive) and v.order == 2, f"{v.kind}")
        if isinstance(v, NotCopositive):
            ok, value = witness_ok(c, v)
            chk.that(ok, f"bad witness ({value})")
            chk.note(f"f={value:.4f}")
        elapsed = time.perf_counter() - t0
        chk.that(elapsed < 60, f"took {elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_7_horn_n5():
    with Check(7) as chk:
        t0 = time.perf_counter()
        c, v = run("horn_trace_n5")
        chk.that(isinstance(v, NotCopositive) and v.order == 2, f"{v.kind}")
        if isinstance(v, NotCopositive):
            ok, value = witness_ok(c, v)
            chk.that(ok, f"bad witness ({value})")
            chk.note(f"f={value:.4f}")
        elapsed = time.perf_counter() - t0
        chk.that(elapsed < 15 * 60, f"took {elapsed:.1f}s")


def _euler_and_trace(chk):
    rng = np.random.default_rng(8)
    spaces = [VarSpace(1, 1), VarSpace(2), VarSpace(2, 1), VarSpace(3), VarSpace(2, 2)]
    worst = 0.0
    for i in range(500):
        space = spaces[i % len(spaces)]
        d = 1 + i % 4
        f = random_form(space, d, rng)
        pt = rng.standard_normal(space.nvars)
        fv = f.evaluate(pt)
        scale = 1 + np.abs([c for _, c in f.items()]).sum() * (1 + np.abs(pt).max()) ** d
        euler = sum(x * g.evaluate(pt) for x, g in zip(pt, f.gradient())) - d * fv
        spec = build_problem_spec(f, space)
        X, T = spec.matrix_variable.evaluate(pt), spec.theta.evaluate(pt)
        p = np.array([q.evaluate(pt) for q in spec.orthant_multipliers])
        h = spec.h.evaluate(pt)
        trace = np.trace(X @ T) + pt[space.sigma:] @ p + d * fv * h
        worst = max(worst, abs(euler) / scale, abs(trace) / (scale * (1 + abs(h))))
    chk.that(worst <= 1e-8, f"identities off by {worst:.1e}")
    chk.note("Euler and trace identities")


def _substitution(chk):
    rng = np.random.default_rng(9)
    space = VarSpace(2, 1)
    big = MonomialBasis.of(space, 4)
    qs = [random_form(space, d, rng) + random_form(space, 1, rng) for d in (1, 2, 3, 4)]
    maps = [localizing_map(q, 2) for q in qs]
    worst = 0.0
    for _ in range(200):
        u = rng.uniform(-1, 1, space.nvars)
        z = big.dirac(u)
        for q, L in zip(qs, maps):
            v = MonomialBasis.of(space, 2 - (q.degree + 1) // 2).dirac(u)
            worst = max(worst, np.abs(L(z) - q.evaluate(u) * np.outer(v, v)).max())
    chk.that(worst <= 1e-10, f"substitution off by {worst:.1e}")
    chk.note("localizing substitution")


def _relaxation_bound(c, k):
    spec = build_problem_spec(c.polynomial(), c.space, allow_inhomogeneous=c.allow_inhomogeneous)
    res = solve_ipm(assemble_relaxation(spec, k))
    return min(res.objective_value, res.dual_value) if res.ok else None


def _lower_bound_and_monotonicity(chk):
    from test_copotest import section_samples

    rng = np.random.default_rng(10)
    fast = corpus.suite("all")
    compared = 0
    for c in fast:
        b2 = _relaxation_bound(c, 2)
        sampled = c.polynomial().evaluate_many(section_samples(c.space, 100_000, rng)).min()
        chk.that(b2 is not None and b2 <= sampled + 1e-6, f"{c.name}: bound {b2} above sample {sampled}")
        if c.m < 4 and c.name != "mixed_hoffman_pereira":
            b3 = _relaxation_bound(c, 3)
            chk.that(b3 is not None and b2 <= b3 + 1e-6, f"{c.name}: k=2 {b2} > k=3 {b3}")
            compared += 1
    chk.note(f"lower bound on {len(fast)} cases, monotone on {compared}")


def _kkt(chk):
    from test_sdp import kkt_residuals, random_sdp

    worst = 0.0
    for seed in range(40):
        rng = np.random.default_rng(1000 + seed)
        sizes = list(rng.integers(1, 21, size=rng.integers(1, 4)))
        nz = int(rng.integers(3, 30))
        prob = random_sdp(rng, sizes, nz, int(rng.integers(0, min(nz, 6))))
        res = solve_ipm(prob)
        chk.that(res.ok, f"random SDP {seed}: {res.status.value}")
        if res.ok:
            worst = max(worst, max(kkt_residuals(prob, res).values()))
    chk.that(worst <= 1e-6, f"KKT residual {worst:.1e}")
    chk.note(f"KKT <= {worst:.0e} on 40 SDPs")


def test_criterion_8_properties():
    with Check(8) as chk:
        _euler_and_trace(chk)
        _substitution(chk)
        _lower_bound_and_monotonicity(chk)
        _kkt(chk)


SLOW_ONLY = {7}


def report_lines():
    lines = []
    for k, title in TITLES.items():
        parts = RESULTS.get(k)
        if not parts:
            why = "slow; select with -m slow" if k in SLOW_ONLY else "not selected"
            lines.append(f"criterion {k}: NOT RUN  {title} ({why})")
            continue
        ok = all(p for p, _ in parts)
        detail = " | ".join(d for _, d in parts)
        lines.append(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    return lines


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-m", "", "-q"]))
