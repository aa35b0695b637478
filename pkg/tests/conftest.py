import sys
import numpy as np
import pytest

from psdcopo.poly import Polynomial, VarSpace, iter_exponents


def random_form(space, degree, rng, density=0.6):
    """A random homogeneous polynomial of exactly ``degree`` (never zero)."""
    exps = [e for e in iter_exponents(space.nvars, degree) if sum(e) == degree]
    keep = rng.random(len(exps)) < density
    keep[rng.integers(len(exps))] = True
    terms = {e: rng.standard_normal() for e, k in zip(exps, keep) if k}
    return Polynomial(space, terms)


def random_cone_point(space, rng):
    """A random point of ``S^n_+ x R^m_+`` on ``tr X + sum(y) = 1``."""
    G = rng.standard_normal((space.n, space.n))
    X = G @ G.T
    y = rng.random(space.m)
    s = np.trace(X) + y.sum()
    return space.point_of(X / s, y / s)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def space22():
    return VarSpace(2, 2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None) and not _acceptance_collected(terminalreporter):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)


def _acceptance_collected(terminalreporter):
    stats = terminalreporter.stats
    return any("test_acceptance" in getattr(r, "nodeid", "") for reps in stats.values() for r in reps)
