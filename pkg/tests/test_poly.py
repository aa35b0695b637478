import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_form
from psdcopo.poly import (
    ParseError,
    PolyMatrix,
    Polynomial,
    PolynomialError,
    VarSpace,
    iter_exponents,
    monomial_count,
    parse_polynomial,
)


def test_varspace_order():
    s = VarSpace(3, 2)
    assert s.sigma == 6 and s.nvars == 8
    assert s.var_names() == ["x11", "x12", "x13", "x22", "x23", "x33", "y1", "y2"]
    assert s.x_index(2, 0) == s.x_index(0, 2) == 2
    assert s.pair(3) == (1, 1)
    assert s.diagonal_indices() == [0, 3, 5]


def test_varspace_rejects_bad_sizes():
    with pytest.raises(ValueError):
        VarSpace(0)
    with pytest.raises(ValueError):
        VarSpace(2, -1)


def test_matrix_point_round_trip(rng):
    s = VarSpace(4, 1)
    p = rng.standard_normal(s.nvars)
    X = s.matrix_of(p)
    assert np.allclose(X, X.T)
    assert np.allclose(s.point_of(X, p[s.sigma:]), p)


def test_arithmetic_and_evaluation(rng):
    s = VarSpace(2, 1)
    x11, x12, y = (Polynomial.variable(s, k) for k in range(s.nvars) if k != 2)
    p = (x11 + 2 * x12) * (x11 - y) - 3
    pt = rng.standard_normal(s.nvars)
    a, b, c = pt[0], pt[1], pt[3]
    assert p.evaluate(pt) == pytest.approx((a + 2 * b) * (a - c) - 3)
    assert (p - p).is_zero
    assert (p ** 2).evaluate(pt) == pytest.approx(p.evaluate(pt) ** 2)
    assert p.degree == 2


def test_parse_matches_construction():
    s = VarSpace(2, 1)
    p = parse_polynomial("3*x11^2*x12 - x22 + 0.5 + y1*x11", s)
    x11, x12, x22, y1 = (Polynomial.variable(s, k) for k in range(4))
    q = 3 * x11 * x11 * x12 - x22 + 0.5 + y1 * x11
    assert p == q
    assert parse_polynomial(p.to_text(), s) == p


def test_parse_long_names():
    s = VarSpace(10)
    p = parse_polynomial("x_1_10 * x_10_10", s)
    assert p.degree == 2
    with pytest.raises(ParseError):
        parse_polynomial("x110", s)


@pytest.mark.parametrize("text", ["x11 +", "x13", "x11 $ x22", "y1", "x11^", "2**x11"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_polynomial(text, VarSpace(2))


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_polynomial("x11 + x12 $", VarSpace(2))
    assert info.value.pos == 10


def test_bad_exponents():
    with pytest.raises(PolynomialError):
        Polynomial(VarSpace(1), {(1, 0): 1.0})
    with pytest.raises(PolynomialError):
        Polynomial(VarSpace(1), {(-1,): 1.0})


def test_derivatives_against_finite_differences(rng):
    s = VarSpace(2, 2)
    f = random_form(s, 3, rng) + random_form(s, 2, rng)
    pt = rng.standard_normal(s.nvars)
    h = 1e-6
    for k, g in enumerate(f.gradient()):
        e = np.zeros(s.nvars)
        e[k] = h
        fd = (f.evaluate(pt + e) - f.evaluate(pt - e)) / (2 * h)
        assert g.evaluate(pt) == pytest.approx(fd, rel=1e-6, abs=1e-7)


def test_evaluate_many_matches_scalar(rng):
    s = VarSpace(2, 1)
    f = random_form(s, 4, rng)
    P = rng.standard_normal((25, s.nvars))
    assert np.allclose(f.evaluate_many(P), [f.evaluate(p) for p in P])


def test_homogeneity_report():
    s = VarSpace(3)
    rep = parse_polynomial("x22 + x33 + 10*x11*x22", s).homogeneous_degree()
    assert not rep.homogeneous and rep.degrees == (1, 2) and rep.degree == 2
    assert parse_polynomial("x11*x22 - x12^2", s).homogeneous_degree().homogeneous
    assert Polynomial.zero(s).homogeneous_degree().is_zero


def test_monomial_enumeration_is_graded():
    exps = list(iter_exponents(3, 4))
    assert len(exps) == monomial_count(3, 4) == 35
    degs = [sum(e) for e in exps]
    assert degs == sorted(degs)
    assert exps[1:4] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]


def test_polymatrix_product_and_trace():
    s = VarSpace(2)
    a, b, c = (Polynomial.variable(s, k) for k in range(3))
    M = PolyMatrix.from_rows([[a, b], [b, c]])
    assert M.is_symmetric
    sq = M @ M
    pt = np.array([0.3, -0.2, 0.7])
    X = s.matrix_of(pt)
    assert np.allclose(sq.evaluate(pt), X @ X)
    assert sq.trace().evaluate(pt) == pytest.approx(np.trace(X @ X))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
def test_product_evaluates_pointwise(pt, seed):
    rng = np.random.default_rng(seed)
    s = VarSpace(2)
    p, q = random_form(s, 2, rng), random_form(s, 1, rng)
    assert (p * q).evaluate(pt) == pytest.approx(p.evaluate(pt) * q.evaluate(pt), rel=1e-9, abs=1e-9)
