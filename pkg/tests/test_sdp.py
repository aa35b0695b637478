import sys
import textwrap

import numpy as np
import pytest
import scipy.sparse as sp

from psdcopo import corpus
from psdcopo.conegen import build_problem_spec
from psdcopo.moment import LinearMatrixMap, MonomialBasis
from psdcopo.poly import VarSpace, parse_polynomial
from psdcopo.sdp import (
    ConicProblem,
    OrderTooSmall,
    SolverOptions,
    Status,
    assemble_auxiliary,
    assemble_relaxation,
    solve,
    solve_ipm,
)
from psdcopo.sdp.sdpa import SDPAFormatError, export_sdpa, parse_sdpa, parse_sdpa_output


def relaxation(name, k):
    c = corpus.case(name)
    spec = build_problem_spec(c.polynomial(), c.space, allow_inhomogeneous=c.allow_inhomogeneous)
    return spec, assemble_relaxation(spec, k)


# --- assembly -----------------------------------------------------------------


def test_census_of_f1_order_two():
    _, prob = relaxation("f1", 2)
    assert prob.nz == 35
    assert prob.census()["blocks"] == {"M": 10, "L_X": 8, "L_Theta": 2, "L_1-normsq": 4, "L_normsq-lb": 4}
    assert prob.b[0] == 1.0 and prob.A[0, 0] == 1.0


def test_mixed_order_three_moment_count():
    _, prob = relaxation("mixed_horn", 3)
    assert prob.nz == 462


def test_order_below_d0_rejected():
    spec, _ = relaxation("f1", 2)
    with pytest.raises(OrderTooSmall):
        assemble_relaxation(spec, 1)


def test_dirac_of_minimiser_is_feasible():
    space = VarSpace(2)
    f = parse_polynomial("x11*x22 - x12^2", space)
    spec = build_problem_spec(f, space)
    prob = assemble_relaxation(spec, 2)
    u = np.array([0.6, 0.8])
    z = MonomialBasis.of(space, 4).dirac(space.point_of(np.outer(u, u)))
    feas = prob.feasibility(z)
    assert feas["equality"] < 1e-12 and feas["min_eig"] > -1e-12
    assert prob.objective(z) == pytest.approx(0.0, abs=1e-14)


def test_auxiliary_census():
    spec, _ = relaxation("f1", 2)
    xi = np.ones(20)
    aux = assemble_auxiliary(spec, xi, -0.1, 2)
    blocks = aux.census()["blocks"]
    assert blocks["L_bound-f"] == 1 and blocks["M"] == 10 and blocks["L_X"] == 8
    assert "L_Theta" not in blocks
    assert "L_bound-f" not in assemble_auxiliary(spec, xi, None, 2).census()["blocks"]
    with pytest.raises(ValueError):
        assemble_auxiliary(spec, np.ones(3), 0.0, 2)


# --- the solver on relaxations ------------------------------------------------


def test_linear_form_on_one_by_one():
    space = VarSpace(1)
    spec = build_problem_spec(parse_polynomial("x11", space), space)
    res = solve_ipm(assemble_relaxation(spec, 1))
    assert res.ok
    assert res.objective_value == pytest.approx(1.0, abs=1e-7)


def test_f2_value():
    _, prob = relaxation("f2", 2)
    res = solve_ipm(prob)
    assert res.ok and res.objective_value == pytest.approx(-0.5, abs=1e-6)


def test_objective_shift_by_power_of_trace():
    # (tr X)^3 = 1 modulo h, and Theta only moves by multiples of h
    space = VarSpace(2)
    f = parse_polynomial(corpus.F1, space)
    g = f + 0.3 * parse_polynomial("x11 + x22", space) ** 3
    b1 = solve_ipm(assemble_relaxation(build_problem_spec(f, space), 2)).objective_value
    b2 = solve_ipm(assemble_relaxation(build_problem_spec(g, space), 2)).objective_value
    assert b2 - b1 == pytest.approx(0.3, abs=1e-6)


def test_moment_matrix_trace_is_bounded():
    for name in ("f1", "f3", "hp_alpha_0.05"):
        _, prob = relaxation(name, 2)
        res = solve_ipm(prob)
        M = prob.blocks[0](res.z)
        assert np.trace(M) <= 2 * (2 + 1)


# --- random strictly feasible SDPs ---------------------------------------------


def _sym_basis(n, nz, rng, density=0.5):
    rows, cols, vals = [], [], []
    for a in range(nz):
        B = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
        B = B + B.T
        r, c = np.nonzero(B)
        rows += list(r * n + c)
        cols += [a] * len(r)
        vals += list(B[r, c])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n * n, nz))


def random_sdp(rng, sizes, nz, n_eq):
    """Strictly feasible primal and dual by construction."""
    blocks = [LinearMatrixMap(n, n, _sym_basis(n, nz, rng), True, f"B{j}") for j, n in enumerate(sizes)]
    z0 = rng.standard_normal(nz)
    offsets = []
    for L in blocks:
        G = rng.standard_normal((L.rows, L.rows))
        offsets.append(L(z0) - (G @ G.T + np.eye(L.rows)))
    A = sp.csr_matrix(rng.standard_normal((n_eq, nz)))
    b = A @ z0
    y = rng.standard_normal(n_eq)
    c = -A.T @ y
    for L in blocks:
        G = rng.standard_normal((L.rows, L.rows))
        c = c + L.adjoint(G @ G.T + np.eye(L.rows))
    return ConicProblem(nz, c, A, b, blocks, offsets, kind="random")


def _psd_distance(M):
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(np.sqrt(np.sum(np.minimum(lam, 0.0) ** 2)))


def kkt_residuals(prob, res):
    S = prob.block_values(res.z)
    Z = res.dual_blocks
    stat = prob.c - sum(L.adjoint(Zj) for L, Zj in zip(prob.blocks, Z)) + prob.A.T @ res.y
    dual_obj = -prob.b @ res.y + sum(np.sum(C * Zj) for C, Zj in zip(prob.offsets, Z))
    scale = 1 + abs(res.objective_value)
    return {
        "primal_eq": float(np.abs(prob.A @ res.z - prob.b).max(initial=0.0)) / (1 + np.abs(prob.b).max(initial=0.0)),
        "primal_cone": max(_psd_distance(Sj) for Sj in S),
        "dual_eq": float(np.abs(stat).max()) / (1 + np.abs(prob.c).max()),
        "dual_cone": max(_psd_distance(Zj) for Zj in Z),
        "gap": abs(prob.objective(res.z) - dual_obj) / scale,
        "complementarity": sum(abs(np.sum(Sj * Zj)) for Sj, Zj in zip(S, Z)) / scale,
    }


@pytest.mark.parametrize("seed", range(40))
def test_random_sdp_kkt(seed):
    rng = np.random.default_rng(seed)
    sizes = list(rng.integers(1, 21, size=rng.integers(1, 4)))
    nz = int(rng.integers(3, 30))
    prob = random_sdp(rng, sizes, nz, int(rng.integers(0, min(nz, 6))))
    res = solve_ipm(prob)
    assert res.status == Status.OPTIMAL, res.message
    for key, value in kkt_residuals(prob, res).items():
        assert value <= 1e-6, key


@pytest.mark.parametrize("kernel", ["python", "cython", "auto"])
def test_kernels_agree(kernel):
    from psdcopo import _kernels

    if kernel not in _kernels.available_backends():
        pytest.skip("compiled kernel not built")
    prob = random_sdp(np.random.default_rng(99), [6, 9], 12, 2)
    res = solve_ipm(prob, SolverOptions(kernel=kernel))
    ref = solve_ipm(prob, SolverOptions(kernel="python"))
    assert res.objective_value == pytest.approx(ref.objective_value, abs=1e-8)


def test_primal_infeasible_detected():
    text = "1\n2\n1 -2\n1\n0 1 1 1 1\n1 1 1 1 -1\n0 2 1 1 1\n0 2 2 2 -1\n1 2 1 1 1\n1 2 2 2 -1\n"
    # block 1: -z1 - 1 >= 0 ; equality z1 = 1  -> infeasible
    res = solve_ipm(parse_sdpa(text))
    assert res.status == Status.PRIMAL_INFEASIBLE
    assert res.z is None and res.certificate is not None


def test_dual_infeasible_detected():
    # minimise z1 with only z1 - z2 >= 0 and z2 free: unbounded below
    text = "2\n1\n1\n1 0\n1 1 1 1 1\n2 1 1 1 -1\n"
    res = solve_ipm(parse_sdpa(text))
    assert res.status == Status.DUAL_INFEASIBLE


TWO_BY_TWO = """\
"min z1 s.t. [[z1, 1], [1, z1]] >= 0
1
1
2
1.0
0 1 1 2 -1.0
1 1 1 1 1.0
1 1 2 2 1.0
"""


def test_trivial_two_by_two():
    prob = parse_sdpa(TWO_BY_TWO)
    res = solve_ipm(prob)
    assert res.ok
    assert res.z[0] == pytest.approx(1.0, abs=1e-7)


# --- SDPA ----------------------------------------------------------------------


def test_sdpa_round_trip_preserves_value():
    _, prob = relaxation("f1", 2)
    text = export_sdpa(prob, comment="f1 order 2")
    assert text.startswith('"f1 order 2')
    body = [ln for ln in text.splitlines() if not ln.startswith('"')]
    assert body[:2] == ["35", "6"]
    assert body[2] == f"10 8 2 4 4 {-2 * prob.n_eq}"
    again = parse_sdpa(text)
    assert again.nz == prob.nz and again.n_eq == prob.n_eq
    assert again.block_sizes == prob.block_sizes
    v1, v2 = solve_ipm(prob).objective_value, solve_ipm(again).objective_value
    assert v1 == pytest.approx(v2, abs=1e-8)


def test_sdpa_without_psd_blocks():
    A = sp.csr_matrix(np.array([[1.0, 1.0]]))
    prob = ConicProblem(2, np.array([1.0, 2.0]), A, np.array([3.0]), [])
    again = parse_sdpa(export_sdpa(prob))
    assert again.blocks == [] and again.n_eq == 1
    assert np.allclose(again.A.toarray(), A.toarray()) and again.b[0] == 3.0


@pytest.mark.parametrize("text", ["", "3\n1\n", "1\n1\n2\n1\n0 5 1 1 1\n", "1\n1\n2\n1\n0 1 1\n"])
def test_sdpa_parse_errors(text):
    with pytest.raises(SDPAFormatError):
        parse_sdpa(text)


def test_parse_sdpa_output():
    text = "phase.value = pdOPT\nobjValPrimal = +1.0e+00\nobjValDual = 9.99e-01\nxVec = \n{1.0, 2.5}\n"
    info = parse_sdpa_output(text, 2)
    assert info["phase"] == "pdOPT" and info["objValDual"] == pytest.approx(0.999)
    assert np.allclose(info["xVec"], [1.0, 2.5])
    with pytest.raises(SDPAFormatError):
        parse_sdpa_output(text, 3)


def test_external_backend_with_fake_solver(tmp_path):
    script = tmp_path / "fake_sdpa.py"
    script.write_text(textwrap.dedent("""\
        import sys
        src, dst = sys.argv[1], sys.argv[2]
        assert open(src).read().strip()
        with open(dst, "w") as fh:
            fh.write("phase.value = pdOPT\\nobjValPrimal = 1.0\\nobjValDual = 1.0\\n")
            fh.write("xVec = \\n{1.0}\\n")
    """))
    prob = parse_sdpa(TWO_BY_TWO)
    res = solve(prob, f"sdpa:{sys.executable} {script}")
    assert res.ok and res.z[0] == 1.0
    assert res.residuals["min_eig"] == pytest.approx(0.0, abs=1e-12)


def test_external_backend_missing_binary():
    res = solve(parse_sdpa(TWO_BY_TWO), "sdpa:/nonexistent/sdpa")
    assert res.status == Status.ILL_POSED and res.z is None


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(parse_sdpa(TWO_BY_TWO), "mosek")


def test_cvxopt_cross_check():
    pytest.importorskip("cvxopt")
    _, prob = relaxation("f3", 2)
    a = solve(prob, "cvxopt")
    b = solve(prob, "internal")
    assert a.ok and a.objective_value == pytest.approx(b.objective_value, abs=1e-6)


@pytest.mark.parametrize("name", ["f6", "mixed_horn"])
def test_schur_backends_match_on_relaxation_blocks(name):
    from psdcopo import _kernels

    case = corpus.case(name)
    prob = assemble_relaxation(build_problem_spec(case.polynomial(), case.space), 2)
    rng = np.random.default_rng(5)
    factors = [np.linalg.cholesky(G @ G.T / n + np.eye(n))
               for n in prob.block_sizes for G in [rng.standard_normal((n, n))]]
    structs = [L.upper_coo for L in prob.blocks]
    ref = _kernels.schur_complement(structs, factors, prob.nz, backend="python")
    for b in _kernels.available_backends():
        H = _kernels.schur_complement(structs, factors, prob.nz, backend=b)
        assert np.allclose(H, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())
