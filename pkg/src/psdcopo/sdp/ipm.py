"""Primal-dual interior-point method on the homogeneous self-dual embedding.

The moment program is put in the form::

    minimize  c'x   s.t.  G x + s = h,  A x = b,  s in S_+ (block diagonal)

with ``G = -L`` (stacked localizing maps) and ``h = -C``.  The dual is::

    maximize  -h'z - b'y   s.t.  G'z + A'y + c = 0,  z in S_+

Iterates follow the embedding

    A'y + G'z + c*tau = 0,   A x = b*tau,   s = h*tau - G x,
    kappa = -c'x - b'y - h'z

with Nesterov-Todd scaling recomputed from ``(s, z)`` at every iteration.
A vanishing ``tau`` with positive ``kappa`` yields an infeasibility
certificate.  The Newton systems reduce to one dense Schur complement
``H = G' (W'W)^{-1} G`` assembled by :mod:`psdcopo._kernels`.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .. import _kernels
from .problem import ConicProblem

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ILL_POSED = "IllPosed"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class SolverOptions:
    eps_feas: float = 1e-8
    eps_gap: float = 1e-8
    eps_comp: float = 1e-6
    max_iter: int = 200
    step: float = 0.99
    refinement: int = 3
    stall_iter: int = 3
    # a stalled run is still Optimal if its best iterate is this close to the targets
    stall_accept: float = 100.0
    kernel: str | None = None
    verbose: bool = False


@dataclass
class SolveResult:
    status: Status
    z: np.ndarray | None
    objective_value: float
    dual_value: float
    residuals: dict
    iterations: int
    wall_time: float
    y: np.ndarray | None = None
    dual_blocks: list | None = None
    slack_blocks: list | None = None
    certificate: dict | None = None
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL

    def stats(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective_value,
            "dual_objective": self.dual_value,
            "iterations": self.iterations,
            "time_s": self.wall_time,
            **{k: float(v) for k, v in self.residuals.items()},
        }


class NumericalFailure(ArithmeticError):
    pass


# --- symmetric-cone helpers -------------------------------------------------


def _sym(M):
    return 0.5 * (M + M.T)


def _jordan(A, B):
    return 0.5 * (A @ B + B @ A)


def _jordan_solve(lam, R):
    # U with lam o U = R for diagonal lam
    return 2.0 * R / (lam[:, None] + lam[None, :])


def _max_step(lam, D):
    """Largest t with diag(lam) + t*D PSD (inf if unbounded)."""
    r = 1.0 / np.sqrt(lam)
    M = D * r[:, None] * r[None, :]
    mn = float(np.linalg.eigvalsh(_sym(M))[0])
    return math.inf if mn >= 0 else -1.0 / mn


def _nt_scaling(S, Z):
    """Return ``(R, Rti, lam)`` with ``R'ZR = Rti'S Rti = diag(lam)``, ``Rti = R^{-T}``."""
    try:
        Ls = np.linalg.cholesky(_sym(S))
        Lz = np.linalg.cholesky(_sym(Z))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("iterate left the cone") from exc
    U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
    if lam.min() <= 0:
        raise NumericalFailure("degenerate scaling")
    isq = 1.0 / np.sqrt(lam)
    R = (Ls @ Vt.T) * isq[None, :]
    Rti = (Lz @ U) * isq[None, :]
    return R, Rti, lam


# --- problem in solver form -----------------------------------------------------


class _Cone:
    def __init__(self, prob: ConicProblem):
        self.P = [sp.csr_matrix(L.coeffs) for L in prob.blocks]
        self.PT = [P.T.tocsr() for P in self.P]
        self.sizes = [L.rows for L in prob.blocks]
        self.structs = [L.upper_coo for L in prob.blocks]
        self.h = []
        for L, C in zip(prob.blocks, prob.offsets):
            self.h.append(np.zeros((L.rows, L.rows)) if C is None else -np.asarray(C, dtype=float))
        self.degree = sum(self.sizes)

    def G(self, x):
        return [-(P @ x).reshape(n, n) for P, n in zip(self.P, self.sizes)]

    def GT(self, zs):
        out = 0.0
        for PT, Z in zip(self.PT, zs):
            out = out - PT @ Z.reshape(-1)
        return np.asarray(out)

    @staticmethod
    def dot(us, vs):
        return float(sum(np.vdot(U, V) for U, V in zip(us, vs)))

    @staticmethod
    def norm(us):
        return math.sqrt(sum(float(np.vdot(U, U)) for U in us))


def _independent_rows(A: sp.csr_matrix, b: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; flag inconsistent systems."""
    p = A.shape[0]
    if p == 0:
        return A, b, True
    Ad = A.toarray()
    _, R, piv = la.qr(Ad.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(1.0, diag[0] if diag.size else 1.0)))
    keep = np.sort(piv[:rank])
    A2 = A[keep]
    b2 = b[keep]
    consistent = True
    if rank < p:
        xls, *_ = la.lstsq(A2.toarray(), b2)
        consistent = bool(np.linalg.norm(Ad @ xls - b) <= 1e-8 * max(1.0, np.linalg.norm(b)))
    return sp.csr_matrix(A2), b2, consistent


class _EqualityBasis:
    """Orthogonal split of the moment space into ``range(A')`` and ``null(A)``."""

    def __init__(self, A: sp.csr_matrix, nz: int):
        p = A.shape[0]
        self.p = p
        if p:
            Q, R = la.qr(A.T.toarray(), mode="full")
            self.Q1 = Q[:, :p]
            self.N = Q[:, p:]
            self.R = R[:p, :p]
        else:
            self.Q1 = np.zeros((nz, 0))
            self.N = np.eye(nz)
            self.R = np.zeros((0, 0))

    def particular(self, by):
        """Least-norm ``x`` with ``A x = by``."""
        if not self.p:
            return 0.0
        return self.Q1 @ la.solve_triangular(self.R, by, trans="T", check_finite=False)

    def multiplier(self, r):
        """``y`` minimising ``||A' y - r||``."""
        if not self.p:
            return np.zeros(0)
        return la.solve_triangular(self.R, self.Q1.T @ r, check_finite=False)


_PIVOT_RATIO = 1e-15


class _KKT:
    """Solves ``[0 A' G'; A 0 0; G 0 -W'W] [ux; uy; uz] = [bx; by; bz]``.

    The equality rows are eliminated with a null-space basis ``N`` of ``A``,
    which keeps ``A ux = by`` exact and leaves the reduced Schur matrix
    ``N' H N`` to a Cholesky factorisation.
    """

    def __init__(self, cone: _Cone, A, AT_dense, eqb: _EqualityBasis, nz, R, Rti, kernel):
        self.cone = cone
        self.A = A
        self.AT = AT_dense
        self.eqb = eqb
        self.R = R
        self.Rti = Rti
        self.Winv = [F @ F.T for F in Rti]
        self.Wsq = [F @ F.T for F in R]
        H = _sym(_kernels.schur_complement(cone.structs, Rti, nz, backend=kernel))
        self.H = H
        N = eqb.N
        self.Hf = self._factor(_sym(N.T @ H @ N)) if N.shape[1] else None

    @staticmethod
    def _factor(M):
        scale = max(float(np.max(np.abs(np.diag(M)))), 1e-300)
        for reg in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
            try:
                L = np.linalg.cholesky(M + reg * scale * np.eye(M.shape[0]))
            except np.linalg.LinAlgError:
                continue
            # a factor that succeeded on a numerically singular matrix is
            # garbage, and refinement then diverges instead of converging
            piv = np.diag(L) ** 2
            if piv.min() >= _PIVOT_RATIO * piv.max():
                return L
        raise NumericalFailure("Schur complement is not positive definite")

    def _hsolve(self, r):
        t = la.solve_triangular(self.Hf, r, lower=True, check_finite=False)
        return la.solve_triangular(self.Hf.T, t, lower=False, check_finite=False)

    def _solve_once(self, bx, by, bz):
        cone = self.cone
        r1 = bx + cone.GT([Wi @ B @ Wi for Wi, B in zip(self.Winv, bz)])
        ux = self.eqb.particular(by)
        ux = np.zeros_like(r1) + ux
        if self.Hf is not None:
            N = self.eqb.N
            w = self._hsolve(N.T @ (r1 - self.H @ ux))
            ux = ux + N @ w
        uy = self.eqb.multiplier(r1 - self.H @ ux)
        Gx = cone.G(ux)
        uz = [Wi @ (g - B) @ Wi for Wi, g, B in zip(self.Winv, Gx, bz)]
        return ux, uy, [_sym(U) for U in uz]

    def _residual(self, ux, uy, uz, bx, by, bz):
        cone = self.cone
        ex = bx - (self.AT @ uy + cone.GT(uz))
        ey = by - self.A @ ux
        Gx = cone.G(ux)
        ez = [B - (g - Wq @ U @ Wq) for B, g, Wq, U in zip(bz, Gx, self.Wsq, uz)]
        return ex, ey, ez

    def solve(self, bx, by, bz, refinement=3):
        ux, uy, uz = self._solve_once(bx, by, bz)
        for _ in range(refinement):
            ex, ey, ez = self._residual(ux, uy, uz, bx, by, bz)
            dx, dy, dz = self._solve_once(ex, ey, ez)
            ux = ux + dx
            uy = uy + dy
            uz = [U + D for U, D in zip(uz, dz)]
        return ux, uy, uz


def solve_ipm(prob: ConicProblem, opts: SolverOptions | None = None) -> SolveResult:
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    nz = prob.nz
    cone = _Cone(prob)
    A, b, consistent = _independent_rows(prob.A, prob.b)
    if not consistent:
        return SolveResult(
            Status.PRIMAL_INFEASIBLE, None, math.inf, math.inf, {}, 0, time.perf_counter() - t0,
            message="equality constraints are inconsistent",
        )
    AT = A.T.toarray()
    c = prob.c.astype(float)
    h = cone.h
    nblk = len(cone.sizes)

    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b)))
    resz0 = max(1.0, cone.norm(h))

    eyes = [np.eye(n) for n in cone.sizes]
    try:
        eqb = _EqualityBasis(A, nz)
        kkt = _KKT(cone, A, AT, eqb, nz, eyes, eyes, opts.kernel)
        # least-squares primal start and minimum-norm dual start
        x, _, sneg = kkt.solve(np.zeros(nz), b.copy(), [H.copy() for H in h], opts.refinement)
        s = [-S for S in sneg]
        _, y, z = kkt.solve(-c, np.zeros(A.shape[0]), [np.zeros_like(H) for H in h], opts.refinement)
    except NumericalFailure as exc:
        return SolveResult(Status.ILL_POSED, None, math.nan, math.nan, {}, 0, time.perf_counter() - t0,
                           message=f"initialisation failed: {exc}")

    def shift(U):
        nrm = cone.norm(U)
        ts = max(float(-np.linalg.eigvalsh(_sym(M))[0]) for M in U) if U else -1.0
        if ts >= -1e-8 * max(nrm, 1.0):
            U = [M + (1.0 + ts) * I for M, I in zip(U, eyes)]
        return U

    s = shift(s)
    z = shift(z)
    tau, kappa = 1.0, 1.0
    history = []
    status = Status.ITERATION_LIMIT
    message = ""
    cert = None
    res = {}
    best = None

    for it in range(opts.max_iter + 1):
        # residuals
        hrx = -(AT @ y) - cone.GT(z)
        rx = hrx - c * tau
        hry = A @ x
        ry = hry - b * tau
        Gx = cone.G(x)
        hrz = [S + g for S, g in zip(s, Gx)]
        rz = [R - H * tau for R, H in zip(hrz, h)]
        cx = float(c @ x)
        by_ = float(b @ y)
        hz = cone.dot(h, z)
        rt = kappa + cx + by_ + hz
        gap = cone.dot(s, z)

        pcost = cx / tau
        dcost = -(by_ + hz) / tau
        resx = float(np.linalg.norm(rx)) / tau
        resy = float(np.linalg.norm(ry)) / tau
        resz = cone.norm(rz) / tau
        pres = max(resy / resy0, resz / resz0)
        dres = resx / resx0
        absgap = gap / tau**2
        relgap = abs(pcost - dcost) / (1.0 + abs(pcost) + abs(dcost))
        comp = absgap / (1.0 + abs(pcost) + abs(dcost))
        pinf = float(np.linalg.norm(hrx)) / resx0 / (-hz - by_) if hz + by_ < 0 else None
        dinf = max(float(np.linalg.norm(hry)) / resy0, cone.norm(hrz) / resz0) / (-cx) if cx < 0 else None
        res = {"primal": pres, "dual": dres, "gap": relgap, "complementarity": comp, "tau": tau, "kappa": kappa}
        history.append(dict(it=it, pcost=pcost, dcost=dcost, pres=pres, dres=dres, gap=relgap, comp=comp))
        if opts.verbose:
            log.info("%3d  %+.8e  %+.8e  pres %.1e  dres %.1e  gap %.1e  tau %.1e  kappa %.1e",
                     it, pcost, dcost, pres, dres, relgap, tau, kappa)

        merit = max(pres / opts.eps_feas, dres / opts.eps_feas, relgap / opts.eps_gap, comp / opts.eps_comp)
        if best is None or merit < best[0]:
            best = (merit, it, x.copy(), y.copy(), [S.copy() for S in s], [Z.copy() for Z in z], tau, dict(res))
        if merit <= 1.0:
            status = Status.OPTIMAL
            break
        if pinf is not None and pinf <= opts.eps_feas:
            status = Status.PRIMAL_INFEASIBLE
            scale = -hz - by_
            cert = {"y": y / scale, "z": [Z / scale for Z in z], "residual": pinf}
            break
        if dinf is not None and dinf <= opts.eps_feas:
            status = Status.DUAL_INFEASIBLE
            cert = {"x": x / (-cx), "s": [S / (-cx) for S in s], "residual": dinf}
            break
        if it == opts.max_iter:
            break
        if it - best[1] >= opts.stall_iter and merit > 1e3 * best[0]:
            status = Status.ILL_POSED
            message = "iterates diverged after loss of accuracy"
            break

        try:
            R, Rti, lam = zip(*(_nt_scaling(S, Z) for S, Z in zip(s, z)))
            kkt = _KKT(cone, A, AT, eqb, nz, list(R), list(Rti), opts.kernel)
            # direction for the tau column
            x1, y1, z1 = kkt.solve(-c, b.copy(), [H.copy() for H in h], opts.refinement)
        except NumericalFailure as exc:
            status = Status.ILL_POSED
            message = str(exc)
            break

        mu = (gap + tau * kappa) / (cone.degree + 1)
        denom = float(c @ x1 + b @ y1) + cone.dot(h, z1) - kappa / tau

        def direction(sigma, corr_s, corr_k, linear_ds=True):
            rs = []
            for j in range(nblk):
                M = -np.diag(lam[j] ** 2) + sigma * mu * eyes[j]
                if corr_s is not None:
                    M = M - corr_s[j]
                rs.append(M)
            rk = -tau * kappa + sigma * mu - corr_k
            lsol = [_jordan_solve(lam[j], rs[j]) for j in range(nblk)]
            bx = (1.0 - sigma) * rx
            by = -(1.0 - sigma) * ry
            bz = [-(1.0 - sigma) * rz[j] - R[j] @ lsol[j] @ R[j].T for j in range(nblk)]
            x2, y2, z2 = kkt.solve(bx, by, bz, opts.refinement)
            bt = -(1.0 - sigma) * rt
            num = bt - rk / tau - float(c @ x2 + b @ y2) - cone.dot(h, z2)
            dtau = num / denom
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dz = [Z2 + dtau * Z1 for Z2, Z1 in zip(z2, z1)]
            dkappa = (rk - kappa * dtau) / tau
            dzs = [_sym(R[j].T @ dz[j] @ R[j]) for j in range(nblk)]
            if linear_ds:
                # ds from the linearised primal equation rather than from the
                # complementarity row: the latter cancels badly once W is extreme
                Gdx = cone.G(dx)
                ds = [_sym(-(1.0 - sigma) * rz[j] - Gdx[j] + dtau * h[j]) for j in range(nblk)]
                dss = [_sym(Rti[j].T @ ds[j] @ Rti[j]) for j in range(nblk)]
            else:
                dss = [_sym(lsol[j] - dzs[j]) for j in range(nblk)]
                ds = [_sym(R[j] @ dss[j] @ R[j].T) for j in range(nblk)]
            tmax = math.inf
            for j in range(nblk):
                tmax = min(tmax, _max_step(lam[j], dss[j]), _max_step(lam[j], _sym(dzs[j])))
            if dtau < 0:
                tmax = min(tmax, -tau / dtau)
            if dkappa < 0:
                tmax = min(tmax, -kappa / dkappa)
            return dx, dy, dz, ds, dtau, dkappa, dss, dzs, tmax

        try:
            aff = direction(0.0, None, 0.0)
            dtau_a, dkappa_a, dss_a, dzs_a, tmax_a = aff[4:]
            step_a = min(1.0, tmax_a)
            sigma = (1.0 - step_a) ** 3
            corr = [_jordan(dss_a[j], dzs_a[j]) for j in range(nblk)]
            dx, dy, dz, ds, dtau, dkappa, _dss, _dzs, tmax = direction(sigma, corr, dtau_a * dkappa_a)
            if opts.step * tmax < 1e-8:
                # rounding in G dx can push ds out of the cone when some
                # eigenvalues are tiny; the complementarity form stays inside
                dx, dy, dz, ds, dtau, dkappa, _dss, _dzs, tmax = direction(
                    sigma, corr, dtau_a * dkappa_a, linear_ds=False)
        except NumericalFailure as exc:
            status = Status.ILL_POSED
            message = str(exc)
            break
        step = min(1.0, opts.step * tmax)
        if step < 1e-12:
            status = Status.ILL_POSED
            message = "step length collapsed"
            break
        x = x + step * dx
        y = y + step * dy
        s = [_sym(S + step * D) for S, D in zip(s, ds)]
        z = [_sym(Z + step * D) for Z, D in zip(z, dz)]
        tau = tau + step * dtau
        kappa = kappa + step * dkappa

    if status in (Status.ILL_POSED, Status.ITERATION_LIMIT) and best is not None:
        # fall back to the most accurate iterate seen; it may already meet
        # the tolerances if accuracy was lost only in the final steps
        merit, _, x, y, s, z, tau, res = best
        if merit <= 1.0:
            status = Status.OPTIMAL
            message = ""
        elif merit <= opts.stall_accept:
            status = Status.OPTIMAL
            message = f"stalled at {merit:.1f}x the tolerances; accepted at reduced accuracy"
        else:
            message = (message + "; " if message else "") + "returning the most accurate iterate"

    it_count = len(history) - 1
    wall = time.perf_counter() - t0
    if status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE):
        return SolveResult(status, None, math.nan, math.nan, res, it_count, wall, certificate=cert,
                           history=history, message=message)
    zz = x / tau
    return SolveResult(
        status,
        zz,
        float(c @ zz),
        -(float(b @ y) + cone.dot(h, z)) / tau,
        res,
        it_count,
        wall,
        y=y / tau,
        dual_blocks=[Z / tau for Z in z],
        slack_blocks=[S / tau for S in s],
        message=message,
        history=history,
    )
