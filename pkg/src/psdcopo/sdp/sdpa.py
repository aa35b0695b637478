"""Sparse SDPA (``.dat-s``) export, import and an external-process backend.

The SDPA primal form is ``min c'x  s.t.  sum_i F_i x_i - F_0 >= 0`` which
matches :class:`ConicProblem` directly: ``F_alpha`` collects the coefficient
of ``z_alpha`` in every block and ``F_0`` holds the offsets.  Equality rows
``a'z = b`` become the pair ``a'z - b >= 0`` and ``-a'z + b >= 0`` inside
one trailing diagonal block, which every SDPA-compatible solver accepts.
"""

from __future__ import annotations

import math
import re
import shlex
import subprocess
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..moment import LinearMatrixMap
from .ipm import SolveResult, SolverOptions, Status
from .problem import ConicProblem


class SDPAFormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


def export_sdpa(prob: ConicProblem, comment: str | None = None) -> str:
    """Render ``prob`` as sparse SDPA text (variables are the moments ``z``)."""
    lines = []
    if comment:
        lines += [f'"{line}' for line in comment.splitlines()]
    sizes = list(prob.block_sizes)
    p = prob.n_eq
    if p:
        sizes.append(-2 * p)
    lines.append(str(prob.nz))
    lines.append(str(len(sizes)))
    lines.append(" ".join(str(s) for s in sizes))
    lines.append(" ".join(_fmt(v) for v in prob.c))

    entries: list[tuple[int, int, int, int, float]] = []
    for blk, (L, C) in enumerate(zip(prob.blocks, prob.offsets), start=1):
        a, b, alpha, val = L.upper_coo
        entries += [(int(al) + 1, blk, int(i) + 1, int(j) + 1, float(v)) for i, j, al, v in zip(a, b, alpha, val)]
        if C is not None:
            iu, ju = np.triu_indices(L.rows)
            Cu = np.asarray(C)[iu, ju]
            entries += [(0, blk, int(i) + 1, int(j) + 1, float(v)) for i, j, v in zip(iu, ju, Cu) if v != 0]
    if p:
        blk = len(prob.blocks) + 1
        A = prob.A.tocoo()
        for r, col, v in zip(A.row, A.col, A.data):
            entries.append((int(col) + 1, blk, 2 * r + 1, 2 * r + 1, float(v)))
            entries.append((int(col) + 1, blk, 2 * r + 2, 2 * r + 2, -float(v)))
        for r, v in enumerate(prob.b):
            if v != 0:
                entries.append((0, blk, 2 * r + 1, 2 * r + 1, float(v)))
                entries.append((0, blk, 2 * r + 2, 2 * r + 2, -float(v)))
    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    lines += [f"{m} {b} {i} {j} {_fmt(v)}" for m, b, i, j, v in entries]
    return "\n".join(lines) + "\n"


_SPLIT = re.compile(r"[\s,{}()]+")


def _numbers(line: str) -> list[str]:
    return [t for t in _SPLIT.split(line.strip()) if t]


def parse_sdpa(text: str) -> ConicProblem:
    """Read sparse SDPA text back into a :class:`ConicProblem`.

    A diagonal block whose consecutive entries come in exact ``(+a, -a)``
    pairs is read back as equality rows; other diagonal entries become
    ``1 x 1`` PSD blocks.
    """
    body = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in '"*']
    if len(body) < 4:
        raise SDPAFormatError("truncated header")
    try:
        m = int(_numbers(body[0])[0])
        nblocks = int(_numbers(body[1])[0])
        sizes = [int(s) for s in _numbers(body[2])[:nblocks]]
    except (ValueError, IndexError) as exc:
        raise SDPAFormatError(f"bad header: {exc}") from exc
    if len(sizes) != nblocks:
        raise SDPAFormatError("block structure line is too short")
    c_tokens: list[str] = []
    pos = 3
    while len(c_tokens) < m:
        if pos >= len(body):
            raise SDPAFormatError("objective vector is too short")
        c_tokens += _numbers(body[pos])
        pos += 1
    c = np.array([float(t) for t in c_tokens[:m]])

    per_block: list[list[tuple[int, int, int, float]]] = [[] for _ in sizes]
    for ln in body[pos:]:
        tok = _numbers(ln)
        if len(tok) < 5:
            raise SDPAFormatError(f"bad entry line: {ln!r}")
        mat, blk, i, j = (int(t) for t in tok[:4])
        if not 1 <= blk <= nblocks:
            raise SDPAFormatError(f"block index {blk} out of range")
        if not 0 <= mat <= m:
            raise SDPAFormatError(f"matrix index {mat} out of range")
        if i > j:
            i, j = j, i
        per_block[blk - 1].append((mat, i - 1, j - 1, float(tok[4])))

    blocks: list[LinearMatrixMap] = []
    offsets: list[np.ndarray | None] = []
    eq_rows: list[dict[int, float]] = []
    eq_rhs: list[float] = []
    for size, ents in zip(sizes, per_block):
        if size > 0:
            L, C = _dense_block(size, ents, m, f"block{len(blocks) + 1}")
            blocks.append(L)
            offsets.append(C)
            continue
        dim = -size
        coef: list[dict[int, float]] = [dict() for _ in range(dim)]
        rhs = np.zeros(dim)
        for mat, i, j, v in ents:
            if i != j:
                raise SDPAFormatError("off-diagonal entry in a diagonal block")
            if mat == 0:
                rhs[i] += v
            else:
                coef[i][mat - 1] = coef[i].get(mat - 1, 0.0) + v
        i = 0
        while i < dim:
            if i + 1 < dim and _negated(coef[i], coef[i + 1]) and rhs[i] == -rhs[i + 1]:
                eq_rows.append(coef[i])
                eq_rhs.append(rhs[i])
                i += 2
                continue
            ents1 = [(k + 1, 0, 0, v) for k, v in coef[i].items()]
            if rhs[i]:
                ents1.append((0, 0, 0, rhs[i]))
            L, C = _dense_block(1, ents1, m, f"block{len(blocks) + 1}")
            blocks.append(L)
            offsets.append(C)
            i += 1

    if eq_rows:
        data, ri, ci = [], [], []
        for r, row in enumerate(eq_rows):
            for k, v in row.items():
                ri.append(r)
                ci.append(k)
                data.append(v)
        A = sp.csr_matrix((data, (ri, ci)), shape=(len(eq_rows), m))
    else:
        A = sp.csr_matrix((0, m))
    return ConicProblem(m, c, A, np.array(eq_rhs), blocks, offsets, kind="sdpa")


def _negated(a: dict, b: dict) -> bool:
    return bool(a) and a.keys() == b.keys() and all(a[k] == -b[k] for k in a)


def _dense_block(size: int, ents, m: int, label: str = ""):
    rows, cols, vals = [], [], []
    C = np.zeros((size, size))
    has_offset = False
    for mat, i, j, v in ents:
        if mat == 0:
            C[i, j] += v
            if i != j:
                C[j, i] += v
            has_offset = True
            continue
        rows.append(i * size + j)
        cols.append(mat - 1)
        vals.append(v)
        if i != j:
            rows.append(j * size + i)
            cols.append(mat - 1)
            vals.append(v)
    coeffs = sp.csr_matrix((vals, (rows, cols)), shape=(size * size, m))
    coeffs.sum_duplicates()
    return LinearMatrixMap(size, size, coeffs, True, label), (C if has_offset else None)


# --- external solver -------------------------------------------------------------

_PHASES = {
    "pdOPT": Status.OPTIMAL,
    "pINF_dFEAS": Status.PRIMAL_INFEASIBLE,
    "pINF": Status.PRIMAL_INFEASIBLE,
    "dUNBD": Status.PRIMAL_INFEASIBLE,
    "pdINF": Status.PRIMAL_INFEASIBLE,
    "pFEAS_dINF": Status.DUAL_INFEASIBLE,
    "dINF": Status.DUAL_INFEASIBLE,
    "pUNBD": Status.DUAL_INFEASIBLE,
    "noINFO": Status.ITERATION_LIMIT,
}


def parse_sdpa_output(text: str, nz: int) -> dict:
    """Pull ``phase.value``, the objective values and ``xVec`` out of an SDPA result file."""
    out: dict = {}
    ph = re.search(r"phase\.value\s*=\s*(\w+)", text)
    out["phase"] = ph.group(1) if ph else None
    for key in ("objValPrimal", "objValDual", "relative gap", "p.feas.error", "d.feas.error"):
        mt = re.search(re.escape(key) + r"\s*=\s*([-+0-9.eE]+)", text)
        if mt:
            out[key] = float(mt.group(1))
    it = re.search(r"(?:iteration|iter)\s*=\s*(\d+)", text)
    out["iterations"] = int(it.group(1)) if it else 0
    xv = re.search(r"xVec\s*=\s*\{([^}]*)\}", text)
    if xv:
        x = np.array([float(t) for t in _numbers(xv.group(1))])
        if x.size != nz:
            raise SDPAFormatError(f"xVec has {x.size} entries, expected {nz}")
        out["xVec"] = x
    return out


def solve_external(prob: ConicProblem, command: str, options: SolverOptions | None = None,
                   timeout: float | None = None) -> SolveResult:
    """Run ``command <input.dat-s> <output>`` and read the primal vector back."""
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="psdcopo-") as tmp:
        src = Path(tmp) / "problem.dat-s"
        dst = Path(tmp) / "problem.out"
        src.write_text(export_sdpa(prob))
        argv = shlex.split(command) + [str(src), str(dst)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, check=False)
        except (OSError, subprocess.TimeoutExpired) as exc:
            return SolveResult(Status.ILL_POSED, None, math.nan, math.nan, {}, 0, time.perf_counter() - t0,
                               message=f"external solver did not run: {exc}")
        text = dst.read_text() if dst.exists() else ""
        if not text:
            return SolveResult(Status.ILL_POSED, None, math.nan, math.nan, {}, 0, time.perf_counter() - t0,
                               message=f"no result file (exit {proc.returncode}): {proc.stderr.strip()[:200]}")
    info = parse_sdpa_output(text, prob.nz)
    status = _PHASES.get(info["phase"], Status.ILL_POSED)
    z = info.get("xVec")
    residuals = {}
    if z is not None:
        feas = prob.feasibility(z)
        residuals = {"primal": max(feas["equality"], max(0.0, -feas["min_eig"])), "min_eig": feas["min_eig"]}
        if "relative gap" in info:
            residuals["gap"] = info["relative gap"]
    elif status == Status.OPTIMAL:
        status = Status.ILL_POSED
    obj = prob.objective(z) if z is not None else math.nan
    return SolveResult(
        status,
        z if status not in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE) else None,
        obj,
        info.get("objValDual", obj),
        residuals,
        info["iterations"],
        time.perf_counter() - t0,
        message=f"external phase {info['phase']}",
    )
