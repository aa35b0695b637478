"""Time the Schur-complement assembly with the compiled and numpy kernels.

``cython`` sends every block through the compiled loop, ``python`` every block
through numpy, and ``auto`` picks per block with the cost model in
``psdcopo._kernels``.

The blocks come from real relaxations so the sparsity pattern matches what
the solver sees.  Each factor is a random well-conditioned matrix standing in
for the scaling used inside an iteration.

    python3 benchmarks/bench_schur.py
    python3 benchmarks/bench_schur.py --repeat 10 --cases f6:3 horn_trace_n5:2
"""

import argparse
import time

import numpy as np

from psdcopo import _kernels, corpus
from psdcopo.conegen import build_problem_spec
from psdcopo.sdp import assemble_relaxation

DEFAULT_CASES = ["f1:2", "f6:2", "f6:3", "hp_alpha_0.05:2", "mixed_hoffman_pereira:2"]


def relaxation_blocks(name, k):
    case = corpus.case(name)
    spec = build_problem_spec(case.polynomial(), case.space, allow_inhomogeneous=case.allow_inhomogeneous)
    prob = assemble_relaxation(spec, k)
    rng = np.random.default_rng(0)
    factors = []
    for n in prob.block_sizes:
        G = rng.standard_normal((n, n)) / np.sqrt(n)
        factors.append(np.linalg.cholesky(G @ G.T + np.eye(n)))
    return prob, [L.upper_coo for L in prob.blocks], factors


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", default=DEFAULT_CASES, metavar="NAME:K")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = _kernels.available_backends()
    print(f"kernels available: {', '.join(backends)}")
    fast = [b for b in backends if b != "python"]
    print(f"{'case':28s} {'nz':>6s} {'blocks':>7s}" + "".join(f" {b:>10s}" for b in backends)
          + "".join(f" {'x ' + b:>9s}" for b in fast) + "  max|diff|")
    for item in args.cases:
        name, k = item.rsplit(":", 1)
        prob, structs, factors = relaxation_blocks(name, int(k))
        timings, results = {}, {}
        for b in backends:
            timings[b], results[b] = best_of(
                lambda b=b: _kernels.schur_complement(structs, factors, prob.nz, backend=b), args.repeat)
        cols = "".join(f" {timings[b] * 1e3:8.2f}ms" for b in backends)
        tail = "".join(f" {timings['python'] / timings[b]:8.2f}x" for b in fast)
        if fast:
            diff = max(np.abs(results["python"] - results[b]).max() for b in fast)
            tail += f"  {diff:.1e}"
        print(f"{item:28s} {prob.nz:6d} {len(prob.blocks):7d}{cols}{tail}")


if __name__ == "__main__":
    main()
