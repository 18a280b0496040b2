"""Compare the compiled and numpy kernels on random sign tables.

    python benchmarks/bench_kernels.py [--repeat 5] [--campaign]

``dispatch`` is what the package uses by default (compiled below
``kernels.BLAS_CUTOFF`` pairwise operations, numpy above).  ``--campaign``
also times a 10,000-instance identity campaign under both backends.
"""
import os
import subprocess
import sys
import argparse
import timeit

import numpy as np

from pacbayes_da import _pykernels, kernels

try:
    from pacbayes_da import _ckernels
except ImportError:
    _ckernels = None

CASES = [(3, 4), (5, 6), (10, 100), (20, 50), (50, 600), (50, 20000), (200, 2000)]


def bench(impl, n, npts, repeat, rng):
    table = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, npts))
    w = rng.dirichlet(np.ones(2 * npts)).reshape(npts, 2)
    marg = w.sum(axis=1)
    out = {}
    for name, fn in {
        "disagreement": lambda: kernels.disagreement_matrix(table, marg, impl=impl),
        "joint_error": lambda: kernels.joint_error_matrix(table, w[:, 1], w[:, 0], impl=impl),
        "risks": lambda: kernels.voter_risks(table, w[:, 1], w[:, 0], impl=impl),
    }.items():
        number = max(1, int(2e6 // (n * n * npts + 1)))
        out[name] = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--campaign", action="store_true")
    args = ap.parse_args()
    impls = {"python": _pykernels}
    if _ckernels is not None:
        impls["cython"] = _ckernels
        impls["dispatch"] = None
    else:
        print("compiled kernels not built; timing the numpy path only")
    print(f"{'n':>5} {'points':>7} {'kernel':>13} " + " ".join(f"{k:>12}" for k in impls) + "   speedup")
    for n, npts in CASES:
        res = {k: bench(impl, n, npts, args.repeat, np.random.default_rng(0)) for k, impl in impls.items()}
        for kernel in res["python"]:
            times = [res[k][kernel] for k in impls]
            speed = f"{res['python'][kernel] / res['cython'][kernel]:8.2f}x" if "cython" in res else ""
            print(f"{n:>5} {npts:>7} {kernel:>13} " + " ".join(f"{t * 1e6:10.1f}us" for t in times) + f" {speed}")
    if args.campaign:
        code = (
            "import time; from pacbayes_da import verify, BACKEND; t = time.perf_counter(); "
            "verify.identities(10000, 7); print(BACKEND, round(time.perf_counter() - t, 2), 's')"
        )
        for pure in ("", "1"):
            env = dict(os.environ, PACBAYES_DA_PURE=pure)
            out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
            print("identities campaign (10,000 instances):", out.stdout.strip() or out.stderr.strip())


if __name__ == "__main__":
    main()
