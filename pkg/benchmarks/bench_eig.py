"""Time the Jacobi eigen-solver backends against LAPACK.

Run ``python benchmarks/bench_eig.py [--sizes 30 60 120] [--repeat 3]``.
The compiled backend is skipped when the extension is not built.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from factorseq import _kernels
from factorseq.spectra import hermitian_eig


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((n, 2 * n)) + 1j * rng.standard_normal((n, 2 * n))
    return X @ X.conj().T / (2 * n)


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> list:
    ap = argparse.ArgumentParser(description="Jacobi backend benchmark")
    ap.add_argument("--sizes", type=int, nargs="+", default=[30, 60, 120])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    backends = ["python"] + (["cython"] if _kernels.HAVE_CYTHON else [])
    rows = []
    print(f"{'n':>5} {'backend':>8} {'seconds':>10} {'max |dlambda|':>14}")
    for n in args.sizes:
        A = random_hermitian(n, rng)
        ref = np.linalg.eigvalsh(A)[::-1]
        for name in backends:
            secs = best_of(lambda: hermitian_eig(A, backend=name), args.repeat)
            err = float(np.max(np.abs(hermitian_eig(A, backend=name).values - ref)))
            rows.append((n, name, secs, err))
            print(f"{n:>5} {name:>8} {secs:>10.4f} {err:>14.2e}")
        secs = best_of(lambda: hermitian_eig(A, method="lapack"), args.repeat)
        rows.append((n, "lapack", secs, 0.0))
        print(f"{n:>5} {'lapack':>8} {secs:>10.4f} {0.0:>14.2e}")
    return rows


if __name__ == "__main__":
    main()
