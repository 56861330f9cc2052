"""Backend selection for the Jacobi eigen-kernel.

The compiled extension is used when importable. Setting the environment
variable ``FACTORSEQ_PURE_PYTHON=1`` forces the numpy fallback.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from . import _jacobi_py
from ._jacobi_py import round_robin_pairs

try:
    if os.environ.get("FACTORSEQ_PURE_PYTHON") == "1":
        raise ImportError("pure-Python backend requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

HAVE_CYTHON = _ckernels is not None
BACKEND = "cython" if HAVE_CYTHON else "python"


@lru_cache(maxsize=64)
def _pairs(n: int) -> np.ndarray:
    pairs = round_robin_pairs(n)
    pairs.setflags(write=False)
    return pairs


def jacobi(A: np.ndarray, tol: float, max_sweeps: int, backend: str | None = None):
    """Run cyclic Jacobi on a copy of ``A``.

    Returns
    -------
    diag : ndarray
        Final diagonal (real).
    vecs : ndarray
        Eigenvectors as columns.
    sweeps : int
        Sweeps used, or -1 when ``max_sweeps`` was exhausted.
    """
    backend = backend or BACKEND
    work = np.array(A, dtype=np.complex128 if np.iscomplexobj(A) else np.float64, order="C", copy=True)
    n = work.shape[0]
    if backend == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        W, sweeps = _ckernels.jacobi_sweeps_rows(work, _pairs(n), tol, max_sweeps)
        vecs = W.T
    elif backend == "python":
        vecs, sweeps, ok = _jacobi_py.jacobi_sweeps(work, _pairs(n), tol, max_sweeps)
        if not ok:
            sweeps = -1
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return np.diag(work).real.copy(), vecs, sweeps
