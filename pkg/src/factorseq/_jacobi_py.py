"""Pure-numpy cyclic Jacobi kernel (fallback when the extension is absent).

Both backends visit index pairs in the same round-robin (tournament)
order. Pairs inside one round are disjoint, so their rotations commute
and the fallback applies a whole round as one vectorized update.
"""
from __future__ import annotations

import numpy as np


def round_robin_pairs(n: int) -> np.ndarray:
    """Tournament schedule: array (rounds, pairs, 2) covering all i < j once.

    For odd ``n`` a dummy index ``n`` is added and pairs that touch it are
    dropped, so rounds can have different lengths; they are padded with
    ``(-1, -1)`` entries that the kernels skip.
    """
    m = n + (n % 2)
    if m < 2:
        return np.empty((0, 0, 2), dtype=np.intp)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                pairs.append((min(a, b), max(a, b)))
            else:
                pairs.append((-1, -1))
        rounds.append(pairs)
        players = [players[0], players[-1], *players[1:-1]]
    return np.asarray(rounds, dtype=np.intp)


def _off_norm2(A: np.ndarray) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.sum(off.real ** 2 + off.imag ** 2)) if np.iscomplexobj(A) else float(np.sum(off * off))


def jacobi_sweeps(A: np.ndarray, pairs: np.ndarray, tol: float, max_sweeps: int):
    """Diagonalize Hermitian ``A`` in place; return ``(V, sweeps, converged)``.

    ``A`` ends up (numerically) diagonal and ``V`` holds the eigenvectors
    as columns, with ``A_in = V diag(A_out) V^H``.
    """
    n = A.shape[0]
    cplx = np.iscomplexobj(A)
    V = np.eye(n, dtype=A.dtype)
    fro2 = float(np.sum(np.abs(A) ** 2))
    if fro2 == 0.0 or n < 2:
        return V, 0, True
    thresh = (tol * tol) * fro2
    for sweep in range(max_sweeps):
        if _off_norm2(A) < thresh:
            return V, sweep, True
        for rnd in pairs:
            sel = rnd[rnd[:, 0] >= 0]
            p, q = sel[:, 0], sel[:, 1]
            apq = A[p, q]
            g = np.abs(apq)
            act = g > 0.0
            if not np.any(act):
                continue
            p, q, apq, g = p[act], q[act], apq[act], g[act]
            a = A[p, p].real
            b = A[q, q].real
            e = apq / g
            theta = (b - a) / (2.0 * g)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ec = np.conj(e) if cplx else e
            # rows: R^H A
            rp = A[p, :].copy()
            rq = A[q, :]
            A[p, :] = c[:, None] * rp - (s * e)[:, None] * rq
            A[q, :] = s[:, None] * rp + (c * e)[:, None] * rq
            # columns: (R^H A) R
            cp = A[:, p].copy()
            cq = A[:, q]
            A[:, p] = cp * c[None, :] - cq * (s * ec)[None, :]
            A[:, q] = cp * s[None, :] + cq * (c * ec)[None, :]
            A[p, p] = a - t * g
            A[q, q] = b + t * g
            A[p, q] = 0.0
            A[q, p] = 0.0
            vp = V[:, p].copy()
            vq = V[:, q]
            V[:, p] = vp * c[None, :] - vq * (s * ec)[None, :]
            V[:, q] = vp * s[None, :] + vq * (c * ec)[None, :]
    return V, max_sweeps, _off_norm2(A) < thresh
