"""Static (SLRA) and dynamic (DLRA) low-rank approximations of a panel.

SLRA projects each ``y_t`` on the leading ``r`` eigenvectors of the sample
covariance. DLRA projects frequency by frequency on the leading ``q``
eigenvectors of the estimated spectral density and maps the projectors
back to a two-sided time-domain filter.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .panel import Panel, sample_autocov
from .spectra import SpectralDensity, default_bandwidth, estimate_spectrum, hermitian_eig

EDGE_POLICIES = ("drop_edges", "truncate_window")


@dataclass(frozen=True)
class SlraFit:
    """Static rank-``r`` approximation ``C_t = P' P y_t``.

    Attributes
    ----------
    common, idio : Panel
        ``C`` and ``e = y - C`` over the full sample.
    factors : ndarray, shape (r, T)
        Scores normalized so that ``factors @ factors.T / T = I``.
    loadings : ndarray, shape (n, r)
        ``common.values == loadings @ factors``.
    eigenvalues : ndarray
        Leading ``r + 1`` eigenvalues of the sample covariance (fewer if
        ``n`` is smaller).
    projector : ndarray, shape (n, n)
    ties : tuple of int
        Near-tied eigenvalue positions reported by the eigen-solver.
    """

    common: Panel
    idio: Panel
    factors: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    projector: np.ndarray
    ties: tuple = ()

    @property
    def r(self) -> int:
        return self.factors.shape[0]


@dataclass(frozen=True)
class DlraFit:
    """Dynamic rank-``q`` approximation via a two-sided filter.

    ``filter[k + M]`` holds the real ``n x n`` coefficient ``K(k)`` and
    ``chi_t = sum_{|k| <= M} K(k) y_{t-k}``. With ``drop_edges`` the
    ``common``/``idio`` panels cover only ``window`` (array positions
    ``[M, T - M)`` of the input); with ``truncate_window`` they span the
    whole sample and edge columns use only the available lags.
    """

    common: Panel
    idio: Panel
    filter: np.ndarray
    spectral_eigenvalues: np.ndarray
    q: int
    M: int
    window: tuple
    edge_policy: str
    thetas: np.ndarray

    def filter_rows(self):
        """Yield ``(k, i, j, value)`` for every filter coefficient."""
        n = self.filter.shape[1]
        for kk in range(self.filter.shape[0]):
            for i in range(n):
                for j in range(n):
                    yield kk - self.M, i, j, float(self.filter[kk, i, j])

    def filter_to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "i", "j", "value"])
            for row in self.filter_rows():
                w.writerow([row[0], row[1] + 1, row[2] + 1, repr(row[3])])


def _as_panel(p) -> Panel:
    return p if isinstance(p, Panel) else Panel.from_array(p)


def fit_slra(p, r: int, method: str = "jacobi") -> SlraFit:
    """Static principal-component approximation of rank ``r``.

    Parameters
    ----------
    p : Panel or ndarray (n, T)
        Zero-mean (typically standardized) data.
    r : int
        Number of static factors, ``0 <= r <= min(n, T)``.
    method : {"jacobi", "lapack"}
        Eigen-solver for the covariance matrix.
    """
    p = _as_panel(p)
    n, T = p.n, p.T
    r = int(r)
    if r < 0 or r > min(n, T):
        raise DataError(f"rank r={r} outside 0..min(n, T)={min(n, T)}")
    y = p.values
    gamma0 = sample_autocov(y, 0).values
    es = hermitian_eig(gamma0, method=method)
    lead = es.values[: min(r + 1, n)].copy()
    if r == 0:
        zeros = np.zeros_like(y)
        return SlraFit(p.with_values(zeros), p.with_values(y), np.zeros((0, T)), np.zeros((n, 0)),
                       lead, np.zeros((n, n)), es.ties)
    lam = es.values[:r]
    if lam[-1] <= 1e-12 * max(1.0, es.values[0]):
        raise NumericalError(f"eigenvalue {r} of the covariance is numerically zero; lower r")
    P = es.vectors[:r].real
    K = P.T @ P
    common = K @ y
    factors = (P @ y) / np.sqrt(lam)[:, None]
    loadings = P.T * np.sqrt(lam)[None, :]
    idio = y - common
    ties = tuple(j for j in es.ties if j < r)
    return SlraFit(p.with_values(common), p.with_values(idio), factors, loadings, lead, K, ties)


def dlra_filter(eigs, q: int, thetas: np.ndarray) -> np.ndarray:
    """Inverse-transform frequency projectors to real coefficients ``K(k)``."""
    L = len(thetas)
    M = (L - 1) // 2
    n = eigs[0].vectors.shape[1]
    ks = np.arange(-M, M + 1)
    K = np.zeros((L, n, n), dtype=complex)
    for es, theta in zip(eigs, thetas):
        Pi = es.projector(q)
        K += Pi[None, :, :] * np.exp(1j * ks * theta)[:, None, None]
    K /= L
    scale = max(1.0, float(np.max(np.abs(K.real))))
    if float(np.max(np.abs(K.imag))) > 1e-10 * scale:
        raise NumericalError("DLRA filter is not real; spectral estimate lacks conjugate symmetry")
    return K.real.copy()


def apply_filter(K: np.ndarray, y: np.ndarray, edge_policy: str = "drop_edges"):
    """Two-sided filtering ``sum_k K(k) y_{t-k}``.

    Returns ``(chi, (start, stop))`` where ``chi`` covers array positions
    ``start:stop`` of ``y``.
    """
    L, n, _ = K.shape
    M = (L - 1) // 2
    T = y.shape[1]
    if edge_policy == "drop_edges":
        out = np.zeros((n, T - 2 * M))
        for kk in range(L):
            k = kk - M
            out += K[kk] @ y[:, M - k:T - M - k]
        return out, (M, T - M)
    if edge_policy == "truncate_window":
        out = np.zeros((n, T))
        for kk in range(L):
            k = kk - M
            lo, hi = max(0, k), min(T, T + k)
            out[:, lo:hi] += K[kk] @ y[:, lo - k:hi - k]
        return out, (0, T)
    raise DataError(f"edge_policy must be one of {EDGE_POLICIES}, got {edge_policy!r}")


def fit_dlra(p, q: int, M: Optional[int] = None, edge_policy: str = "drop_edges",
             grid: str = "fourier", method: str = "jacobi", workers: int = 1,
             spectrum: Optional[SpectralDensity] = None) -> DlraFit:
    """Dynamic principal-component approximation of rank ``q``.

    Parameters
    ----------
    p : Panel or ndarray (n, T)
        Zero-mean data.
    q : int
        Number of dynamic factors.
    M : int, optional
        Lag-window and filter half-width; defaults to ``floor(0.75 sqrt(T))``.
    edge_policy : {"drop_edges", "truncate_window"}
    grid : {"fourier", "endpoint"}
        Frequency grid, see :class:`factorseq.spectra.FrequencyGrid`.
    spectrum : SpectralDensity, optional
        Precomputed estimate to reuse.
    """
    p = _as_panel(p)
    n, T = p.n, p.T
    q = int(q)
    M = default_bandwidth(T) if M is None else int(M)
    if q < 0 or q > n:
        raise DataError(f"dynamic rank q={q} outside 0..n={n}")
    if M < 1 or 2 * M + 1 > T:
        raise DataError(f"filter window 2M+1={2 * M + 1} does not fit T={T}")
    if edge_policy not in EDGE_POLICIES:
        raise DataError(f"edge_policy must be one of {EDGE_POLICIES}, got {edge_policy!r}")
    s = spectrum if spectrum is not None else estimate_spectrum(p, M, grid=grid)
    if s.grid.M != M or s.n != n:
        raise DataError("precomputed spectrum does not match (n, M)")
    thetas = s.grid.points
    if q == 0:
        K = np.zeros((2 * M + 1, n, n))
        spec_vals = np.zeros((2 * M + 1, 0))
        if n >= 1:
            spec_vals = np.array([[np.linalg.eigvalsh(A)[-1]] for A in s.matrices])
    else:
        eigs = s.eigen(method=method, workers=workers)
        K = dlra_filter(eigs, q, thetas)
        spec_vals = np.array([es.values[: min(q + 1, n)] for es in eigs])
    chi, (a, b) = apply_filter(K, p.values, edge_policy)
    inner = p.columns(a, b)
    common = inner.with_values(chi)
    idio = inner.with_values(inner.values - chi)
    K.setflags(write=False)
    return DlraFit(common, idio, K, spec_vals, q, M, (a, b), edge_policy, thetas)


def _check_grid(n_grid: Sequence[int], n: int) -> list:
    grid = [int(v) for v in n_grid]
    if not grid:
        raise DataError("n_grid is empty")
    if any(v < 1 for v in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DataError(f"n_grid must be positive and strictly increasing, got {grid}")
    if grid[-1] > n:
        raise DataError(f"n_grid maximum {grid[-1]} exceeds n={n}")
    return grid


def static_eigen_profile(p, k: int, n_grid: Sequence[int], method: str = "jacobi") -> list:
    """Leading eigenvalues of nested covariance submatrices.

    Parameters
    ----------
    p : Panel, data array (n, T), or a square covariance matrix
        An ``ndarray`` is treated as a covariance matrix when it is square
        and symmetric; pass a :class:`Panel` to force the data reading.
    k : int
        Number of eigenvalues per cross-section size.
    n_grid : sequence of int
        Strictly increasing cross-section sizes; the first ``m`` rows are used.

    Returns
    -------
    list of (n, j, eigenvalue) tuples with ``j`` counted from 1.
    """
    if isinstance(p, Panel):
        cov = sample_autocov(p, 0).values
    else:
        arr = np.asarray(p, dtype=float)
        if arr.ndim == 2 and arr.shape[0] == arr.shape[1] and np.allclose(arr, arr.T, atol=1e-12):
            cov = arr
        else:
            cov = sample_autocov(arr, 0).values
    grid = _check_grid(n_grid, cov.shape[0])
    rows = []
    for m in grid:
        vals = hermitian_eig(cov[:m, :m], method=method).values
        for j in range(min(k, m)):
            rows.append((m, j + 1, float(vals[j])))
    return rows


def spectral_eigen_profile(s: SpectralDensity, k: int, n_grid: Sequence[int],
                           method: str = "jacobi") -> list:
    """Leading eigenvalues of nested spectral submatrices at every frequency.

    Returns
    -------
    list of (n, theta, j, eigenvalue) tuples, ordered by ``n``, then
    frequency, then ``j``.
    """
    grid = _check_grid(n_grid, s.n)
    M = s.grid.M
    rows = []
    for m in grid:
        half = {}
        for h in range(M + 1):
            half[h] = hermitian_eig(s.at(h)[:m, :m], method=method).values
        for h in range(-M, M + 1):
            vals = half[abs(h)]
            theta = float(s.grid.points[s.grid.index(h)])
            for j in range(min(k, m)):
                rows.append((m, theta, j + 1, float(vals[j])))
    return rows
