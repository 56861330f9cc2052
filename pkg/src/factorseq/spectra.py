"""Lag-window spectral density estimation and Hermitian eigendecomposition."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DataError, NumericalError
from .panel import Panel, sample_autocov

HERMITIAN_TOL = 1e-8
JACOBI_TOL = 1e-12
MAX_SWEEPS = 50
TIE_GAP = 1e-8


def bartlett_weight(x: float) -> float:
    """Bartlett (triangular) lag window ``max(0, 1 - |x|)``."""
    return max(0.0, 1.0 - abs(float(x)))


def default_bandwidth(T: int) -> int:
    """Lag-window half-width ``floor(0.75 sqrt(T))``, at least 1."""
    T = int(T)
    if T < 4:
        raise DataError(f"bandwidth needs T >= 4, got {T}")
    return max(1, int(math.floor(0.75 * math.sqrt(T))))


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric grid of ``2M+1`` frequencies ``theta_h``, ``h = -M..M``.

    ``kind="fourier"`` (default) uses ``theta_h = 2 pi h / (2M+1)``, the
    Fourier frequencies of a length-``2M+1`` transform: the discrete
    inverse transform then reproduces every lag ``|k| <= M`` exactly.
    ``kind="endpoint"`` uses ``theta_h = pi h / M`` and includes both
    ``-pi`` and ``pi``.
    """

    M: int
    kind: str = "fourier"
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.M < 1:
            raise DataError(f"grid half-width must be >= 1, got {self.M}")
        h = np.arange(-self.M, self.M + 1)
        if self.kind == "fourier":
            pts = 2.0 * np.pi * h / (2 * self.M + 1)
        elif self.kind == "endpoint":
            pts = np.pi * h / self.M
        else:
            raise DataError(f"unknown grid kind {self.kind!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return 2 * self.M + 1

    def index(self, h: int) -> int:
        """Array position of frequency ``theta_h``."""
        return h + self.M


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (descending) and eigenvectors stored as rows.

    ``vectors[j]`` is the unit eigenvector for ``values[j]``, phase-rotated
    so its largest-modulus entry is real and positive. ``ties`` lists
    positions ``j`` where ``values[j] - values[j+1] < 1e-8``.
    """

    values: np.ndarray
    vectors: np.ndarray
    ties: tuple = ()
    sweeps: int = 0

    def projector(self, q: int) -> np.ndarray:
        """Orthogonal projector ``sum_{j<q} v_j v_j^*`` onto the leading eigenvectors."""
        V = self.vectors[:q]
        return V.T @ V.conj()


def _phase_normalize(rows: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(rows), axis=1)
    pivot = rows[np.arange(rows.shape[0]), idx]
    phase = pivot / np.abs(pivot)
    return rows / phase[:, None] if np.iscomplexobj(rows) else rows * np.sign(pivot)[:, None]


def hermitian_eig(A, method: str = "jacobi", backend: Optional[str] = None) -> EigenSystem:
    """Eigendecomposition of a Hermitian (or real symmetric) matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
    method : {"jacobi", "lapack"}
        ``"jacobi"`` runs the cyclic Jacobi kernel (compiled when
        available); ``"lapack"`` delegates to ``numpy.linalg.eigh``.
    backend : {"cython", "python"}, optional
        Override the Jacobi backend chosen at import.

    Raises
    ------
    DataError
        If ``A`` is not square or not Hermitian within 1e-8.
    NumericalError
        If Jacobi does not converge within 50 sweeps.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DataError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    asym = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if asym > HERMITIAN_TOL * scale:
        raise DataError(f"matrix is not Hermitian (max |A - A^H| = {asym:.3g})")
    A = 0.5 * (A + A.conj().T)
    if not np.iscomplexobj(A):
        A = A.astype(float)
    if method == "jacobi":
        diag, vecs, sweeps = _kernels.jacobi(A, JACOBI_TOL, MAX_SWEEPS, backend)
        if sweeps < 0:
            raise NumericalError(f"Jacobi eigen-solver did not converge in {MAX_SWEEPS} sweeps")
    elif method == "lapack":
        diag, vecs = np.linalg.eigh(A)
        sweeps = 0
    else:
        raise DataError(f"unknown eigen method {method!r}")
    order = np.argsort(-diag, kind="stable")
    values = diag[order]
    rows = _phase_normalize(vecs[:, order].T.copy())
    gaps = values[:-1] - values[1:]
    ties = tuple(int(j) for j in np.flatnonzero(gaps < TIE_GAP))
    return EigenSystem(values, rows, ties, sweeps)


@dataclass(frozen=True)
class SpectralDensity:
    """Estimated spectral density on a :class:`FrequencyGrid`.

    ``matrices[grid.index(h)]`` is the ``n x n`` Hermitian estimate at
    ``theta_h``.
    """

    grid: FrequencyGrid
    matrices: np.ndarray

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def at(self, h: int) -> np.ndarray:
        return self.matrices[self.grid.index(h)]

    def eigen(self, method: str = "jacobi", workers: int = 1) -> list:
        """Eigensystems at every grid point, ordered ``h = -M..M``.

        Only ``h = 0..M`` are decomposed; negative frequencies reuse the
        conjugate result because the estimate satisfies
        ``f(-theta) = conj(f(theta))``.
        """
        M = self.grid.M
        mats = [self.at(h) for h in range(M + 1)]

        def one(A):
            return hermitian_eig(A, method=method)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                half = list(ex.map(one, mats))
        else:
            half = [one(A) for A in mats]
        neg = [EigenSystem(e.values, e.vectors.conj(), e.ties, e.sweeps) for e in half[:0:-1]]
        return neg + half

    def to_csv(self, path, k: Optional[int] = None, eigs: Optional[Sequence[EigenSystem]] = None) -> None:
        """Write ``(theta, j, lambda_j)`` rows, ``j`` counted from 1."""
        eigs = self.eigen() if eigs is None else eigs
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "j", "eigenvalue"])
            for theta, es in zip(self.grid.points, eigs):
                vals = es.values if k is None else es.values[:k]
                for j, lam in enumerate(vals, start=1):
                    w.writerow([repr(float(theta)), j, repr(float(lam))])


def autocovariances(y: np.ndarray, M: int) -> np.ndarray:
    """Stack ``Gamma(k)`` for ``k = 0..M`` (divisor ``T``)."""
    return np.stack([sample_autocov(y, k).values for k in range(M + 1)])


def estimate_spectrum(p, M: int, grid: str = "fourier") -> SpectralDensity:
    """Bartlett lag-window estimate of the spectral density.

    ``f(theta_h) = (2 pi)^-1 sum_{|k| <= M} w(k/M) exp(-i k theta_h) Gamma(k)``
    with ``Gamma(-k) = Gamma(k)'``. The data are used as given, so pass a
    standardized or demeaned panel.
    """
    y = p.values if isinstance(p, Panel) else np.asarray(p, dtype=float)
    T = y.shape[1]
    M = int(M)
    if M < 1:
        raise DataError(f"bandwidth M must be >= 1, got {M}")
    if M >= T:
        raise DataError(f"bandwidth M={M} must be < T={T}")
    g = FrequencyGrid(M, grid)
    gam = autocovariances(y, M)
    n = y.shape[0]
    mats = np.empty((len(g), n, n), dtype=complex)
    for h in range(0, M + 1):
        theta = g.points[g.index(h)]
        f = gam[0].astype(complex)
        for k in range(1, M + 1):
            w = bartlett_weight(k / M)
            if w == 0.0:
                continue
            z = w * np.exp(-1j * k * theta)
            f += z * gam[k] + np.conj(z) * gam[k].T
        f /= 2.0 * np.pi
        f = 0.5 * (f + f.conj().T)
        mats[g.index(h)] = f
        if h > 0:
            mats[g.index(-h)] = f.conj()
    mats.setflags(write=False)
    return SpectralDensity(g, mats)
