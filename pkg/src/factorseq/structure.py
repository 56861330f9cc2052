"""Three-way decomposition, weak-factor extraction and innovation recovery.

The empirical decomposition uses both estimators side by side: the dynamic
fit gives ``chi``, the static fit gives the strong factors, ``C`` is the
projection of ``chi`` on them, and the weak common component is the
remainder ``e_chi = chi - C``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .lowrank import fit_dlra, fit_slra
from .panel import Panel, standardize as _standardize, write_panel_csv
from .spectra import hermitian_eig
from .statespace import StateSpaceModel, transmission_zeros

RIDGE = 1e-8
INNOVATION_EIG_FLOOR = 1e-6
BLOCK_ZERO_MARGIN = 1e-6


@dataclass(frozen=True)
class WeakFactors:
    """Weak factors from Gram-Schmidt and their pivot rows (0-based)."""

    factors: np.ndarray
    pivots: tuple

    @property
    def count(self) -> int:
        return self.factors.shape[0]


@dataclass(frozen=True)
class ThreeWayDecomposition:
    """``y = C + e_chi + xi`` on the evaluation window.

    ``window`` gives the array positions ``[start, stop)`` of the input
    panel covered by every component. ``diagnostics`` maps component name
    to per-series variance shares relative to ``y``.
    """

    C: Panel
    e_chi: Panel
    xi: Panel
    strong_factors: np.ndarray
    weak_factors: np.ndarray
    weak_pivots: tuple
    window: tuple
    diagnostics: dict

    @property
    def chi(self) -> Panel:
        return self.C.with_values(self.C.values + self.e_chi.values)

    def export_csv_dir(self, path) -> Path:
        out = Path(path)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("C", "e_chi", "xi"):
            write_panel_csv(getattr(self, name), out / f"{name}.csv", include_tcodes=False)
        write_panel_csv(self.chi, out / "chi.csv", include_tcodes=False)
        labels = self.C.labels
        lines = [f"window {self.window[0]} {self.window[1]}",
                 f"strong_factors {self.strong_factors.shape[0]}",
                 f"weak_factors {self.weak_factors.shape[0]}"]
        lines += [f"pivot {k + 1} {labels[i]} {i + 1}" for k, i in enumerate(self.weak_pivots)]
        (out / "weak_pivots.txt").write_text("\n".join(lines) + "\n")
        return out


def _demean(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=-1, keepdims=True)


def extract_weak_factors(chi, strong, tol: Optional[float] = None) -> WeakFactors:
    """Gram-Schmidt weak factors from a common-component panel.

    Rows of ``chi`` are visited in cross-sectional order. Each demeaned
    row is projected off the span of the (demeaned) strong factors and the
    weak factors accepted so far; if the residual's sample variance exceeds
    ``tol`` it is scaled to unit variance and accepted.

    Parameters
    ----------
    chi : Panel or ndarray (n, T)
    strong : ndarray (r, T)
        Strong factors; must have full row rank.
    tol : float, optional
        Acceptance threshold; default ``0.01 * mean per-series variance``.
    """
    x = chi.values if isinstance(chi, Panel) else np.asarray(chi, dtype=float)
    n, T = x.shape
    S = np.atleast_2d(np.asarray(strong, dtype=float)).reshape(-1, T) if np.size(strong) else np.zeros((0, T))
    xc = _demean(x)
    if tol is None:
        tol = 0.01 * float(np.mean(np.mean(xc * xc, axis=1)))
    basis = np.zeros((0, T))
    if S.shape[0]:
        Sc = _demean(S)
        U, sv, Vt = np.linalg.svd(Sc, full_matrices=False)
        if sv[-1] <= 1e-10 * max(sv[0], 1e-300):
            raise DataError("strong factors are rank deficient")
        basis = Vt
    weak, pivots = [], []
    for i in range(n):
        v = xc[i].copy()
        for _ in range(2):
            if basis.shape[0]:
                v -= basis.T @ (basis @ v)
        var = float(v @ v) / T
        if var > tol:
            weak.append(v / np.sqrt(var))
            basis = np.vstack([basis, v / np.linalg.norm(v)])
            pivots.append(i)
    factors = np.array(weak) if weak else np.zeros((0, T))
    return WeakFactors(factors, tuple(pivots))


def three_way_decompose(p: Panel, r: int, q: int, M: Optional[int] = None, standardize: bool = True,
                        weak_tol: Optional[float] = None, method: str = "jacobi",
                        workers: int = 1) -> ThreeWayDecomposition:
    """Estimate ``C`` (static, rank ``r``), ``chi`` (dynamic, rank ``q``) and ``xi``.

    ``chi`` comes from the dynamic fit. ``C`` is the least-squares
    projection of ``chi`` (with intercept) on the ``r`` static factors over
    the evaluation window, so ``e_chi = chi - C`` is orthogonal in-sample
    to every strong factor and hence to ``C``. With ``standardize=True``
    both fits run on the standardized panel and the components are mapped
    back to raw units, with the sample means assigned to ``chi`` (and so
    to ``C``). A rank-zero component is identically zero. Components cover
    the interior window of the dynamic filter.
    """
    if not isinstance(p, Panel):
        p = Panel.from_array(p)
    z = _standardize(p) if standardize else p
    slra = fit_slra(z, r, method=method)
    dlra = fit_dlra(z, q, M, edge_policy="drop_edges", method=method, workers=workers)
    a, b = dlra.window
    scale = z.scale[:, None] if standardize else 1.0
    shift = z.shift[:, None] if standardize and q > 0 else 0.0
    chi = dlra.common.values * scale + shift
    strong = slra.factors[:, a:b]
    if r > 0 and q > 0:
        X = np.vstack([np.ones(b - a), strong]).T
        coef, *_ = np.linalg.lstsq(X, chi.T, rcond=None)
        C = (X @ coef).T
    else:
        C = np.zeros_like(chi)
    y = p.values[:, a:b]
    e_chi = chi - C
    xi = y - chi
    inner = p.columns(a, b)
    if r > 0:
        wf = extract_weak_factors(chi, strong, weak_tol)
    else:
        wf = extract_weak_factors(chi, np.zeros((0, b - a)), weak_tol)
    var_y = np.var(y, axis=1)
    diag = {name: np.var(comp, axis=1) / var_y for name, comp in (("C", C), ("e_chi", e_chi), ("xi", xi))}
    return ThreeWayDecomposition(inner.with_values(C), inner.with_values(e_chi), inner.with_values(xi),
                                 strong, wf.factors, wf.pivots, (a, b), diag)


@dataclass(frozen=True)
class InnovationResult:
    """Innovations recovered from a VAR on factor series.

    ``innovations[:, t]`` belongs to input column ``start + t``.
    ``invertible`` reports whether the fitted VAR is stable, i.e. whether
    the factors admit a causal VAR representation driven by these
    innovations.
    """

    innovations: np.ndarray
    order: int
    q_hat: int
    invertible: bool
    start: int
    coefs: np.ndarray
    residual_cov: np.ndarray
    aic: np.ndarray


def _lagged(F: np.ndarray, p: int, start: int) -> np.ndarray:
    k, T = F.shape
    if p == 0:
        return np.zeros((T - start, 0))
    return np.hstack([F[:, start - l:T - l].T for l in range(1, p + 1)])


def _logdet_floor(S: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(S)
    floor = 1e-12 * max(float(np.trace(S)), 1e-300)
    return float(np.sum(np.log(np.maximum(vals, floor))))


def innovations_from_factors(factors, p_max: int = 6) -> InnovationResult:
    """Fit a VAR to factor series and extract its innovations.

    The lag order minimizes ``log det(Sigma_p) + 2 p k^2 / T_eff`` over
    ``p = 0..p_max`` on the common sample ``t >= p_max``; a ridge of
    ``1e-8 * trace / dim`` on the Gram matrix keeps singular VARs solvable.
    Residual-covariance directions with eigenvalue above ``1e-6 * trace``
    are kept and scaled to unit variance, with signs chosen to correlate
    positively with the first factor's residual.
    """
    F = np.atleast_2d(np.asarray(factors, dtype=float))
    k, T = F.shape
    p_max = int(p_max)
    if p_max < 0:
        raise DataError("p_max must be >= 0")
    if T <= k * p_max + 10:
        raise DataError(f"T={T} too short for a VAR with k={k}, p_max={p_max}")
    F = _demean(F)
    start = p_max
    Y = F[:, start:].T
    Teff = Y.shape[0]
    fits = []
    aic = np.empty(p_max + 1)
    for p in range(p_max + 1):
        X = _lagged(F, p, start)
        if p == 0:
            B = np.zeros((0, k))
        else:
            gram = X.T @ X
            ridge = RIDGE * float(np.trace(gram)) / gram.shape[0]
            gram = gram + ridge * np.eye(gram.shape[0])
            if np.linalg.cond(gram) > 1e12:
                raise NumericalError(f"VAR({p}) regression is ill-conditioned")
            B = np.linalg.solve(gram, X.T @ Y)
        U = Y - X @ B
        S = U.T @ U / Teff
        aic[p] = _logdet_floor(S) + 2.0 * p * k * k / Teff
        fits.append((B, U, S))
    order = int(np.argmin(aic))
    B, U, S = fits[order]
    es = hermitian_eig(S)
    keep = es.values > INNOVATION_EIG_FLOOR * max(float(np.trace(S)), 1e-300)
    vecs = es.vectors[keep].real
    lam = es.values[keep]
    eps = (vecs @ U.T) / np.sqrt(lam)[:, None]
    ref = U[:, 0]
    signs = np.where(eps @ ref >= 0.0, 1.0, -1.0)
    eps = eps * signs[:, None]
    invertible = True
    if order > 0:
        comp = np.zeros((k * order, k * order))
        comp[:k, :] = B.T
        if order > 1:
            comp[k:, :-k] = np.eye(k * (order - 1))
        invertible = bool(np.max(np.abs(np.linalg.eigvals(comp))) < 1.0)
    return InnovationResult(eps, order, int(keep.sum()), invertible, start, B, S, aic)


@dataclass(frozen=True)
class BlockwiseResult:
    """Innovations from averaging inverted ``q x q`` blocks.

    ``innovations[:, t]`` belongs to input column ``start + t``.
    """

    innovations: np.ndarray
    start: int
    blocks: int
    block_zeros: tuple


def inverse_power_series(K: np.ndarray) -> np.ndarray:
    """Coefficients ``Psi(0..L)`` of ``(sum_l K(l) z^l)^-1``, ``K`` shaped (L+1, q, q)."""
    L = K.shape[0] - 1
    K0inv = np.linalg.inv(K[0])
    Psi = np.zeros_like(K)
    Psi[0] = K0inv
    for l in range(1, L + 1):
        acc = np.zeros_like(K[0])
        for j in range(1, l + 1):
            acc += K[j] @ Psi[l - j]
        Psi[l] = -K0inv @ acc
    return Psi


def recover_innovations_blockwise(model: StateSpaceModel, p, block_truncation: int = 200,
                                  permutation: Optional[Sequence[int]] = None) -> BlockwiseResult:
    """Oracle innovation recovery by blockwise AR inversion and static averaging.

    Rows (after ``permutation``) are split into consecutive ``q x q``
    blocks ``y_b = k_b(L) eps + xi_b``. Each block transfer
    ``k_b(z) = H_b (I - M z)^-1 G`` must have all zeros strictly outside
    the unit circle; its inverse is truncated at ``block_truncation`` lags
    and applied to the block, and the block outputs are averaged.

    Raises
    ------
    NumericalError
        Naming the first block whose transfer has a zero with
        ``|z| <= 1 + 1e-6``.
    """
    y = p.values if isinstance(p, Panel) else np.asarray(p, dtype=float)
    n, T = y.shape
    if n != model.n:
        raise DataError(f"panel has {n} rows, model has {model.n}")
    L = int(block_truncation)
    if L < 0 or L >= T:
        raise DataError(f"block_truncation={L} must be in [0, T)")
    order = np.arange(n) if permutation is None else np.asarray(permutation, dtype=int)
    if sorted(order.tolist()) != list(range(n)):
        raise DataError("permutation must be a permutation of 0..n-1")
    q = model.q
    nb = n // q
    if nb < 1:
        raise DataError(f"need at least q={q} rows")
    powers = np.empty((L + 1, model.m, q))
    powers[0] = model.G
    for l in range(1, L + 1):
        powers[l] = model.M @ powers[l - 1]
    acc = np.zeros((q, T - L))
    zeros_all = []
    cache = {}
    for b in range(nb):
        rows = order[b * q:(b + 1) * q]
        Hb = model.H[rows]
        key = Hb.tobytes()
        if key not in cache:
            zs = transmission_zeros(model.M, model.G, Hb)
            bad = zs[np.abs(zs) <= 1.0 + BLOCK_ZERO_MARGIN]
            if bad.size or abs(np.linalg.det(Hb @ model.G)) < 1e-12:
                z = complex(bad[0]) if bad.size else 0j
                raise NumericalError(
                    f"block {b} (rows {[int(i) + 1 for i in rows]}) is not strictly miniphase: zero at z={z:.6g}")
            K = np.einsum("ij,ljk->lik", Hb, powers)
            cache[key] = (inverse_power_series(K), zs)
        Psi, zs = cache[key]
        zeros_all.append(tuple(complex(z) for z in zs))
        yb = y[rows]
        phi = np.zeros((q, T - L))
        for l in range(L + 1):
            phi += Psi[l] @ yb[:, L - l:T - l]
        acc += phi
    return BlockwiseResult(acc / nb, L, nb, tuple(zeros_all))
