"""Seeded Monte-Carlo experiments, report writers and empirical diagnostics.

Every replication draws from random streams keyed by
``(base_seed, replication)``, and results are aggregated in a fixed order.
Reports are therefore identical for any number of worker threads.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.stats

from .errors import DataError
from .forecast import MODELS, ForecastSpec, run_forecast_models
from .lowrank import fit_dlra, fit_slra
from .panel import Panel, standardize
from .spectra import default_bandwidth
from .statespace import make_paper_dgp, simulate_ss

AMSE_METHODS = ("dlra", "slra1", "slra2")
DEFAULT_INDEX_SETS = (("weak", "1..10"), ("strong", "11..n"), ("all", "1..n"))
ABS_CORR_PROBS = tuple(round(0.05 * k, 2) for k in range(1, 21))


def _int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _str_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(str(v) for v in text)
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def resolve_index_set(spec: str, n: int) -> np.ndarray:
    """Parse ``"a..b"`` (1-based, inclusive, ``n`` allowed) into 0-based rows."""
    lo, sep, hi = spec.partition("..")
    if not sep:
        raise DataError(f"index set {spec!r} is not of the form a..b")

    def val(s):
        s = s.strip()
        return n if s == "n" else int(s)

    a, b = val(lo), val(hi)
    if a < 1 or b > n or a > b:
        raise DataError(f"index set {spec!r} is empty or outside 1..{n}")
    return np.arange(a - 1, b)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for a Monte-Carlo experiment (flat ``key = value`` file format).

    ``M_rule`` is ``"sqrt"`` for ``floor(0.75 sqrt(T))`` or an integer.
    ``methods`` are AMSE estimators (``dlra``, ``slra1``, ``slra2``) or
    forecast models (``both``, ``strong_only``, ``sw``).
    """

    kind: str = "amse"
    n_grid: tuple = (30, 120)
    T_grid: tuple = (240, 960)
    replications: int = 100
    methods: tuple = AMSE_METHODS
    base_seed: int = 20240607
    index_sets: tuple = DEFAULT_INDEX_SETS
    q: int = 1
    M_rule: str = "sqrt"
    layout: str = "tables"
    weight_rule: str = "divide"
    grid: str = "fourier"
    burn_in: int = 500
    eig_method: str = "jacobi"
    factor_mode: str = "oracle"
    max_lag: int = 6

    def __post_init__(self):
        if self.kind not in ("amse", "forecast"):
            raise DataError(f"kind must be 'amse' or 'forecast', got {self.kind!r}")
        object.__setattr__(self, "n_grid", _int_list(self.n_grid))
        object.__setattr__(self, "T_grid", _int_list(self.T_grid))
        object.__setattr__(self, "methods", _str_list(self.methods))
        if self.kind == "forecast" and self.methods == AMSE_METHODS:
            object.__setattr__(self, "methods", MODELS)
        if self.replications < 1:
            raise DataError("replications must be >= 1")
        if not self.n_grid or not self.T_grid:
            raise DataError("n_grid and T_grid must be nonempty")
        allowed = AMSE_METHODS if self.kind == "amse" else MODELS
        bad = [m for m in self.methods if m not in allowed]
        if bad or not self.methods:
            raise DataError(f"methods {bad or '[]'} not valid for kind {self.kind!r}; choose from {allowed}")
        sets = self.index_sets
        if isinstance(sets, str):
            sets = tuple(tuple(part.split("=", 1)) for part in _str_list(sets))
        sets = tuple((str(k).strip(), str(v).strip()) for k, v in sets)
        if not sets:
            raise DataError("index_sets must be nonempty")
        object.__setattr__(self, "index_sets", sets)
        if self.M_rule != "sqrt":
            try:
                int(self.M_rule)
            except ValueError:
                raise DataError(f"M_rule must be 'sqrt' or an integer, got {self.M_rule!r}") from None

    def bandwidth(self, T: int) -> int:
        return default_bandwidth(T) if self.M_rule == "sqrt" else int(self.M_rule)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep:
                raise DataError(f"config line {lineno}: expected key = value")
            if key not in types:
                raise DataError(f"config line {lineno}: unknown key {key!r}")
            values[key] = val
        values.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("replications", "base_seed", "q", "burn_in", "max_lag"):
            if key in values:
                try:
                    values[key] = int(values[key])
                except ValueError:
                    raise DataError(f"config key {key!r} needs an integer, got {values[key]!r}") from None
        if "M_rule" in values:
            values["M_rule"] = str(values["M_rule"])
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise DataError(f"config file not found: {p}")
        return cls.from_text(p.read_text(), **overrides)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "index_sets":
                v = ", ".join(f"{k}={s}" for k, s in v)
            elif isinstance(v, tuple):
                v = ", ".join(map(str, v))
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CellStats:
    mean: float
    std: float
    replications: int


@dataclass
class ExperimentReport:
    """Aggregated cells plus the full per-replication log.

    ``cells`` maps ``(method, index_set, n, T)`` to :class:`CellStats`;
    ``log`` rows are ``(replication, method, index_set, n, T, value)``.
    ``std`` is the sample standard deviation across replications.
    """

    kind: str
    config: ExperimentConfig
    cells: dict
    log: list
    runtime: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @staticmethod
    def aggregate(log: Sequence[tuple]) -> dict:
        groups: dict = {}
        for rep, method, iset, n, T, value in log:
            groups.setdefault((method, iset, n, T), []).append((rep, value))
        cells = {}
        for key, items in groups.items():
            vals = np.array([v for _, v in sorted(items)])
            std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            cells[key] = CellStats(float(np.mean(vals)), std, int(vals.size))
        return cells

    def check_consistency(self, tol: float = 1e-12) -> None:
        """Recompute every cell from the log; raise if anything differs."""
        again = self.aggregate(self.log)
        if set(again) != set(self.cells):
            raise DataError("report cells do not match the replication log")
        for key, cell in self.cells.items():
            other = again[key]
            if (abs(cell.mean - other.mean) > tol or abs(cell.std - other.std) > tol
                    or cell.replications != other.replications):
                raise DataError(f"report cell {key} is inconsistent with the log")

    def cell(self, method: str, index_set: str, n: int, T: int) -> CellStats:
        return self.cells[(method, index_set, int(n), int(T))]

    def write_csv(self, path) -> None:
        self.check_consistency()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "index_set", "n", "T", "mean", "std", "replications"])
            for (method, iset, n, T), c in sorted(self.cells.items()):
                w.writerow([method, iset, n, T, repr(c.mean), repr(c.std), c.replications])

    def write_log_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replication", "method", "index_set", "n", "T", "value"])
            for row in sorted(self.log, key=lambda r: (r[3], r[4], r[1], r[2], r[0])):
                w.writerow([*row[:5], repr(float(row[5]))])

    def to_markdown(self) -> str:
        """One table per index set: rows ``n``, columns ``method_T`` with mean (std)."""
        ns = sorted({k[2] for k in self.cells})
        Ts = sorted({k[3] for k in self.cells})
        methods = [m for m in self.config.methods if any(k[0] == m for k in self.cells)]
        sets = [s for s, _ in self.config.index_sets if any(k[1] == s for k in self.cells)]
        label = "AMSE" if self.kind == "amse" else "MSFE"
        out = []
        for iset in sets:
            cols = [f"{m}_{T}" for T in Ts for m in methods]
            out.append(f"### {label}, index set `{iset}`\n")
            out.append("| n | " + " | ".join(cols) + " |")
            out.append("|---|" + "---|" * len(cols))
            for n in ns:
                cells = []
                for T in Ts:
                    for m in methods:
                        c = self.cells.get((m, iset, n, T))
                        cells.append("" if c is None else f"{c.mean:.3f} ({c.std:.3f})")
                out.append(f"| {n} | " + " | ".join(cells) + " |")
            out.append("")
        return "\n".join(out)

    def write_markdown(self, path) -> None:
        Path(path).write_text(self.to_markdown())


def amse(true_chi, est, index_set: Sequence[int], window=None) -> float:
    """Average over ``i`` in ``index_set`` of the time-averaged squared error.

    ``window`` is a ``(start, stop)`` column range applied to both inputs;
    default is all columns.
    """
    a = true_chi.values if isinstance(true_chi, Panel) else np.asarray(true_chi, dtype=float)
    b = est.values if isinstance(est, Panel) else np.asarray(est, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"shape mismatch {a.shape} vs {b.shape}")
    idx = np.asarray(index_set, dtype=int)
    if idx.size == 0:
        raise DataError("empty index set")
    start, stop = (0, a.shape[1]) if window is None else (int(window[0]), int(window[1]))
    if stop <= start:
        raise DataError("empty evaluation window")
    d = a[idx, start:stop] - b[idx, start:stop]
    return float(np.mean(np.mean(d * d, axis=1)))


def _map(fn, tasks, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def _tasks(cfg: ExperimentConfig):
    return [(n, T, rep) for n in cfg.n_grid for T in cfg.T_grid for rep in range(cfg.replications)]


def _simulate(cfg: ExperimentConfig, n: int, T: int, rep: int):
    model, idio = make_paper_dgp(n, layout=cfg.layout, weight_rule=cfg.weight_rule)
    return simulate_ss(model, T, burn_in=cfg.burn_in, seed=cfg.base_seed, idio=idio, replication=rep)


def amse_replication(cfg: ExperimentConfig, n: int, T: int, rep: int) -> list:
    """Log rows for one simulated panel: every method on every index set."""
    sim = _simulate(cfg, n, T, rep)
    z = standardize(sim.y)
    scale, shift = z.scale[:, None], z.shift[:, None]
    M = cfg.bandwidth(T)
    a, b = M, T - M
    truth = sim.chi.values[:, a:b]
    estimates = {}
    for method in cfg.methods:
        if method == "dlra":
            fit = fit_dlra(z, cfg.q, M, grid=cfg.grid, method=cfg.eig_method)
            estimates[method] = fit.common.values * scale + shift
        else:
            r = 1 if method == "slra1" else 2
            estimates[method] = fit_slra(z, r, method=cfg.eig_method).common.values[:, a:b] * scale + shift
    rows = []
    for method in cfg.methods:
        for name, spec in cfg.index_sets:
            idx = resolve_index_set(spec, n)
            rows.append((rep, method, name, n, T, amse(truth, estimates[method], idx)))
    return rows


def run_amse_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Monte-Carlo AMSE of the DLRA and SLRA reconstructions of ``chi``.

    Fits run on the standardized panel; estimates are mapped back to raw
    units with the sample means assigned to the common component. All
    methods are scored on the DLRA interior window ``[M, T - M)``.
    """
    if cfg.kind != "amse":
        cfg = replace(cfg, kind="amse", methods=AMSE_METHODS)
    t0 = time.perf_counter()
    chunks = _map(lambda t: amse_replication(cfg, *t), _tasks(cfg), threads)
    log = [row for chunk in chunks for row in chunk]
    report = ExperimentReport("amse", cfg, ExperimentReport.aggregate(log), log,
                              {"seconds": time.perf_counter() - t0, "threads": threads})
    report.check_consistency()
    return report


def forecast_replication(cfg: ExperimentConfig, n: int, T: int, rep: int) -> list:
    sim = _simulate(cfg, n, T, rep)
    specs = [ForecastSpec(m, cfg.max_lag) for m in cfg.methods]
    res = run_forecast_models(sim, specs, train_end=T - 2, factor_mode=cfg.factor_mode)
    return [(rep, m, "all", n, T, res[m].msfe) for m in cfg.methods]


def run_forecast_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Monte-Carlo one-step MSFE of the forecast models.

    ``extras["ordering_fraction"][(n, T)]`` is the share of replications
    with ``both < sw < strong_only`` (when all three models are run).
    """
    if cfg.kind != "forecast":
        cfg = replace(cfg, kind="forecast", methods=MODELS)
    t0 = time.perf_counter()
    chunks = _map(lambda t: forecast_replication(cfg, *t), _tasks(cfg), threads)
    log = [row for chunk in chunks for row in chunk]
    report = ExperimentReport("forecast", cfg, ExperimentReport.aggregate(log), log,
                              {"seconds": time.perf_counter() - t0, "threads": threads})
    if set(MODELS) <= set(cfg.methods):
        frac = {}
        for n in cfg.n_grid:
            for T in cfg.T_grid:
                by_rep: dict = {}
                for rep, m, _, nn, TT, v in log:
                    if (nn, TT) == (n, T):
                        by_rep.setdefault(rep, {})[m] = v
                ok = [d["both"] < d["sw"] < d["strong_only"] for d in by_rep.values()]
                frac[(n, T)] = float(np.mean(ok))
        report.extras["ordering_fraction"] = frac
    report.check_consistency()
    return report


@dataclass(frozen=True)
class LaggedCorrelations:
    """``corr[j, i, k] = Corr(F_{j,t}, e_{i,t-h_k})`` with the 5% normal critical value."""

    corr: np.ndarray
    lags: tuple
    critical: float
    T: int
    labels: tuple = ()

    def rows(self):
        """Yield ``(j, i, h, corr)`` with 1-based ``j`` and ``i``."""
        r, n, _ = self.corr.shape
        for j in range(r):
            for i in range(n):
                for k, h in enumerate(self.lags):
                    yield j + 1, i + 1, h, float(self.corr[j, i, k])

    def abs_values(self) -> np.ndarray:
        return np.abs(self.corr).ravel()

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["factor", "series", "label", "lag", "corr", "critical"])
            for j, i, h, c in self.rows():
                label = self.labels[i - 1] if self.labels else ""
                w.writerow([j, i, label, h, repr(c), repr(self.critical)])


def lagged_corr_diagnostic(factors, idio, lags: Sequence[int] = (1, 2, 3)) -> LaggedCorrelations:
    """Sample correlations between factors and lagged idiosyncratic terms.

    Each correlation uses the overlapping sample ``t = h..T-1``. The
    critical value ``1.96 / sqrt(T)`` is reported alongside.
    """
    F = np.atleast_2d(np.asarray(factors, dtype=float))
    e = idio.values if isinstance(idio, Panel) else np.atleast_2d(np.asarray(idio, dtype=float))
    labels = idio.labels if isinstance(idio, Panel) else ()
    T = F.shape[1]
    if e.shape[1] != T:
        raise DataError(f"factors have T={T}, idiosyncratic panel has T={e.shape[1]}")
    lags = tuple(int(h) for h in lags)
    if not lags:
        raise DataError("no lags given")
    for h in lags:
        if h < 1 or h >= T - 1:
            raise DataError(f"lag {h} must satisfy 1 <= h < T - 1 (T={T})")
    out = np.empty((F.shape[0], e.shape[0], len(lags)))
    for k, h in enumerate(lags):
        f = F[:, h:]
        x = e[:, :T - h]
        fc = f - f.mean(axis=1, keepdims=True)
        xc = x - x.mean(axis=1, keepdims=True)
        num = fc @ xc.T
        den = np.sqrt(np.sum(fc * fc, axis=1))[:, None] * np.sqrt(np.sum(xc * xc, axis=1))[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            out[:, :, k] = np.where(den > 0, num / den, 0.0)
    return LaggedCorrelations(out, lags, 1.96 / math.sqrt(T), T, labels)


def quantile_table(values, probs: Sequence[float] = ABS_CORR_PROBS) -> list:
    """Empirical quantiles with linear interpolation, as ``(p, value)`` pairs."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DataError("no values")
    probs = [float(p) for p in probs]
    if any(p < 0 or p > 1 for p in probs):
        raise DataError("probabilities must lie in [0, 1]")
    qs = np.quantile(v, probs, method="linear")
    return [(p, float(q)) for p, q in zip(probs, qs)]


def kde_curve(values, points: int = 256, lo: float = -1.0, hi: float = 1.0):
    """Gaussian kernel density (Silverman bandwidth) on an even grid."""
    v = np.asarray(values, dtype=float).ravel()
    grid = np.linspace(lo, hi, int(points))
    if v.size < 2 or np.ptp(v) == 0:
        return grid, np.zeros_like(grid)
    kde = scipy.stats.gaussian_kde(v, bw_method="silverman")
    return grid, kde(grid)


@dataclass(frozen=True)
class Diagnosis:
    correlations: LaggedCorrelations
    quantiles: list
    density: list
    fit_eigenvalues: np.ndarray

    @property
    def median_abs_corr(self) -> float:
        return float(np.median(self.correlations.abs_values()))

    def write(self, out_dir) -> dict:
        """Write the correlation table, quantile table and density data."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"correlations": out / "lagged_correlations.csv",
                 "quantiles": out / "abs_corr_quantiles.csv",
                 "density": out / "corr_density.csv"}
        self.correlations.write_csv(paths["correlations"])
        with paths["quantiles"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["prob", "abs_corr"])
            for p, q in self.quantiles:
                w.writerow([p, repr(q)])
        with paths["density"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["factor", "lag", "grid", "density"])
            for j, h, grid, dens in self.density:
                for g, d in zip(grid, dens):
                    w.writerow([j, h, repr(float(g)), repr(float(d))])
        return paths


def diagnose_panel(p: Panel, r: int = 8, lags: Sequence[int] = (1, 2, 3),
                   probs: Sequence[float] = ABS_CORR_PROBS, method: str = "jacobi") -> Diagnosis:
    """Correlations of SLRA factors with lagged SLRA idiosyncratic terms.

    The panel is standardized, ``r`` static factors are estimated, and the
    per ``(factor, lag)`` cross-sectional correlation distributions are
    summarized by quantiles of ``|corr|`` and kernel-density curves.
    """
    z = standardize(p)
    if r > min(z.n, z.T):
        raise DataError(f"r={r} exceeds min(n, T)={min(z.n, z.T)}")
    fit = fit_slra(z, r, method=method)
    lc = lagged_corr_diagnostic(fit.factors, fit.idio, lags)
    dens = []
    for j in range(lc.corr.shape[0]):
        for k, h in enumerate(lc.lags):
            grid, d = kde_curve(lc.corr[j, :, k])
            dens.append((j + 1, h, grid, d))
    return Diagnosis(lc, quantile_table(lc.abs_values(), probs), dens, fit.eigenvalues)
