"""State-space factor models, stationary variance, observability/miniphase checks
and the simulators used throughout the package.

The common component is ``chi_t = H x_t`` with ``x_{t+1} = M x_t + G eps_{t+1}``.
The state vector is partitioned into strong, weak and remaining coordinates;
the static common component ``C`` is the part carried by the strong states.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from . import rng as _rng
from .errors import DataError, NumericalError
from .panel import Panel, write_panel_csv

DGP_M = np.array([[0.1945375, -0.3842384], [0.2702844, 0.9054625]])
DGP_G = np.array([[0.9025054], [0.3272368]])
N_WEAK_ROWS = 10

PBH_TOL = 1e-8
MINIPHASE_TOL = 1e-6
DISC_MARGIN = 1e-3


def spectral_radius(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def lyapunov_solve(M, G, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Stationary state variance: solve ``Gamma = M Gamma M' + G G'``.

    Uses the doubling iteration ``Gamma <- Gamma + A Gamma A'``,
    ``A <- A A``, stopping when the residual (sup-norm, relative to
    ``max(1, |Gamma|)``) drops below ``tol``.

    Raises
    ------
    DataError
        If ``M`` is not square or ``G`` has the wrong number of rows.
    NumericalError
        If the spectral radius of ``M`` is not below ``1 - 1e-8``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    m = M.shape[0]
    if M.shape != (m, m) or G.shape[0] != m:
        raise DataError(f"incompatible shapes M {M.shape}, G {G.shape}")
    rho = spectral_radius(M)
    if rho >= 1.0 - 1e-8:
        raise NumericalError(f"transition matrix is not stable (spectral radius {rho:.6g})")
    Q = G @ G.T
    gamma = Q.copy()
    A = M.copy()
    for _ in range(max_iter):
        resid = gamma - M @ gamma @ M.T - Q
        if np.max(np.abs(resid)) < tol * max(1.0, float(np.max(np.abs(gamma)))):
            break
        gamma = gamma + A @ gamma @ A.T
        A = A @ A
    else:
        raise NumericalError("Lyapunov doubling iteration did not converge")
    return 0.5 * (gamma + gamma.T)


@dataclass(frozen=True)
class StateSpaceModel:
    """Generating system ``chi_t = H x_t``, ``x_{t+1} = M x_t + G eps_{t+1}``.

    Parameters
    ----------
    M : (m, m) transition matrix, spectral radius below one.
    G : (m, q) shock loading.
    H : (n, m) observation matrix.
    strong_states, weak_states : tuple of int
        State coordinates carrying the strong and weak static factors.
        The remaining coordinates form the rest of the partition.
    name : str
    """

    M: np.ndarray
    G: np.ndarray
    H: np.ndarray
    strong_states: tuple = (0,)
    weak_states: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        M = np.atleast_2d(np.array(self.M, dtype=float))
        G = np.array(self.G, dtype=float)
        if G.ndim == 1:
            G = G[:, None]
        H = np.atleast_2d(np.array(self.H, dtype=float))
        m = M.shape[0]
        if M.shape != (m, m):
            raise DataError(f"M must be square, got {M.shape}")
        if G.shape[0] != m or H.shape[1] != m:
            raise DataError(f"dims disagree: M {M.shape}, G {G.shape}, H {H.shape}")
        strong = tuple(int(i) for i in self.strong_states)
        weak = tuple(int(i) for i in self.weak_states)
        used = strong + weak
        if len(set(used)) != len(used) or any(i < 0 or i >= m for i in used):
            raise DataError(f"state partition {strong} | {weak} invalid for m={m}")
        rho = spectral_radius(M)
        if rho >= 1.0:
            raise DataError(f"transition matrix is not stable (spectral radius {rho:.6g})")
        for a in (M, G, H):
            a.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "strong_states", strong)
        object.__setattr__(self, "weak_states", weak)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def q(self) -> int:
        return self.G.shape[1]

    @property
    def r(self) -> int:
        return len(self.strong_states)

    @property
    def r_w(self) -> int:
        return len(self.weak_states)

    @property
    def Lambda_s(self) -> np.ndarray:
        return self.H[:, list(self.strong_states)]

    @property
    def Lambda_w(self) -> np.ndarray:
        return self.H[:, list(self.weak_states)]

    def gamma_x(self) -> np.ndarray:
        return lyapunov_solve(self.M, self.G)

    def gamma_chi(self) -> np.ndarray:
        """Population variance ``H Gamma_x H'`` of the common component."""
        return self.H @ self.gamma_x() @ self.H.T

    def transfer(self, z: complex, rows=None) -> np.ndarray:
        """``H (I - M z)^-1 G`` evaluated at ``z`` (optionally for a row subset)."""
        H = self.H if rows is None else self.H[list(rows)]
        return H @ np.linalg.solve(np.eye(self.m) - self.M * z, self.G)

    def to_text(self) -> str:
        """Structured text: dims, partition, then matrices as row-major lines."""
        lines = [
            "# factorseq state-space model",
            f"name {self.name}",
            f"n {self.n}",
            f"m {self.m}",
            f"q {self.q}",
            "strong_states " + " ".join(map(str, self.strong_states)),
            "weak_states " + " ".join(map(str, self.weak_states)),
        ]
        for label, mat in (("M", self.M), ("G", self.G), ("H", self.H)):
            lines.append(label)
            lines.extend(" ".join(repr(float(v)) for v in row) for row in mat)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StateSpaceModel":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        header = {}
        pos = 0
        while pos < len(lines) and lines[pos] not in ("M", "G", "H"):
            key, _, rest = lines[pos].partition(" ")
            header[key] = rest
            pos += 1
        try:
            n, m, q = int(header["n"]), int(header["m"]), int(header["q"])
        except (KeyError, ValueError):
            raise DataError("model text lacks integer n, m, q") from None
        shapes = {"M": (m, m), "G": (m, q), "H": (n, m)}
        mats = {}
        while pos < len(lines):
            label = lines[pos]
            if label not in shapes:
                raise DataError(f"unexpected line in model text: {label!r}")
            rows, cols = shapes[label]
            block = lines[pos + 1:pos + 1 + rows]
            try:
                mat = np.array([[float(v) for v in ln.split()] for ln in block])
            except ValueError:
                raise DataError(f"non-numeric entry in matrix {label}") from None
            if mat.shape != (rows, cols):
                raise DataError(f"matrix {label} has shape {mat.shape}, expected {(rows, cols)}")
            mats[label] = mat
            pos += 1 + rows
        if set(mats) != {"M", "G", "H"}:
            raise DataError("model text must contain M, G and H")

        def ints(key):
            return tuple(int(v) for v in header.get(key, "").split())

        return cls(mats["M"], mats["G"], mats["H"], ints("strong_states"), ints("weak_states"),
                   header.get("name", "custom"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "StateSpaceModel":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class IdioSpec:
    """Idiosyncratic component of a simulated panel.

    kind : {"common-shock", "iid", "none"}
        ``"common-shock"``: ``xi_it = lambda_i e1_t + e2_it`` with loadings
        ``lambda_i`` drawn once per replication; ``"iid"``: independent
        ``N(0, noise_sd^2)``; ``"none"``: zero.
    weights : sequence of float, optional
        Loading scale weights ``w_i``; default ``1 + i/20`` for ``i = 1..n``.
    weight_rule : {"divide", "multiply"}
        ``lambda_i = z_i / w_i`` or ``lambda_i = w_i z_i`` with
        ``z_i ~ N(0, 1)``.
    noise_sd : float
        Scale of the unit-specific shocks.
    """

    kind: str = "common-shock"
    weights: Optional[tuple] = None
    weight_rule: str = "divide"
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.kind not in ("common-shock", "iid", "none"):
            raise DataError(f"unknown idiosyncratic kind {self.kind!r}")
        if self.weight_rule not in ("divide", "multiply"):
            raise DataError(f"weight_rule must be 'divide' or 'multiply', got {self.weight_rule!r}")
        if self.noise_sd < 0:
            raise DataError("noise_sd must be non-negative")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def resolve_weights(self, n: int) -> np.ndarray:
        if self.weights is None:
            return 1.0 + np.arange(1, n + 1) / 20.0
        if len(self.weights) != n:
            raise DataError(f"{len(self.weights)} idiosyncratic weights for n={n}")
        return np.asarray(self.weights)

    def draw(self, n: int, T: int, seed: int, replication: int = 0) -> np.ndarray:
        if self.kind == "none":
            return np.zeros((n, T))
        specific = self.noise_sd * _rng.stream(seed, replication, _rng.IDIO_SPECIFIC).standard_normal((n, T))
        if self.kind == "iid":
            return specific
        z = _rng.stream(seed, replication, _rng.IDIO_LOADINGS).standard_normal(n)
        w = self.resolve_weights(n)
        lam = z / w if self.weight_rule == "divide" else z * w
        common = _rng.stream(seed, replication, _rng.IDIO_COMMON).standard_normal(T)
        return np.outer(lam, common) + specific


@dataclass(frozen=True)
class SimulatedPanel:
    """Simulated panel with every ground-truth component.

    ``y = chi + xi`` and ``chi = C + e_chi`` hold exactly.
    ``factors`` is ``(F_s, F_w)`` with shapes ``(r, T)`` and ``(r_w, T)``.
    ``states`` holds the full state path ``x_t`` when the panel comes from
    a state-space model.
    """

    y: Panel
    chi: Panel
    C: Panel
    e_chi: Panel
    xi: Panel
    factors: tuple
    shocks: np.ndarray
    seed: int
    replication: int = 0
    states: Optional[np.ndarray] = field(default=None, repr=False)
    model: Optional[StateSpaceModel] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.y.n

    @property
    def T(self) -> int:
        return self.y.T

    def export_csv_dir(self, path) -> Path:
        """Write y, chi, C, e_chi, xi, factors and shocks CSVs (plus model.txt)."""
        out = Path(path)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("y", "chi", "C", "e_chi", "xi"):
            write_panel_csv(getattr(self, name), out / f"{name}.csv", include_tcodes=False)
        fs, fw = self.factors
        _write_series(out / "factors.csv",
                      [f"Fs{j + 1}" for j in range(fs.shape[0])] + [f"Fw{j + 1}" for j in range(fw.shape[0])],
                      np.vstack([fs, fw]), self.y.t0)
        _write_series(out / "shocks.csv", [f"eps{j + 1}" for j in range(self.shocks.shape[0])],
                      self.shocks, self.y.t0)
        (out / "manifest.txt").write_text(
            f"seed {self.seed}\nreplication {self.replication}\nn {self.n}\nT {self.T}\n")
        if self.model is not None:
            self.model.save(out / "model.txt")
        return out


def _write_series(path, names, values, t0):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names])
        for t in range(values.shape[1]):
            w.writerow([t0 + t, *(repr(float(v)) for v in values[:, t])])


def _labels(n: int):
    return tuple(f"y{i + 1}" for i in range(n))


def assemble(chi: np.ndarray, C: np.ndarray, xi: np.ndarray, factors, shocks, seed: int,
             replication: int = 0, states=None, model=None) -> SimulatedPanel:
    """Build a :class:`SimulatedPanel` from arrays (``y`` is ``chi + xi``)."""
    labels = _labels(chi.shape[0])
    e_chi = chi - C
    return SimulatedPanel(
        y=Panel(chi + xi, labels),
        chi=Panel(chi, labels),
        C=Panel(C, labels),
        e_chi=Panel(e_chi, labels),
        xi=Panel(xi, labels),
        factors=tuple(np.asarray(f, dtype=float) for f in factors),
        shocks=np.atleast_2d(shocks),
        seed=int(seed),
        replication=int(replication),
        states=states,
        model=model,
    )


def simulate_states(model: StateSpaceModel, T: int, burn_in: int, seed: int, replication: int = 0):
    """State path ``x_1..x_T`` (after burn-in) and the matching shocks."""
    total = T + burn_in
    eps = _rng.stream(seed, replication, _rng.SHOCKS).standard_normal((total, model.q))
    drive = eps @ model.G.T
    X = np.empty((total, model.m))
    x = np.zeros(model.m)
    Mt = model.M
    for t in range(total):
        x = Mt @ x + drive[t]
        X[t] = x
    return X[burn_in:].T.copy(), eps[burn_in:].T.copy()


def simulate_ss(model: StateSpaceModel, T: int, burn_in: int = 500, seed: int = 0,
                idio: Optional[IdioSpec] = None, replication: int = 0) -> SimulatedPanel:
    """Simulate ``y = H x + xi`` from ``x_0 = 0``, discarding ``burn_in`` steps.

    Shocks, idiosyncratic loadings, the common idiosyncratic shock and the
    unit-specific shocks come from independent counter-based streams keyed
    by ``(seed, replication)``.
    """
    T, burn_in = int(T), int(burn_in)
    if T < 2:
        raise DataError(f"T must be >= 2, got {T}")
    if burn_in < 0:
        raise DataError("burn_in must be >= 0")
    idio = IdioSpec() if idio is None else idio
    X, eps = simulate_states(model, T, burn_in, seed, replication)
    chi = model.H @ X
    s_idx = list(model.strong_states)
    C = model.H[:, s_idx] @ X[s_idx] if s_idx else np.zeros_like(chi)
    xi = idio.draw(model.n, T, seed, replication)
    factors = (X[s_idx], X[list(model.weak_states)])
    return assemble(chi, C, xi, factors, eps, seed, replication, states=X, model=model)


def make_paper_dgp(n: int, layout: str = "text", weights: Optional[Sequence[float]] = None,
                   weight_rule: str = "divide"):
    """The two-state simulation design with one strong and one weak factor.

    Parameters
    ----------
    n : int
        Cross-section size, at least 11.
    layout : {"text", "tables"}
        ``"text"``: rows 1..10 load the weak state ``x_2``, rows 11..n the
        strong state ``x_1``. ``"tables"``: rows 1..10 load ``x_1`` and
        rows 11..n load ``x_2``; the strong/weak partition follows the
        loadings, so ``x_2`` is then the strong state.
    weights, weight_rule
        Passed to :class:`IdioSpec`.

    Returns
    -------
    (StateSpaceModel, IdioSpec)
    """
    n = int(n)
    if n <= N_WEAK_ROWS:
        raise DataError(f"two-state design needs n >= {N_WEAK_ROWS + 1}, got {n}")
    if layout not in ("text", "tables"):
        raise DataError(f"layout must be 'text' or 'tables', got {layout!r}")
    weak_col, strong_col = (1, 0) if layout == "text" else (0, 1)
    H = np.zeros((n, 2))
    H[:N_WEAK_ROWS, weak_col] = 1.0
    H[N_WEAK_ROWS:, strong_col] = 1.0
    model = StateSpaceModel(DGP_M, DGP_G, H, (strong_col,), (weak_col,), f"two-state-{layout}")
    idio = IdioSpec("common-shock", None if weights is None else tuple(weights), weight_rule)
    return model, idio


def make_ma_model(n: int, coeffs: Sequence[float]) -> StateSpaceModel:
    """Every row loads the same scalar MA filter ``sum_j c_j eps_{t-j}``.

    Realized with the shift state ``x_t = (eps_t, ..., eps_{t-p})``.
    """
    c = np.asarray(coeffs, dtype=float)
    m = c.size
    M = np.eye(m, k=-1)
    G = np.zeros((m, 1))
    G[0, 0] = 1.0
    H = np.tile(c, (int(n), 1))
    return StateSpaceModel(M, G, H, (), (), "ma")


def gen_example_shift(n: int, T: int, seed: int, noise_sd: float = 0.0,
                      replication: int = 0) -> SimulatedPanel:
    """``chi_it = u_{t-i+1}``: one dynamic factor, no strong static factor.

    The static common component is zero, so ``e_chi = chi``.
    """
    n, T = int(n), int(T)
    if n < 1 or T < 2:
        raise DataError("need n >= 1 and T >= 2")
    u = _rng.stream(seed, replication, _rng.SHOCKS).standard_normal(T + n - 1)
    idx = np.arange(T)[None, :] + (n - 1) - np.arange(n)[:, None]
    chi = u[idx]
    xi = noise_sd * _rng.stream(seed, replication, _rng.IDIO_SPECIFIC).standard_normal((n, T))
    return assemble(chi, np.zeros_like(chi), xi, (np.zeros((0, T)), np.zeros((0, T))),
                    u[n - 1:], seed, replication)


def gen_example_one_weak(n: int, T: int, seed: int, noise_sd: float = 0.0,
                         replication: int = 0) -> SimulatedPanel:
    """``chi_1t = u_t`` and ``chi_it = u_{t-1}`` for ``i > 1``.

    Ground truth: ``C_it = u_{t-1}`` for ``i > 1`` and ``C_1t = 0``, so
    ``e_chi`` is ``u_t`` in row 1 and zero elsewhere.
    """
    n, T = int(n), int(T)
    if n < 2 or T < 2:
        raise DataError("need n >= 2 and T >= 2")
    u = _rng.stream(seed, replication, _rng.SHOCKS).standard_normal(T + 1)
    chi = np.empty((n, T))
    chi[0] = u[1:]
    chi[1:] = u[:-1]
    C = chi.copy()
    C[0] = 0.0
    xi = noise_sd * _rng.stream(seed, replication, _rng.IDIO_SPECIFIC).standard_normal((n, T))
    return assemble(chi, C, xi, (u[None, :-1], u[None, 1:]), u[None, 1:], seed, replication)


def gen_random_walk_idio(n: int, T: int, seed: int, sigma: float = 1.0,
                         replication: int = 0) -> SimulatedPanel:
    """``y_it = u_t + e_it`` with random-walk ``e_it`` started at ``e_i0 = 0``.

    The random walks are stored as ``xi`` and ``chi = C = u``.
    """
    n, T = int(n), int(T)
    if n < 1 or T < 2:
        raise DataError("need n >= 1 and T >= 2")
    u = _rng.stream(seed, replication, _rng.SHOCKS).standard_normal(T)
    steps = sigma * _rng.stream(seed, replication, _rng.IDIO_SPECIFIC).standard_normal((n, T))
    e = np.cumsum(steps, axis=1)
    chi = np.tile(u, (n, 1))
    return assemble(chi, chi.copy(), e, (u[None, :], np.zeros((0, T))), u[None, :], seed, replication)


class PBHResult(NamedTuple):
    observable: bool
    witness: Optional[complex]


def pbh_observable(H_sel, M, tol: float = PBH_TOL) -> PBHResult:
    """Popov-Belevitch-Hautus observability test for ``(H_sel, M)``.

    The pair is observable iff ``[M - lambda I; H_sel]`` has full column
    rank at every eigenvalue ``lambda`` of ``M``. Rank is judged by the
    smallest singular value relative to the largest.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    H_sel = np.atleast_2d(np.asarray(H_sel, dtype=float))
    m = M.shape[0]
    if M.shape != (m, m) or H_sel.shape[1] != m:
        raise DataError(f"dimension mismatch: M {M.shape}, H_sel {H_sel.shape}")
    for lam in np.linalg.eigvals(M):
        stacked = np.vstack([M - lam * np.eye(m), H_sel.astype(complex)])
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[-1] <= tol * max(1.0, sv[0]):
            lam = complex(lam)
            return PBHResult(False, lam.real if abs(lam.imag) < 1e-12 else lam)
    return PBHResult(True, None)


class MiniphaseResult(NamedTuple):
    miniphase: bool
    z: Optional[complex]
    sigma_min: float
    sigma_map: np.ndarray
    radii: np.ndarray
    angles: np.ndarray
    zeros: np.ndarray


def _pencil(M, G, H, z):
    m, q = G.shape
    p = H.shape[0]
    top = np.hstack([np.eye(m) - M * z, -G.astype(complex)])
    bottom = np.hstack([H.astype(complex), np.zeros((p, q), dtype=complex)])
    return np.vstack([top, bottom])


def _sigma_min(M, G, H, z) -> float:
    return float(np.linalg.svd(_pencil(M, G, H, z), compute_uv=False)[-1])


def transmission_zeros(M, G, H_sel) -> np.ndarray:
    """Finite zeros of the square system pencil ``[[I - M z, -G], [H_sel, 0]]``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    G = np.asarray(G, dtype=float)
    G = G[:, None] if G.ndim == 1 else G
    H = np.atleast_2d(np.asarray(H_sel, dtype=float))
    m, q = G.shape
    if H.shape[0] != q:
        raise DataError("transmission zeros via the pencil need a square system (rows of H_sel == q)")
    A = np.block([[np.eye(m), -G], [H, np.zeros((q, q))]])
    B = np.block([[M, np.zeros((m, q))], [np.zeros((q, m + q))]])
    alpha, beta = scipy.linalg.eig(A, B, right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-12 * np.maximum(1.0, np.abs(alpha))
    return alpha[finite] / beta[finite]


def miniphase_check(M, G, H_sel, grid_radius_steps: int = 64, grid_angle_steps: int = 128,
                    tol: float = MINIPHASE_TOL) -> MiniphaseResult:
    """Check ``rank [[I - M z, -G], [H_sel, 0]] = m + q`` on ``|z| <= 1 - 1e-3``.

    The smallest singular value is mapped on a polar grid. A grid cannot
    land on an isolated zero, so candidates are refined: square systems
    use the exact pencil zeros, other shapes a local minimization started
    from the smallest grid values.

    Returns
    -------
    MiniphaseResult
        ``miniphase`` is false when ``sigma_min < tol`` somewhere in the
        closed disc of radius ``1 - 1e-3``; ``z`` is the offending point.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    G = np.asarray(G, dtype=float)
    G = G[:, None] if G.ndim == 1 else G
    H = np.atleast_2d(np.asarray(H_sel, dtype=float))
    m, q = G.shape
    if M.shape != (m, m) or H.shape[1] != m:
        raise DataError(f"dimension mismatch: M {M.shape}, G {G.shape}, H_sel {H.shape}")
    rmax = 1.0 - DISC_MARGIN
    radii = np.linspace(0.0, rmax, int(grid_radius_steps))
    angles = np.linspace(0.0, 2 * np.pi, int(grid_angle_steps), endpoint=False)
    zs = radii[:, None] * np.exp(1j * angles[None, :])
    p = H.shape[0]
    stack = np.zeros(zs.shape + (m + p, m + q), dtype=complex)
    stack[..., :m, :m] = np.eye(m) - M * zs[..., None, None]
    stack[..., :m, m:] = -G
    stack[..., m:, :m] = H
    smap = np.linalg.svd(stack, compute_uv=False)[..., min(m + p, m + q) - 1]
    best_idx = np.unravel_index(np.argmin(smap), smap.shape)
    best_z = complex(radii[best_idx[0]] * np.exp(1j * angles[best_idx[1]]))
    best_s = float(smap[best_idx])
    zeros = np.empty(0, dtype=complex)
    if H.shape[0] < q:
        # fewer outputs than shocks: the pencil is rank deficient everywhere
        return MiniphaseResult(False, 0j, 0.0, smap, radii, angles, zeros)
    if H.shape[0] == q:
        zeros = transmission_zeros(M, G, H)
        for z0 in zeros:
            if abs(z0) <= rmax:
                s = _sigma_min(M, G, H, z0)
                if s < best_s:
                    best_s, best_z = s, complex(z0)
    else:
        order = np.argsort(smap, axis=None)[:5]

        def obj(v):
            z = complex(v[0], v[1])
            if abs(z) > rmax:
                z *= rmax / abs(z)
            return _sigma_min(M, G, H, z)

        for flat in order:
            a, b = np.unravel_index(flat, smap.shape)
            z0 = radii[a] * np.exp(1j * angles[b])
            res = scipy.optimize.minimize(obj, [z0.real, z0.imag], method="Nelder-Mead",
                                          options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
            if res.fun < best_s:
                z = complex(res.x[0], res.x[1])
                best_s, best_z = float(res.fun), (z if abs(z) <= rmax else z * rmax / abs(z))
    return MiniphaseResult(bool(best_s >= tol), None if best_s >= tol else best_z, best_s,
                           smap, radii, angles, zeros)
