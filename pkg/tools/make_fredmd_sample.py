"""Regenerate ``src/factorseq/data/fredmd_sample.csv``.

The file mimics the FRED-MD layout: a ``sasdate`` header, a
``Transform:`` row of codes, then monthly rows dated ``M/D/YYYY``. Levels
are built from a stationary 8-factor panel so that applying the codes
recovers a stationary panel. The values are synthetic.
"""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

N_SERIES = 40
N_MONTHS = 602
N_FACTORS = 8
CODES = (1, 2, 4, 5)


def stationary_panel(rng: np.random.Generator) -> np.ndarray:
    T = N_MONTHS + 200
    rho_f = np.linspace(0.8, 0.3, N_FACTORS)
    f = np.zeros((N_FACTORS, T))
    for t in range(1, T):
        f[:, t] = rho_f * f[:, t - 1] + rng.standard_normal(N_FACTORS)
    f = f[:, 200:] / np.sqrt(1.0 / (1.0 - rho_f ** 2))[:, None]
    loadings = rng.standard_normal((N_SERIES, N_FACTORS)) * rng.uniform(0.2, 1.0, (N_SERIES, 1))
    e = np.zeros((N_SERIES, T))
    rho_e = rng.uniform(0.0, 0.4, N_SERIES)
    for t in range(1, T):
        e[:, t] = rho_e * e[:, t - 1] + rng.standard_normal(N_SERIES)
    return loadings @ f + e[:, 200:]


def to_levels(x: np.ndarray, code: int) -> np.ndarray:
    if code == 1:
        return x
    if code == 2:
        return 100.0 + np.cumsum(x)
    if code == 4:
        return np.exp(3.0 + 0.1 * x)
    if code == 5:
        return np.exp(5.0 + np.cumsum(0.01 * x))
    raise ValueError(code)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1959)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src/factorseq/data/fredmd_sample.csv")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    x = stationary_panel(rng)
    codes = [CODES[i % len(CODES)] for i in range(N_SERIES)]
    levels = np.array([to_levels(x[i], c) for i, c in enumerate(codes)])
    dates = [f"{1 + m % 12}/1/{1959 + m // 12}" for m in range(N_MONTHS)]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sasdate"] + [f"SER{i + 1:02d}" for i in range(N_SERIES)])
        w.writerow(["Transform:"] + codes)
        for t, d in enumerate(dates):
            w.writerow([d] + [f"{v:.8g}" for v in levels[:, t]])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
