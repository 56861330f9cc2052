import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose

from factorseq.errors import DataError
from factorseq.harness import (
    CellStats,
    ExperimentConfig,
    ExperimentReport,
    amse,
    diagnose_panel,
    kde_curve,
    lagged_corr_diagnostic,
    quantile_table,
    resolve_index_set,
    run_amse_experiment,
    run_forecast_experiment,
)
from factorseq.lowrank import fit_slra
from factorseq.panel import Panel, standardize
from factorseq.statespace import make_paper_dgp, simulate_ss

SMALL = dict(n_grid=(30,), T_grid=(120,), replications=2, eig_method="lapack")


class TestAmse:
    def test_exact(self, rng):
        x = rng.standard_normal((5, 40))
        assert amse(x, x, range(5)) == 0.0

    def test_zero_estimate_gives_variance(self, rng):
        x = rng.standard_normal((4, 20000))
        assert amse(x, np.zeros_like(x), range(4)) == pytest.approx(1.0, abs=0.03)

    def test_window_and_subset(self):
        a = np.zeros((3, 10))
        b = np.zeros((3, 10))
        b[1, 5:] = 2.0
        assert amse(a, b, [1], (5, 10)) == 4.0
        assert amse(a, b, [0, 1], (0, 10)) == 1.0

    @pytest.mark.parametrize("idx, window", [([], None), ([0], (3, 3))])
    def test_empty(self, idx, window):
        with pytest.raises(DataError):
            amse(np.zeros((2, 5)), np.zeros((2, 5)), idx, window)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            amse(np.zeros((2, 5)), np.zeros((2, 4)), [0])


class TestConfig:
    def test_parse_round_trip(self):
        text = "n_grid = 30, 60\nT_grid = 120  # short\nreplications = 3\nM_rule = 5\n"
        cfg = ExperimentConfig.from_text(text)
        assert cfg.n_grid == (30, 60) and cfg.T_grid == (120,) and cfg.bandwidth(120) == 5
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg

    def test_forecast_defaults_to_models(self):
        assert ExperimentConfig(kind="forecast").methods == ("both", "strong_only", "sw")

    @pytest.mark.parametrize("text", ["bogus = 1", "replications = 0", "n_grid =", "replications = x",
                                      "methods = both", "M_rule = wide", "just a line"])
    def test_rejects(self, text):
        with pytest.raises(DataError):
            ExperimentConfig.from_text(text)

    def test_overrides_win(self):
        cfg = ExperimentConfig.from_text("replications = 3", replications=7, base_seed=None)
        assert cfg.replications == 7 and cfg.base_seed == ExperimentConfig().base_seed

    @pytest.mark.parametrize("spec, n, expected", [("1..10", 30, 10), ("11..n", 30, 20), ("1..n", 12, 12)])
    def test_index_sets(self, spec, n, expected):
        assert resolve_index_set(spec, n).size == expected

    def test_index_set_outside(self):
        with pytest.raises(DataError):
            resolve_index_set("11..n", 10)


@pytest.fixture(scope="module")
def report():
    return run_amse_experiment(ExperimentConfig(**SMALL))


class TestReports:
    def test_cell_count(self, report):
        assert len(report.cells) == 9
        for key, cell in report.cells.items():
            assert key[2:] == (30, 120)
            assert cell.std >= 0 and cell.replications == 2

    def test_consistency_check_catches_edits(self, report):
        report.check_consistency()
        bad = ExperimentReport(report.kind, report.config, dict(report.cells), report.log)
        key = next(iter(bad.cells))
        bad.cells[key] = CellStats(bad.cells[key].mean + 1, bad.cells[key].std, 2)
        with pytest.raises(DataError):
            bad.check_consistency()

    def test_writers(self, report, tmp_path):
        report.write_csv(tmp_path / "r.csv")
        report.write_log_csv(tmp_path / "log.csv")
        with open(tmp_path / "r.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 9
        cell = report.cell(rows[0]["method"], rows[0]["index_set"], 30, 120)
        assert float(rows[0]["mean"]) == cell.mean
        with open(tmp_path / "log.csv") as fh:
            assert sum(1 for _ in fh) == 1 + 18
        md = report.to_markdown()
        assert "index set `weak`" in md and "dlra_120" in md

    def test_forecast_shape(self):
        rep = run_forecast_experiment(ExperimentConfig(kind="forecast", **SMALL))
        assert len(rep.cells) == 3
        assert set(rep.extras["ordering_fraction"]) == {(30, 120)}

    @pytest.mark.parametrize("runner, kind", [(run_amse_experiment, "amse"),
                                              (run_forecast_experiment, "forecast")])
    def test_thread_determinism(self, runner, kind):
        cfg = ExperimentConfig(kind=kind, n_grid=(30,), T_grid=(100,), replications=4)
        one = runner(cfg, threads=1)
        many = runner(cfg, threads=3)
        assert one.cells == many.cells

    @pytest.mark.xfail(reason="per-replication ordering of single-period MSFEs holds in about half "
                              "of the draws; the ordering is a property of the means", strict=True)
    def test_ordering_per_replication(self):
        cfg = ExperimentConfig(kind="forecast", n_grid=(120,), T_grid=(240,), replications=20)
        rep = run_forecast_experiment(cfg)
        assert rep.extras["ordering_fraction"][(120, 240)] >= 0.95


class TestDiagnostics:
    def test_independent_factors(self, rng):
        T = 1000
        corr = lagged_corr_diagnostic(rng.standard_normal((3, T)), Panel.from_array(rng.standard_normal((100, T))),
                                      [1, 2, 3])
        assert corr.corr.shape == (3, 100, 3)
        assert np.mean(corr.abs_values() < corr.critical) >= 0.93

    def test_weak_rows_feed_strong_factor(self):
        model, idio = make_paper_dgp(120, "text")
        sim = simulate_ss(model, 960, 500, 0, idio)
        fit = fit_slra(standardize(sim.y), 1, method="lapack")
        lc = lagged_corr_diagnostic(fit.factors, fit.idio, [1])
        assert np.mean(np.abs(lc.corr[0, :10, 0])) > lc.critical

    @pytest.mark.parametrize("lags", [[50], [0], []])
    def test_bad_lags(self, rng, lags):
        with pytest.raises(DataError):
            lagged_corr_diagnostic(rng.standard_normal((1, 50)), rng.standard_normal((2, 50)), lags)

    def test_quantiles(self):
        assert quantile_table([1, 2, 3, 4], [0.5]) == [(0.5, 2.5)]
        assert quantile_table([1, 2, 3, 4], [1.0])[0][1] == 4.0
        with pytest.raises(DataError):
            quantile_table([1.0], [1.5])

    def test_kde_integrates(self, rng):
        grid, dens = kde_curve(rng.uniform(-0.3, 0.3, 500), 512)
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=0.02)

    def test_diagnose_panel(self, rng, tmp_path):
        y = rng.standard_normal((30, 3)) @ rng.standard_normal((3, 200)) + rng.standard_normal((30, 200))
        p = Panel.from_array(y)
        diag = diagnose_panel(p, r=3, lags=(1, 2))
        assert diag.correlations.corr.shape == (3, 30, 2)
        assert len(diag.density) == 6
        paths = diag.write(tmp_path)
        assert all(path.is_file() for path in paths.values())
        with pytest.raises(DataError):
            diagnose_panel(p, r=40)


@pytest.mark.slow
def test_large_cell_weak_set():
    # single replication of the largest cell; the band covers one draw
    cfg = ExperimentConfig(n_grid=(480,), T_grid=(960,), replications=1, methods=("dlra",),
                           eig_method="lapack")
    rep = run_amse_experiment(cfg)
    assert rep.cell("dlra", "weak", 480, 960).mean == pytest.approx(0.285, abs=0.1)
