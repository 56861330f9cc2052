import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from factorseq.errors import DataError, NumericalError
from factorseq.forecast import (
    ForecastSpec,
    aic_lag_select,
    fit_ols,
    run_forecast_models,
    split_strong_weak,
    training_factors,
)
from factorseq.panel import Panel
from factorseq.statespace import (
    IdioSpec,
    StateSpaceModel,
    assemble,
    make_paper_dgp,
    simulate_ss,
    simulate_states,
)

SPECS = [ForecastSpec("both"), ForecastSpec("strong_only"), ForecastSpec("sw")]


def ar1(phi, T, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(T + 100)
    y = np.zeros_like(e)
    for t in range(1, e.size):
        y[t] = phi * y[t - 1] + e[t]
    return y[100:]


class TestFitOls:
    def test_noiseless(self, rng):
        X = rng.standard_normal((50, 2))
        fit = fit_ols(X, 2 * X[:, 0] - X[:, 1])
        assert_allclose(fit.coef, [2, -1], atol=1e-10)

    def test_duplicate_column(self, rng):
        x = rng.standard_normal(30)
        with pytest.raises(NumericalError, match="rank deficient"):
            fit_ols(np.column_stack([x, x]), x)

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            fit_ols(np.ones((2, 3)), np.ones(2))

    def test_consistency(self, rng):
        x = rng.standard_normal(5000)
        fit = fit_ols(x, 0.5 * x + rng.standard_normal(5000))
        assert abs(fit.coef[0] - 0.5) < 0.05

    @given(st.integers(0, 10_000))
    def test_residuals_orthogonal_and_nested_rss(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((60, 3))
        y = rng.standard_normal(60)
        small = fit_ols(X, y)
        assert np.max(np.abs(X.T @ small.resid)) < 1e-8
        big = fit_ols(np.column_stack([X, rng.standard_normal(60)]), y)
        assert big.rss <= small.rss + 1e-10


class TestAic:
    def test_iid_matches_asymptotic_rate(self):
        # Under i.i.d. data the AIC gain of lag j is asymptotically chi2(1) - 2,
        # so p = 0 wins when every partial sum of (2 - chi2_j) stays positive.
        c = np.random.default_rng(0).chisquare(1, (200_000, 6))
        walk = np.cumsum(2 - c, axis=1)
        oracle = np.mean(walk.min(axis=1) > 0)
        picks = np.array([aic_lag_select(np.random.default_rng(s).standard_normal(1000), 6)
                          for s in range(400)])
        assert abs(np.mean(picks == 0) - oracle) < 0.07
        assert np.mean(picks <= 1) > 0.85

    def test_ar_one_selects_lags(self):
        picks = [aic_lag_select(ar1(0.9, 1000, s), 6) for s in range(100)]
        assert np.mean(np.array(picks) >= 1) >= 0.99

    def test_zero_max(self, rng):
        assert aic_lag_select(rng.standard_normal(50), 0) == 0

    def test_too_short(self, rng):
        with pytest.raises(DataError):
            aic_lag_select(rng.standard_normal(15), 6)


class TestSpecs:
    @pytest.mark.parametrize("kwargs", [{"model": "ar"}, {"model": "sw", "max_lag": -1},
                                        {"model": "both", "horizon": 2}])
    def test_invalid(self, kwargs):
        with pytest.raises(DataError):
            ForecastSpec(**kwargs)

    @pytest.mark.parametrize("lam, r_chi, expected", [
        ([100.0, 5.0, 1.0], 2, 1),
        ([100.0, 90.0, 1.0], 3, 2),
        ([3.0], 1, 1),
    ])
    def test_split(self, lam, r_chi, expected):
        assert split_strong_weak(np.array(lam), r_chi) == expected


class TestRunModels:
    def test_population_coefficients(self):
        # chi_{t+1} = H M x_t exactly, so "both" recovers H M without error
        model, _ = make_paper_dgp(20, "text")
        X, eps = simulate_states(model, 300, 200, 5)
        chi = np.zeros((20, 300))
        chi[:, 1:] = model.H @ model.M @ X[:, :-1]
        sim = assemble(chi, np.zeros_like(chi), np.zeros_like(chi), (X[:1], X[1:]), eps, 5, states=X)
        res = run_forecast_models(sim, [ForecastSpec("both")], train_end=250)
        assert_allclose(res["both"].predictions, model.H @ model.M @ X[:, 250], rtol=0, atol=1e-8)

    def test_msfe_is_mean(self):
        model, idio = make_paper_dgp(30, "tables")
        res = run_forecast_models(simulate_ss(model, 120, 100, 1, idio), SPECS)
        for r in res.values():
            assert r.msfe == pytest.approx(r.squared_errors.mean())
            assert r.target == 119
        assert len(res["sw"].lags) == 30

    def test_no_leakage(self):
        model, idio = make_paper_dgp(40, "tables")
        sim = simulate_ss(model, 150, 100, 2, idio)
        base = run_forecast_models(sim.y, SPECS, train_end=120, factor_mode="estimated")
        vals = sim.y.values.copy()
        vals[:, 121:] = np.random.default_rng(0).standard_normal((40, 29)) * 1e3
        vals[:, 121] = base["both"].predictions  # keep the target column for the errors
        other = run_forecast_models(Panel(vals, sim.y.labels), SPECS, train_end=120,
                                    factor_mode="estimated")
        for m in base:
            np.testing.assert_array_equal(base[m].predictions, other[m].predictions)

    def test_weak_terms_vanish(self):
        # M_sw = 0 and no weak loadings: F^w adds nothing
        M = np.array([[0.6, 0.0], [0.4, 0.5]])
        H = np.zeros((60, 2))
        H[:, 0] = 1.0
        model = StateSpaceModel(M, [1.0, 0.5], H, (0,), (1,))
        diffs = []
        for rep in range(40):
            sim = simulate_ss(model, 200, 100, 7, IdioSpec("iid"), rep)
            res = run_forecast_models(sim, SPECS[:2])
            diffs.append(res["both"].msfe - res["strong_only"].msfe)
        se = np.std(diffs, ddof=1) / np.sqrt(len(diffs))
        assert abs(np.mean(diffs)) < 2 * se + 1e-12

    def test_both_not_worse_than_strong(self):
        model, idio = make_paper_dgp(120, "tables")
        diffs = []
        for rep in range(30):
            res = run_forecast_models(simulate_ss(model, 240, 500, 11, idio, rep), SPECS[:2])
            diffs.append(res["both"].msfe - res["strong_only"].msfe)
        se = np.std(diffs, ddof=1) / np.sqrt(len(diffs))
        assert np.mean(diffs) <= 2 * se

    def test_short_window(self):
        model, idio = make_paper_dgp(20)
        sim = simulate_ss(model, 100, 10, 0, idio)
        with pytest.raises(DataError, match="too short"):
            run_forecast_models(sim, SPECS, train_end=10)
        with pytest.raises(DataError):
            run_forecast_models(sim, SPECS, train_end=99)

    def test_oracle_needs_simulation(self, noise_panel):
        with pytest.raises(DataError):
            training_factors(noise_panel, 100, "oracle")

    def test_workers_agree(self):
        model, idio = make_paper_dgp(25)
        sim = simulate_ss(model, 100, 50, 3, idio)
        a = run_forecast_models(sim, SPECS)
        b = run_forecast_models(sim, SPECS, workers=3)
        for m in a:
            np.testing.assert_array_equal(a[m].predictions, b[m].predictions)
