import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from factorseq.errors import DataError, NumericalError
from factorseq.panel import Panel
from factorseq.statespace import (
    IdioSpec,
    StateSpaceModel,
    make_ma_model,
    make_paper_dgp,
    simulate_ss,
)
from factorseq.structure import (
    extract_weak_factors,
    innovations_from_factors,
    inverse_power_series,
    recover_innovations_blockwise,
    three_way_decompose,
)


def autocorr(x, lag):
    x = x - x.mean()
    return float(x[lag:] @ x[:-lag] / (x @ x))


@pytest.fixture(scope="module")
def two_state_decomposition():
    model, idio = make_paper_dgp(240, "text")
    sim = simulate_ss(model, 960, 500, 1, idio)
    return sim, three_way_decompose(sim.y, 1, 1)


class TestThreeWay:
    @pytest.mark.slow
    def test_weak_rows_carry_weak_factor(self, two_state_decomposition):
        sim, dec = two_state_decomposition
        a, b = dec.window
        fw = sim.factors[1][0, a:b]
        r2 = [np.corrcoef(dec.e_chi.values[i], fw)[0, 1] ** 2 for i in range(10)]
        assert np.mean(r2) > 0.5

    @pytest.mark.slow
    def test_additive_and_orthogonal(self, two_state_decomposition):
        sim, dec = two_state_decomposition
        a, b = dec.window
        total = dec.C.values + dec.e_chi.values + dec.xi.values
        assert_allclose(total, sim.y.values[:, a:b], rtol=0, atol=1e-12)
        for i in range(0, 240, 7):
            assert abs(np.corrcoef(dec.C.values[i], dec.e_chi.values[i])[0, 1]) < 0.05

    def test_no_weak_loadings(self):
        M = np.array([[0.5, 0.0], [0.3, 0.6]])
        H = np.zeros((240, 2))
        H[:, 0] = 1.0
        model = StateSpaceModel(M, [1.0, 0.5], H, (0,), (1,))
        sim = simulate_ss(model, 960, 200, 2, IdioSpec("iid"))
        dec = three_way_decompose(sim.y, 1, 1, method="lapack")
        assert np.max(np.var(dec.e_chi.values, axis=1)) < 0.1

    def test_zero_ranks(self, noise_panel):
        dec = three_way_decompose(noise_panel, 0, 0, M=5)
        a, b = dec.window
        assert_array_equal(dec.C.values, 0)
        assert_array_equal(dec.e_chi.values, 0)
        assert_array_equal(dec.xi.values, noise_panel.values[:, a:b])

    @given(st.integers(0, 10_000))
    def test_additivity_property(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.standard_normal((2, 60)).T @ rng.standard_normal((2, 8))
        y = y.T + rng.standard_normal((8, 60)) + 3.0
        dec = three_way_decompose(Panel.from_array(y), 1, 1, M=4, method="lapack")
        a, b = dec.window
        assert_allclose(dec.C.values + dec.e_chi.values + dec.xi.values, y[:, a:b], rtol=0, atol=1e-12)

    def test_export(self, tmp_path, noise_panel):
        dec = three_way_decompose(noise_panel, 1, 1, M=5, method="lapack")
        out = dec.export_csv_dir(tmp_path / "dec")
        assert {"C.csv", "e_chi.csv", "xi.csv", "chi.csv", "weak_pivots.txt"} <= {p.name for p in out.iterdir()}


class TestWeakFactors:
    def test_population_two_state_components(self):
        model, idio = make_paper_dgp(50, "text")
        sim = simulate_ss(model, 500, 100, 3, idio)
        wf = extract_weak_factors(sim.chi, sim.factors[0])
        assert wf.count == 1 and wf.pivots == (0,)
        # oracle: F^w with its in-sample projection on [1, F^s] removed
        X = np.vstack([np.ones(500), sim.factors[0]]).T
        fw = sim.factors[1][0]
        resid = fw - X @ np.linalg.lstsq(X, fw, rcond=None)[0]
        assert abs(abs(np.corrcoef(wf.factors[0], resid)[0, 1]) - 1) < 1e-8

    def test_spanned_by_strong(self, rng):
        f = rng.standard_normal((2, 100))
        chi = rng.standard_normal((6, 2)) @ f
        assert extract_weak_factors(chi, f).count == 0

    def test_infinite_tolerance(self, rng):
        assert extract_weak_factors(rng.standard_normal((5, 50)), rng.standard_normal((1, 50)), np.inf).count == 0

    def test_rank_deficient_strong(self, rng):
        f = rng.standard_normal(50)
        with pytest.raises(DataError, match="rank deficient"):
            extract_weak_factors(rng.standard_normal((4, 50)), np.vstack([f, 2 * f]))

    @given(st.integers(0, 10_000))
    def test_gram_schmidt_orthogonality(self, seed):
        rng = np.random.default_rng(seed)
        T = 80
        strong = rng.standard_normal((1, T))
        chi = rng.standard_normal((5, 3)) @ rng.standard_normal((3, T))
        wf = extract_weak_factors(chi, strong)
        assert list(wf.pivots) == sorted(wf.pivots)
        for w in wf.factors:
            assert_allclose(np.var(w), 1.0, rtol=1e-10)
            assert abs(np.corrcoef(w, strong[0])[0, 1]) < 1e-8
        if wf.count > 1:
            C = np.corrcoef(wf.factors)
            assert_allclose(C, np.eye(wf.count), atol=1e-8)


class TestInnovations:
    def test_joint_factors(self):
        model, _ = make_paper_dgp(12)
        sim = simulate_ss(model, 2000, 500, 3, IdioSpec("none"))
        res = innovations_from_factors(sim.states)
        eps = sim.shocks[0, res.start:]
        assert res.q_hat == 1 and res.invertible
        assert abs(np.corrcoef(res.innovations[0], eps)[0, 1]) > 0.99

    def test_white_noise_input(self, rng):
        F = rng.standard_normal((2, 1500))
        res = innovations_from_factors(F)
        assert res.order == 0 and res.q_hat == 2
        # the innovations are an orthonormal rotation of the demeaned input
        Fc = (F - F.mean(axis=1, keepdims=True))[:, res.start:]
        B, *_ = np.linalg.lstsq(Fc.T, res.innovations.T, rcond=None)
        assert_allclose(Fc.T @ B, res.innovations.T, atol=1e-10)

    def test_strong_factor_alone_falls_short(self):
        model, _ = make_paper_dgp(12)
        corrs = []
        for T in (2000, 8000):
            sim = simulate_ss(model, T, 500, 3, IdioSpec("none"))
            res = innovations_from_factors(sim.states[:1])
            corrs.append(abs(np.corrcoef(res.innovations[0], sim.shocks[0, res.start:])[0, 1]))
        assert max(corrs) < 0.97

    def test_recovered_innovations_are_white(self):
        model, _ = make_paper_dgp(12)
        T = 3000
        sim = simulate_ss(model, T, 500, 6, IdioSpec("none"))
        e = innovations_from_factors(sim.states).innovations[0]
        assert all(abs(autocorr(e, k)) < 4 / np.sqrt(T) for k in range(1, 6))

    def test_too_short(self, rng):
        with pytest.raises(DataError):
            innovations_from_factors(rng.standard_normal((2, 20)), p_max=6)


class TestBlockwise:
    @staticmethod
    def corr_for(n, T=2000, seed=4):
        model = make_ma_model(n, [1.0, 0.5])
        sim = simulate_ss(model, T, 100, seed, IdioSpec("iid"))
        res = recover_innovations_blockwise(model, sim.y, block_truncation=60)
        return abs(np.corrcoef(res.innovations[0], sim.shocks[0, res.start:])[0, 1])

    def test_ma_one_recovery_improves_with_n(self):
        c100, c400 = self.corr_for(100), self.corr_for(400)
        assert c100 > 0.95
        assert c400 > c100

    def test_unit_root_zero_is_rejected(self):
        model = make_ma_model(4, [1.0, -1.0])
        sim = simulate_ss(model, 200, 10, 0, IdioSpec("iid"))
        with pytest.raises(NumericalError, match="block 0"):
            recover_innovations_blockwise(model, sim.y, 20)

    @given(st.integers(0, 10_000), st.integers(1, 3))
    def test_inverse_power_series(self, seed, q):
        rng = np.random.default_rng(seed)
        L = 6
        K = rng.standard_normal((L + 1, q, q)) * 0.3
        K[0] += np.eye(q) * 2
        Psi = inverse_power_series(K)
        for l in range(L + 1):
            conv = sum(K[j] @ Psi[l - j] for j in range(l + 1))
            assert_allclose(conv, np.eye(q) if l == 0 else np.zeros((q, q)), atol=1e-10)

    def test_bad_permutation(self):
        model = make_ma_model(3, [1.0, 0.5])
        sim = simulate_ss(model, 50, 10, 0, IdioSpec("iid"))
        with pytest.raises(DataError):
            recover_innovations_blockwise(model, sim.y, 5, permutation=[0, 0, 1])
