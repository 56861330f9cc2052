import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from factorseq.errors import DataError, NumericalError
from factorseq.panel import Panel, sample_autocov
from factorseq.statespace import (
    DGP_G,
    DGP_M,
    IdioSpec,
    StateSpaceModel,
    gen_example_one_weak,
    gen_example_shift,
    gen_random_walk_idio,
    lyapunov_solve,
    make_ma_model,
    make_paper_dgp,
    miniphase_check,
    pbh_observable,
    simulate_ss,
    transmission_zeros,
)


class TestLyapunov:
    def test_two_state_system_has_identity_state_variance(self):
        assert np.max(np.abs(lyapunov_solve(DGP_M, DGP_G) - np.eye(2))) < 1e-5

    def test_zero_transition(self):
        G = np.array([[1.0], [2.0]])
        assert_allclose(lyapunov_solve(np.zeros((2, 2)), G), G @ G.T)

    def test_unstable_is_error(self):
        with pytest.raises(NumericalError):
            lyapunov_solve(np.eye(2), np.ones((2, 1)))

    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_matches_scipy(self, seed, m):
        # dual route: scipy's Bartels-Stewart solver as the oracle
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((m, m))
        A *= 0.9 / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
        G = rng.standard_normal((m, 2))
        assert_allclose(lyapunov_solve(A, G), scipy.linalg.solve_discrete_lyapunov(A, G @ G.T), atol=1e-9)


class TestModel:
    def test_two_state_dgp_dimensions(self):
        model, idio = make_paper_dgp(120)
        assert (model.r, model.r_w, model.q) == (1, 1, 1)
        assert model.n == 120 and idio.kind == "common-shock"

    def test_population_gamma_chi_eigenvalues(self):
        model, _ = make_paper_dgp(50)
        lam = np.linalg.eigvalsh(model.gamma_chi())[::-1]
        assert_allclose(lam[:3], [40, 10, 0], rtol=1e-6, atol=1e-8)

    def test_too_small(self):
        with pytest.raises(DataError):
            make_paper_dgp(10)

    def test_unstable_transition_rejected(self):
        with pytest.raises(DataError):
            StateSpaceModel(np.eye(2), np.ones(2), np.ones((3, 2)))

    def test_text_round_trip(self, tmp_path):
        model, _ = make_paper_dgp(15, layout="tables")
        model.save(tmp_path / "m.txt")
        back = StateSpaceModel.load(tmp_path / "m.txt")
        assert_array_equal(back.M, model.M)
        assert_array_equal(back.H, model.H)
        assert back.strong_states == model.strong_states

    def test_layouts_swap_rows(self):
        text, _ = make_paper_dgp(12, "text")
        tables, _ = make_paper_dgp(12, "tables")
        assert_array_equal(text.H[:10], [[0, 1]] * 10)
        assert_array_equal(tables.H[:10], [[1, 0]] * 10)


class TestSimulate:
    def test_same_seed_is_bit_identical(self):
        model, idio = make_paper_dgp(20)
        a = simulate_ss(model, 100, 50, 3, idio)
        b = simulate_ss(model, 100, 50, 3, idio)
        assert_array_equal(a.y.values, b.y.values)

    def test_replications_differ(self):
        model, idio = make_paper_dgp(20)
        a = simulate_ss(model, 100, 50, 3, idio, replication=0)
        b = simulate_ss(model, 100, 50, 3, idio, replication=1)
        assert not np.array_equal(a.y.values, b.y.values)

    def test_state_variance_near_identity(self):
        model, idio = make_paper_dgp(12)
        sim = simulate_ss(model, 5000, 500, 1, idio)
        S = np.cov(sim.states)
        assert np.max(np.abs(S - np.eye(2))) < 0.05

    def test_lag_one_autocovariance(self):
        model, _ = make_paper_dgp(12)
        sim = simulate_ss(model, 10000, 500, 2, IdioSpec("none"))
        x = sim.states - sim.states.mean(axis=1, keepdims=True)
        T = x.shape[1]
        G0, G1 = x @ x.T / T, x[:, 1:] @ x[:, :-1].T / T
        # x_{t+1} = M x_t + G eps_{t+1}, so Gamma(1) = M Gamma(0) up to the O(1/sqrt T) shock term
        assert np.max(np.abs(G1 - DGP_M @ G0)) < 0.05 * np.max(np.abs(DGP_M @ G0))

    def test_weak_rows_equal_weak_factor(self):
        model, idio = make_paper_dgp(30)
        sim = simulate_ss(model, 200, 50, 4, idio)
        for i in range(10):
            assert_array_equal(sim.chi.values[i], sim.factors[1][0])

    def test_components_add_up(self):
        model, idio = make_paper_dgp(30)
        sim = simulate_ss(model, 200, 50, 4, idio)
        assert_allclose(sim.C.values + sim.e_chi.values, sim.chi.values, atol=1e-14)
        assert_allclose(sim.chi.values + sim.xi.values, sim.y.values, atol=1e-14)

    def test_factor_orthogonality(self):
        model, idio = make_paper_dgp(12)
        T = 4000
        sim = simulate_ss(model, T, 500, 9, idio)
        fs, fw = sim.factors
        assert abs(np.corrcoef(fs[0], fw[0])[0, 1]) < 4 / np.sqrt(T)

    def test_export(self, tmp_path):
        model, idio = make_paper_dgp(12)
        out = simulate_ss(model, 40, 10, 0, idio).export_csv_dir(tmp_path / "sim")
        names = {p.name for p in out.iterdir()}
        assert {"y.csv", "chi.csv", "C.csv", "e_chi.csv", "xi.csv", "model.txt"} <= names

    def test_weight_rules_share_draws(self):
        # same streams, so lambda_multiply = lambda_divide * w^2 row by row
        div = IdioSpec("common-shock", weight_rule="divide", noise_sd=0.0).draw(5, 7, 1)
        mul = IdioSpec("common-shock", weight_rule="multiply", noise_sd=0.0).draw(5, 7, 1)
        w = 1 + np.arange(1, 6) / 20
        assert_allclose(mul, div * (w ** 2)[:, None], rtol=1e-12)


class TestGenerators:
    def test_shift_is_cross_sectionally_white(self):
        T = 4000
        sim = gen_example_shift(20, T, 5)
        G = sample_autocov(sim.chi.values - sim.chi.values.mean(axis=1, keepdims=True), 0).values
        off = G[~np.eye(20, dtype=bool)]
        assert np.max(np.abs(off)) < 4 / np.sqrt(T)

    def test_shift_perfect_prediction(self):
        chi = gen_example_shift(6, 50, 1).chi.values
        assert_array_equal(chi[1:, 1:], chi[:-1, :-1])
        assert_array_equal(gen_example_shift(6, 50, 1).C.values, 0)

    def test_shift_determinism(self):
        assert_array_equal(gen_example_shift(5, 30, 2, 0.5).y.values, gen_example_shift(5, 30, 2, 0.5).y.values)

    def test_one_weak(self):
        sim = gen_example_one_weak(6, 80, 3)
        chi = sim.chi.values
        for i in range(2, 6):
            assert_array_equal(chi[i], chi[1])
        assert_array_equal(sim.e_chi.values[1:], 0)
        assert_array_equal(gen_example_one_weak(6, 80, 3).y.values, sim.y.values)

    def test_random_walk_variance_grows(self):
        n, T = 400, 200
        sim = gen_random_walk_idio(n, T, 8)
        e = sim.xi.values
        v = e.var(axis=0)
        t = np.arange(1, T + 1)
        assert_allclose(v[[49, 99, 199]] / t[[49, 99, 199]], 1.0, rtol=0.25)

    def test_random_walk_differences_stationary(self):
        sim = gen_random_walk_idio(30, 2000, 8)
        dy = np.diff(sim.y.values, axis=1)
        lam = np.linalg.eigvalsh(np.cov(dy))[::-1]
        # one common direction from u_t, the rest near the unit noise level
        assert lam[1] / lam[-1] < 2.0 and lam[0] > 5 * lam[1]

    def test_random_walk_determinism(self):
        assert_array_equal(gen_random_walk_idio(4, 30, 1).y.values, gen_random_walk_idio(4, 30, 1).y.values)


class TestObservability:
    def test_two_state_strong_state_observable(self):
        assert pbh_observable([[1, 0]], DGP_M).observable

    def test_unobservable_witness(self):
        res = pbh_observable([[1, 0]], np.diag([0.5, 0.5]))
        assert not res.observable and res.witness == pytest.approx(0.5)

    def test_full_selection(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            assert pbh_observable(np.eye(3), rng.standard_normal((3, 3))).observable


class TestMiniphase:
    def test_scalar_zero_outside(self):
        # k(z) = 1 - 0.5 z has its zero at z = 2
        model = make_ma_model(1, [1.0, -0.5])
        assert miniphase_check(model.M, model.G, model.H).miniphase

    def test_static_gain_has_no_zeros(self):
        assert miniphase_check([[0.0]], [[1.0]], [[1.0]]).miniphase

    def test_scalar_zero_inside(self):
        model = make_ma_model(1, [1.0, -2.0])
        res = miniphase_check(model.M, model.G, model.H)
        assert not res.miniphase
        assert abs(res.z - 0.5) < 1e-6

    def test_two_state_strong_factor_alone(self):
        res = miniphase_check(DGP_M, DGP_G, [[1, 0]])
        assert not res.miniphase
        # numerator of the transfer: 0.9025054 - (M22 G1 - M12 G2) z
        root = DGP_G[0, 0] / (DGP_M[1, 1] * DGP_G[0, 0] - DGP_M[0, 1] * DGP_G[1, 0])
        assert abs(abs(res.z) - root) < 1e-6
        assert 0.94 <= abs(res.z) <= 0.97

    def test_two_state_joint_states(self):
        assert miniphase_check(DGP_M, DGP_G, np.eye(2)).miniphase

    def test_zeros_match_polynomial_root(self):
        zs = transmission_zeros(DGP_M, DGP_G, [[0, 1]])
        c0 = DGP_G[1, 0]
        c1 = DGP_M[1, 0] * DGP_G[0, 0] - DGP_M[0, 0] * DGP_G[1, 0]
        assert_allclose(zs, [-c0 / c1], rtol=1e-8)

    def test_grid_shape(self):
        res = miniphase_check(DGP_M, DGP_G, np.eye(2), 8, 16)
        assert res.sigma_map.shape == (8, 16)
