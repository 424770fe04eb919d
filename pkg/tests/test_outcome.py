import numpy as np
import pytest

import lqg
from lqg.generators import random_game
from lqg.market import market_payoff


@pytest.fixture
def market():
    n, tau, h = 60, 0.5, 0.8
    grid = lqg.AgentGrid.uniform(n)
    canon = lqg.make_canonical_info(np.full(n, h), np.zeros((n, n)), 1.0)
    std = lqg.standardize(lqg.canonical_to_info(canon, grid))
    payoff = market_payoff(tau, n)
    prof = lqg.solve_equilibrium(lqg.build_operator(payoff, std, grid))
    return grid, payoff, std, prof


class TestOutcomeMoments:
    def test_zero_slope(self, market):
        grid, payoff, std, prof = market
        flat = lqg.AffineProfile(phi0=np.arange(grid.n, dtype=float), phi=np.zeros(grid.n))
        mom = lqg.outcome_moments(std, flat)
        assert np.all(mom.var_x == 0.0)
        assert np.all(mom.cov_kernel == 0.0)
        assert np.all(mom.cov_xtheta == 0.0)
        assert np.allclose(mom.mean_x, np.arange(grid.n))

    def test_market_values(self, market):
        grid, payoff, std, prof = market
        phi = 0.4 / 1.32
        mom = lqg.outcome_moments(std, prof)
        assert np.abs(mom.var_x - phi**2).max() < 1e-13
        assert np.abs(mom.cov_xtheta - phi * 0.8).max() < 1e-13

    def test_orthogonal_slope_two_dim(self):
        grid = lqg.AgentGrid.uniform(1)
        std = lqg.StandardizedInfo(
            P_kernel=np.eye(2)[None, None, :, :] * 0.0,
            P_theta=np.array([[0.0, 1.0]]),
            root_inv=np.eye(2)[None, :, :],
            mu_theta=0.0,
            var_theta=1.0,
        )
        prof = lqg.AffineProfile(phi0=np.zeros(1), phi=np.array([[1.0, 0.0]]))
        mom = lqg.outcome_moments(std, prof)
        assert mom.cov_xtheta[0] == 0.0
        assert mom.var_x[0] == 1.0


class TestConditionOnState:
    def test_at_prior_mean(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        cond = lqg.condition_on_state(mom, mom.mu_theta)
        assert np.all(cond.cond_mean == mom.mean_x)

    def test_iid_conditional_variance(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        cond = lqg.condition_on_state(mom, 1.7)
        phi = 0.4 / 1.32
        expected = phi**2 * (1.0 - 0.8**2)
        assert np.abs(np.diag(cond.cond_cov) - expected).max() < 1e-13

    def test_zero_slope_conditionals(self, market):
        grid, _, std, _ = market
        flat = lqg.AffineProfile(phi0=np.ones(grid.n), phi=np.zeros(grid.n))
        mom = lqg.outcome_moments(std, flat)
        c1 = lqg.condition_on_state(mom, -3.0)
        c2 = lqg.condition_on_state(mom, 5.0)
        assert np.all(c1.cond_cov == 0.0)
        assert np.all(c1.cond_mean == c2.cond_mean)

    def test_homoskedasticity_exact(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        c1 = lqg.condition_on_state(mom, -1.0)
        c2 = lqg.condition_on_state(mom, 2.5)
        assert np.array_equal(c1.cond_cov, c2.cond_cov)

    def test_mean_affine_in_theta(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        lo, hi = -0.7, 1.9
        mid = lqg.condition_on_state(mom, 0.5 * (lo + hi)).cond_mean
        avg = 0.5 * (
            lqg.condition_on_state(mom, lo).cond_mean
            + lqg.condition_on_state(mom, hi).cond_mean
        )
        assert np.abs(mid - avg).max() < 1e-12


class TestObedience:
    @pytest.mark.parametrize("seed,d", [(0, 1), (1, 2), (2, 3)])
    def test_equilibrium_residuals_vanish(self, seed, d):
        rng = np.random.default_rng(seed)
        grid = lqg.AgentGrid.uniform(30)
        payoff, info = random_game(rng, grid, d=d)
        std = lqg.standardize(info)
        prof = lqg.solve_equilibrium(lqg.build_operator(payoff, std, grid))
        mom = lqg.outcome_moments(std, prof)
        res1, res2 = lqg.obedience_residuals(mom, payoff, grid)
        assert np.abs(res1).max() <= 1e-8
        assert np.abs(res2).max() <= 1e-8

    def test_mean_bump_linearity(self, market):
        grid, payoff, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        base1, _ = lqg.obedience_residuals(mom, payoff, grid)
        i = 7
        bumped = lqg.OutcomeMoments(
            mean_x=mom.mean_x + np.eye(grid.n)[i],
            var_x=mom.var_x,
            cov_kernel=mom.cov_kernel,
            cov_xtheta=mom.cov_xtheta,
            mu_theta=mom.mu_theta,
            var_theta=mom.var_theta,
        )
        res1, _ = lqg.obedience_residuals(bumped, payoff, grid)
        delta = res1[i] - base1[i]
        assert delta == pytest.approx(1.0 - payoff.w[i, i] / grid.n, abs=1e-14)

    def test_market_volatility_identity(self, market):
        # rearranged second-moment restriction for w = -(1-tau)
        grid, payoff, std, prof = market
        tau = 0.5
        mom = lqg.outcome_moments(std, prof)
        mean_cov = mom.cov_kernel.mean(axis=1)
        rhs = mom.cov_xtheta * payoff.b - (1.0 - tau) * mean_cov
        assert np.abs(mom.var_x - rhs).max() < 1e-12


class TestSampling:
    def test_singleton_variance_clt(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        draws = 1_000_000
        sample = lqg.sample_outcome(mom, [4], draws=draws, seed=123)
        emp = sample[:, 1].var(ddof=1)
        se = mom.var_x[4] * np.sqrt(2.0 / draws)
        assert abs(emp - mom.var_x[4]) < 3.0 * se

    def test_zero_covariance_moments(self):
        # uninformative signals, unit slopes: actions mutually independent
        n = 10
        grid = lqg.AgentGrid.uniform(n)
        canon = lqg.make_canonical_info(np.zeros(n), np.zeros((n, n)), 1.0)
        std = lqg.standardize(lqg.canonical_to_info(canon, grid))
        prof = lqg.AffineProfile(phi0=np.zeros(n), phi=np.ones(n))
        mom = lqg.outcome_moments(std, prof)
        sample = lqg.sample_outcome(mom, [0, 1], draws=200_000, seed=5)
        corr = np.corrcoef(sample.T)
        off = corr[~np.eye(3, dtype=bool)]
        assert np.abs(off).max() < 0.01

    def test_seed_determinism(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        a = lqg.sample_outcome(mom, [0, 3, 9], draws=1000, seed=77)
        b = lqg.sample_outcome(mom, [0, 3, 9], draws=1000, seed=77)
        assert np.array_equal(a, b)

    def test_conditional_sampler_determinism(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        a = lqg.sample_conditional(mom, 1.0, draws=5000, seed=3)
        b = lqg.sample_conditional(mom, 1.0, draws=5000, seed=3)
        assert np.array_equal(a.cond_mean, b.cond_mean)
        assert np.array_equal(a.cond_cov, b.cond_cov)

    def test_subset_cap(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        with pytest.raises(ValueError):
            lqg.sample_outcome(mom, range(2001), draws=1, seed=0)

    def test_non_psd_moments_rejected(self, market):
        from lqg.errors import NotPSD

        grid, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        bad = lqg.OutcomeMoments(
            mean_x=mom.mean_x,
            var_x=mom.var_x,
            cov_kernel=mom.cov_kernel,
            cov_xtheta=np.full(grid.n, 10.0),  # breaks Cauchy-Schwarz with theta
            mu_theta=mom.mu_theta,
            var_theta=mom.var_theta,
        )
        with pytest.raises(NotPSD):
            lqg.sample_outcome(bad, [0, 1], draws=10, seed=0)

    def test_conditional_sampler_converges(self, market):
        _, _, std, prof = market
        mom = lqg.outcome_moments(std, prof)
        exact = lqg.condition_on_state(mom, 1.0)
        emp = lqg.sample_conditional(mom, 1.0, draws=400_000, seed=9)
        assert np.abs(emp.cond_mean - exact.cond_mean).max() < 0.01
        assert np.abs(np.diag(emp.cond_cov) - np.diag(exact.cond_cov)).max() < 0.01


def test_obedience_battery_fifty_games():
    # residuals vanish across a mixed-dimension battery of solved games
    rng = np.random.default_rng(2024)
    grid = lqg.AgentGrid.uniform(50)
    for k in range(50):
        d = 1 + k % 3
        payoff, info = random_game(rng, grid, d=d)
        std = lqg.standardize(info)
        prof = lqg.solve_equilibrium(lqg.build_operator(payoff, std, grid))
        mom = lqg.outcome_moments(std, prof)
        res1, res2 = lqg.obedience_residuals(mom, payoff, grid)
        assert max(np.abs(res1).max(), np.abs(res2).max()) <= 1e-8
