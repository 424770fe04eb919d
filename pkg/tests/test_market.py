import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lqg
from lqg.errors import IdentificationError
from lqg.generators import random_info
from lqg.market import (
    MarketScenario,
    closed_form_slope,
    market_game,
    optimal_tax,
    pipeline_revenue,
    policy_roundtrip,
    revenue_lower_bound,
    tax_revenue,
)


class TestClosedForms:
    def test_reference_slope(self):
        assert closed_form_slope(0.5, 0.8) == pytest.approx(0.4 / 1.32, rel=1e-15)

    @pytest.mark.parametrize("tau,h", [(0.3, 0.0), (1.0, 0.7)])
    def test_boundary_slopes(self, tau, h):
        assert closed_form_slope(tau, h) == 0.0

    def test_reference_revenue(self):
        want = 0.5 * (0.4 / 1.32) ** 2
        assert tax_revenue(0.5, 0.8) == pytest.approx(want, rel=1e-13)
        assert want == pytest.approx(0.0459137, abs=5e-8)

    @pytest.mark.parametrize("tau,h", [(0.0, 0.5), (1.0, 0.5), (0.4, 0.0)])
    def test_boundary_revenue(self, tau, h):
        assert tax_revenue(tau, h) == 0.0

    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_revenue_is_tau_times_slope_squared(self, tau, h):
        assert tax_revenue(tau, h) == pytest.approx(
            tau * closed_form_slope(tau, h) ** 2, rel=1e-12, abs=1e-15
        )


class TestMarketGame:
    def test_parameter_mapping(self):
        grid = lqg.AgentGrid.uniform(10)
        payoff, info = market_game(MarketScenario(tau=0.0, h=0.6, grid=grid))
        assert np.all(payoff.w == -1.0)
        assert np.all(payoff.b == 1.0)
        assert np.all(payoff.c == 0.0)

    def test_full_tax_kills_incentives(self):
        grid = lqg.AgentGrid.uniform(10)
        payoff, info = market_game(MarketScenario(tau=1.0, h=0.6, grid=grid))
        assert np.all(payoff.w == 0.0) and np.all(payoff.b == 0.0)
        std = lqg.standardize(info)
        prof = lqg.solve_equilibrium(lqg.build_operator(payoff, std, grid))
        assert np.all(prof.phi == 0.0) and np.all(prof.phi0 == 0.0)

    def test_pure_noise_signals(self):
        grid = lqg.AgentGrid.uniform(10)
        payoff, info = market_game(MarketScenario(tau=0.3, h=0.0, grid=grid))
        std = lqg.standardize(info)
        prof = lqg.solve_equilibrium(lqg.build_operator(payoff, std, grid))
        assert np.abs(prof.phi).max() == 0.0

    def test_domain_validation(self):
        grid = lqg.AgentGrid.uniform(5)
        with pytest.raises(ValueError):
            MarketScenario(tau=1.2, h=0.5, grid=grid)
        with pytest.raises(ValueError):
            MarketScenario(tau=0.5, h=-0.1, grid=grid)


class TestPipelineAgreement:
    @pytest.mark.parametrize("tau,h", [(0.0, 0.8), (0.5, 0.8), (0.9, 0.3), (0.2, 1.0)])
    def test_solver_matches_closed_form(self, tau, h):
        n = 100
        grid = lqg.AgentGrid.uniform(n)
        payoff, info = market_game(MarketScenario(tau=tau, h=h, grid=grid))
        std = lqg.standardize(info)
        prof = lqg.solve_equilibrium(lqg.build_operator(payoff, std, grid))
        assert np.abs(prof.phi[:, 0] - closed_form_slope(tau, h)).max() <= 1e-8

    @pytest.mark.parametrize("tau,h", [(0.5, 0.8), (0.25, 0.5)])
    def test_pipeline_revenue_matches(self, tau, h):
        grid = lqg.AgentGrid.uniform(80)
        _, info = market_game(MarketScenario(tau=tau, h=h, grid=grid))
        assert pipeline_revenue(tau, info, grid) == pytest.approx(
            tax_revenue(tau, h), abs=1e-8
        )

    def test_spectral_pass_on_small_sweep(self):
        grid = lqg.AgentGrid.uniform(40)
        for tau in np.linspace(0.0, 1.0, 5):
            for h in np.linspace(0.0, 1.0, 5):
                payoff, info = market_game(MarketScenario(tau=tau, h=h, grid=grid))
                std = lqg.standardize(info)
                chk = lqg.spectral_check(lqg.build_operator(payoff, std, grid))
                assert chk.well_posed


class TestOptimalTax:
    def test_zero_exposure_flag(self):
        opt = optimal_tax(0.0)
        assert opt.zero_revenue
        assert opt.revenue_star == 0.0

    def test_matches_dense_grid_argmax(self):
        h = 1.0
        opt = optimal_tax(h, resolution=1e-6)
        taus = np.arange(0.0, 1.0 + 1e-9, 1e-6)
        vals = tax_revenue(taus, h)
        assert abs(opt.tau_star - taus[np.argmax(vals)]) <= 2e-6
        assert opt.unimodal

    def test_tau_star_continuous_in_h(self):
        hs = np.arange(0.05, 1.0001, 0.05)
        stars = [optimal_tax(float(h)).tau_star for h in hs]
        steps = np.abs(np.diff(stars))
        assert steps.max() < 0.02

    def test_resolution_validated(self):
        with pytest.raises(ValueError):
            optimal_tax(0.5, resolution=1e-9)


class TestRevenueLowerBound:
    def test_rate_at_half(self):
        grid = lqg.AgentGrid.uniform(10)
        _, info = market_game(MarketScenario(tau=0.5, h=0.6, grid=grid))
        bound, r_tau = revenue_lower_bound(0.5, info, grid)
        assert r_tau == pytest.approx(0.5 * 0.25 / 1.5, rel=1e-15)
        assert r_tau == pytest.approx(0.0833333, abs=5e-8)

    @pytest.mark.parametrize("tau", [0.0, 1.0])
    def test_boundary_rates(self, tau):
        grid = lqg.AgentGrid.uniform(10)
        _, info = market_game(MarketScenario(tau=0.5, h=0.6, grid=grid))
        bound, r_tau = revenue_lower_bound(tau, info, grid)
        assert bound == 0.0 and r_tau == 0.0

    @pytest.mark.parametrize("seed,d", [(0, 1), (1, 2), (2, 3)])
    def test_corrected_bound_holds_on_random_structures(self, seed, d):
        rng = np.random.default_rng(seed)
        grid = lqg.AgentGrid.uniform(30)
        info = random_info(rng, grid, d=d, mu_theta=0.0, var_theta=1.0)
        for tau in (0.1, 0.5, 0.9):
            revenue = pipeline_revenue(tau, info, grid)
            bound, _ = revenue_lower_bound(tau, info, grid, corrected=True)
            assert revenue >= bound - 1e-9

    def test_corrected_bound_on_strong_canonical_exposures(self):
        grid = lqg.AgentGrid.uniform(40)
        for h in (0.3, 0.6, 0.8, 0.9, 1.0):
            _, info = market_game(MarketScenario(tau=0.5, h=h, grid=grid))
            for tau in np.arange(0.05, 1.0, 0.05):
                revenue = pipeline_revenue(float(tau), info, grid)
                bound, _ = revenue_lower_bound(float(tau), info, grid, corrected=True)
                assert revenue >= bound - 1e-9

    def test_corrected_bound_tight_for_perfect_signals(self):
        # h = 1 puts the signal-state correlation in the top eigenspace
        grid = lqg.AgentGrid.uniform(30)
        _, info = market_game(MarketScenario(tau=0.5, h=1.0, grid=grid))
        tau = 0.4
        revenue = pipeline_revenue(tau, info, grid)
        bound, _ = revenue_lower_bound(tau, info, grid, corrected=True)
        assert revenue == pytest.approx(bound, rel=1e-10)

    def test_uncorrected_rate_is_not_a_floor(self):
        # the legacy rate tau (1-tau)^2/(2-tau) exceeds the actual revenue
        # already at (tau, h) = (0.5, 0.8); keep this on record
        grid = lqg.AgentGrid.uniform(40)
        _, info = market_game(MarketScenario(tau=0.5, h=0.8, grid=grid))
        revenue = pipeline_revenue(0.5, info, grid)
        naive, _ = revenue_lower_bound(0.5, info, grid)
        corrected, _ = revenue_lower_bound(0.5, info, grid, corrected=True)
        assert revenue < naive - 1e-3
        assert revenue >= corrected - 1e-9


class TestPolicyRoundtrip:
    def test_exact_recovery(self):
        grid = lqg.AgentGrid.uniform(50)
        report = policy_roundtrip(
            MarketScenario(tau=0.0, h=0.8, grid=grid), theta_bars=(0.0, 1.0)
        )
        assert report.h_err <= 1e-8
        assert report.tau_err <= 1e-5

    def test_distinct_exposures_give_distinct_policies(self):
        grid = lqg.AgentGrid.uniform(40)
        low = policy_roundtrip(MarketScenario(tau=0.2, h=0.3, grid=grid))
        high = policy_roundtrip(MarketScenario(tau=0.2, h=0.9, grid=grid))
        assert abs(low.tau_star_hat - high.tau_star_hat) > 0.01

    def test_vanishing_exposure_degrades_gracefully(self):
        grid = lqg.AgentGrid.uniform(20)
        with pytest.raises(ValueError):
            policy_roundtrip(MarketScenario(tau=0.2, h=0.0, grid=grid))
        with pytest.raises(IdentificationError):
            policy_roundtrip(MarketScenario(tau=0.2, h=1e-8, grid=grid))
