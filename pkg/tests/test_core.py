import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lqg
from lqg.core import joint_covariance, signal_covariance
from lqg.errors import (
    NormalizationInfeasible,
    NotPSD,
    SingularOwnCovariance,
)
from lqg.generators import random_info


class TestAgentGrid:
    def test_uniform_midpoint(self):
        grid = lqg.AgentGrid.uniform(4)
        assert np.allclose(grid.points, [0.125, 0.375, 0.625, 0.875])
        assert grid.weight == 1.0 / 4

    @given(st.integers(min_value=1, max_value=500))
    def test_uniform_invariants(self, n):
        grid = lqg.AgentGrid.uniform(n)
        assert grid.points.shape == (n,)
        assert grid.points[0] > 0.0 and grid.points[-1] < 1.0
        assert np.all(np.diff(grid.points) > 0.0)
        assert grid.weight == 1.0 / n

    def test_rejects_bad_grids(self):
        with pytest.raises(ValueError):
            lqg.AgentGrid(n=2, points=np.array([0.5, 0.25]), weight=0.5)
        with pytest.raises(ValueError):
            lqg.AgentGrid(n=2, points=np.array([0.0, 0.5]), weight=0.5)
        with pytest.raises(ValueError):
            lqg.AgentGrid(n=2, points=np.array([0.25, 0.75]), weight=0.3)

    def test_points_are_readonly(self):
        grid = lqg.AgentGrid.uniform(3)
        with pytest.raises(ValueError):
            grid.points[0] = 0.9


class TestMakeCanonicalInfo:
    def test_zero_exposure_pure_noise(self):
        n = 10
        canon = lqg.make_canonical_info(np.zeros(n), np.zeros((n, n)), 2.5)
        assert np.allclose(np.diag(canon.g), 1.0)

    def test_iid_normalization(self):
        n = 10
        canon = lqg.make_canonical_info(np.full(n, 0.8), np.zeros((n, n)), 1.0)
        assert np.allclose(np.diag(canon.g), 0.36)
        assert np.allclose(canon.g - np.diag(np.diag(canon.g)), 0.0)

    def test_infeasible_exposure(self):
        n = 5
        with pytest.raises(NormalizationInfeasible):
            lqg.make_canonical_info(np.full(n, 1.1), np.zeros((n, n)), 1.0)

    def test_nonzero_diagonal_rejected(self):
        n = 3
        with pytest.raises(ValueError):
            lqg.make_canonical_info(np.zeros(n), np.eye(n), 1.0)

    def test_psd_violation_caught(self):
        # off-diagonal noise correlation above the feasible level
        n = 4
        off = 0.9 * (np.ones((n, n)) - np.eye(n))
        with pytest.raises(NotPSD):
            lqg.make_canonical_info(np.full(n, 0.9), off, 1.0)

    @given(
        st.integers(min_value=1, max_value=30),
        st.floats(min_value=0.0, max_value=0.99),
        st.floats(min_value=0.1, max_value=4.0),
    )
    @settings(max_examples=30, deadline=None)
    def test_normalization_holds(self, n, hsq_frac, var_theta):
        h = np.full(n, np.sqrt(hsq_frac / var_theta))
        canon = lqg.make_canonical_info(h, np.zeros((n, n)), var_theta)
        unit = canon.h**2 * var_theta + np.diag(canon.g)
        assert np.abs(unit - 1.0).max() <= 1e-10


class TestCanonicalToInfo:
    def test_iid_covariances(self):
        grid = lqg.AgentGrid.uniform(6)
        canon = lqg.make_canonical_info(np.full(6, 0.8), np.zeros((6, 6)), 1.0)
        info = lqg.canonical_to_info(canon, grid)
        off = info.K_kernel[0, 1, 0, 0]
        assert off == pytest.approx(0.64, abs=1e-15)
        # kernel diagonal is the a.e. extension: idiosyncratic part drops out
        assert info.K_kernel[2, 2, 0, 0] == pytest.approx(0.64, abs=1e-15)
        assert info.K_point[2, 0, 0] == pytest.approx(1.0, abs=0.0)
        assert np.allclose(info.K_theta[:, 0], 0.8)

    def test_zero_exposure(self):
        grid = lqg.AgentGrid.uniform(5)
        off = 0.2 * (np.ones((5, 5)) - np.eye(5))
        canon = lqg.make_canonical_info(np.zeros(5), off, 1.0)
        info = lqg.canonical_to_info(canon, grid)
        assert np.allclose(info.K_theta, 0.0)
        mask = ~np.eye(5, dtype=bool)
        assert np.allclose(info.K_kernel[:, :, 0, 0][mask], canon.g[mask])

    def test_fully_revealing(self):
        grid = lqg.AgentGrid.uniform(5)
        canon = lqg.make_canonical_info(np.ones(5), np.zeros((5, 5)), 1.0)
        info = lqg.canonical_to_info(canon, grid)
        assert np.allclose(np.diag(canon.g), 0.0)
        assert np.allclose(info.K_theta[:, 0], 1.0)
        assert np.allclose(info.K_point[:, 0, 0], 1.0)

    def test_means_follow_prior(self):
        grid = lqg.AgentGrid.uniform(4)
        canon = lqg.make_canonical_info(np.full(4, 0.5), np.zeros((4, 4)), 1.0)
        info = lqg.canonical_to_info(canon, grid, mu_theta=2.0)
        assert np.allclose(info.m[:, 0], 1.0)


class TestStandardize:
    def test_canonical_passthrough(self):
        grid = lqg.AgentGrid.uniform(8)
        canon = lqg.make_canonical_info(np.full(8, 0.7), np.zeros((8, 8)), 1.0)
        info = lqg.canonical_to_info(canon, grid)
        std = lqg.standardize(info)
        # unit own variance: standardization is the identity map
        assert np.allclose(std.P_kernel[:, :, 0, 0], info.K_kernel[:, :, 0, 0])
        assert np.allclose(std.P_theta[:, 0], 0.7)

    def test_scaled_two_dim(self):
        var_theta = 2.0
        sigma = np.sqrt(var_theta)
        info = lqg.InformationStructure(
            d=2,
            mu_theta=0.0,
            var_theta=var_theta,
            m=np.zeros((1, 2)),
            K_point=np.array([[[4.0, 0.0], [0.0, 4.0]]]),
            K_kernel=np.array([[[[4.0, 0.0], [0.0, 4.0]]]]),
            K_theta=np.array([[2.0 * sigma, 0.0]]),
        )
        std = lqg.standardize(info)
        assert np.allclose(std.P_theta[0], [1.0, 0.0])

    def test_zero_state_covariance(self):
        rng = np.random.default_rng(3)
        grid = lqg.AgentGrid.uniform(6)
        info = random_info(rng, grid, d=2)
        info = lqg.InformationStructure(
            d=info.d,
            mu_theta=info.mu_theta,
            var_theta=info.var_theta,
            m=info.m,
            K_point=info.K_point,
            K_kernel=info.K_kernel,
            K_theta=np.zeros_like(info.K_theta),
        )
        std = lqg.standardize(info)
        assert np.allclose(std.P_theta, 0.0)

    def test_singular_own_covariance(self):
        info_kwargs = dict(
            d=2,
            mu_theta=0.0,
            var_theta=1.0,
            m=np.zeros((1, 2)),
            K_point=np.array([[[1.0, 1.0], [1.0, 1.0]]]),
            K_kernel=np.array([[[[1.0, 1.0], [1.0, 1.0]]]]),
            K_theta=np.zeros((1, 2)),
        )
        info = lqg.InformationStructure(**info_kwargs)
        with pytest.raises(SingularOwnCovariance):
            lqg.standardize(info)

    @pytest.mark.parametrize("seed,d", [(0, 1), (1, 2), (2, 3)])
    def test_operator_norm_bound(self, seed, d):
        rng = np.random.default_rng(seed)
        grid = lqg.AgentGrid.uniform(15)
        std = lqg.standardize(random_info(rng, grid, d=d))
        svals = np.linalg.svd(std.P_kernel, compute_uv=False)
        assert svals.max() <= 1.0 + 1e-9
        norms = np.einsum("id,id->i", std.P_theta, std.P_theta)
        assert norms.max() <= 1.0 + 1e-9


class TestValidateJointPsd:
    def test_canonical_pairs_pass(self):
        grid = lqg.AgentGrid.uniform(12)
        canon = lqg.make_canonical_info(np.full(12, 0.6), np.zeros((12, 12)), 1.0)
        info = lqg.canonical_to_info(canon, grid)
        pairs = list(itertools.combinations(range(12), 2))
        report = lqg.validate_joint_psd(info, pairs)
        assert report.passed
        assert not report.failures

    def test_cauchy_schwarz_violation_fails(self):
        n = 2
        kernel = np.array([[1.0, 1.5], [1.5, 1.0]])[:, :, None, None]
        info = lqg.InformationStructure(
            d=1,
            mu_theta=0.0,
            var_theta=1.0,
            m=np.zeros((n, 1)),
            K_point=np.ones((n, 1, 1)),
            K_kernel=kernel,
            K_theta=np.zeros((n, 1)),
        )
        report = lqg.validate_joint_psd(info, [(0, 1)])
        assert not report.passed
        assert report.failures

    def test_singletons_reduce_to_schur(self):
        rng = np.random.default_rng(5)
        grid = lqg.AgentGrid.uniform(8)
        info = random_info(rng, grid, d=2)
        report = lqg.validate_joint_psd(info, [(i,) for i in range(8)])
        assert report.passed
        for i in range(8):
            joint = joint_covariance(info, [i])
            schur = info.var_theta - info.K_theta[i] @ np.linalg.solve(
                info.K_point[i], info.K_theta[i]
            )
            assert schur >= -lqg.PSD_TOL
            assert np.linalg.eigvalsh(joint).min() >= -lqg.PSD_TOL

    def test_full_flag(self):
        grid = lqg.AgentGrid.uniform(10)
        canon = lqg.make_canonical_info(np.full(10, 0.5), np.zeros((10, 10)), 1.0)
        info = lqg.canonical_to_info(canon, grid)
        report = lqg.validate_joint_psd(info, full=True)
        assert report.passed
        assert len(report.subsets) == 1

    def test_oversized_subset_rejected(self):
        grid = lqg.AgentGrid.uniform(20)
        canon = lqg.make_canonical_info(np.full(20, 0.5), np.zeros((20, 20)), 1.0)
        info = lqg.canonical_to_info(canon, grid)
        with pytest.raises(ValueError):
            lqg.validate_joint_psd(info, [tuple(range(13))])


def test_compose_passes_all_small_subsets():
    # make + expand on a 20-point grid: every subset of size <= 6 is PSD
    n = 20
    rng = np.random.default_rng(11)
    off = 0.05 * (np.ones((n, n)) - np.eye(n))
    canon = lqg.make_canonical_info(
        rng.uniform(0.2, 0.8, size=n), off, var_theta=1.3
    )
    info = lqg.canonical_to_info(canon, lqg.AgentGrid.uniform(n))
    full = joint_covariance(info, range(n))
    for size in range(1, 7):
        for sub in itertools.combinations(range(n), size):
            idx = list(sub) + [n]
            sub_mat = full[np.ix_(idx, idx)]
            assert np.linalg.eigvalsh(sub_mat).min() >= -lqg.PSD_TOL


def test_signal_covariance_blocks():
    rng = np.random.default_rng(9)
    grid = lqg.AgentGrid.uniform(6)
    info = random_info(rng, grid, d=2)
    K = signal_covariance(info, [1, 3])
    assert np.allclose(K[:2, :2], info.K_point[1])
    assert np.allclose(K[:2, 2:], info.K_kernel[1, 3])
    cross = signal_covariance(info, [1], [1])
    assert np.allclose(cross, info.K_point[1])


def test_information_structure_rejects_asymmetric_kernel():
    n = 2
    kernel = np.zeros((n, n, 1, 1))
    kernel[0, 1, 0, 0] = 0.3
    kernel[1, 0, 0, 0] = -0.3
    with pytest.raises(ValueError):
        lqg.InformationStructure(
            d=1,
            mu_theta=0.0,
            var_theta=1.0,
            m=np.zeros((n, 1)),
            K_point=np.ones((n, 1, 1)),
            K_kernel=kernel,
            K_theta=np.zeros((n, 1)),
        )


def test_information_structure_schur_bound_enforced():
    with pytest.raises(NotPSD):
        lqg.InformationStructure(
            d=1,
            mu_theta=0.0,
            var_theta=1.0,
            m=np.zeros((1, 1)),
            K_point=np.ones((1, 1, 1)),
            K_kernel=np.ones((1, 1, 1, 1)),
            K_theta=np.array([[2.0]]),
        )
