"""Gaussian equilibrium-outcome moments, conditionals, and samples.

Any affine profile induces a Gaussian outcome over (theta, X(.)) with
mean phi0(i), Cov(X(i), X(j)) = phi(i)' P(i,j) phi(j), and
Cov(X(i), theta) = sigma_theta phi(i)' P_theta(i).  Action covariances
inherit the dual-diagonal convention of the signal kernels: the pointwise
variance uses the identity own block, the kernel diagonal the a.e. kernel
extension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    AffineProfile,
    AgentGrid,
    PayoffStructure,
    StandardizedInfo,
)
from .errors import DimensionMismatch, NotPSD

#: Pseudo-random bit generator used by the sampler (recorded in run metadata).
RNG_ALGORITHM = "PCG64"


@dataclass(frozen=True)
class OutcomeMoments:
    """First and second moments of the induced Gaussian outcome.

    ``var_x`` holds the pointwise variances phi(i)'phi(i); ``cov_kernel``
    the covariance kernel phi(i)' P(i,j) phi(j) whose diagonal slots carry
    the a.e. kernel extension (used inside quadrature sums).
    """

    mean_x: np.ndarray
    var_x: np.ndarray
    cov_kernel: np.ndarray
    cov_xtheta: np.ndarray
    mu_theta: float
    var_theta: float

    @property
    def n(self) -> int:
        return self.mean_x.shape[0]

    def cov_matrix(self, subset) -> np.ndarray:
        """Pointwise covariance matrix of X over distinct agents."""
        idx = np.asarray(list(subset), dtype=int)
        out = self.cov_kernel[np.ix_(idx, idx)].copy()
        out[np.arange(len(idx)), np.arange(len(idx))] = self.var_x[idx]
        return out


@dataclass(frozen=True)
class ConditionalOutcome:
    """Conditional law of actions given a state value theta_bar.

    ``cond_cov`` has the pointwise conditional variance on its diagonal;
    it does not depend on theta_bar (Gaussian homoskedasticity).
    """

    theta_bar: float
    cond_mean: np.ndarray
    cond_cov: np.ndarray


def outcome_moments(
    std: StandardizedInfo, prof: AffineProfile, prior=None
) -> OutcomeMoments:
    """Exact induced-outcome moments of an affine profile.

    ``prior`` optionally overrides (mu_theta, var_theta) carried by the
    standardized structure.
    """
    if prof.n != std.n or prof.d != std.d:
        raise DimensionMismatch(
            f"profile ({prof.n}, {prof.d}) vs info ({std.n}, {std.d})"
        )
    mu, s2 = prior if prior is not None else (std.mu_theta, std.var_theta)
    var_x = np.einsum("id,id->i", prof.phi, prof.phi)
    cov_kernel = np.einsum(
        "ia,ijab,jb->ij", prof.phi, std.P_kernel, prof.phi, optimize=True
    )
    cov_xtheta = np.sqrt(s2) * np.einsum("id,id->i", prof.phi, std.P_theta)
    return OutcomeMoments(
        mean_x=prof.phi0.copy(),
        var_x=var_x,
        cov_kernel=cov_kernel,
        cov_xtheta=cov_xtheta,
        mu_theta=mu,
        var_theta=s2,
    )


def condition_on_state(mom: OutcomeMoments, theta_bar: float) -> ConditionalOutcome:
    """Gaussian conditional of actions given theta = theta_bar."""
    if not mom.var_theta > 0.0:
        raise ValueError("var_theta must be positive")
    slope = mom.cov_xtheta / mom.var_theta
    cond_mean = mom.mean_x + slope * (theta_bar - mom.mu_theta)
    cond_cov = mom.cov_kernel - np.outer(slope, mom.cov_xtheta)
    np.fill_diagonal(cond_cov, mom.var_x - slope * mom.cov_xtheta)
    return ConditionalOutcome(
        theta_bar=float(theta_bar), cond_mean=cond_mean, cond_cov=cond_cov
    )


def obedience_residuals(
    mom: OutcomeMoments, payoff: PayoffStructure, grid: AgentGrid
):
    """First- and second-moment obedience residuals of an outcome.

    res1(i) = E[X(i)] - sum_j w(i,j) E[X(j)]/n - b(i) mu_theta - c(i)
    res2(i) = Var(X(i)) - sum_j w(i,j) Cov(X(i),X(j))/n - b(i) Cov(X(i),theta)

    Both vanish at every equilibrium outcome.  The covariance sums use the
    kernel diagonal, mirroring the continuum integrals.
    """
    if mom.n != payoff.n or mom.n != grid.n:
        raise DimensionMismatch("moments, payoff, and grid sizes differ")
    n = grid.n
    res1 = mom.mean_x - payoff.w @ mom.mean_x / n - payoff.b * mom.mu_theta - payoff.c
    res2 = (
        mom.var_x
        - np.einsum("ij,ij->i", payoff.w, mom.cov_kernel) / n
        - payoff.b * mom.cov_xtheta
    )
    return res1, res2


def sample_conditional(
    mom: OutcomeMoments, theta_bar: float, draws: int, seed: int
) -> ConditionalOutcome:
    """Empirical conditional law of all actions given theta = theta_bar.

    Draws from the exact conditional Gaussian and returns the empirical
    mean and covariance as a ``ConditionalOutcome``; the finite-sample
    harness for the identification pipeline.
    """
    exact = condition_on_state(mom, theta_bar)
    vals, vecs = np.linalg.eigh(exact.cond_cov)
    root = vecs * np.sqrt(np.maximum(vals, 0.0))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((draws, mom.n))
    x = exact.cond_mean + z @ root.T
    emp_mean = x.mean(axis=0)
    centered = x - emp_mean
    emp_cov = centered.T @ centered / (draws - 1)
    return ConditionalOutcome(
        theta_bar=float(theta_bar), cond_mean=emp_mean, cond_cov=emp_cov
    )


def sample_outcome(
    mom: OutcomeMoments, subset, draws: int, seed: int
) -> np.ndarray:
    """Draw i.i.d. joint samples of (theta, X(subset)).

    Returns an array of shape (draws, 1 + len(subset)) with theta in the
    first column.  Sampling uses the eigendecomposition square root of the
    joint covariance with eigenvalues clamped at zero, and is bit-for-bit
    deterministic per (seed, subset, draws).
    """
    idx = np.asarray(list(subset), dtype=int)
    if len(idx) > 2000:
        raise ValueError("subset size is capped at 2000")
    k = len(idx)
    cov = np.empty((k + 1, k + 1))
    cov[0, 0] = mom.var_theta
    cov[0, 1:] = cov[1:, 0] = mom.cov_xtheta[idx]
    cov[1:, 1:] = mom.cov_matrix(idx)
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -1e-8 * max(1.0, vals.max()):
        raise NotPSD(f"joint outcome covariance has eigenvalue {vals.min():.3e}")
    root = vecs * np.sqrt(np.maximum(vals, 0.0))
    mean = np.concatenate(([mom.mu_theta], mom.mean_x[idx]))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((draws, k + 1))
    return mean + z @ root.T
