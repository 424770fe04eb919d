"""Random well-posed game instances for batteries and stress tests.

Information structures come from low-rank factor models (state loading +
common factors + idiosyncratic noise), which are positive semidefinite by
construction and have smooth kernels; interaction kernels are smooth
low-rank functions rescaled so the L2 kernel norm stays below 1, which
bounds the operator spectrum away from 1 and guarantees well-posedness.
"""

from __future__ import annotations

import numpy as np

from .core import (
    AffineProfile,
    AgentGrid,
    CanonicalInfo,
    InformationStructure,
    PayoffStructure,
    canonical_to_info,
    standardize,
)
from .equilibrium import build_operator, solve_equilibrium
from .variance import ActionMap


def smooth_functions(rng, points, count, scale=1.0):
    """Random smooth functions of the grid coordinate, shape (count, n)."""
    t = np.asarray(points)
    basis = np.stack(
        [
            np.ones_like(t),
            t,
            np.sin(2.0 * np.pi * t),
            np.cos(2.0 * np.pi * t),
            np.sin(4.0 * np.pi * t),
            t**2,
        ]
    )
    coef = rng.standard_normal((count, basis.shape[0]))
    coef /= np.sqrt(basis.shape[0])
    return scale * coef @ basis


def random_payoff(rng, grid: AgentGrid, w_norm=0.6, b_min=0.3) -> PayoffStructure:
    """Smooth payoff with |b| >= b_min and L2 kernel norm of w equal w_norm.

    The norm cap keeps every operator eigenvalue inside a disc of radius
    ``w_norm`` < 1, so the resulting games are well-posed by construction.
    """
    n = grid.n
    b_raw, c = smooth_functions(rng, grid.points, 2)
    signs = np.where(b_raw >= 0.0, 1.0, -1.0)
    b = signs * (b_min + np.abs(b_raw))
    u = smooth_functions(rng, grid.points, 3)
    v = smooth_functions(rng, grid.points, 3)
    w = u.T @ v
    rms = np.sqrt(np.mean(w**2))
    if rms > 0.0:
        w = w * (w_norm / rms)
    return PayoffStructure(b=b, c=c, w=w)


def random_info(
    rng,
    grid: AgentGrid,
    d: int,
    n_factors: int = 2,
    mu_theta: float = None,
    var_theta: float = None,
) -> InformationStructure:
    """Factor-model information structure with d-dimensional signals.

    Signals are S(i) = m(i) + a(i)(theta - mu) + B(i) z + noise with
    smooth loadings, independent common factors z, and idiosyncratic
    noise bounded away from zero; every finite joint covariance is PSD by
    construction and the kernel diagonal is the smooth extension
    a a' var_theta + B B'.
    """
    n = grid.n
    mu = float(rng.normal(0.0, 1.0)) if mu_theta is None else mu_theta
    s2 = float(rng.uniform(0.5, 2.0)) if var_theta is None else var_theta

    a = smooth_functions(rng, grid.points, d, scale=0.5).T  # (n, d)
    B = smooth_functions(rng, grid.points, d * n_factors, scale=0.6).T.reshape(
        n, d, n_factors
    )
    noise = 0.2 + rng.uniform(0.0, 1.0, size=(n, d))
    m = smooth_functions(rng, grid.points, d).T

    common = s2 * a[:, None, :, None] * a[None, :, None, :] + np.einsum(
        "iak,jbk->ijab", B, B
    )
    K_point = common[np.arange(n), np.arange(n)] + np.stack(
        [np.diag(noise[i]) for i in range(n)]
    )
    return InformationStructure(
        d=d,
        mu_theta=mu,
        var_theta=s2,
        m=m,
        K_point=K_point,
        K_kernel=common,
        K_theta=s2 * a,
    )


def random_game(rng, grid: AgentGrid, d: int, **info_kwargs):
    """A well-posed payoff/information pair on the given grid."""
    payoff = random_payoff(rng, grid)
    info = random_info(rng, grid, d, **info_kwargs)
    return payoff, info


def random_canonical(
    rng,
    grid: AgentGrid,
    n_factors: int = 2,
    var_theta: float = 1.0,
    h_min: float = 0.3,
    h_max: float = 0.85,
    signed: bool = False,
    correlated_noise: bool = True,
) -> CanonicalInfo:
    """Canonical structure with smooth exposure and factor noise.

    Noise splits into correlated factors u(i)'z and an idiosyncratic
    remainder sized to hit the unit-variance normalization exactly, so the
    kernel diagonal is ||u(i)||^2 while the pointwise diagonal is
    1 - h^2 var_theta.
    """
    n = grid.n
    # keep h^2 var_theta strictly under 1 so the noise budget stays positive
    cap = np.sqrt(0.9 / var_theta)
    h_max = min(h_max, cap)
    h_min = min(h_min, 0.5 * h_max)
    raw = smooth_functions(rng, grid.points, 1)[0]
    spread = raw - raw.min()
    if spread.max() > 0.0:
        spread = spread / spread.max()
    h = h_min + (h_max - h_min) * spread
    if signed:
        flip = rng.random(n) < 0.5
        h = np.where(flip, -h, h)

    budget = 1.0 - h**2 * var_theta  # noise variance per agent
    if correlated_noise:
        u = smooth_functions(rng, grid.points, n_factors, scale=1.0).T
        cap = 0.8 * budget
        norms = np.einsum("ik,ik->i", u, u)
        scale = np.sqrt(cap / np.maximum(norms, 1e-12))
        u = u * np.minimum(scale, 1.0)[:, None]
    else:
        u = np.zeros((n, n_factors))
    g = u @ u.T
    g_kernel_diag = np.einsum("ik,ik->i", u, u)
    np.fill_diagonal(g, budget)
    return CanonicalInfo(
        h=h, g=g, var_theta=var_theta, g_kernel_diag=g_kernel_diag
    )


def random_canonical_game(
    rng,
    grid: AgentGrid,
    mu_theta: float = 0.0,
    var_theta: float = 1.0,
    min_slope: float = 1e-3,
    max_tries: int = 20,
    **canon_kwargs,
):
    """Canonical game whose equilibrium slope is nonzero at every agent.

    Redraws (deterministically, from the supplied generator) until the
    solved slope clears ``min_slope``, which the identification pipeline
    needs.  Returns (payoff, canon, info, profile).
    """
    for _ in range(max_tries):
        payoff = random_payoff(rng, grid)
        canon = random_canonical(rng, grid, var_theta=var_theta, **canon_kwargs)
        info = canonical_to_info(canon, grid, mu_theta=mu_theta)
        prof = solve_equilibrium(build_operator(payoff, standardize(info), grid))
        if np.abs(prof.phi).min() >= min_slope:
            return payoff, canon, info, prof
    raise RuntimeError(f"no instance with slopes above {min_slope} in {max_tries} draws")


def random_action_map(rng, n: int, d_s: int, d_x: int) -> ActionMap:
    """Dense random slope matrices, generically full rank."""
    return ActionMap(maps=rng.standard_normal((n, d_s, d_x)))


def flip_signs(canon: CanonicalInfo, prof: AffineProfile, agents) -> tuple:
    """Jointly flip (h(i), phi1(i)) on a subset of agents.

    The flipped generator is again a valid canonical game inducing the
    same conditional action laws up to the signs of cross covariances;
    identification output magnitudes are invariant under this map.
    """
    idx = np.asarray(list(agents), dtype=int)
    h = canon.h.copy()
    h[idx] = -h[idx]
    phi = prof.phi.copy()
    phi[idx] = -phi[idx]
    flipped = CanonicalInfo(
        h=h,
        g=canon.g,
        var_theta=canon.var_theta,
        g_kernel_diag=canon.g_kernel_diag,
    )
    return flipped, AffineProfile(phi0=prof.phi0, phi=phi)
