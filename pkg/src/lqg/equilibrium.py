"""Discretized Fredholm operator of the equilibrium equation and solvers.

An affine profile (phi0, phi) is an equilibrium iff it solves the linear
system (I - T) phibar = f, where T applies the interaction kernel w
against the standardized signal correlations and f collects the direct
state/constant incentives.  Intercepts and slopes decouple into separate
blocks, so the operator is stored as two matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    SOLVER_TOL,
    SPEC_TOL,
    AffineProfile,
    AgentGrid,
    InformationStructure,
    PayoffStructure,
    StandardizedInfo,
    standardize,
)
from .errors import ConditionWarning, DimensionMismatch, SingularSystem


@dataclass(frozen=True)
class DiscreteOperator:
    """Blocks of the discretized equilibrium system.

    ``T0`` (n x n) acts on intercepts with entries w(i,j)/n; ``T1``
    (n*d x n*d) acts on stacked slopes with d x d sub-blocks
    w(i,j) P(i,j)/n, where P uses the kernel diagonal.  ``f0`` and ``f1``
    are the corresponding forcing terms mu_theta b + c and
    sigma_theta b(i) P_theta(i).
    """

    T0: np.ndarray
    T1: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    n: int
    d: int


@dataclass(frozen=True)
class WellPosedness:
    """Spectra of the operator blocks and their distance to 1."""

    spectrum0: np.ndarray
    spectrum1: np.ndarray
    dist_to_one: float
    well_posed: bool


def build_operator(
    payoff: PayoffStructure, std: StandardizedInfo, grid: AgentGrid
) -> DiscreteOperator:
    """Assemble the Nystrom discretization of the equilibrium operator."""
    n, d = std.n, std.d
    if payoff.n != n or grid.n != n:
        raise DimensionMismatch(
            f"inconsistent sizes: payoff {payoff.n}, info {n}, grid {grid.n}"
        )
    T0 = payoff.w / n
    T1 = (payoff.w[:, :, None, None] * std.P_kernel).transpose(0, 2, 1, 3)
    T1 = T1.reshape(n * d, n * d) / n
    f0 = std.mu_theta * payoff.b + payoff.c
    sigma = np.sqrt(std.var_theta)
    f1 = (sigma * payoff.b[:, None] * std.P_theta).reshape(n * d)
    return DiscreteOperator(T0=T0, T1=T1, f0=f0, f1=f1, n=n, d=d)


def spectral_check(op: DiscreteOperator, tol: float = SPEC_TOL) -> WellPosedness:
    """Eigenvalues of both blocks; well-posed iff no eigenvalue is near 1."""
    s0 = np.linalg.eigvals(op.T0)
    s1 = np.linalg.eigvals(op.T1)
    dist = float(min(np.abs(s0 - 1.0).min(), np.abs(s1 - 1.0).min()))
    return WellPosedness(
        spectrum0=s0, spectrum1=s1, dist_to_one=dist, well_posed=dist > tol
    )


def solve_equilibrium(
    op: DiscreteOperator, require_well_posed: bool = True
) -> AffineProfile:
    """Solve (I - T) phibar = f by dense LU, block by block.

    Raises ``SingularSystem`` when 1 is within ``SPEC_TOL`` of the spectrum
    (no solution or a continuum, by the Fredholm alternative).  Passing
    ``require_well_posed=False`` downgrades that to a ``ConditionWarning``
    and attempts the solve anyway.  The returned profile satisfies the
    system row-wise to ``SOLVER_TOL`` relative in the sup norm.
    """
    check = spectral_check(op)
    if not check.well_posed:
        msg = (
            f"operator spectrum within {check.dist_to_one:.3e} of 1; "
            "the game has no affine equilibrium or a continuum of them"
        )
        if require_well_posed:
            raise SingularSystem(msg)
        warnings.warn(msg, ConditionWarning)
    n, d = op.n, op.d
    try:
        phi0 = np.linalg.solve(np.eye(n) - op.T0, op.f0)
        phi = np.linalg.solve(np.eye(n * d) - op.T1, op.f1)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    res = residual(op, AffineProfile(phi0=phi0, phi=phi.reshape(n, d)))
    bound = SOLVER_TOL * (1.0 + max(np.abs(op.f0).max(), np.abs(op.f1).max()))
    if res > bound and require_well_posed:
        raise SingularSystem(f"solve residual {res:.3e} exceeds {bound:.3e}")
    return AffineProfile(phi0=phi0, phi=phi.reshape(n, d))


def residual(op: DiscreteOperator, prof: AffineProfile) -> float:
    """Sup-norm residual of a profile in the discretized system."""
    r0 = prof.phi0 - op.T0 @ prof.phi0 - op.f0
    vec = prof.phi.reshape(op.n * op.d)
    r1 = vec - op.T1 @ vec - op.f1
    return float(max(np.abs(r0).max(), np.abs(r1).max()))


def solve_fixed_point(
    op: DiscreteOperator,
    damping: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> AffineProfile:
    """Damped fixed-point iteration phibar <- (1-a) phibar + a (T phibar + f).

    Converges when the spectral radius of T is below 1; used as a
    cross-check of the direct solve, not as the primary path.
    """
    n, d = op.n, op.d
    phi0 = np.zeros(n)
    phi = np.zeros(n * d)
    for _ in range(max_iter):
        nxt0 = (1.0 - damping) * phi0 + damping * (op.T0 @ phi0 + op.f0)
        nxt1 = (1.0 - damping) * phi + damping * (op.T1 @ phi + op.f1)
        delta = max(np.abs(nxt0 - phi0).max(), np.abs(nxt1 - phi).max())
        phi0, phi = nxt0, nxt1
        if delta < tol:
            break
    else:
        raise SingularSystem(f"fixed point did not converge in {max_iter} steps")
    return AffineProfile(phi0=phi0, phi=phi.reshape(n, d))


def regularize_weights(payoff: PayoffStructure, eps: float) -> PayoffStructure:
    """Scale the interaction kernel by (1 - eps), leaving b and c alone.

    Shrinking the spectrum multiplicatively restores solvability of
    knife-edge games for any eps in (0, 1).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly between 0 and 1")
    return PayoffStructure(b=payoff.b, c=payoff.c, w=(1.0 - eps) * payoff.w)


@dataclass(frozen=True)
class PerturbationRow:
    delta: float
    change: float
    ratio: float
    singular: bool


def perturbation_study(
    payoff: PayoffStructure,
    info: InformationStructure,
    grid: AgentGrid,
    deltas,
    seed: int = 0,
):
    """Continuity of the equilibrium in the interaction kernel.

    Perturbs w by a fixed seeded random direction of unit L2 kernel norm
    scaled to ``delta`` and reports ||phibar(delta) - phibar|| / delta in
    the L2 profile norm.  Bounded ratios as delta -> 0 reflect the
    Lipschitz bound through the inverse operator.  A perturbation that
    lands on a knife edge is reported with ``singular=True``, not raised.
    """
    std = standardize(info)
    base_op = build_operator(payoff, std, grid)
    base = solve_equilibrium(base_op)
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(payoff.w.shape)
    direction /= np.sqrt(np.mean(direction**2))

    rows = []
    for delta in deltas:
        if delta == 0.0:
            rows.append(PerturbationRow(0.0, 0.0, 0.0, False))
            continue
        perturbed = PayoffStructure(
            b=payoff.b, c=payoff.c, w=payoff.w + delta * direction
        )
        try:
            prof = solve_equilibrium(build_operator(perturbed, std, grid))
        except SingularSystem:
            rows.append(PerturbationRow(float(delta), np.nan, np.nan, True))
            continue
        diff2 = np.mean((prof.phi0 - base.phi0) ** 2) + np.mean(
            np.sum((prof.phi - base.phi) ** 2, axis=1)
        )
        change = float(np.sqrt(diff2))
        rows.append(PerturbationRow(float(delta), change, change / delta, False))
    return rows
