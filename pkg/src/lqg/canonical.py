"""Construction of observationally equivalent canonical structures.

Given any equilibrium (phi0, phi) with nonzero slopes under an arbitrary
information structure, there is a canonical structure (h, g) and a
rescaled profile inducing exactly the same Gaussian outcome:

    h(i)   = phi(i)' P_theta(i) / (sigma_theta ||phi(i)||)
    g(i,j) = phi(i)' (P(i,j) - P_theta(i) P_theta(j)') phi(j)
             / (||phi(i)|| ||phi(j)||)
    phi0*  = phi0,   phi1*(i) = ||phi(i)||

The rescaled profile is again an equilibrium of the same payoff structure
paired with (h, g).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    PD_TOL,
    AffineProfile,
    AgentGrid,
    CanonicalInfo,
    PayoffStructure,
    StandardizedInfo,
    canonical_to_info,
    standardize,
)
from .equilibrium import build_operator, residual
from .errors import ZeroSlope
from .outcome import outcome_moments


def canonicalize(
    std: StandardizedInfo, prof: AffineProfile, var_theta: float = None
):
    """Map (information, equilibrium) to the canonical representative.

    Returns the pair (CanonicalInfo, AffineProfile).  The pointwise
    diagonal of g comes from the identity own block and satisfies the
    unit-variance normalization exactly; the kernel diagonal of g is
    computed from the kernel extension of P, preserving operator equality.

    Raises
    ------
    ZeroSlope
        If ||phi(i)|| falls below ``PD_TOL`` for some agent (the
        construction is undefined at agents with zero slope).
    """
    s2 = std.var_theta if var_theta is None else var_theta
    sigma = np.sqrt(s2)
    norms = np.sqrt(np.einsum("id,id->i", prof.phi, prof.phi))
    if norms.min() < PD_TOL:
        i = int(np.argmin(norms))
        raise ZeroSlope(f"||phi({i})|| = {norms[i]:.3e} is numerically zero")

    proj = np.einsum("id,id->i", prof.phi, std.P_theta)  # phi(i)' P_theta(i)
    h = proj / (sigma * norms)
    cross = np.einsum(
        "ia,ijab,jb->ij", prof.phi, std.P_kernel, prof.phi, optimize=True
    )
    g_from_kernel = (cross - np.outer(proj, proj)) / np.outer(norms, norms)
    g_kernel_diag = np.diag(g_from_kernel).copy()
    g = g_from_kernel.copy()
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 1.0 - s2 * h**2)

    canon = CanonicalInfo(h=h, g=g, var_theta=s2, g_kernel_diag=g_kernel_diag)
    canon_prof = AffineProfile(phi0=prof.phi0, phi=norms[:, None])
    return canon, canon_prof


@dataclass(frozen=True)
class EquivalenceReport:
    """Outcome-moment discrepancies between two (info, profile) pairs."""

    mean_discrepancy: float
    var_discrepancy: float
    cov_discrepancy: float
    xtheta_discrepancy: float
    tol: float

    @property
    def max_discrepancy(self) -> float:
        return max(
            self.mean_discrepancy,
            self.var_discrepancy,
            self.cov_discrepancy,
            self.xtheta_discrepancy,
        )

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tol


def verify_equivalence(
    std: StandardizedInfo,
    prof: AffineProfile,
    canon_std: StandardizedInfo,
    canon_prof: AffineProfile,
    prior=None,
    tol: float = 1e-10,
) -> EquivalenceReport:
    """Compare induced-outcome moments of two pairs on the same grid."""
    a = outcome_moments(std, prof, prior)
    b = outcome_moments(canon_std, canon_prof, prior)
    return EquivalenceReport(
        mean_discrepancy=float(np.abs(a.mean_x - b.mean_x).max()),
        var_discrepancy=float(np.abs(a.var_x - b.var_x).max()),
        cov_discrepancy=float(np.abs(a.cov_kernel - b.cov_kernel).max()),
        xtheta_discrepancy=float(np.abs(a.cov_xtheta - b.cov_xtheta).max()),
        tol=tol,
    )


def verify_canonical_equilibrium(
    payoff: PayoffStructure,
    canon: CanonicalInfo,
    canon_prof: AffineProfile,
    grid: AgentGrid,
    prior=(0.0, 1.0),
) -> float:
    """Sup-norm residual of the canonical profile in the canonical game.

    Builds the equilibrium operator for the payoff structure paired with
    the canonical information structure and evaluates the profile in it;
    the canonicalization of an equilibrium yields a residual at solver
    precision.
    """
    mu = prior[0]
    info = canonical_to_info(canon, grid, mu_theta=mu)
    op = build_operator(payoff, standardize(info), grid)
    return residual(op, canon_prof)
