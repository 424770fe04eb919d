"""Recovery of canonical structures from two conditional action laws.

With signals S(i) = h(i) theta + eps(i) and actions
X(i) = phi0(i) + phi1(i) S(i), two conditional action distributions at
distinct state values theta1 != theta2 pin down, in order:

* the intercept phi0 (from the two conditional means),
* the cross kernel phi1(i) phi1(j) g(i,j) (the conditional covariance),
* the cross products phi1 phi1 h h (second moments across the two states),
* phi1(i)^2 via the unit-variance normalization of canonical signals,
* and finally |h|, |g| by division and square roots.

Signs of h, g, phi1 are not identified: flipping (h(i), phi1(i)) jointly
leaves every observable moment unchanged.  Cross terms and phi0 are
point-identified.  Higher-order uncertainty along team paths is a
function of the cross terms alone, so it is point-identified too.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import (
    PD_TOL,
    CanonicalInfo,
    InformationStructure,
    signal_covariance,
    signal_state_covariance,
)
from .errors import (
    DegenerateStates,
    InconsistentInput,
    SingularTeamCovariance,
    ZeroExposure,
    ZeroVariance,
)
from .outcome import ConditionalOutcome


@dataclass(frozen=True)
class IdentifiedCanonical:
    """Point- and magnitude-identified parameters of a canonical structure.

    ``phi0`` and the cross terms ``cross_phih`` (phi1(i) h(i)) and
    ``cross_phig`` (phi1(i) phi1(j) g(i,j), pointwise diagonal) carry
    signs; ``abs_phi1``, ``abs_h``, and ``abs_g`` are magnitudes only.
    The ``abs_g`` diagonal is the signed noise variance g(i,i) >= 0.
    """

    phi0: np.ndarray
    abs_phi1: np.ndarray
    abs_h: np.ndarray
    abs_g: np.ndarray
    cross_phih: np.ndarray
    cross_phig: np.ndarray
    mu_theta: float
    var_theta: float

    @property
    def n(self) -> int:
        return self.phi0.shape[0]


def identify(
    cond1: ConditionalOutcome, cond2: ConditionalOutcome, prior
) -> IdentifiedCanonical:
    """Invert two exact (or empirical) conditional action laws.

    ``prior`` is the known state prior (mu_theta, var_theta).  The output
    does not depend on which two conditioning values were used.

    Raises
    ------
    DegenerateStates
        If the two conditioning values coincide numerically.
    ZeroVariance
        If some recovered action variance falls below ``PD_TOL``.
    InconsistentInput
        If the moments are incompatible with every canonical structure
        (negative phi1^2 or noise variance); never arises for exact
        moments generated by a canonical game.
    """
    mu, s2 = float(prior[0]), float(prior[1])
    tb1, tb2 = cond1.theta_bar, cond2.theta_bar
    dtheta = tb2 - tb1
    if abs(dtheta) < 1e-12:
        raise DegenerateStates(
            f"conditioning states {tb1} and {tb2} are numerically equal"
        )
    m1, m2 = cond1.cond_mean, cond2.cond_mean

    # Intercept: direct read-off when a conditioning state hits the prior
    # mean, else the two-state combination (avoids division blow-up).
    if abs(tb1 - mu) < 1e-10:
        phi0 = m1.copy()
    elif abs(tb2 - mu) < 1e-10:
        phi0 = m2.copy()
    else:
        weight = 1.0 / (tb1 - mu) - 1.0 / (tb2 - mu)
        phi0 = (m1 / (tb1 - mu) - m2 / (tb2 - mu)) / weight

    # Covariance conditional on the state: phi1(i) phi1(j) g(i,j).
    cross_phig = 0.5 * (cond1.cond_cov + cond1.cond_cov.T)

    # Cross products phi1 phi1 h h from the second moment of
    # theta1-demeaned actions evaluated under theta2.
    shift = m2 - m1
    itr = 0.5 * (cond2.cond_cov + cond2.cond_cov.T) + np.outer(shift, shift)
    hh_cross = (itr - cross_phig) / dtheta**2
    cross_phih = shift / dtheta

    # Unit variance of canonical signals turns the own second moment into
    # an equation for phi1^2.
    phi1_sq = np.diag(itr) + (s2 - dtheta**2) * np.diag(hh_cross)
    if phi1_sq.min() <= 0.0:
        i = int(np.argmin(phi1_sq))
        raise InconsistentInput(
            f"agent {i}: recovered phi1^2 = {phi1_sq[i]:.3e} <= 0",
            step="id_last",
        )
    if phi1_sq.min() < PD_TOL:
        i = int(np.argmin(phi1_sq))
        raise ZeroVariance(
            f"agent {i}: action variance {phi1_sq[i]:.3e} below {PD_TOL:.0e}"
        )
    abs_phi1 = np.sqrt(phi1_sq)

    g_diag = np.diag(cross_phig) / phi1_sq
    if g_diag.min() < -1e-8:
        i = int(np.argmin(g_diag))
        raise InconsistentInput(
            f"agent {i}: recovered noise variance g(i,i) = {g_diag[i]:.3e} < 0",
            step="cov_id",
        )
    g_diag = np.maximum(g_diag, 0.0)
    h_sq = (1.0 - g_diag) / s2
    if h_sq.min() < -1e-8:
        i = int(np.argmin(h_sq))
        raise InconsistentInput(
            f"agent {i}: recovered h(i)^2 = {h_sq[i]:.3e} < 0",
            step="itr_cov_id",
        )
    abs_h = np.sqrt(np.maximum(h_sq, 0.0))

    abs_g = np.abs(cross_phig) / np.outer(abs_phi1, abs_phi1)
    np.fill_diagonal(abs_g, g_diag)

    return IdentifiedCanonical(
        phi0=phi0,
        abs_phi1=abs_phi1,
        abs_h=abs_h,
        abs_g=abs_g,
        cross_phih=cross_phih,
        cross_phig=cross_phig,
        mu_theta=mu,
        var_theta=s2,
    )


def resolve_signs_positive(idc: IdentifiedCanonical):
    """Point-identify (h, g, phi1) under the positivity hypothesis h >= 0.

    Returns the tuple (h, g, phi1).  Where h(i) = 0 the sign of phi1(i)
    is unrecoverable, hence the precondition |h| > 0 everywhere.
    """
    if idc.abs_h.min() < 1e-10:
        i = int(np.argmin(idc.abs_h))
        raise ZeroExposure(f"agent {i}: |h| = {idc.abs_h[i]:.3e} is zero")
    h = idc.abs_h.copy()
    phi1 = idc.cross_phih / h
    g = idc.cross_phig / np.outer(phi1, phi1)
    return h, g, phi1


def _cross_terms(source: Union[IdentifiedCanonical, CanonicalInfo]):
    # Ground-truth canonical structures enter with phi1 = 1, so the cross
    # terms reduce to (h, g) themselves; this is the testing path that
    # separates formula bugs from identification bugs.
    if isinstance(source, IdentifiedCanonical):
        return source.cross_phih, source.cross_phig, source.var_theta
    if isinstance(source, CanonicalInfo):
        return source.h, source.g, source.var_theta
    raise TypeError(f"unsupported source type {type(source).__name__}")


def _team_matrix(cphih, cphig, s2, rows, cols):
    # D-conjugated signal covariance between two teams; same-agent entries
    # use the pointwise diagonal of the cross kernel.
    return s2 * np.outer(cphih[rows], cphih[cols]) + cphig[np.ix_(rows, cols)]


def _solve_team(mat, rhs, label):
    vals = np.linalg.eigvalsh(mat)
    if np.abs(vals).min() < PD_TOL:
        raise SingularTeamCovariance(
            f"{label}: covariance eigenvalue {np.abs(vals).min():.3e} below "
            f"{PD_TOL:.0e}"
        )
    return np.linalg.solve(mat, rhs)


def higher_order_uncertainty(
    source: Union[IdentifiedCanonical, CanonicalInfo],
    prior,
    teams: Sequence[Sequence[int]],
) -> float:
    """Residual variance of a nested conditional-expectation chain.

    For teams N1, ..., Np this is the variance, conditional on N1's
    signals, of N2's estimate of N3's estimate ... of Np's estimate of the
    state; p = 1 gives the plain residual state variance given N1.  The
    whole expression is a function of the identified cross terms alone, so
    no sign resolution is needed.  ``source`` may be an identification
    result or a ground-truth canonical structure.
    """
    s2 = float(prior[1])
    cphih, cphig, _ = _cross_terms(source)
    teams = [np.asarray(list(t), dtype=int) for t in teams]
    if len(teams) == 0 or any(len(t) == 0 for t in teams):
        raise ValueError("need at least one nonempty team")

    def A(p, q):
        return _team_matrix(cphih, cphig, s2, teams[p], teams[q])

    def b(p):
        return s2 * cphih[teams[p]]

    if len(teams) == 1:
        rhs = _solve_team(A(0, 0), b(0), "team 1")
        return float(s2 - b(0) @ rhs)

    # c vectors composed right to left: c_{q} = A_{q,q+1} A_{q+1}^{-1} c_{q+1}
    p = len(teams)
    c = b(p - 1)
    cs = {p - 1: c}
    for q in range(p - 2, -1, -1):
        c = A(q, q + 1) @ _solve_team(A(q + 1, q + 1), c, f"team {q + 2}")
        cs[q] = c
    quad2 = cs[1] @ _solve_team(A(1, 1), cs[1], "team 2")
    quad1 = cs[0] @ _solve_team(A(0, 0), cs[0], "team 1")
    return float(quad2 - quad1)


def nested_projection_oracle(
    info: InformationStructure, teams: Sequence[Sequence[int]], prior
) -> float:
    """Same quantity as :func:`higher_order_uncertainty`, from raw covariances.

    Composes the conditional-expectation coefficient matrices right to
    left directly on the (possibly multi-dimensional) signal covariances
    of ``info`` and applies the conditional-variance formula at the end.
    Serves as an independent check of the identified formula.
    """
    s2 = float(prior[1])
    teams = [np.asarray(list(t), dtype=int) for t in teams]
    if len(teams) == 0 or any(len(t) == 0 for t in teams):
        raise ValueError("need at least one nonempty team")

    if len(teams) == 1:
        A1 = signal_covariance(info, teams[0])
        b1 = signal_state_covariance(info, teams[0])
        return float(s2 - b1 @ _solve_team(A1, b1, "team 1"))

    p = len(teams)
    c = signal_state_covariance(info, teams[p - 1])
    for q in range(p - 2, 0, -1):
        Aq1 = signal_covariance(info, teams[q + 1])
        c = signal_covariance(info, teams[q], teams[q + 1]) @ _solve_team(
            Aq1, c, f"team {q + 2}"
        )
    A2 = signal_covariance(info, teams[1])
    u = _solve_team(A2, c, "team 2")
    cond_var = A2 - signal_covariance(info, teams[1], teams[0]) @ _solve_team(
        signal_covariance(info, teams[0]),
        signal_covariance(info, teams[0], teams[1]),
        "team 1",
    )
    return float(u @ cond_var @ u)
