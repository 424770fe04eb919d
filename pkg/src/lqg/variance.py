"""State-variance reduction from signals vs. from actions, and the gap.

For a team N, signals reduce the state variance by
r(N) = K_theta' K^{-1} K_theta, while the team's (possibly
multi-dimensional) actions reduce it by the same quadratic form
restricted to the range of the standardized slope map.  The difference is
the sum of squared residuals of a generalized-least-squares fit of
K^{-1} K_theta on the slope columns, so it is nonnegative, and it
vanishes exactly when the slopes are proportional to the transformed
signal-state covariance.  For singleton teams the ratio of canonical to
actual reduction is the squared cosine between the slope and the
signal-state correlation vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    PD_TOL,
    AffineProfile,
    AgentGrid,
    CanonicalInfo,
    InformationStructure,
    PayoffStructure,
    canonical_to_info,
    signal_covariance,
    signal_state_covariance,
    standardize,
    sym_inv_sqrt,
    sym_sqrt,
)
from .equilibrium import build_operator, solve_equilibrium
from .errors import (
    DegenerateActions,
    DimensionMismatch,
    SingularTeamCovariance,
    ZeroVector,
)


@dataclass(frozen=True)
class ActionMap:
    """Per-agent slope matrices of a (possibly multi-dimensional) strategy.

    ``maps[i]`` is the d_s x d_x slope of agent i; column k gives the
    response of the k-th action coordinate to the standardized signal.
    A uni-dimensional strategy profile is the d_x = 1 special case.
    """

    maps: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=float)
        if maps.ndim != 3:
            raise DimensionMismatch("maps must have shape (n, d_s, d_x)")
        if not np.all(np.isfinite(maps)):
            raise ValueError("maps contain non-finite entries")
        maps = maps.copy()
        maps.setflags(write=False)
        object.__setattr__(self, "maps", maps)

    @classmethod
    def from_profile(cls, prof: AffineProfile) -> "ActionMap":
        return cls(maps=prof.phi[:, :, None])

    @property
    def n(self) -> int:
        return self.maps.shape[0]

    @property
    def d_s(self) -> int:
        return self.maps.shape[1]

    @property
    def d_x(self) -> int:
        return self.maps.shape[2]


@dataclass(frozen=True)
class GapReport:
    """Signal vs. action variance reduction for one team.

    ``gap`` is r_signal - r_action; ``gap_ssr`` recomputes it as the GLS
    sum of squared residuals (the two must agree).  ``proportional``
    flags solvability of the tightness condition, decided by the
    least-squares residual ``ls_residual``.
    """

    r_signal: float
    r_action: float
    gap: float
    gap_ssr: float
    proportional: bool
    ls_residual: float


def _team_solve(mat, rhs, *, error=SingularTeamCovariance, label="team"):
    vals = np.linalg.eigvalsh(mat)
    if np.abs(vals).min() < PD_TOL:
        raise error(
            f"{label} matrix has eigenvalue {np.abs(vals).min():.3e} below "
            f"{PD_TOL:.0e}"
        )
    return np.linalg.solve(mat, rhs)


def variance_reduction_signals(info: InformationStructure, team) -> float:
    """Reduction of the state variance from observing a team's signals."""
    K = signal_covariance(info, team)
    k_theta = signal_state_covariance(info, team)
    return float(k_theta @ _team_solve(K, k_theta, label="team signal"))


def _standardized_slopes(info: InformationStructure, amap: ActionMap, team):
    team = np.asarray(list(team), dtype=int)
    d_s, d_x = amap.d_s, amap.d_x
    if d_s != info.d:
        raise DimensionMismatch(f"action map rows {d_s} != signal dim {info.d}")
    tilde = np.zeros((len(team) * d_s, len(team) * d_x))
    for a, i in enumerate(team):
        tilde[a * d_s : (a + 1) * d_s, a * d_x : (a + 1) * d_x] = (
            sym_inv_sqrt(info.K_point[i]) @ amap.maps[i]
        )
    return tilde


def variance_reduction_actions(
    info: InformationStructure, amap: ActionMap, team
) -> float:
    """Reduction of the state variance from observing the team's actions.

    Equals the signals value whenever the slope matrices have full row
    rank (in particular for invertible square maps), and never exceeds it.
    """
    team = list(team)
    K = signal_covariance(info, team)
    k_theta = signal_state_covariance(info, team)
    tilde = _standardized_slopes(info, amap, team)
    M = tilde.T @ K @ tilde
    v = tilde.T @ k_theta
    return float(v @ _team_solve(M, v, error=DegenerateActions, label="action"))


def gap_report(
    info: InformationStructure,
    amap: ActionMap,
    team,
    ls_tol: float = 1e-8,
) -> GapReport:
    """Both variance reductions, the gap by two routes, and tightness.

    The direct route subtracts the two quadratic forms; the residual route
    evaluates u' K u at the GLS residual u of fitting K^{-1} K_theta on
    the standardized slopes.  Tightness is decided by the least-squares
    solvability of Phi(N) beta = V^{1/2} K^{-1} K_theta.
    """
    team = list(team)
    K = signal_covariance(info, team)
    k_theta = signal_state_covariance(info, team)
    y = _team_solve(K, k_theta, label="team signal")
    r_signal = float(k_theta @ y)

    tilde = _standardized_slopes(info, amap, team)
    M = tilde.T @ K @ tilde
    v = tilde.T @ k_theta
    beta = _team_solve(M, v, error=DegenerateActions, label="action")
    r_action = float(v @ beta)

    u = y - tilde @ beta
    gap_ssr = float(u @ K @ u)

    d_s, d_x = amap.d_s, amap.d_x
    phi_blocks = np.zeros((len(team) * d_s, len(team) * d_x))
    rhs = np.empty(len(team) * d_s)
    for a, i in enumerate(team):
        phi_blocks[a * d_s : (a + 1) * d_s, a * d_x : (a + 1) * d_x] = amap.maps[i]
        root = sym_sqrt(info.K_point[i])
        rhs[a * d_s : (a + 1) * d_s] = root @ y[a * d_s : (a + 1) * d_s]
    sol, *_ = np.linalg.lstsq(phi_blocks, rhs, rcond=None)
    ls_residual = float(np.linalg.norm(phi_blocks @ sol - rhs))
    proportional = ls_residual <= ls_tol * (1.0 + np.linalg.norm(rhs))

    return GapReport(
        r_signal=r_signal,
        r_action=r_action,
        gap=r_signal - r_action,
        gap_ssr=gap_ssr,
        proportional=bool(proportional),
        ls_residual=ls_residual,
    )


def cosine_ratio(std, prof: AffineProfile, i: int, var_theta: float = None):
    """Singleton reduction ratio and its squared-cosine expression.

    Returns ``(ratio_lhs, cos2)``: the ratio of the canonical
    representative's variance reduction at agent i to the actual one, and
    cos^2 of the angle between the slope phi(i) and the signal-state
    correlation vector P_theta(i).  The two agree identically.
    """
    s2 = std.var_theta if var_theta is None else float(var_theta)
    phi = prof.phi[i]
    p_theta = std.P_theta[i]
    nphi = np.linalg.norm(phi)
    nth = np.linalg.norm(p_theta)
    if nphi < PD_TOL or nth < PD_TOL:
        raise ZeroVector(f"agent {i}: slope or state correlation is zero")
    sigma = np.sqrt(s2)
    h_i = float(phi @ p_theta) / (sigma * nphi)

    canon_i = CanonicalInfo(
        h=np.array([h_i]),
        g=np.array([[1.0 - s2 * h_i**2]]),
        var_theta=s2,
    )
    info_i = canonical_to_info(canon_i, AgentGrid.uniform(1))
    r_star = variance_reduction_signals(info_i, [0])
    r_actual = s2 * nth**2
    cos2 = float(phi @ p_theta) ** 2 / (nphi**2 * nth**2)
    return r_star / r_actual, cos2


@dataclass(frozen=True)
class ZeroCaseResult:
    """One vanishing-hypothesis construction and its proportionality check."""

    case: str
    slope_i: np.ndarray
    scale: float
    residual: float
    gap: float
    passed: bool


def corollary_zero_cases(
    payoff: PayoffStructure,
    info: InformationStructure,
    grid: AgentGrid,
    i: int,
    tol: float = 1e-8,
):
    """Check slope-correlation proportionality under four vanishing cases.

    Each case builds a game in which one of b(.), w(i,.), P_theta(.), or
    P(i,.) vanishes off agent i, solves it, and verifies that the
    equilibrium slope at i is proportional to P_theta(i) (zero singleton
    gap).  Requires b(i) != 0 and P_theta(i) != 0.

    When only agent i's forcing survives (the b and P_theta cases), the
    deviating agent carries measure zero in the continuum: the a.e.
    forcing class is zero, the slope profile is zero off i, and agent i's
    slope is the Nystrom pointwise extension of that class.
    """
    if abs(payoff.b[i]) < PD_TOL:
        raise ValueError(f"corollary requires b({i}) != 0")
    std = standardize(info)
    sigma = np.sqrt(std.var_theta)
    p_theta_i = std.P_theta[i]
    if np.linalg.norm(p_theta_i) < PD_TOL:
        raise ZeroVector(f"agent {i}: P_theta is zero, proportionality is vacuous")

    results = []

    def check(case, slope_i, info_case):
        scale = float(slope_i @ p_theta_i) / float(slope_i @ slope_i)
        residual = float(
            np.linalg.norm(scale * slope_i - p_theta_i)
            / (1.0 + np.linalg.norm(p_theta_i))
        )
        K = info_case.K_point[i]
        k_theta = info_case.K_theta[i]
        r_sig = float(k_theta @ _team_solve(K, k_theta, label="singleton"))
        tilde = sym_inv_sqrt(K) @ slope_i
        r_act = float(tilde @ k_theta) ** 2 / float(tilde @ K @ tilde)
        results.append(
            ZeroCaseResult(
                case=case,
                slope_i=slope_i,
                scale=scale,
                residual=residual,
                gap=r_sig - r_act,
                passed=residual <= tol,
            )
        )

    # w(i,.) = 0: agent i faces no strategic term, so the i-th operator row
    # vanishes and the slope reads off the forcing directly.
    w_mod = payoff.w.copy()
    w_mod[i, :] = 0.0
    payoff_w = PayoffStructure(b=payoff.b, c=payoff.c, w=w_mod)
    prof = solve_equilibrium(build_operator(payoff_w, std, grid))
    check("interaction_row_zero", prof.phi[i], info)

    # P(i,.) = 0 off the diagonal: zero the i-th kernel row and column
    # (including the kernel diagonal, which is the a.e. extension).
    kern = info.K_kernel.copy()
    kern[i, :, :, :] = 0.0
    kern[:, i, :, :] = 0.0
    info_p = InformationStructure(
        d=info.d,
        mu_theta=info.mu_theta,
        var_theta=info.var_theta,
        m=info.m,
        K_point=info.K_point,
        K_kernel=kern,
        K_theta=info.K_theta,
    )
    prof = solve_equilibrium(build_operator(payoff, standardize(info_p), grid))
    check("kernel_row_zero", prof.phi[i], info_p)

    # b(.) = 0 off i, and P_theta(.) = 0 off i: the slope forcing lives on
    # the single agent i, whose a.e. class is zero.  Solve the zero-class
    # system and extend pointwise through the i-th operator row.
    op = build_operator(payoff, std, grid)
    n, d = op.n, op.d
    slope_class = np.linalg.solve(np.eye(n * d) - op.T1, np.zeros(n * d))
    row = op.T1[i * d : (i + 1) * d, :]
    slope_i = row @ slope_class + sigma * payoff.b[i] * p_theta_i
    check("state_slope_zero_off", slope_i, info)

    k_theta_mod = info.K_theta.copy()
    mask = np.ones(info.n, dtype=bool)
    mask[i] = False
    k_theta_mod[mask] = 0.0
    info_t = InformationStructure(
        d=info.d,
        mu_theta=info.mu_theta,
        var_theta=info.var_theta,
        m=info.m,
        K_point=info.K_point,
        K_kernel=info.K_kernel,
        K_theta=k_theta_mod,
    )
    std_t = standardize(info_t)
    op_t = build_operator(payoff, std_t, grid)
    slope_class = np.linalg.solve(np.eye(n * d) - op_t.T1, np.zeros(n * d))
    row = op_t.T1[i * d : (i + 1) * d, :]
    slope_i = row @ slope_class + sigma * payoff.b[i] * std_t.P_theta[i]
    check("state_correlation_zero_off", slope_i, info_t)

    return results
