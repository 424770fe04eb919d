"""Domain types, constructors, and validators for discretized LQG games.

The agent continuum [0,1] is discretized on a uniform midpoint grid with
points (k - 1/2)/n and quadrature weight 1/n.  Covariance kernels carry
*two* diagonals throughout the package:

* the **pointwise** diagonal (``K_point``, ``CanonicalInfo.g`` diagonal)
  is the actual own-covariance of an agent's signal, used for
  standardization, conditioning, and joint-PSD checks of finite subsets;
* the **kernel** diagonal (diagonal of ``K_kernel``,
  ``CanonicalInfo.g_kernel_diag``) is the almost-everywhere extension of
  the off-diagonal kernel, used inside integral (quadrature) operators,
  where a single agent has measure zero.

Purely idiosyncratic noise therefore contributes its variance to the
pointwise diagonal but zero to the kernel diagonal; this makes Nystrom
solves match continuum closed forms to solver precision instead of O(1/n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NormalizationInfeasible,
    NotPSD,
    SingularOwnCovariance,
)

#: Tolerance for minimum eigenvalues in PSD validation.
PSD_TOL = 1e-8
#: Threshold below which a symmetric matrix counts as singular.
PD_TOL = 1e-10
#: Relative residual tolerance for linear equilibrium solves.
SOLVER_TOL = 1e-10
#: Distance of an eigenvalue to 1 below which the operator is knife-edge.
SPEC_TOL = 1e-8


def _asarray(a, shape=None, name="array"):
    out = np.asarray(a, dtype=float)
    if shape is not None and out.shape != shape:
        raise DimensionMismatch(f"{name}: expected shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def _frozen(a):
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def sym_sqrt(mat, floor=0.0):
    """Symmetric square root via eigendecomposition, eigenvalues floored."""
    vals, vecs = np.linalg.eigh(mat)
    vals = np.maximum(vals, floor)
    return (vecs * np.sqrt(vals)) @ vecs.T


def sym_inv_sqrt(mat, tol=PD_TOL):
    """Inverse symmetric square root; raises if an eigenvalue is below tol."""
    vals, vecs = np.linalg.eigh(mat)
    if vals.min() < tol:
        raise SingularOwnCovariance(
            f"own covariance has eigenvalue {vals.min():.3e} < {tol:.0e}"
        )
    return (vecs / np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True)
class AgentGrid:
    """Uniform midpoint discretization of the agent continuum [0,1].

    Attributes
    ----------
    n : int
        Number of grid agents.
    points : ndarray, shape (n,)
        Grid points, strictly increasing, all in (0,1).
    weight : float
        Quadrature weight per point; always exactly ``1.0 / n``.
    """

    n: int
    points: np.ndarray
    weight: float

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("grid size must be positive")
        pts = _asarray(self.points, (self.n,), "points")
        if np.any(pts <= 0.0) or np.any(pts >= 1.0):
            raise ValueError("grid points must lie in the open interval (0,1)")
        if np.any(np.diff(pts) <= 0.0):
            raise ValueError("grid points must be strictly increasing")
        if self.weight != 1.0 / self.n:
            raise ValueError("quadrature weight must equal 1/n exactly")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def uniform(cls, n: int) -> "AgentGrid":
        """Midpoint rule: points (k - 1/2)/n for k = 1..n, weight 1/n."""
        pts = (np.arange(n) + 0.5) / n
        return cls(n=n, points=pts, weight=1.0 / n)


@dataclass(frozen=True)
class PayoffStructure:
    """Payoff primitives (b, c, w) on the grid.

    ``b`` is the state responsiveness, ``c`` the constant term, and ``w``
    the interaction kernel: w[i, j] weighs agent j's action in agent i's
    local aggregate.  ``w`` need not be symmetric.
    """

    b: np.ndarray
    c: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        b = _asarray(self.b, None, "b")
        n = b.shape[0]
        c = _asarray(self.c, (n,), "c")
        w = _asarray(self.w, (n, n), "w")
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "w", _frozen(w))

    @property
    def n(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class InformationStructure:
    """Gaussian law of the state and all grid signals.

    Attributes
    ----------
    d : int
        Signal dimension (same for every agent).
    mu_theta, var_theta : float
        State prior mean and variance (var_theta > 0).
    m : ndarray, shape (n, d)
        Signal means.
    K_point : ndarray, shape (n, d, d)
        Pointwise own covariance Cov(S(i), S(i)); symmetric positive
        definite agent by agent.
    K_kernel : ndarray, shape (n, n, d, d)
        Cross-covariance kernel Cov(S(i), S(j)) for i != j; the diagonal
        slots hold the a.e. kernel extension used inside quadrature sums,
        not the pointwise own covariance (see module docstring).
    K_theta : ndarray, shape (n, d)
        Signal-state covariance Cov(S(i), theta).
    """

    d: int
    mu_theta: float
    var_theta: float
    m: np.ndarray
    K_point: np.ndarray
    K_kernel: np.ndarray
    K_theta: np.ndarray

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("signal dimension must be positive")
        if not self.var_theta > 0.0:
            raise ValueError("var_theta must be positive")
        m = _asarray(self.m, None, "m")
        if m.ndim != 2 or m.shape[1] != self.d:
            raise DimensionMismatch(f"m must have shape (n, {self.d})")
        n = m.shape[0]
        K_point = _asarray(self.K_point, (n, self.d, self.d), "K_point")
        K_kernel = _asarray(self.K_kernel, (n, n, self.d, self.d), "K_kernel")
        K_theta = _asarray(self.K_theta, (n, self.d), "K_theta")

        scale = 1.0 + np.abs(K_point).max()
        if np.abs(K_point - K_point.transpose(0, 2, 1)).max() > 1e-10 * scale:
            raise ValueError("K_point blocks must be symmetric")
        kscale = 1.0 + np.abs(K_kernel).max()
        if np.abs(K_kernel - K_kernel.transpose(1, 0, 3, 2)).max() > 1e-10 * kscale:
            raise ValueError("K_kernel must satisfy K(i,j) = K(j,i)^T")

        # Schur bound: var(theta | S(i)) must be nonnegative up to tolerance.
        for i in range(n):
            quad = K_theta[i] @ _solve_psd(K_point[i], K_theta[i])
            if self.var_theta - quad < -PSD_TOL:
                raise NotPSD(
                    f"agent {i}: sigma_theta^2 - K_theta' K^-1 K_theta = "
                    f"{self.var_theta - quad:.3e} < -{PSD_TOL:.0e}"
                )

        object.__setattr__(self, "m", _frozen(m))
        object.__setattr__(self, "K_point", _frozen(K_point))
        object.__setattr__(self, "K_kernel", _frozen(K_kernel))
        object.__setattr__(self, "K_theta", _frozen(K_theta))

    @property
    def n(self) -> int:
        return self.m.shape[0]


def _solve_psd(mat, rhs):
    # eigen-based solve with clamping; only used for tolerance checks
    vals, vecs = np.linalg.eigh(mat)
    vals = np.maximum(vals, PD_TOL)
    return vecs @ ((vecs.T @ rhs) / vals)


@dataclass(frozen=True)
class StandardizedInfo:
    """Correlation-like standardization of an information structure.

    ``P_kernel[i, j]`` is K(i,i)^{-1/2} K(i,j) K(j,j)^{-1/2}; its diagonal
    slots standardize the kernel diagonal of ``K_kernel``.  The pointwise
    standardized own block is the identity by construction and is not
    stored.  ``P_theta[i]`` is K(i,i)^{-1/2} K_theta(i) / sigma_theta and
    satisfies ||P_theta(i)|| <= 1 up to tolerance.
    """

    P_kernel: np.ndarray
    P_theta: np.ndarray
    root_inv: np.ndarray
    mu_theta: float
    var_theta: float

    def __post_init__(self):
        P_theta = _asarray(self.P_theta, None, "P_theta")
        if P_theta.ndim != 2:
            raise DimensionMismatch("P_theta must have shape (n, d)")
        n, d = P_theta.shape
        P_kernel = _asarray(self.P_kernel, (n, n, d, d), "P_kernel")
        root_inv = _asarray(self.root_inv, (n, d, d), "root_inv")
        if not self.var_theta > 0.0:
            raise ValueError("var_theta must be positive")

        norms = np.einsum("id,id->i", P_theta, P_theta)
        if norms.max() > 1.0 + PSD_TOL:
            raise NotPSD(f"||P_theta||^2 = {norms.max():.12f} exceeds 1")
        svals = np.linalg.svd(P_kernel, compute_uv=False)
        if svals.max() > 1.0 + PSD_TOL:
            raise NotPSD(
                f"operator norm of a P block is {svals.max():.12f} > 1"
            )

        object.__setattr__(self, "P_kernel", _frozen(P_kernel))
        object.__setattr__(self, "P_theta", _frozen(P_theta))
        object.__setattr__(self, "root_inv", _frozen(root_inv))

    @property
    def n(self) -> int:
        return self.P_theta.shape[0]

    @property
    def d(self) -> int:
        return self.P_theta.shape[1]


@dataclass(frozen=True)
class CanonicalInfo:
    """Uni-dimensional unit-variance signals S(i) = h(i) theta + eps(i).

    ``h`` is the exposure function, ``g`` the idiosyncratic noise kernel
    with its *pointwise* diagonal (forced to 1 - h^2 var_theta by the
    unit-variance normalization), and ``g_kernel_diag`` the a.e. kernel
    extension of g on the diagonal (zero when the noise is purely
    idiosyncratic).
    """

    h: np.ndarray
    g: np.ndarray
    var_theta: float
    g_kernel_diag: np.ndarray = None

    def __post_init__(self):
        h = _asarray(self.h, None, "h")
        n = h.shape[0]
        g = _asarray(self.g, (n, n), "g")
        if not self.var_theta > 0.0:
            raise ValueError("var_theta must be positive")
        if np.abs(g - g.T).max() > 1e-10 * (1.0 + np.abs(g).max()):
            raise ValueError("g must be symmetric")
        unit = h**2 * self.var_theta + np.diag(g)
        if np.abs(unit - 1.0).max() > 1e-10:
            raise ValueError(
                "unit-variance normalization h^2 var_theta + g(i,i) = 1 "
                f"violated by {np.abs(unit - 1.0).max():.3e}"
            )
        gk = self.g_kernel_diag
        gk = np.zeros(n) if gk is None else _asarray(gk, (n,), "g_kernel_diag")
        object.__setattr__(self, "h", _frozen(h))
        object.__setattr__(self, "g", _frozen(g))
        object.__setattr__(self, "g_kernel_diag", _frozen(gk))

    @property
    def n(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class AffineProfile:
    """Intercepts phi0(i) and slope vectors phi(i) of an affine profile."""

    phi0: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        phi0 = _asarray(self.phi0, None, "phi0")
        n = phi0.shape[0]
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim == 1:
            phi = phi[:, None]
        phi = _asarray(phi, (n, phi.shape[1]), "phi")
        object.__setattr__(self, "phi0", _frozen(phi0))
        object.__setattr__(self, "phi", _frozen(phi))

    @property
    def n(self) -> int:
        return self.phi0.shape[0]

    @property
    def d(self) -> int:
        return self.phi.shape[1]


def make_canonical_info(
    h,
    g_offdiag,
    var_theta: float,
    g_kernel_diag=None,
    psd_subsets: int = 64,
    seed: int = 0,
) -> CanonicalInfo:
    """Build a canonical information structure from exposure and noise kernel.

    The pointwise noise variance g(i,i) is forced to 1 - h(i)^2 var_theta
    by the unit-variance normalization.  ``g_offdiag`` must be symmetric
    with a zero diagonal.  The optional ``g_kernel_diag`` supplies the a.e.
    kernel extension of g on the diagonal (defaults to zero, i.e. purely
    idiosyncratic noise).

    Raises
    ------
    NormalizationInfeasible
        If h(i)^2 var_theta > 1 for some agent.
    NotPSD
        If the joint state/signal covariance fails the sampled PSD check.
    """
    h = _asarray(h, None, "h")
    n = h.shape[0]
    g_offdiag = _asarray(g_offdiag, (n, n), "g_offdiag")
    if np.abs(np.diag(g_offdiag)).max() > 0.0:
        raise ValueError("g_offdiag must have an exactly zero diagonal")
    if not var_theta > 0.0:
        raise ValueError("var_theta must be positive")
    excess = h**2 * var_theta - 1.0
    if excess.max() > 0.0:
        i = int(np.argmax(excess))
        raise NormalizationInfeasible(
            f"h({i})^2 var_theta = {h[i]**2 * var_theta:.6f} > 1"
        )
    g = g_offdiag + np.diag(1.0 - h**2 * var_theta)
    canon = CanonicalInfo(h=h, g=g, var_theta=var_theta, g_kernel_diag=g_kernel_diag)

    # sampled PSD check of the joint (theta, signals) covariance
    rng = np.random.default_rng(seed)
    cov_full = var_theta * np.outer(h, h) + g
    worst = np.inf
    for subset in _sample_subsets(n, rng, count=psd_subsets, max_size=6):
        idx = np.asarray(subset)
        joint = np.empty((len(idx) + 1, len(idx) + 1))
        joint[:-1, :-1] = cov_full[np.ix_(idx, idx)]
        joint[:-1, -1] = joint[-1, :-1] = var_theta * h[idx]
        joint[-1, -1] = var_theta
        worst = min(worst, np.linalg.eigvalsh(joint).min())
    if worst < -PSD_TOL:
        raise NotPSD(f"sampled joint covariance has eigenvalue {worst:.3e}")
    return canon


def _sample_subsets(n, rng, count, max_size):
    subsets = [(i,) for i in range(n)]
    for _ in range(count):
        size = int(rng.integers(2, max_size + 1)) if n > 1 else 1
        size = min(size, n)
        subsets.append(tuple(sorted(rng.choice(n, size=size, replace=False))))
    return subsets


def canonical_to_info(
    canon: CanonicalInfo, grid: AgentGrid, mu_theta: float = 0.0
) -> InformationStructure:
    """Expand a canonical structure into a full d = 1 information structure.

    Covariances follow from S(i) = h(i) theta + eps(i):
    Cov(S(i), theta) = h(i) var_theta and
    Cov(S(i), S(j)) = var_theta h(i) h(j) + g(i,j).
    """
    if canon.n != grid.n:
        raise DimensionMismatch(
            f"canonical structure has {canon.n} agents, grid has {grid.n}"
        )
    n = canon.n
    s2 = canon.var_theta
    kernel = s2 * np.outer(canon.h, canon.h) + canon.g
    np.fill_diagonal(kernel, s2 * canon.h**2 + canon.g_kernel_diag)
    return InformationStructure(
        d=1,
        mu_theta=mu_theta,
        var_theta=s2,
        m=(canon.h * mu_theta)[:, None],
        K_point=np.ones((n, 1, 1)),
        K_kernel=kernel[:, :, None, None],
        K_theta=(canon.h * s2)[:, None],
    )


def standardize(info: InformationStructure) -> StandardizedInfo:
    """Standardize covariances by the inverse roots of own covariances.

    Raises
    ------
    SingularOwnCovariance
        If some K_point(i) has an eigenvalue below ``PD_TOL``.
    """
    n, d = info.n, info.d
    root_inv = np.empty((n, d, d))
    for i in range(n):
        root_inv[i] = sym_inv_sqrt(info.K_point[i])
    P_kernel = np.einsum(
        "iab,ijbc,jcd->ijad", root_inv, info.K_kernel, root_inv, optimize=True
    )
    sigma = np.sqrt(info.var_theta)
    P_theta = np.einsum("iab,ib->ia", root_inv, info.K_theta) / sigma
    return StandardizedInfo(
        P_kernel=P_kernel,
        P_theta=P_theta,
        root_inv=root_inv,
        mu_theta=info.mu_theta,
        var_theta=info.var_theta,
    )


def signal_covariance(info: InformationStructure, rows, cols=None) -> np.ndarray:
    """Stacked covariance of the signals of two agent teams.

    Same-agent entries use the pointwise own covariance; distinct agents
    the kernel.  With ``cols=None`` this is the joint covariance of the
    ``rows`` team with itself.
    """
    rows = np.asarray(list(rows), dtype=int)
    cols = rows if cols is None else np.asarray(list(cols), dtype=int)
    d = info.d
    out = np.empty((len(rows) * d, len(cols) * d))
    for a, i in enumerate(rows):
        for b, j in enumerate(cols):
            block = info.K_point[i] if i == j else info.K_kernel[i, j]
            out[a * d : (a + 1) * d, b * d : (b + 1) * d] = block
    return out


def signal_state_covariance(info: InformationStructure, rows) -> np.ndarray:
    """Stacked covariance of a team's signals with the state."""
    rows = np.asarray(list(rows), dtype=int)
    return info.K_theta[rows].reshape(len(rows) * info.d)


def joint_covariance(info: InformationStructure, subset) -> np.ndarray:
    """Joint covariance of (signals of subset, theta), theta in the last slot.

    Own blocks use the pointwise covariance ``K_point``; cross blocks the
    kernel.  ``subset`` is a sequence of distinct agent indices.
    """
    idx = list(subset)
    if len(set(idx)) != len(idx):
        raise ValueError("subset must contain distinct agent indices")
    d = info.d
    size = len(idx) * d + 1
    out = np.empty((size, size))
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            block = info.K_point[i] if i == j else info.K_kernel[i, j]
            out[a * d : (a + 1) * d, b * d : (b + 1) * d] = block
        out[a * d : (a + 1) * d, -1] = info.K_theta[i]
        out[-1, a * d : (a + 1) * d] = info.K_theta[i]
    out[-1, -1] = info.var_theta
    return out


@dataclass(frozen=True)
class PSDReport:
    """Per-subset minimum eigenvalues of joint covariances."""

    subsets: tuple
    min_eigenvalues: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.min_eigenvalues.min() >= -self.tol)

    @property
    def failures(self):
        bad = np.nonzero(self.min_eigenvalues < -self.tol)[0]
        return [(self.subsets[k], float(self.min_eigenvalues[k])) for k in bad]


def default_psd_subsets(n: int, seed: int = 0, random_count: int = 64):
    """All singletons, all adjacent pairs, plus random subsets of size <= 6."""
    subsets = [(i,) for i in range(n)]
    subsets += [(i, i + 1) for i in range(n - 1)]
    rng = np.random.default_rng(seed)
    for _ in range(random_count):
        size = min(int(rng.integers(2, 7)), n)
        subsets.append(tuple(sorted(rng.choice(n, size=size, replace=False))))
    return subsets


def validate_joint_psd(
    info: InformationStructure,
    subsets: Optional[Iterable[Sequence[int]]] = None,
    full: bool = False,
    tol: float = PSD_TOL,
) -> PSDReport:
    """Check joint (state + signals) covariances on agent subsets.

    With ``full=True`` the single full-grid matrix is checked instead;
    otherwise each subset must have at most 12 agents.  Failures are
    reported, not raised.
    """
    if full:
        subsets = [tuple(range(info.n))]
    elif subsets is None:
        subsets = default_psd_subsets(info.n)
    else:
        subsets = [tuple(s) for s in subsets]
        if not subsets:
            raise ValueError("subsets must be nonempty")
        if any(len(s) > 12 for s in subsets):
            raise ValueError("subsets of size > 12 require full=True")
    mins = np.array(
        [np.linalg.eigvalsh(joint_covariance(info, s)).min() for s in subsets]
    )
    return PSDReport(subsets=tuple(subsets), min_eigenvalues=_frozen(mins), tol=tol)
