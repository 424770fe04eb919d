"""Exception types shared across the package."""


class LqgError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(LqgError):
    """Array shapes are inconsistent with the grid or signal dimension."""


class NotPSD(LqgError):
    """A joint covariance failed the positive-semidefiniteness check."""


class NormalizationInfeasible(LqgError):
    """Exposure too large: h(i)^2 * var_theta > 1 leaves no room for noise."""


class SingularOwnCovariance(LqgError):
    """An agent's own signal covariance is singular (cannot standardize)."""


class SingularSystem(LqgError):
    """The equilibrium operator has 1 in its spectrum: by the Fredholm
    alternative the game has either no affine equilibrium or a continuum."""


class ConditionWarning(UserWarning):
    """Solving was attempted despite a near-singular equilibrium operator."""


class ZeroSlope(LqgError):
    """Canonicalization requires a nonzero equilibrium slope at every agent."""


class IdentificationError(LqgError):
    """Base for failures in the identification pipeline.

    The ``step`` attribute names the pipeline stage that failed; the CLI
    surfaces it to make failures actionable (one of ``cov_id``,
    ``itr_cov_id``, ``id_last``, or ``input``).
    """

    step = "input"

    def __init__(self, message, step=None):
        super().__init__(message)
        if step is not None:
            self.step = step


class DegenerateStates(IdentificationError):
    """The two conditioning state values are (numerically) equal."""


class ZeroVariance(IdentificationError):
    """Some agent's action variance is too small to identify anything."""

    step = "id_last"


class InconsistentInput(IdentificationError):
    """Observed moments are not consistent with any canonical structure."""


class ZeroExposure(IdentificationError):
    """Sign resolution needs |h(i)| > 0 for every agent."""


class SingularTeamCovariance(LqgError):
    """A team's joint signal covariance is singular beyond tolerance."""


class DegenerateActions(LqgError):
    """The transformed action covariance is singular (degenerate slopes)."""


class ZeroVector(LqgError):
    """Cosine similarity is undefined for a zero slope or correlation vector."""


class ConfigError(LqgError):
    """A scenario configuration failed to parse or validate."""
