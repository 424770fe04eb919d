"""Heterogeneous LQG games on a discretized agent continuum.

Solves the linear (Fredholm) equilibrium system of games with quadratic
payoffs and jointly Gaussian state/signals, and implements the full
identification pipeline: canonicalization of information structures,
up-to-sign identification from conditional action distributions,
higher-order-uncertainty identification, and variance-reduction gap
analysis, plus the running market-competition example and a CLI.
"""

__version__ = "0.1.0"

from .core import (
    PD_TOL,
    PSD_TOL,
    SOLVER_TOL,
    SPEC_TOL,
    AffineProfile,
    AgentGrid,
    CanonicalInfo,
    InformationStructure,
    PayoffStructure,
    StandardizedInfo,
    canonical_to_info,
    make_canonical_info,
    standardize,
    validate_joint_psd,
)
from .equilibrium import (
    DiscreteOperator,
    WellPosedness,
    build_operator,
    perturbation_study,
    regularize_weights,
    solve_equilibrium,
    solve_fixed_point,
    spectral_check,
)
from .outcome import (
    ConditionalOutcome,
    OutcomeMoments,
    condition_on_state,
    obedience_residuals,
    outcome_moments,
    sample_conditional,
    sample_outcome,
)
from .canonical import (
    canonicalize,
    verify_canonical_equilibrium,
    verify_equivalence,
)
from .identification import (
    IdentifiedCanonical,
    higher_order_uncertainty,
    identify,
    nested_projection_oracle,
    resolve_signs_positive,
)
from .variance import (
    ActionMap,
    GapReport,
    corollary_zero_cases,
    cosine_ratio,
    gap_report,
    variance_reduction_actions,
    variance_reduction_signals,
)
from .market import (
    MarketScenario,
    closed_form_slope,
    market_game,
    market_payoff,
    optimal_tax,
    pipeline_revenue,
    policy_roundtrip,
    revenue_lower_bound,
    tax_revenue,
)
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]
