"""Exact analysis of binary-decision voting games with state-contingent preferences.

The package computes, without sampling error, how likely a threshold majority
vote is to reach the decision an informed majority would make, classifies
strategy-profile families by their excess expected vote share, constructs
contingent strategies whose fidelity provably converges to 1, and bounds or
refutes approximate strong Bayes Nash equilibria through structured coalition
deviations.
"""

from .model import (
    ACCEPT,
    REJECT,
    AgentTag,
    AgentType,
    DegenerateMajority,
    Instance,
    InstanceFamily,
    KnifeEdgeThreshold,
    NonPositivePrior,
    NoPositiveCorrelation,
    NoStochasticDominance,
    Profile,
    RoundingFlipsMajority,
    RowNotStochastic,
    SignalChannel,
    StatePrior,
    Strategy,
    UtilityFn,
    UtilityNotMonotone,
    ValidationError,
    always_accept,
    always_reject,
    classify_agent,
    informative_strategy,
    informed_majority,
    regular_profile,
    symmetric_profile,
    validate_instance,
    winning_vote_count,
)
from .exactprob import (
    AnalysisReport,
    InstanceTooLarge,
    MonteCarloFidelity,
    OutcomeDistribution,
    analyze,
    brute_force_distribution,
    expected_utility_from_lambdas,
    monte_carlo_fidelity,
    outcome_distribution,
    poisson_binomial_pmf,
    vote_prob,
)
from .analysis import (
    Dichotomy,
    ExcessShare,
    InformativeVerdict,
    NonPositiveExcess,
    SequenceCase,
    SequenceVerdict,
    SincereVerdict,
    SymmetricVerdict,
    ZeroProbabilitySignal,
    ZeroVariance,
    berry_esseen_gap_bound,
    classify_sequence,
    classify_symmetric,
    excess_share,
    hoeffding_lower_bound,
    informative_dichotomy,
    mixture_excess_share,
    posterior,
    regular_excess_share,
    sincere_dichotomy,
    sincere_profile,
    sincere_strategy,
)
from .strategize import (
    ConstructionInfeasible,
    ConstructionTrace,
    DeviationFinding,
    DeviationSearchSpec,
    ExplicitDeviation,
    NoEquilibriumCycle,
    NotRefuted,
    build_no_bne_instance,
    construct_sigma_prime,
    epsilon_bound,
    refute_equilibrium,
)

__version__ = "0.1.0"
