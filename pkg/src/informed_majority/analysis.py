"""Excess expected vote share, concentration bounds, and voting-scheme classifiers.

The excess expected vote share of a profile in a state is the margin by which
the informed-majority alternative's expected vote fraction exceeds its winning
threshold.  A strictly positive minimum margin forces fidelity toward 1 at a
Hoeffding rate; a persistently negative margin caps the relevant win
probability; and a vanishing margin with linear variance keeps fidelity
bounded away from 1 (shown through a Berry-Esseen normal-approximation bound).
These three regimes drive the sequence classifier and the closed-form
dichotomies for symmetric, informative, and sincere voting.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exactprob import profile_vote_probs
from .model import (
    Instance,
    InstanceFamily,
    Profile,
    SignalChannel,
    StatePrior,
    Strategy,
    UtilityFn,
)

#: Berry-Esseen absolute constant (best known estimate of the upper bound).
BERRY_ESSEEN_C0 = 0.5600


class NonPositiveExcess(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


class ZeroProbabilitySignal(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExcessShare:
    """Per-state excess expected vote shares and their relevant minimum.

    ``per_state_accept[w]`` is the expected vote fraction for A in state w
    minus the threshold; ``per_state_reject`` is its exact negation (both
    definitions share the mean vote probability, so the identity is built
    in).  ``minimum`` takes the A side over states where A is the informed
    majority decision and the R side where R is.
    """

    per_state_accept: np.ndarray
    per_state_reject: np.ndarray
    minimum: float

    def __post_init__(self):
        for name in ("per_state_accept", "per_state_reject"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _excess_from_accept_shares(accept_share, threshold, low_states, high_states):
    f_accept = accept_share - threshold
    f_reject = -f_accept
    minimum = min(
        min(f_accept[w] for w in high_states),
        min(f_reject[w] for w in low_states),
    )
    return ExcessShare(
        per_state_accept=f_accept, per_state_reject=f_reject, minimum=float(minimum)
    )


def excess_share(profile: Profile, inst: Instance) -> ExcessShare:
    """Realized excess expected vote share of a profile on a concrete instance."""
    if len(profile) != inst.n_agents:
        raise ValueError(f"profile has {len(profile)} strategies, instance {inst.n_agents}")
    mean_accept = profile_vote_probs(profile, inst.channel).mean(axis=1)
    return _excess_from_accept_shares(
        mean_accept, inst.threshold, inst.low_states, inst.high_states
    )


def regular_excess_share(family, sigma: Strategy) -> ExcessShare:
    """N-independent excess share of the regular profile family induced by
    ``sigma`` for contingent agents (friendly agents always vote A, unfriendly
    always R).  Accepts an :class:`InstanceFamily` or an :class:`Instance`."""
    alpha_f, _, alpha_c = family.alpha_fractions
    contingent_accept = family.channel.cond_probs @ sigma.vote_probs
    accept_share = alpha_f + alpha_c * contingent_accept
    return _excess_from_accept_shares(
        accept_share, family.threshold, family.low_states, family.high_states
    )


def mixture_excess_share(family: InstanceFamily, strategies) -> ExcessShare:
    """Excess share when each group g plays ``strategies[g]`` (fraction-weighted)."""
    accept_share = np.zeros(family.prior.n_states)
    for (_, fraction), sigma in zip(family.groups, strategies):
        accept_share += fraction * (family.channel.cond_probs @ sigma.vote_probs)
    return _excess_from_accept_shares(
        accept_share, family.threshold, family.low_states, family.high_states
    )


def hoeffding_lower_bound(excess: float, n_agents: int) -> float:
    """Fidelity lower bound 1 - 2 exp(-2 f^2 N), clamped to [0, 1]."""
    if excess <= 0.0:
        raise NonPositiveExcess(f"the bound requires a positive excess share: {excess}")
    return min(1.0, max(0.0, 1.0 - 2.0 * math.exp(-2.0 * excess * excess * n_agents)))


def berry_esseen_gap_bound(profile: Profile, inst: Instance, state: int) -> float:
    """Berry-Esseen bound on the gap between the standardized accept-vote count
    and the standard normal CDF: C0 * sum(rho_n) / s_N^3 with rho_n the third
    absolute central moment of each vote indicator."""
    probs = profile_vote_probs(profile, inst.channel)[state]
    variances = probs * (1.0 - probs)
    s_squared = math.fsum(variances)
    if s_squared <= 0.0:
        raise ZeroVariance("every agent votes deterministically in this state")
    rho = variances * (probs**2 + (1.0 - probs) ** 2)
    return BERRY_ESSEEN_C0 * math.fsum(rho) / s_squared**1.5


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bounded_variance_ceiling(eta: float, psi: float, gap: float) -> float:
    """Win-probability ceiling 1 - (Phi(-eta / sqrt(psi)) - gap) for the
    vanishing-margin, linear-variance regime."""
    if psi <= 0.0:
        raise ZeroVariance(f"variance floor must be positive: {psi}")
    return min(1.0, 1.0 - (normal_cdf(-eta / math.sqrt(psi)) - gap))


class Dichotomy(enum.Enum):
    HIGH_FIDELITY = "high_fidelity"
    NOT_HIGH_FIDELITY = "not_high_fidelity"


@dataclass(frozen=True)
class SymmetricVerdict:
    """Dichotomy for a regular profile family with one shared contingent strategy."""

    verdict: Dichotomy
    excess: ExcessShare
    knife_edge: bool
    variance_floor: float


def classify_symmetric(sigma: Strategy, family) -> SymmetricVerdict:
    """Classify the regular family where all contingent agents play ``sigma``.

    The excess share of such a family does not depend on N, so fidelity
    converges to 1 exactly when it is strictly positive.  An exact zero is
    reported as a knife edge (fidelity then stays bounded away from 1, since
    the vote variance is bounded below along the family).
    """
    ex = regular_excess_share(family, sigma)
    _, _, alpha_c = family.alpha_fractions
    contingent_accept = family.channel.cond_probs @ sigma.vote_probs
    variance_floor = alpha_c * float(np.min(contingent_accept * (1.0 - contingent_accept)))
    knife_edge = ex.minimum == 0.0
    verdict = Dichotomy.HIGH_FIDELITY if ex.minimum > 0.0 else Dichotomy.NOT_HIGH_FIDELITY
    return SymmetricVerdict(
        verdict=verdict, excess=ex, knife_edge=knife_edge, variance_floor=variance_floor
    )


class SequenceCase(enum.Enum):
    CONVERGES_TO_ONE = "converges_to_one"
    FAILS_NEGATIVE = "fails_negative"
    FAILS_BOUNDED_VARIANCE = "fails_bounded_variance"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class SequenceEvidence:
    sample_ns: tuple
    excess_values: tuple
    scaled_excess: tuple  # sqrt(N) * f^N
    variance_ratios: tuple  # min over states of Var(sum X | state) / N
    #: Diagnostic ceiling on the binding state's win probability in the
    #: vanishing-margin regime, 1 - (Phi(-eta / sqrt(psi)) - gap) with the
    #: realized eta, psi, and normal-approximation gap; None where every vote
    #: in the binding state is deterministic.
    win_prob_ceilings: tuple


@dataclass(frozen=True)
class SequenceVerdict:
    case: SequenceCase
    evidence: SequenceEvidence
    eta: float
    psi: float
    growth_threshold: float


def classify_sequence(
    make_profile,
    family: InstanceFamily,
    sample_ns,
    eta: float = -0.01,
    psi: float = 0.01,
    growth_threshold: float = 0.01,
) -> SequenceVerdict:
    """Numeric screen over finitely many N for the three fidelity regimes.

    ``make_profile(instance)`` must return the profile to evaluate on each
    materialized instance.  The verdict records evidence rather than asserting
    a limit; ``UNDETERMINED`` is an explicitly allowed outcome since liminf
    conditions cannot be decided from finitely many samples.
    """
    sample_ns = tuple(sample_ns)
    if len(sample_ns) < 5 or list(sample_ns) != sorted(set(sample_ns)):
        raise ValueError("sample_ns must be at least 5 strictly ascending values")
    excess_values = []
    scaled = []
    variance_ratios = []
    ceilings = []
    for n in sample_ns:
        inst = family.instantiate(n)
        profile = make_profile(inst)
        ex = excess_share(profile, inst)
        excess_values.append(ex.minimum)
        scaled.append(math.sqrt(n) * ex.minimum)
        probs = profile_vote_probs(profile, inst.channel)
        variances = (probs * (1.0 - probs)).sum(axis=1)
        variance_ratios.append(float(variances.min()) / n)
        # Diagnostic ceiling for the binding state (the one attaining f^N).
        relevant = [(ex.per_state_accept[w], w) for w in inst.high_states]
        relevant += [(ex.per_state_reject[w], w) for w in inst.low_states]
        binding = min(relevant)[1]
        binding_ratio = float(variances[binding]) / n
        if binding_ratio > 0.0:
            gap = berry_esseen_gap_bound(profile, inst, binding)
            ceilings.append(
                bounded_variance_ceiling(max(scaled[-1], 0.0), binding_ratio, gap)
            )
        else:
            ceilings.append(None)
    evidence = SequenceEvidence(
        sample_ns=sample_ns,
        excess_values=tuple(excess_values),
        scaled_excess=tuple(scaled),
        variance_ratios=tuple(variance_ratios),
        win_prob_ceilings=tuple(ceilings),
    )
    if all(s > growth_threshold for s in scaled) and scaled[-1] > scaled[0]:
        case = SequenceCase.CONVERGES_TO_ONE
    elif scaled[-1] <= eta and sum(s <= eta for s in scaled) * 2 >= len(scaled):
        case = SequenceCase.FAILS_NEGATIVE
    elif all(eta < s <= growth_threshold for s in scaled) and all(
        v >= psi for v in variance_ratios
    ):
        case = SequenceCase.FAILS_BOUNDED_VARIANCE
    else:
        case = SequenceCase.UNDETERMINED
    return SequenceVerdict(
        case=case, evidence=evidence, eta=eta, psi=psi, growth_threshold=growth_threshold
    )


@dataclass(frozen=True)
class InformativeVerdict:
    verdict: Dichotomy
    excess_high: float  # margin of A in the high state under informative voting
    excess_low: float  # margin of R in the low state


def informative_dichotomy(family) -> InformativeVerdict:
    """Fidelity dichotomy for the profile where every agent votes informatively.

    In the binary setting this holds exactly when the threshold separates the
    two high-signal probabilities: P[h | high state] > mu > P[h | low state].
    """
    if family.channel.n_signals != 2 or family.prior.n_states != 2:
        raise ValueError("the informative dichotomy is defined for binary families")
    p_high = float(family.channel.cond_probs[1, 1])
    p_low = float(family.channel.cond_probs[0, 1])
    f_high = p_high - family.threshold
    f_low = family.threshold - p_low
    verdict = (
        Dichotomy.HIGH_FIDELITY
        if f_high > 0.0 and f_low > 0.0
        else Dichotomy.NOT_HIGH_FIDELITY
    )
    return InformativeVerdict(verdict=verdict, excess_high=f_high, excess_low=f_low)


def posterior(prior: StatePrior, channel: SignalChannel, signal: int) -> np.ndarray:
    """Posterior over states given one private signal, by Bayes' rule."""
    joint = prior.probs * channel.cond_probs[:, signal]
    total = float(joint.sum())
    if total <= 0.0:
        raise ZeroProbabilitySignal(f"signal {signal} has zero prior probability")
    post = joint / total
    post.setflags(write=False)
    return post


def sincere_conditional_utilities(utility: UtilityFn, prior: StatePrior, channel: SignalChannel):
    """Expected utilities of an individual decision conditioned on each signal.

    Returns (accept_utils, reject_utils), one entry per signal.
    """
    accept_utils = np.empty(channel.n_signals)
    reject_utils = np.empty(channel.n_signals)
    for m in range(channel.n_signals):
        post = posterior(prior, channel, m)
        accept_utils[m] = float(np.dot(post, utility.values[:, 0]))
        reject_utils[m] = float(np.dot(post, utility.values[:, 1]))
    return accept_utils, reject_utils


#: Ties between conditional utilities are detected at this absolute tolerance;
#: exact float equality is too brittle for utilities built from decimals.
SINCERE_TIE_TOL = 1e-12


def sincere_strategy(
    utility: UtilityFn,
    prior: StatePrior,
    channel: SignalChannel,
    tie_break: float = 0.5,
) -> Strategy:
    """Strategy of a voter who maximizes her posterior expected utility as if
    deciding alone: vote A on a signal when accepting beats rejecting, R when
    it loses, and A with probability ``tie_break`` on an exact tie."""
    if channel.n_signals != 2 or prior.n_states != 2:
        raise ValueError("sincere voting is defined for binary signals and states")
    if not 0.0 <= tie_break <= 1.0:
        raise ValueError(f"tie_break must lie in [0, 1]: {tie_break}")
    accept_utils, reject_utils = sincere_conditional_utilities(utility, prior, channel)
    probs = np.empty(channel.n_signals)
    for m in range(channel.n_signals):
        diff = accept_utils[m] - reject_utils[m]
        if abs(diff) <= SINCERE_TIE_TOL:
            probs[m] = tie_break
        else:
            probs[m] = 1.0 if diff > 0.0 else 0.0
    return Strategy(probs)


def sincere_profile(inst: Instance, tie_break: float = 0.5) -> Profile:
    """Profile where every agent votes sincerely (always regular)."""
    cache = {}
    strategies = []
    for utility in inst.agents:
        key = id(utility)
        if key not in cache:
            cache[key] = sincere_strategy(utility, inst.prior, inst.channel, tie_break)
        strategies.append(cache[key])
    return Profile(tuple(strategies))


@dataclass(frozen=True)
class SincereVerdict:
    verdict: Dichotomy
    excess: ExcessShare
    strategies: tuple  # one sincere strategy per group
    #: Sincere profiles are regular, so high fidelity is equivalent to the
    #: profile sequence being an approximate strong equilibrium with a
    #: vanishing tolerance.
    epsilon_strong_asymptotically: bool


def sincere_dichotomy(family: InstanceFamily, tie_break: float = 0.5) -> SincereVerdict:
    """Classify the sincere profile family: high fidelity iff its (N-free)
    excess share is strictly positive."""
    strategies = tuple(
        sincere_strategy(utility, family.prior, family.channel, tie_break)
        for utility, _ in family.groups
    )
    ex = mixture_excess_share(family, strategies)
    high = ex.minimum > 0.0
    return SincereVerdict(
        verdict=Dichotomy.HIGH_FIDELITY if high else Dichotomy.NOT_HIGH_FIDELITY,
        excess=ex,
        strategies=strategies,
        epsilon_strong_asymptotically=high,
    )
