"""High-fidelity strategy construction, equilibrium bounds, and refutation.

``construct_sigma_prime`` builds, for any valid family, a contingent strategy
whose regular profile keeps the expected vote share of the informed-majority
alternative strictly above its threshold in every state, so fidelity converges
to 1 at a Hoeffding rate.  ``epsilon_bound`` turns a fidelity value into a
tolerance below which no coalition can profitably deviate from a regular
profile.  ``refute_equilibrium`` searches a structured family of deviations
and is a sound refuter only: a NotRefuted outcome is not a certificate of
equilibrium.  ``build_no_bne_instance`` constructs a family of instances with
no exact strong equilibrium, exhibiting a three-profile deviation cycle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .analysis import ExcessShare, regular_excess_share
from .exactprob import analyze, expected_utility_from_lambdas, poisson_binomial_pmf
from .model import (
    AgentTag,
    Instance,
    InstanceFamily,
    Profile,
    SignalChannel,
    StatePrior,
    Strategy,
    UtilityFn,
    always_accept,
    always_reject,
    informative_strategy,
    validate_instance,
)


class ConstructionInfeasible(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConstructionTrace:
    """Every intermediate of the high-fidelity strategy construction.

    ``signal_margin_accept[w]`` is the change in a contingent agent's accept
    probability in state w relative to the signal-independent baseline,
    P[high | w] * delta_h - P[low | w] * delta_l; it must be strictly positive
    in states where A is the informed majority decision and strictly negative
    where R is.  ``excess`` holds the population-level margins of the final
    strategy (the signal margins scaled by the contingent fraction).
    """

    beta_star: float
    split_signal: int
    delta_l: float
    delta_h: float
    delta_h_boost: float
    sigma_intermediate: Strategy
    sigma_prime: Strategy
    intermediate_margin_accept: np.ndarray
    signal_margin_accept: np.ndarray
    signal_margin_reject: np.ndarray
    excess: ExcessShare
    fidelity_rate: float  # phi: Hoeffding rate constant of the induced profiles
    n_threshold: int  # rounding slack at most half the margin beyond this N

    def __post_init__(self):
        for name in (
            "intermediate_margin_accept",
            "signal_margin_accept",
            "signal_margin_reject",
        ):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _grouped_signal_probs(channel: SignalChannel, split: int):
    """Probability of a low (first ``split``) and high signal per state."""
    low = channel.cond_probs[:, :split].sum(axis=1)
    high = channel.cond_probs[:, split:].sum(axis=1)
    return low, high


def construct_sigma_prime(
    family,
    delta_l: float | None = None,
    delta_h_boost: float | None = None,
    kappa: float = 0.6,
) -> ConstructionTrace:
    """Construct a contingent strategy with strictly positive vote-share margins.

    Step 1 finds the signal-independent accept probability beta* that puts the
    expected vote share exactly at the threshold.  Step 2 lowers it by delta_l
    on low signals and raises it by delta_h = delta_l * P[low | H] / P[high | H]
    on high signals, which zeroes the margin in the pivotal accept state and
    makes it strictly positive for R in every reject state.  Step 3 raises
    delta_h further, keeping the raise small enough that half the reject-side
    margin survives, which makes every relevant margin strictly positive.

    ``delta_l`` and ``delta_h_boost`` default to deterministic fractions
    (``kappa``) of their feasible ranges and may be supplied explicitly.
    Accepts an :class:`InstanceFamily` or an :class:`Instance`.
    """
    alpha_f, alpha_u, alpha_c = family.alpha_fractions
    mu = family.threshold
    if not (alpha_f < mu and alpha_u < 1.0 - mu):
        raise ConstructionInfeasible(
            f"predetermined agents dominate the vote: alpha_F={alpha_f}, "
            f"alpha_U={alpha_u}, mu={mu}"
        )
    beta_star = (mu - alpha_f) / alpha_c
    split = family.channel.n_signals // 2
    low_probs, high_probs = _grouped_signal_probs(family.channel, split)
    pivot_high = family.high_states[0]
    ratio = low_probs[pivot_high] / high_probs[pivot_high]
    if delta_l is None:
        # kappa < 1 leaves strict room for the boost; the ratio cap keeps
        # beta_h below 1 even for channels biased toward low signals.
        delta_l = kappa * min(beta_star, (1.0 - beta_star) / max(ratio, 1.0))
    if not 0.0 < delta_l <= beta_star:
        raise ValueError(f"delta_l must lie in (0, beta*]: {delta_l}")
    delta_h = delta_l * ratio
    beta_low = beta_star - delta_l
    beta_high = beta_star + delta_h
    if beta_high > 1.0:
        raise ValueError(
            f"delta_l={delta_l} pushes the high-signal probability above 1 "
            f"({beta_high})"
        )
    sigma_intermediate = _two_level_strategy(beta_low, beta_high, split, family.channel.n_signals)
    intermediate_excess = regular_excess_share(family, sigma_intermediate)
    reject_margin = intermediate_excess.per_state_reject[family.low_states[-1]]
    if delta_h_boost is None:
        delta_h_boost = min(1.0 - beta_high, reject_margin / (2.0 * alpha_c))
    if delta_h_boost <= 0.0 or beta_high + delta_h_boost > 1.0 + 1e-15:
        raise ValueError(f"infeasible high-signal boost: {delta_h_boost}")
    if alpha_c * delta_h_boost > reject_margin / 2.0 + 1e-15:
        raise ValueError(
            f"boost {delta_h_boost} consumes more than half the reject-side "
            f"margin {reject_margin}"
        )
    beta_high_final = min(1.0, beta_high + delta_h_boost)
    sigma_prime = _two_level_strategy(beta_low, beta_high_final, split, family.channel.n_signals)
    intermediate_margin = high_probs * delta_h - low_probs * delta_l
    final_margin = high_probs * (delta_h + delta_h_boost) - low_probs * delta_l
    excess = regular_excess_share(family, sigma_prime)
    for w in family.high_states:
        if not final_margin[w] > 0.0:
            raise ConstructionInfeasible(f"accept-side margin not positive in state {w}")
    for w in family.low_states:
        if not -final_margin[w] > 0.0:
            raise ConstructionInfeasible(f"reject-side margin not positive in state {w}")
    if not excess.minimum > 0.0:
        raise ConstructionInfeasible(
            f"population-level margin vanishes in rounding: {excess.minimum}"
        )
    phi = excess.minimum / 2.0
    return ConstructionTrace(
        beta_star=beta_star,
        split_signal=split,
        delta_l=delta_l,
        delta_h=delta_h,
        delta_h_boost=delta_h_boost,
        sigma_intermediate=sigma_intermediate,
        sigma_prime=sigma_prime,
        intermediate_margin_accept=intermediate_margin,
        signal_margin_accept=final_margin,
        signal_margin_reject=-final_margin,
        excess=excess,
        fidelity_rate=phi,
        n_threshold=int(math.ceil(4.0 / excess.minimum)),
    )


def _two_level_strategy(beta_low, beta_high, split, n_signals) -> Strategy:
    probs = np.empty(n_signals)
    probs[:split] = beta_low
    probs[split:] = beta_high
    return Strategy(probs)


def epsilon_bound(fidelity: float, utility_bound: int, n_states: int = 2) -> float:
    """Deviation-gain tolerance certified by a fidelity level for regular profiles:
    T * B * ((T - 1) * B + 1) * (1 - fidelity); the binary case reduces to
    2 B (B + 1) (1 - fidelity)."""
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError(f"fidelity must lie in [0, 1]: {fidelity}")
    b = utility_bound
    return n_states * b * ((n_states - 1) * b + 1) * (1.0 - fidelity)


@dataclass(frozen=True)
class ExplicitDeviation:
    """Caller-supplied deviation candidate: a coalition and its new strategies.

    ``coalition`` is a tuple of agent indices or one of the strings
    "contingent", "friendly", "unfriendly"; ``strategies`` is a single
    :class:`Strategy` applied to every member or a tuple with one entry per
    member.
    """

    coalition: object
    strategies: object


@dataclass(frozen=True)
class DeviationSearchSpec:
    """Structured deviation family searched by :func:`refute_equilibrium`."""

    grid_resolution: float = 0.05
    include_construction: bool = True
    include_single_agent: bool = True
    explicit: tuple = ()


@dataclass(frozen=True)
class DeviationFinding:
    """A successful coalition deviation: all members weakly gain, and some
    member gains strictly more than epsilon.  Non-members keep their strategy."""

    coalition: tuple
    alternative: Profile
    gains: tuple
    max_gain: float
    weak_ok: bool
    route: str


@dataclass(frozen=True)
class NotRefuted:
    """No structured deviation cleared the tolerance.  Not an equilibrium
    certificate: the search family is finite while deviations are not."""

    candidates_checked: int


def _grid(resolution: float) -> np.ndarray:
    steps = int(round(1.0 / resolution))
    return np.linspace(0.0, 1.0, steps + 1)


def _evaluate_deviation(profile, inst, coalition, replacement, baseline_utils, epsilon, route):
    """Build the deviated profile and check the epsilon-strong conditions."""
    if isinstance(replacement, Strategy):
        updates = {i: replacement for i in coalition}
    else:
        updates = dict(zip(coalition, replacement))
    candidate = profile.replace(updates)
    report = analyze(candidate, inst)
    gains = tuple(
        float(report.expected_utilities[i] - baseline_utils[i]) for i in coalition
    )
    weak_ok = all(g >= 0.0 for g in gains)
    max_gain = max(gains)
    if weak_ok and max_gain > epsilon:
        return DeviationFinding(
            coalition=tuple(coalition),
            alternative=candidate,
            gains=gains,
            max_gain=max_gain,
            weak_ok=weak_ok,
            route=route,
        )
    return None


def _resolve_coalition(spec_coalition, inst) -> tuple:
    if isinstance(spec_coalition, str):
        tag = AgentTag(spec_coalition)
        return tuple(i for i, t in enumerate(inst.agent_types) if t.tag is tag)
    return tuple(spec_coalition)


def refute_equilibrium(
    profile: Profile,
    inst: Instance,
    epsilon: float,
    search: DeviationSearchSpec | None = None,
):
    """Search structured deviations for one that beats ``epsilon``.

    Candidates are scanned in a fixed order so the result is deterministic:
    (a) the all-contingent coalition switching to the constructed
    high-fidelity strategy, (b) the all-contingent coalition over a grid of
    two-level strategies, (c) every single agent's grid best response, and
    (d) caller-supplied explicit deviations.  Returns the first
    :class:`DeviationFinding`, or :class:`NotRefuted` after an exhaustive scan.
    """
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be nonnegative: {epsilon}")
    search = search or DeviationSearchSpec()
    baseline = analyze(profile, inst)
    baseline_utils = baseline.expected_utilities
    contingent = inst.contingent_indices()
    checked = 0
    split = inst.n_signals // 2
    grid = _grid(search.grid_resolution)

    if search.include_construction and contingent:
        trace = construct_sigma_prime(inst)
        checked += 1
        finding = _evaluate_deviation(
            profile, inst, contingent, trace.sigma_prime, baseline_utils, epsilon,
            route="construction",
        )
        if finding:
            return finding

    if contingent:
        for beta_low, beta_high in itertools.product(grid, grid):
            sigma = _two_level_strategy(beta_low, beta_high, split, inst.n_signals)
            checked += 1
            finding = _evaluate_deviation(
                profile, inst, contingent, sigma, baseline_utils, epsilon, route="grid"
            )
            if finding:
                return finding

    if search.include_single_agent:
        finding, single_checked = _single_agent_search(
            profile, inst, baseline, grid, split, epsilon
        )
        checked += single_checked
        if finding:
            return finding

    for explicit in search.explicit:
        coalition = _resolve_coalition(explicit.coalition, inst)
        checked += 1
        finding = _evaluate_deviation(
            profile, inst, coalition, explicit.strategies, baseline_utils, epsilon,
            route="explicit",
        )
        if finding:
            return finding

    return NotRefuted(candidates_checked=checked)


def _single_agent_search(profile, inst, baseline, grid, split, epsilon):
    """Grid best responses of individual agents via leave-one-out tail masses.

    With the other N-1 agents fixed, the win probability is affine in the
    agent's own accept probability, so each candidate strategy is scored with
    two numbers per state.  Agents sharing a strategy and a utility table are
    interchangeable; each class is scanned once and attributed to its lowest
    agent index.
    """
    needed = inst.winning_votes
    probs_by_state = inst.channel.cond_probs @ profile.matrix.T
    # Agents sharing a strategy and a utility table are interchangeable; the
    # classes come out ordered by their lowest member index.
    classes = {}
    for i in range(inst.n_agents):
        key = (profile.strategies[i], inst.agents[i])
        classes.setdefault(key, []).append(i)
    checked = 0
    for (_, utility), members in classes.items():
        agent = members[0]
        tail = np.empty(inst.n_states)
        point = np.empty(inst.n_states)
        for w in range(inst.n_states):
            others = np.delete(probs_by_state[w], agent)
            pmf = poisson_binomial_pmf(others)
            tail[w] = math.fsum(pmf[needed:])
            point[w] = pmf[needed - 1] if 0 <= needed - 1 < len(pmf) else 0.0
        base_util = baseline.expected_utilities[agent]
        for beta_low, beta_high in itertools.product(grid, grid):
            sigma = _two_level_strategy(beta_low, beta_high, split, inst.n_signals)
            own = inst.channel.cond_probs @ sigma.vote_probs
            lambda_accept = tail + own * point
            gain = (
                expected_utility_from_lambdas(
                    lambda_accept, 1.0 - lambda_accept, inst.prior, utility
                )
                - base_util
            )
            checked += 1
            if gain > epsilon:
                # Confirm the affine screen with a full recomputation; on a
                # marginal roundoff disagreement keep scanning the grid.
                finding = _evaluate_deviation(
                    profile, inst, (agent,), sigma,
                    baseline.expected_utilities, epsilon, route="single",
                )
                if finding:
                    return finding, checked
    return None, checked


@dataclass(frozen=True)
class NoEquilibriumCycle:
    """An instance with no exact strong equilibrium, with the three named
    profiles forming its deviation cycle."""

    instance: Instance
    profiles: tuple  # (profile_1, profile_2, profile_3)
    #: (from_index, to_index, deviating agent indices) for each cycle step.
    deviation_steps: tuple


def build_no_bne_instance(n0: int) -> NoEquilibriumCycle:
    """Instance of 2 * n0 + 3 agents (n0 + 1 friendly, 2 contingent, n0
    unfriendly) whose every strategy profile admits a profitable coalition
    deviation.  The three returned profiles form the deviation cycle; their
    expected utilities do not depend on n0."""
    if n0 < 1:
        raise ValueError(f"n0 must be positive: {n0}")
    friendly = UtilityFn(np.array([[99, 1], [100, 0]]))
    contingent = UtilityFn(np.array([[0, 100], [90, 0]]))
    unfriendly = UtilityFn(np.array([[0, 100], [1, 99]]))
    n = 2 * n0 + 3
    inst = validate_instance(
        Instance(
            n_agents=n,
            threshold=0.5,
            prior=StatePrior(np.array([0.5, 0.5])),
            channel=SignalChannel(np.array([[0.8, 0.2], [0.2, 0.8]])),
            agents=(friendly,) * (n0 + 1) + (contingent,) * 2 + (unfriendly,) * n0,
        )
    )
    accept = always_accept()
    reject = always_reject()
    informative = informative_strategy()
    last_friendly = n0
    first_contingent, second_contingent = n0 + 1, n0 + 2
    profile_1 = Profile(
        (accept,) * n0 + (informative,) + (informative, informative) + (reject,) * n0
    )
    profile_2 = Profile(
        (accept,) * (n0 + 1) + (informative, informative) + (reject,) * n0
    )
    profile_3 = Profile(
        (accept,) * (n0 + 1) + (informative, reject) + (reject,) * n0
    )
    steps = (
        (0, 1, (last_friendly,)),
        (1, 2, (second_contingent,)),
        (2, 0, (last_friendly, first_contingent, second_contingent)),
    )
    return NoEquilibriumCycle(
        instance=inst,
        profiles=(profile_1, profile_2, profile_3),
        deviation_steps=steps,
    )
