"""Domain model for majority votes among agents with state-contingent preferences.

A voting game instance consists of N agents choosing between accepting (``A``)
and rejecting (``R``) a proposal under an unobserved world state.  States are
indexed ``0..T-1`` from "most reject-favoring" to "most accept-favoring"; in
the binary setting T = 2 and state 0 plays the role of the low state, state 1
the high state.  Each agent receives a private signal indexed ``0..M-1``
(binary: 0 = low signal, 1 = high signal) whose distribution depends on the
state, and holds an integer-valued utility over (state, outcome) pairs.

The *informed majority decision* in a state is the alternative that at least a
mu-fraction of agents would prefer if the state were known.  Agents are
classified as friendly, unfriendly, or contingent according to how their own
preference threshold over states compares with the majority's threshold.

All types are immutable after construction; validation is explicit via
:func:`validate_instance` so that deliberately malformed objects can be built
in tests.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

ACCEPT = "A"
REJECT = "R"

SETTING_BINARY = "binary"
SETTING_NONBINARY = "nonbinary"

#: Absolute tolerance for stochastic-vector checks.  Inputs are short decimal
#: literals, so exact rational arithmetic is unnecessary.
STOCHASTIC_TOL = 1e-12


class ValidationError(ValueError):
    """An instance, or one of its components, violates a model assumption."""


class NonPositivePrior(ValidationError):
    pass


class RowNotStochastic(ValidationError):
    pass


class NoPositiveCorrelation(ValidationError):
    pass


class NoStochasticDominance(ValidationError):
    pass


class UtilityNotMonotone(ValidationError):
    pass


class DegenerateMajority(ValidationError):
    pass


class KnifeEdgeThreshold(ValidationError):
    pass


class RoundingFlipsMajority(ValidationError):
    pass


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def stable_floor(x: float) -> int:
    # Inputs are products of short decimal literals; rounding to 9 decimals
    # first keeps 0.7 * 10 == 7 instead of floor(6.999...) == 6.
    return math.floor(round(x, 9))


def stable_ceil(x: float) -> int:
    return math.ceil(round(x, 9))


def winning_vote_count(threshold: float, n_agents: int) -> int:
    """Minimum number of accept votes for A to win ("at least mu * N")."""
    return stable_ceil(threshold * n_agents)


@dataclass(frozen=True, eq=False)
class StatePrior:
    """Common prior over world states.

    probs[w] is the prior probability of state w; entries must be strictly
    positive and sum to 1.
    """

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(self.probs))

    @property
    def n_states(self) -> int:
        return len(self.probs)

    def validate(self):
        if np.any(self.probs <= 0.0):
            raise NonPositivePrior(f"prior entries must be strictly positive: {self.probs}")
        if abs(float(self.probs.sum()) - 1.0) > STOCHASTIC_TOL:
            raise NonPositivePrior(f"prior must sum to 1: {self.probs}")

    def __eq__(self, other):
        return isinstance(other, StatePrior) and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class SignalChannel:
    """Conditional signal distributions.

    cond_probs[w, m] is the probability of receiving signal m in state w.
    Rows must be stochastic.  Signals must be positively correlated with the
    state: in the binary setting the high signal is strictly more likely in
    the high state, and in general the signal distribution of a higher state
    first-order stochastically dominates that of any lower state.
    """

    cond_probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cond_probs", _readonly(self.cond_probs))

    @property
    def n_states(self) -> int:
        return self.cond_probs.shape[0]

    @property
    def n_signals(self) -> int:
        return self.cond_probs.shape[1]

    def validate(self, setting: str = SETTING_BINARY):
        p = self.cond_probs
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise RowNotStochastic(f"signal probabilities must lie in [0, 1]: {p}")
        sums = p.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)[0]
        if bad.size:
            raise RowNotStochastic(f"row {bad[0]} sums to {sums[bad[0]]}, expected 1")
        if setting == SETTING_BINARY:
            if p.shape != (2, 2):
                raise RowNotStochastic(f"binary channel must be 2x2, got {p.shape}")
            if not (p[1, 1] > p[0, 1] and p[1, 0] < p[0, 0]):
                raise NoPositiveCorrelation(
                    "high signal must be strictly more likely in the high state"
                )
        else:
            # Strict first-order stochastic dominance between adjacent states
            # implies it between all state pairs.
            tails = np.cumsum(p[:, ::-1], axis=1)[:, ::-1]  # tails[w, m] = Pr[signal >= m | w]
            for w in range(self.n_states - 1):
                if not np.all(tails[w + 1, 1:] > tails[w, 1:]):
                    raise NoStochasticDominance(
                        f"signal distribution of state {w + 1} does not strictly "
                        f"dominate that of state {w}"
                    )

    def __eq__(self, other):
        return isinstance(other, SignalChannel) and np.array_equal(
            self.cond_probs, other.cond_probs
        )


@dataclass(frozen=True, eq=False)
class UtilityFn:
    """Integer utility over (state, outcome) pairs.

    values[w, 0] is the utility of outcome A in state w, values[w, 1] of
    outcome R.  Utilities for A must be strictly increasing in the state,
    utilities for R strictly decreasing, and no state may be indifferent.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values, dtype=np.int64))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    def accept_value(self, state: int) -> int:
        return int(self.values[state, 0])

    def reject_value(self, state: int) -> int:
        return int(self.values[state, 1])

    def prefers_accept(self, state: int) -> bool:
        return self.values[state, 0] > self.values[state, 1]

    @property
    def n_reject_states(self) -> int:
        """Number of states in which R is preferred (a prefix of the states)."""
        return int(np.count_nonzero(self.values[:, 1] > self.values[:, 0]))

    def validate(self):
        v = self.values
        if v.ndim != 2 or v.shape[1] != 2:
            raise UtilityNotMonotone(f"utility must be a Tx2 table, got shape {v.shape}")
        if np.any(v < 0):
            raise UtilityNotMonotone(f"utilities must be nonnegative integers: {v}")
        if np.any(np.diff(v[:, 0]) <= 0):
            raise UtilityNotMonotone(f"utility of A must strictly increase with the state: {v}")
        if np.any(np.diff(v[:, 1]) >= 0):
            raise UtilityNotMonotone(f"utility of R must strictly decrease with the state: {v}")
        if np.any(v[:, 0] == v[:, 1]):
            raise UtilityNotMonotone(f"no state may be indifferent between A and R: {v}")

    def __eq__(self, other):
        return isinstance(other, UtilityFn) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


class AgentTag(enum.Enum):
    FRIENDLY = "friendly"
    UNFRIENDLY = "unfriendly"
    CONTINGENT = "contingent"


@dataclass(frozen=True)
class AgentType:
    """Classification of an agent plus her preference thresholds.

    ``low_threshold`` is the number of states in which the agent prefers R
    (equivalently the 1-based index of the largest such state, 0 if none);
    ``high_threshold`` is always ``low_threshold + 1``.
    """

    tag: AgentTag
    low_threshold: int
    high_threshold: int


@dataclass(frozen=True, eq=False)
class Strategy:
    """Per-signal accept probabilities; vote_probs[m] = Pr[vote A | signal m]."""

    vote_probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vote_probs", _readonly(self.vote_probs))

    @property
    def n_signals(self) -> int:
        return len(self.vote_probs)

    def validate(self):
        if np.any(self.vote_probs < 0.0) or np.any(self.vote_probs > 1.0):
            raise ValidationError(f"vote probabilities must lie in [0, 1]: {self.vote_probs}")

    def __eq__(self, other):
        return isinstance(other, Strategy) and np.array_equal(self.vote_probs, other.vote_probs)

    def __hash__(self):
        return hash(self.vote_probs.tobytes())


def informative_strategy() -> Strategy:
    """Binary strategy that votes A exactly on the high signal."""
    return Strategy(np.array([0.0, 1.0]))


def always_accept(n_signals: int = 2) -> Strategy:
    return Strategy(np.ones(n_signals))


def always_reject(n_signals: int = 2) -> Strategy:
    return Strategy(np.zeros(n_signals))


@dataclass(frozen=True, eq=False)
class Profile:
    """One strategy per agent."""

    strategies: tuple

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def __len__(self):
        return len(self.strategies)

    @cached_property
    def matrix(self) -> np.ndarray:
        """(N, M) matrix of per-agent vote probabilities."""
        return _readonly([s.vote_probs for s in self.strategies])

    def replace(self, updates: dict) -> "Profile":
        """New profile with the strategies of the given agent indices replaced."""
        strategies = list(self.strategies)
        for idx, strategy in updates.items():
            strategies[idx] = strategy
        return Profile(tuple(strategies))

    def is_regular(self, inst: "Instance") -> bool:
        """Friendly agents always vote A and unfriendly agents always vote R."""
        for strategy, agent_type in zip(self.strategies, inst.agent_types):
            if agent_type.tag is AgentTag.FRIENDLY and np.any(strategy.vote_probs != 1.0):
                return False
            if agent_type.tag is AgentTag.UNFRIENDLY and np.any(strategy.vote_probs != 0.0):
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, Profile) and self.strategies == other.strategies


def _state_partition(alpha_accept: np.ndarray, threshold: float):
    """Split states into those where R wins a fully informed vote and those where A does."""
    low, high = [], []
    for w, alpha in enumerate(alpha_accept):
        if abs(alpha - threshold) <= STOCHASTIC_TOL:
            raise KnifeEdgeThreshold(
                f"fraction preferring A in state {w} equals the threshold {threshold}"
            )
        (high if alpha > threshold else low).append(w)
    if not low or not high:
        raise DegenerateMajority(
            "the informed majority decision must depend on the state "
            f"(fractions preferring A: {alpha_accept}, threshold {threshold})"
        )
    return tuple(low), tuple(high)


def classify_agent(utility: UtilityFn, inst) -> AgentType:
    """Classify a validated utility function against an instance or family.

    An agent is friendly if she prefers A in some state where the informed
    majority decision is R, unfriendly if she prefers R in some state where
    it is A, and contingent if her preference matches the informed majority
    decision in every state.
    """
    l_n = utility.n_reject_states
    n_low = len(inst.low_states)
    if l_n < n_low:
        tag = AgentTag.FRIENDLY
    elif l_n == n_low:
        tag = AgentTag.CONTINGENT
    else:
        tag = AgentTag.UNFRIENDLY
    return AgentType(tag=tag, low_threshold=l_n, high_threshold=l_n + 1)


def _type_fractions(groups, low_states):
    """(alpha_F, alpha_U, alpha_C) from group fractions, by the threshold rule."""
    n_low = len(low_states)
    alpha_f = alpha_u = 0.0
    for utility, fraction in groups:
        l_n = utility.n_reject_states
        if l_n < n_low:
            alpha_f += fraction
        elif l_n > n_low:
            alpha_u += fraction
    return alpha_f, alpha_u, 1.0 - alpha_f - alpha_u


def _type_counts(setting: str, alpha_f: float, alpha_u: float, n: int):
    if setting == SETTING_BINARY:
        n_f = stable_floor(alpha_f * n)
        n_u = stable_floor(alpha_u * n)
    else:
        n_f = n - stable_floor((1.0 - alpha_f) * n)
        n_u = stable_floor(alpha_u * n)
    return n_f, n_u, n - n_f - n_u


@dataclass(frozen=True, eq=False)
class InstanceFamily:
    """N-independent parameters of a voting game: threshold, prior, channel,
    and agent groups given as (utility, population fraction) pairs.

    Concrete instances are materialized deterministically for any N via
    :meth:`instantiate`.
    """

    threshold: float
    prior: StatePrior
    channel: SignalChannel
    groups: tuple
    setting: str = SETTING_BINARY

    def __post_init__(self):
        object.__setattr__(
            self, "groups", tuple((u, float(f)) for u, f in self.groups)
        )

    @cached_property
    def alpha_accept(self) -> np.ndarray:
        """Per-state fraction of the population preferring A."""
        acc = np.zeros(self.prior.n_states)
        for utility, fraction in self.groups:
            for w in range(self.prior.n_states):
                if utility.prefers_accept(w):
                    acc[w] += fraction
        acc.setflags(write=False)
        return acc

    @cached_property
    def _partition(self):
        return _state_partition(self.alpha_accept, self.threshold)

    @property
    def low_states(self):
        return self._partition[0]

    @property
    def high_states(self):
        return self._partition[1]

    @cached_property
    def alpha_fractions(self):
        """(alpha_F, alpha_U, alpha_C)."""
        return _type_fractions(self.groups, self.low_states)

    def validate(self) -> "InstanceFamily":
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError(f"threshold must lie in (0, 1): {self.threshold}")
        self.prior.validate()
        self.channel.validate(self.setting)
        if self.prior.n_states != self.channel.n_states:
            raise ValidationError("prior and channel disagree on the number of states")
        if not self.groups:
            raise ValidationError("at least one agent group is required")
        fractions = [f for _, f in self.groups]
        if min(fractions) <= 0.0 or abs(sum(fractions) - 1.0) > STOCHASTIC_TOL:
            raise ValidationError(f"group fractions must be positive and sum to 1: {fractions}")
        for utility, _ in self.groups:
            if utility.n_states != self.prior.n_states:
                raise ValidationError("utility table does not match the number of states")
            utility.validate()
        self._partition  # raises KnifeEdgeThreshold / DegenerateMajority
        return self

    def instantiate(self, n_agents: int) -> "Instance":
        """Materialize a validated instance of n_agents agents.

        Type counts follow the setting's rounding rule; within a type, the
        count is split over that type's groups in input order by cumulative
        proportional flooring, so expansion is deterministic.
        """
        self.validate()
        if n_agents < 1:
            raise ValidationError(f"n_agents must be positive: {n_agents}")
        alpha_f, alpha_u, _ = self.alpha_fractions
        n_by_type = dict(
            zip(
                (AgentTag.FRIENDLY, AgentTag.UNFRIENDLY, AgentTag.CONTINGENT),
                _type_counts(self.setting, alpha_f, alpha_u, n_agents),
            )
        )
        tags = [classify_agent(u, self).tag for u, _ in self.groups]
        counts = [0] * len(self.groups)
        for tag in set(tags):
            members = [i for i, t in enumerate(tags) if t is tag]
            total_fraction = sum(self.groups[i][1] for i in members)
            target = n_by_type[tag]
            cum = 0.0
            prev = 0
            for i in members:
                cum += self.groups[i][1]
                upto = stable_floor(target * (cum / total_fraction))
                counts[i] = upto - prev
                prev = upto
        agents = []
        for (utility, _), count in zip(self.groups, counts):
            agents.extend([utility] * count)
        inst = Instance(
            n_agents=n_agents,
            threshold=self.threshold,
            prior=self.prior,
            channel=self.channel,
            agents=tuple(agents),
            setting=self.setting,
            family=self,
        )
        return validate_instance(inst)

    def __eq__(self, other):
        return (
            isinstance(other, InstanceFamily)
            and self.threshold == other.threshold
            and self.prior == other.prior
            and self.channel == other.channel
            and self.setting == other.setting
            and self.groups == other.groups
        )


@dataclass(frozen=True, eq=False)
class Instance:
    """A complete voting game: N agents, winning threshold, prior, signal
    channel, and one utility function per agent.

    Instances materialized from an :class:`InstanceFamily` keep a reference to
    it and use the family's N-independent population fractions; instances
    built from an explicit agent list use realized fractions.
    """

    n_agents: int
    threshold: float
    prior: StatePrior
    channel: SignalChannel
    agents: tuple
    setting: str = SETTING_BINARY
    family: InstanceFamily | None = None

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))

    @property
    def n_states(self) -> int:
        return self.prior.n_states

    @property
    def n_signals(self) -> int:
        return self.channel.n_signals

    @property
    def winning_votes(self) -> int:
        """Accept votes needed for A to win."""
        return winning_vote_count(self.threshold, self.n_agents)

    @cached_property
    def alpha_accept(self) -> np.ndarray:
        if self.family is not None:
            return self.family.alpha_accept
        acc = np.zeros(self.n_states)
        for utility in self.agents:
            for w in range(self.n_states):
                if utility.prefers_accept(w):
                    acc[w] += 1.0
        acc /= self.n_agents
        acc.setflags(write=False)
        return acc

    @cached_property
    def _partition(self):
        return _state_partition(self.alpha_accept, self.threshold)

    @property
    def low_states(self):
        """States where R is the informed majority decision."""
        return self._partition[0]

    @property
    def high_states(self):
        """States where A is the informed majority decision."""
        return self._partition[1]

    @cached_property
    def agent_types(self) -> tuple:
        return tuple(classify_agent(u, self) for u in self.agents)

    @cached_property
    def type_counts(self) -> dict:
        counts = {tag: 0 for tag in AgentTag}
        for agent_type in self.agent_types:
            counts[agent_type.tag] += 1
        return counts

    @cached_property
    def alpha_fractions(self):
        """(alpha_F, alpha_U, alpha_C), N-independent when group-built."""
        if self.family is not None:
            return self.family.alpha_fractions
        counts = self.type_counts
        return (
            counts[AgentTag.FRIENDLY] / self.n_agents,
            counts[AgentTag.UNFRIENDLY] / self.n_agents,
            counts[AgentTag.CONTINGENT] / self.n_agents,
        )

    @cached_property
    def utility_bound(self) -> int:
        """Smallest B with every utility value in {0, ..., B}."""
        return max(int(u.values.max()) for u in self.agents)

    def contingent_indices(self) -> tuple:
        return tuple(
            i for i, t in enumerate(self.agent_types) if t.tag is AgentTag.CONTINGENT
        )

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.n_agents == other.n_agents
            and self.threshold == other.threshold
            and self.prior == other.prior
            and self.channel == other.channel
            and self.setting == other.setting
            and self.agents == other.agents
        )


def validate_instance(inst: Instance) -> Instance:
    """Check every model assumption, reporting the first violation.

    Check order: threshold range, prior, channel (stochastic rows, then
    positive correlation or stochastic dominance), utilities, knife-edge
    threshold, degenerate majority, and finally, for group-built instances,
    that integer rounding of the group counts does not flip the informed
    majority decision in any state.
    """
    if not 0.0 < inst.threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1): {inst.threshold}")
    inst.prior.validate()
    inst.channel.validate(inst.setting)
    if inst.prior.n_states != inst.channel.n_states:
        raise ValidationError("prior and channel disagree on the number of states")
    if inst.setting == SETTING_BINARY and inst.n_states != 2:
        raise ValidationError("binary instances must have exactly two states")
    if len(inst.agents) != inst.n_agents:
        raise ValidationError(
            f"expected {inst.n_agents} utility functions, got {len(inst.agents)}"
        )
    for i, utility in enumerate(inst.agents):
        if utility.n_states != inst.n_states:
            raise ValidationError(f"agent {i}: utility table does not match state count")
        utility.validate()
    inst._partition  # raises KnifeEdgeThreshold / DegenerateMajority
    if inst.family is not None:
        needed = inst.winning_votes
        for w in range(inst.n_states):
            realized = sum(1 for u in inst.agents if u.prefers_accept(w))
            if (realized >= needed) != (w in inst.high_states):
                raise RoundingFlipsMajority(
                    f"state {w}: rounding the group counts flips the informed "
                    f"majority decision ({realized}/{inst.n_agents} prefer A, "
                    f"threshold {needed})"
                )
    return inst


def informed_majority(inst: Instance, state: int) -> str:
    """The alternative preferred by a mu-majority if the state were known."""
    return ACCEPT if state in inst.high_states else REJECT


def regular_profile(inst: Instance, contingent: Strategy) -> Profile:
    """Profile where predetermined agents play their dominant strategies and
    every contingent agent plays ``contingent``."""
    contingent.validate()
    strategies = []
    for agent_type in inst.agent_types:
        if agent_type.tag is AgentTag.FRIENDLY:
            strategies.append(always_accept(inst.n_signals))
        elif agent_type.tag is AgentTag.UNFRIENDLY:
            strategies.append(always_reject(inst.n_signals))
        else:
            strategies.append(contingent)
    return Profile(tuple(strategies))


def symmetric_profile(inst: Instance, sigma: Strategy) -> Profile:
    """Profile where every agent plays the same strategy."""
    sigma.validate()
    return Profile((sigma,) * inst.n_agents)
