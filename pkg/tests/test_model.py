import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from informed_majority import (
    ACCEPT,
    REJECT,
    AgentTag,
    DegenerateMajority,
    Instance,
    InstanceFamily,
    KnifeEdgeThreshold,
    NoPositiveCorrelation,
    NoStochasticDominance,
    NonPositivePrior,
    Profile,
    RoundingFlipsMajority,
    RowNotStochastic,
    SignalChannel,
    StatePrior,
    Strategy,
    UtilityFn,
    UtilityNotMonotone,
    always_accept,
    always_reject,
    classify_agent,
    informative_strategy,
    informed_majority,
    regular_profile,
    validate_instance,
    winning_vote_count,
)
from informed_majority.gen import random_binary_family, random_nonbinary_family

from conftest import CONTINGENT_UTILITY, FRIENDLY_UTILITY, GROUPS, PRIOR, UNFRIENDLY_UTILITY


def test_biased_instance_counts_and_tags(biased_family):
    inst = biased_family.instantiate(20)
    counts = inst.type_counts
    assert counts[AgentTag.FRIENDLY] == 4
    assert counts[AgentTag.UNFRIENDLY] == 6
    assert counts[AgentTag.CONTINGENT] == 10
    assert inst.winning_votes == 12
    assert informed_majority(inst, 1) == ACCEPT
    assert informed_majority(inst, 0) == REJECT
    assert inst.utility_bound == 8


def test_binary_classification_thresholds(biased_family):
    inst = biased_family.instantiate(20)
    friendly = classify_agent(FRIENDLY_UTILITY, inst)
    assert friendly.tag is AgentTag.FRIENDLY
    assert (friendly.low_threshold, friendly.high_threshold) == (0, 1)
    contingent = classify_agent(CONTINGENT_UTILITY, inst)
    assert contingent.tag is AgentTag.CONTINGENT
    assert (contingent.low_threshold, contingent.high_threshold) == (1, 2)
    unfriendly = classify_agent(UNFRIENDLY_UTILITY, inst)
    assert unfriendly.tag is AgentTag.UNFRIENDLY
    assert (unfriendly.low_threshold, unfriendly.high_threshold) == (2, 3)


def test_always_accept_preference_is_friendly(biased_family):
    inst = biased_family.instantiate(20)
    agent_type = classify_agent(UtilityFn(np.array([[5, 4], [9, 0]])), inst)
    assert agent_type.tag is AgentTag.FRIENDLY
    assert agent_type.low_threshold == 0


def test_three_state_instance(three_state_family):
    inst = three_state_family.instantiate(20)
    assert inst.low_states == (0, 1)
    assert inst.high_states == (2,)
    assert [informed_majority(inst, w) for w in range(3)] == [REJECT, REJECT, ACCEPT]
    tags = [inst.agent_types[i].tag for i in (0, 5, 10, 15)]
    assert tags == [
        AgentTag.UNFRIENDLY,
        AgentTag.CONTINGENT,
        AgentTag.FRIENDLY,
        AgentTag.FRIENDLY,
    ]
    counts = inst.type_counts
    assert counts[AgentTag.FRIENDLY] == 10
    assert counts[AgentTag.UNFRIENDLY] == 5
    assert counts[AgentTag.CONTINGENT] == 5


def test_nonbinary_rounding_rule(three_state_family):
    # N_F rounds up through the complement, N_U rounds down.
    inst = three_state_family.instantiate(21)
    counts = inst.type_counts
    assert counts[AgentTag.FRIENDLY] == 21 - (21 * 1) // 2  # 1 - alpha_F = 0.5
    assert counts[AgentTag.UNFRIENDLY] == 5
    assert sum(counts.values()) == 21


def test_predetermined_never_dominate(three_state_family):
    # For every materialized size the friendly block stays below the winning
    # fraction and the unfriendly block below the complementary one.
    for n in range(20, 200, 7):
        inst = three_state_family.instantiate(n)
        counts = inst.type_counts
        assert counts[AgentTag.FRIENDLY] / n < inst.threshold
        assert counts[AgentTag.UNFRIENDLY] / n < 1.0 - inst.threshold


def test_binary_rounding_rule(sharp_family):
    inst = sharp_family.instantiate(37)
    counts = inst.type_counts
    assert counts[AgentTag.FRIENDLY] == 7  # floor(0.2 * 37)
    assert counts[AgentTag.UNFRIENDLY] == 11  # floor(0.3 * 37)
    assert counts[AgentTag.CONTINGENT] == 19
    # Expansion is group-by-group in input order.
    assert inst.agents[:7] == (FRIENDLY_UTILITY,) * 7
    assert inst.agents[7:18] == (UNFRIENDLY_UTILITY,) * 11


def test_winning_vote_count():
    assert winning_vote_count(0.6, 20) == 12
    assert winning_vote_count(0.5, 5) == 3
    assert winning_vote_count(0.7, 10) == 7
    assert winning_vote_count(0.6, 500) == 300  # guards against 0.6 * 500 = 300.00000000000006


def test_validate_idempotent(biased_family):
    inst = biased_family.instantiate(20)
    assert validate_instance(validate_instance(inst)) is inst


def test_nonpositive_prior():
    with pytest.raises(NonPositivePrior):
        StatePrior(np.array([0.0, 1.0])).validate()
    with pytest.raises(NonPositivePrior):
        StatePrior(np.array([0.5, 0.6])).validate()


def test_row_not_stochastic():
    with pytest.raises(RowNotStochastic):
        SignalChannel(np.array([[0.5, 0.4], [0.2, 0.8]])).validate("binary")
    with pytest.raises(RowNotStochastic):
        SignalChannel(np.array([[1.2, -0.2], [0.2, 0.8]])).validate("binary")


def test_no_positive_correlation():
    with pytest.raises(NoPositiveCorrelation):
        SignalChannel(np.array([[0.5, 0.5], [0.5, 0.5]])).validate("binary")


def test_no_stochastic_dominance():
    rows = np.array([[0.1, 0.2, 0.3, 0.4], [0.4, 0.2, 0.2, 0.2], [0.6, 0.2, 0.1, 0.1]])
    with pytest.raises(NoStochasticDominance):
        SignalChannel(rows).validate("nonbinary")


def test_utility_not_monotone():
    with pytest.raises(UtilityNotMonotone):
        UtilityFn(np.array([[8, 4], [6, 2]])).validate()  # A not increasing
    with pytest.raises(UtilityNotMonotone):
        UtilityFn(np.array([[4, 2], [8, 5]])).validate()  # R not decreasing
    with pytest.raises(UtilityNotMonotone):
        UtilityFn(np.array([[4, 4], [8, 2]])).validate()  # indifferent state


def test_degenerate_majority():
    family = InstanceFamily(
        threshold=0.95,
        prior=PRIOR,
        channel=SignalChannel(np.array([[0.4, 0.6], [0.2, 0.8]])),
        groups=GROUPS,
    )
    with pytest.raises(DegenerateMajority):
        family.validate()


def test_knife_edge_threshold():
    groups = (
        (FRIENDLY_UTILITY, 0.2),
        (UNFRIENDLY_UTILITY, 0.4),
        (CONTINGENT_UTILITY, 0.4),
    )
    family = InstanceFamily(
        threshold=0.6,
        prior=PRIOR,
        channel=SignalChannel(np.array([[0.4, 0.6], [0.2, 0.8]])),
        groups=groups,
    )
    with pytest.raises(KnifeEdgeThreshold):
        family.validate()


def test_rounding_flip_rejected():
    # Fractions put state 1 just below the threshold, but the rounded-up
    # friendly block reaches the winning count, flipping the decision.
    channel = SignalChannel(
        np.array([[0.6, 0.3, 0.1], [0.3, 0.4, 0.3], [0.1, 0.3, 0.6]])
    )
    prior = StatePrior(np.array([1 / 3, 1 / 3, 1 / 3]))
    near_majority = UtilityFn(np.array([[2, 5], [6, 3], [7, 1]]))  # prefers A from state 1
    top_only = UtilityFn(np.array([[1, 9], [2, 8], [8, 3]]))  # prefers A in state 2 only
    family = InstanceFamily(
        threshold=0.5,
        prior=prior,
        channel=channel,
        groups=((near_majority, 0.49), (top_only, 0.51)),
        setting="nonbinary",
    )
    with pytest.raises(RoundingFlipsMajority):
        family.instantiate(50)


def test_profile_helpers(biased_family):
    inst = biased_family.instantiate(20)
    profile = regular_profile(inst, informative_strategy())
    assert profile.is_regular(inst)
    assert len(profile) == 20
    assert profile.strategies[0] == always_accept()
    assert profile.strategies[7] == always_reject()
    flipped = profile.replace({0: always_reject()})
    assert not flipped.is_regular(inst)
    assert profile.strategies[0] == always_accept()  # original untouched


def test_strategy_validation():
    with pytest.raises(Exception):
        Strategy(np.array([0.5, 1.2])).validate()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(2, 60))
def test_every_agent_gets_exactly_one_tag(seed, n_agents):
    rng = np.random.default_rng(seed)
    family = random_binary_family(rng)
    inst = family.instantiate(n_agents)
    assert len(inst.agent_types) == n_agents
    counts = inst.type_counts
    assert sum(counts.values()) == n_agents
    # Counts agree with the rounding formulas.
    alpha_f, alpha_u, _ = family.alpha_fractions
    assert counts[AgentTag.FRIENDLY] == int(np.floor(round(alpha_f * n_agents, 9)))
    assert counts[AgentTag.UNFRIENDLY] == int(np.floor(round(alpha_u * n_agents, 9)))
    # The fraction preferring A never decreases with the state.
    assert np.all(np.diff(inst.alpha_accept) >= 0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**9))
def test_nonbinary_families_classify_consistently(seed):
    rng = np.random.default_rng(seed)
    family = random_nonbinary_family(rng)
    inst = family.instantiate(40)
    n_low = len(inst.low_states)
    for utility, agent_type in zip(inst.agents, inst.agent_types):
        l_n = utility.n_reject_states
        if agent_type.tag is AgentTag.FRIENDLY:
            assert l_n < n_low
        elif agent_type.tag is AgentTag.CONTINGENT:
            assert l_n == n_low
        else:
            assert l_n > n_low


def test_explicit_agents_use_realized_fractions():
    agents = (FRIENDLY_UTILITY,) * 2 + (CONTINGENT_UTILITY,) * 5 + (UNFRIENDLY_UTILITY,) * 3
    inst = validate_instance(
        Instance(
            n_agents=10,
            threshold=0.6,
            prior=PRIOR,
            channel=SignalChannel(np.array([[0.4, 0.6], [0.2, 0.8]])),
            agents=agents,
        )
    )
    assert inst.alpha_fractions == (0.2, 0.3, 0.5)
    assert np.allclose(inst.alpha_accept, [0.2, 0.7])
