import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from informed_majority import (
    Dichotomy,
    InstanceFamily,
    NonPositiveExcess,
    Profile,
    SequenceCase,
    SignalChannel,
    StatePrior,
    Strategy,
    UtilityFn,
    ZeroProbabilitySignal,
    ZeroVariance,
    always_accept,
    analyze,
    berry_esseen_gap_bound,
    classify_sequence,
    classify_symmetric,
    excess_share,
    hoeffding_lower_bound,
    informative_dichotomy,
    informative_strategy,
    posterior,
    regular_excess_share,
    regular_profile,
    sincere_dichotomy,
    sincere_profile,
    sincere_strategy,
    symmetric_profile,
)
from informed_majority.analysis import sincere_conditional_utilities
from informed_majority.gen import (
    random_binary_family,
    random_binary_instance,
    random_profile,
    random_regular_profile,
)

from conftest import make_family


def test_excess_share_reference_values(sharp_family, soft_family):
    informative = informative_strategy()
    ex = regular_excess_share(sharp_family, informative)
    assert ex.per_state_accept[1] == pytest.approx(0.05, abs=1e-12)
    assert ex.per_state_reject[0] == pytest.approx(0.3, abs=1e-12)
    ex = regular_excess_share(soft_family, informative)
    assert ex.per_state_accept[1] == pytest.approx(-0.025, abs=1e-12)
    ex = regular_excess_share(soft_family, Strategy(np.array([0.48, 0.96])))
    assert ex.per_state_accept[1] == pytest.approx(0.02, abs=1e-12)
    assert ex.per_state_reject[0] == pytest.approx(0.112, abs=1e-12)
    assert ex.minimum == pytest.approx(0.02, abs=1e-12)


def test_realized_excess_matches_family_form(sharp_family):
    # At sizes where the type counts are exact the materialized profile
    # reproduces the N-free values.
    inst = sharp_family.instantiate(20)
    profile = regular_profile(inst, informative_strategy())
    ex = excess_share(profile, inst)
    assert ex.per_state_accept[1] == pytest.approx(0.05, abs=1e-12)
    assert ex.per_state_reject[0] == pytest.approx(0.3, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_excess_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    inst = random_binary_instance(rng, int(rng.integers(2, 40)))
    profile = random_profile(rng, inst)
    ex = excess_share(profile, inst)
    assert np.all(ex.per_state_accept == -ex.per_state_reject)
    # The reject-side defining formula agrees with the stored negation.
    mean_accept = (inst.channel.cond_probs @ profile.matrix.T).mean(axis=1)
    direct = (1.0 - mean_accept) - (1.0 - inst.threshold)
    assert np.allclose(direct, ex.per_state_reject, atol=1e-12)
    relevant = [ex.per_state_accept[w] for w in inst.high_states]
    relevant += [ex.per_state_reject[w] for w in inst.low_states]
    assert ex.minimum == min(relevant)


def test_hoeffding_bound_values():
    assert hoeffding_lower_bound(0.05, 500) == pytest.approx(
        1.0 - 2.0 * math.exp(-2.5), abs=1e-15
    )
    assert hoeffding_lower_bound(0.3, 20) == pytest.approx(
        1.0 - 2.0 * math.exp(-3.6), abs=1e-15
    )
    assert hoeffding_lower_bound(0.01, 10) == 0.0  # clamped
    with pytest.raises(NonPositiveExcess):
        hoeffding_lower_bound(0.0, 100)
    with pytest.raises(NonPositiveExcess):
        hoeffding_lower_bound(-0.2, 100)


def test_hoeffding_bound_sound_on_random_profiles():
    from informed_majority import construct_sigma_prime

    rng = np.random.default_rng(20240818)
    positives = negatives = 0
    for _ in range(40):
        family = random_binary_family(rng)
        for n in (50, 200):
            inst = family.instantiate(n)
            # A heterogeneous random profile plus the constructed profile,
            # whose margins are positive by design.
            candidates = [
                random_regular_profile(rng, inst),
                regular_profile(inst, construct_sigma_prime(family).sigma_prime),
            ]
            for profile in candidates:
                ex = excess_share(profile, inst)
                report = analyze(profile, inst)
                if ex.minimum > 0.0:
                    positives += 1
                    assert report.fidelity >= hoeffding_lower_bound(ex.minimum, n) - 1e-12
                # Upper deviation bound, exact form: a negative per-state margin
                # f caps the informed-majority win probability at exp(-2 f^2 N).
                for w in inst.high_states:
                    f = ex.per_state_accept[w]
                    if f < 0.0:
                        negatives += 1
                        assert report.lambda_accept[w] <= math.exp(-2.0 * f * f * n) + 1e-12
                for w in inst.low_states:
                    f = ex.per_state_reject[w]
                    if f < 0.0:
                        negatives += 1
                        assert report.lambda_reject[w] <= math.exp(-2.0 * f * f * n) + 1e-12
    assert positives >= 5 and negatives >= 5


def test_berry_esseen_iid_simplification(biased_family):
    n = 40
    inst = biased_family.instantiate(n)
    p = 0.37
    profile = symmetric_profile(inst, Strategy(np.array([p, p])))
    gap = berry_esseen_gap_bound(profile, inst, 0)
    rho = p * (1.0 - p) * (p**2 + (1.0 - p) ** 2)
    variance = p * (1.0 - p)
    assert gap == pytest.approx(0.5600 * n * rho / (n * variance) ** 1.5, rel=1e-12)


def test_berry_esseen_decays_like_inverse_sqrt(biased_family):
    sizes = [100, 1000, 10000, 100000]
    gaps = []
    for n in sizes:
        inst = biased_family.instantiate(n)
        profile = symmetric_profile(inst, Strategy(np.array([0.3, 0.7])))
        gaps.append(berry_esseen_gap_bound(profile, inst, 1))
    slope = np.polyfit(np.log(sizes), np.log(gaps), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


def test_berry_esseen_zero_variance(biased_family):
    inst = biased_family.instantiate(10)
    profile = Profile((always_accept(),) * 10)
    with pytest.raises(ZeroVariance):
        berry_esseen_gap_bound(profile, inst, 0)


def test_classify_symmetric_cases(sharp_family, soft_family):
    informative = informative_strategy()
    assert classify_symmetric(informative, sharp_family).verdict is Dichotomy.HIGH_FIDELITY
    soft = classify_symmetric(informative, soft_family)
    assert soft.verdict is Dichotomy.NOT_HIGH_FIDELITY
    assert not soft.knife_edge
    always = classify_symmetric(Strategy(np.array([1.0, 1.0])), sharp_family)
    assert always.verdict is Dichotomy.NOT_HIGH_FIDELITY
    # alpha_U - (1 - mu) < 0 shows up on the reject side of the low state.
    assert always.excess.per_state_reject[0] == pytest.approx(0.3 - 0.4, abs=1e-12)


def test_classify_symmetric_knife_edge():
    contingent = UtilityFn(np.array([[0, 1], [1, 0]]))
    family = InstanceFamily(
        threshold=0.5,
        prior=StatePrior(np.array([0.5, 0.5])),
        channel=SignalChannel(np.array([[0.8, 0.2], [0.2, 0.8]])),
        groups=((contingent, 1.0),),
    ).validate()
    verdict = classify_symmetric(Strategy(np.array([0.5, 0.5])), family)
    assert verdict.excess.minimum == 0.0
    assert verdict.knife_edge
    assert verdict.verdict is Dichotomy.NOT_HIGH_FIDELITY
    assert verdict.variance_floor > 0.0


def test_classify_sequence_three_regimes(sharp_family, soft_family):
    sample_ns = (20, 50, 100, 200, 500)
    informative = informative_strategy()

    def informative_profile(inst):
        return regular_profile(inst, informative)

    verdict = classify_sequence(informative_profile, sharp_family, sample_ns)
    assert verdict.case is SequenceCase.CONVERGES_TO_ONE

    verdict = classify_sequence(informative_profile, soft_family, sample_ns)
    assert verdict.case is SequenceCase.FAILS_NEGATIVE

    contingent = UtilityFn(np.array([[0, 1], [1, 0]]))
    knife = InstanceFamily(
        threshold=0.5,
        prior=StatePrior(np.array([0.5, 0.5])),
        channel=SignalChannel(np.array([[0.8, 0.2], [0.2, 0.8]])),
        groups=((contingent, 1.0),),
    ).validate()
    flat = Strategy(np.array([0.5, 0.5]))
    verdict = classify_sequence(lambda inst: regular_profile(inst, flat), knife, sample_ns)
    assert verdict.case is SequenceCase.FAILS_BOUNDED_VARIANCE
    assert all(v >= 0.01 for v in verdict.evidence.variance_ratios)
    # The diagnostic ceilings keep the binding state's win probability away
    # from 1 once the normal-approximation gap has shrunk.
    assert all(c is not None for c in verdict.evidence.win_prob_ceilings)
    assert verdict.evidence.win_prob_ceilings[-1] < 0.75


def test_classify_sequence_undetermined(sharp_family):
    informative = informative_strategy()
    accept = Strategy(np.array([1.0, 1.0]))

    def alternating(inst):
        sigma = informative if (inst.n_agents // 10) % 2 == 0 else accept
        return regular_profile(inst, sigma)

    verdict = classify_sequence(alternating, sharp_family, (20, 30, 40, 50, 60))
    assert verdict.case is SequenceCase.UNDETERMINED


def test_classify_sequence_input_validation(sharp_family):
    with pytest.raises(ValueError):
        classify_sequence(lambda inst: None, sharp_family, (10, 20, 30))


def test_informative_dichotomy_examples():
    family = make_family(0.2, 0.9, mu=0.6)
    verdict = informative_dichotomy(family)
    assert verdict.verdict is Dichotomy.HIGH_FIDELITY
    assert verdict.excess_high == pytest.approx(0.3, abs=1e-12)
    assert verdict.excess_low == pytest.approx(0.4, abs=1e-12)
    # A threshold above the high-signal probability fails.
    contingent = UtilityFn(np.array([[0, 1], [1, 0]]))
    family = InstanceFamily(
        threshold=0.95,
        prior=StatePrior(np.array([0.5, 0.5])),
        channel=SignalChannel(np.array([[0.5, 0.5], [0.1, 0.9]])),
        groups=((contingent, 1.0),),
    ).validate()
    assert informative_dichotomy(family).verdict is Dichotomy.NOT_HIGH_FIDELITY


def test_informative_dichotomy_matches_symmetric_classifier():
    rng = np.random.default_rng(11)
    contingent = UtilityFn(np.array([[0, 1], [1, 0]]))
    informative = informative_strategy()
    for _ in range(300):
        p_low = rng.uniform(0.02, 0.9)
        p_high = rng.uniform(p_low + 0.02, 0.95)
        mu = rng.uniform(0.05, 0.95)
        family = InstanceFamily(
            threshold=mu,
            prior=StatePrior(np.array([0.5, 0.5])),
            channel=SignalChannel(
                np.array([[1.0 - p_low, p_low], [1.0 - p_high, p_high]])
            ),
            groups=((contingent, 1.0),),
        ).validate()
        assert (
            informative_dichotomy(family).verdict
            is classify_symmetric(informative, family).verdict
        )


def test_posterior_values():
    prior = StatePrior(np.array([0.5, 0.5]))
    channel = SignalChannel(np.array([[0.8, 0.2], [0.2, 0.8]]))
    assert posterior(prior, channel, 1)[1] == pytest.approx(0.8, abs=1e-12)
    biased_prior = StatePrior(np.array([0.6, 0.4]))
    biased_channel = SignalChannel(np.array([[0.4, 0.6], [0.2, 0.8]]))
    # By hand: P(H) P(h|H) / (P(H) P(h|H) + P(L) P(h|L)) = 0.32 / 0.68.
    assert posterior(biased_prior, biased_channel, 1)[1] == pytest.approx(
        0.32 / 0.68, abs=1e-12
    )


def test_posterior_uninformative_and_degenerate():
    prior = StatePrior(np.array([0.3, 0.7]))
    flat = SignalChannel(np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert np.allclose(posterior(prior, flat, 0), prior.probs, atol=1e-12)
    point = SignalChannel(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(posterior(prior, point, 1), [0.0, 1.0], atol=0)
    missing = SignalChannel(np.array([[1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(ZeroProbabilitySignal):
        posterior(prior, missing, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9), st.integers(0, 1))
def test_posterior_normalization(seed, signal):
    rng = np.random.default_rng(seed)
    family = random_binary_family(rng)
    post = posterior(family.prior, family.channel, signal)
    assert abs(post.sum() - 1.0) <= 1e-12
    assert np.all(post >= 0.0)


SINCERE_PRIOR = StatePrior(np.array([0.5, 0.5]))
SINCERE_CHANNEL = SignalChannel(np.array([[0.8, 0.2], [0.2, 0.8]]))


def test_sincere_strategy_cases():
    symmetric = UtilityFn(np.array([[0, 1], [1, 0]]))
    assert sincere_strategy(symmetric, SINCERE_PRIOR, SINCERE_CHANNEL) == informative_strategy()

    accept_biased = UtilityFn(np.array([[1, 2], [5, 0]]))
    accept_utils, reject_utils = sincere_conditional_utilities(
        accept_biased, SINCERE_PRIOR, SINCERE_CHANNEL
    )
    assert accept_utils[0] == pytest.approx(1.8, abs=1e-12)
    assert reject_utils[0] == pytest.approx(1.6, abs=1e-12)
    assert accept_utils[1] == pytest.approx(4.2, abs=1e-12)
    assert reject_utils[1] == pytest.approx(0.4, abs=1e-12)
    assert sincere_strategy(accept_biased, SINCERE_PRIOR, SINCERE_CHANNEL) == Strategy(
        np.array([1.0, 1.0])
    )

    low_tie = UtilityFn(np.array([[1, 2], [4, 0]]))
    accept_utils, reject_utils = sincere_conditional_utilities(
        low_tie, SINCERE_PRIOR, SINCERE_CHANNEL
    )
    assert accept_utils[0] == pytest.approx(1.6, abs=1e-12)
    assert reject_utils[0] == pytest.approx(1.6, abs=1e-12)
    assert accept_utils[1] == pytest.approx(3.4, abs=1e-12)
    assert reject_utils[1] == pytest.approx(0.4, abs=1e-12)
    assert sincere_strategy(low_tie, SINCERE_PRIOR, SINCERE_CHANNEL, tie_break=0.3) == Strategy(
        np.array([0.3, 1.0])
    )


def test_sincere_profile_is_regular():
    rng = np.random.default_rng(21)
    for _ in range(25):
        inst = random_binary_instance(rng, int(rng.integers(3, 30)))
        profile = sincere_profile(inst, tie_break=float(rng.uniform(0, 1)))
        assert profile.is_regular(inst)


def test_sincere_dichotomy_cases():
    def family_with(utility, mu):
        return InstanceFamily(
            threshold=mu,
            prior=SINCERE_PRIOR,
            channel=SINCERE_CHANNEL,
            groups=((UtilityFn(np.array(utility)), 1.0),),
        ).validate()

    informative_case = family_with([[0, 1], [1, 0]], 0.5)
    verdict = sincere_dichotomy(informative_case)
    assert verdict.verdict is Dichotomy.HIGH_FIDELITY
    assert verdict.epsilon_strong_asymptotically

    accept_case = family_with([[1, 2], [5, 0]], 0.5)
    verdict = sincere_dichotomy(accept_case)
    assert verdict.verdict is Dichotomy.NOT_HIGH_FIDELITY
    assert not verdict.epsilon_strong_asymptotically

    tie_case = family_with([[1, 2], [4, 0]], 0.6)
    # The tie-broken accept probability on the low signal keeps both margins
    # positive exactly between 5 mu - 4 and 1.25 mu - 0.25.
    assert sincere_dichotomy(tie_case, tie_break=0.2).verdict is Dichotomy.HIGH_FIDELITY
    assert sincere_dichotomy(tie_case, tie_break=0.6).verdict is Dichotomy.NOT_HIGH_FIDELITY


def test_informative_threshold_window():
    # With symmetric 0.8 signals, informative voting succeeds exactly for
    # thresholds strictly between 0.2 and 0.8.
    contingent = UtilityFn(np.array([[0, 1], [1, 0]]))
    for mu, high in ((0.3, True), (0.5, True), (0.79, True), (0.85, False), (0.15, False)):
        family = InstanceFamily(
            threshold=mu,
            prior=SINCERE_PRIOR,
            channel=SINCERE_CHANNEL,
            groups=((contingent, 1.0),),
        ).validate()
        verdict = informative_dichotomy(family)
        assert (verdict.verdict is Dichotomy.HIGH_FIDELITY) == high
