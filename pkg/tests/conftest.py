import numpy as np
import pytest

from informed_majority import (
    InstanceFamily,
    SignalChannel,
    StatePrior,
    UtilityFn,
)

FRIENDLY_UTILITY = UtilityFn(np.array([[6, 4], [8, 2]]))
UNFRIENDLY_UTILITY = UtilityFn(np.array([[1, 8], [3, 5]]))
CONTINGENT_UTILITY = UtilityFn(np.array([[2, 8], [3, 1]]))

GROUPS = (
    (FRIENDLY_UTILITY, 0.2),
    (UNFRIENDLY_UTILITY, 0.3),
    (CONTINGENT_UTILITY, 0.5),
)

PRIOR = StatePrior(np.array([0.6, 0.4]))


def make_family(p_high_low: float, p_high_high: float, mu: float = 0.6) -> InstanceFamily:
    channel = SignalChannel(
        np.array([[1.0 - p_high_low, p_high_low], [1.0 - p_high_high, p_high_high]])
    )
    return InstanceFamily(
        threshold=mu, prior=PRIOR, channel=channel, groups=GROUPS
    ).validate()


@pytest.fixture(scope="session")
def biased_family():
    """N=20 reference setting: biased signals, P[h|H]=0.8, P[h|L]=0.6."""
    return make_family(0.6, 0.8)


@pytest.fixture(scope="session")
def sharp_family():
    """Sweep setting, case with sharp signals: P[h|H]=0.9, P[h|L]=0.2."""
    return make_family(0.2, 0.9)


@pytest.fixture(scope="session")
def soft_family():
    """Sweep setting, case with soft signals: P[h|H]=0.75, P[h|L]=0.2."""
    return make_family(0.2, 0.75)


@pytest.fixture(scope="session")
def three_state_family():
    """Three states, four signals, one group per preference threshold."""
    channel = SignalChannel(
        np.array(
            [
                [0.6, 0.2, 0.1, 0.1],
                [0.4, 0.2, 0.2, 0.2],
                [0.1, 0.2, 0.3, 0.4],
            ]
        )
    )
    groups = (
        (UtilityFn(np.array([[1, 8], [2, 6], [3, 4]])), 0.25),
        (UtilityFn(np.array([[2, 6], [3, 4], [4, 2]])), 0.25),
        (UtilityFn(np.array([[2, 4], [5, 3], [8, 2]])), 0.25),
        (UtilityFn(np.array([[4, 3], [6, 2], [9, 1]])), 0.25),
    )
    return InstanceFamily(
        threshold=0.6,
        prior=StatePrior(np.array([0.3, 0.3, 0.4])),
        channel=channel,
        groups=groups,
        setting="nonbinary",
    ).validate()
