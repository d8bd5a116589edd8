"""Random voting-game generators for property tests and fuzzing."""

from __future__ import annotations

import numpy as np

from .model import (
    Instance,
    InstanceFamily,
    Profile,
    SignalChannel,
    StatePrior,
    Strategy,
    UtilityFn,
    regular_profile,
)


def _chain_utilities(rng, order, n_states: int, bound: int = 9) -> UtilityFn:
    """Utility table whose (state, outcome) values realize the given preference
    pattern: order[w] is True where A must beat R in state w."""
    while True:
        accept = np.sort(rng.integers(0, bound + 1, size=n_states))
        reject = np.sort(rng.integers(0, bound + 1, size=n_states))[::-1]
        if np.any(np.diff(accept) <= 0) or np.any(np.diff(reject) >= 0):
            continue
        ok = all((accept[w] > reject[w]) == order[w] for w in range(n_states))
        if ok and np.all(accept != reject):
            return UtilityFn(np.stack([accept, reject], axis=1))


def random_binary_family(rng: np.random.Generator) -> InstanceFamily:
    """Random valid binary family with friendly, unfriendly, and contingent groups."""
    mu = rng.uniform(0.25, 0.75)
    alpha_f = rng.uniform(0.0, mu - 0.05)
    alpha_u = rng.uniform(0.0, (1.0 - mu) - 0.05)
    alpha_c = 1.0 - alpha_f - alpha_u
    p_high_low = rng.uniform(0.05, 0.85)
    p_high_high = rng.uniform(p_high_low + 0.05, 0.95)
    prior_high = rng.uniform(0.1, 0.9)
    friendly = _chain_utilities(rng, [True, True], 2)
    unfriendly = _chain_utilities(rng, [False, False], 2)
    contingent = _chain_utilities(rng, [False, True], 2)
    groups = []
    if alpha_f > 0.01:
        groups.append((friendly, alpha_f))
    else:
        alpha_c += alpha_f
    if alpha_u > 0.01:
        groups.append((unfriendly, alpha_u))
    else:
        alpha_c += alpha_u
    groups.append((contingent, alpha_c))
    return InstanceFamily(
        threshold=mu,
        prior=StatePrior(np.array([1.0 - prior_high, prior_high])),
        channel=SignalChannel(
            np.array([[1.0 - p_high_low, p_high_low], [1.0 - p_high_high, p_high_high]])
        ),
        groups=tuple(groups),
    ).validate()


def random_nonbinary_family(
    rng: np.random.Generator, n_states: int = 3, n_signals: int = 4
) -> InstanceFamily:
    """Random valid family with several states and signals."""
    while True:
        # Stochastically dominated rows: shift a base distribution upward.
        rows = []
        base = rng.dirichlet(np.ones(n_signals))
        for w in range(n_states):
            weights = base * np.exp(rng.uniform(0.8, 1.6) * w * np.arange(n_signals))
            rows.append(weights / weights.sum())
        channel = SignalChannel(np.array(rows))
        try:
            channel.validate("nonbinary")
        except Exception:
            continue
        mu = rng.uniform(0.3, 0.7)
        # One group per preference threshold; thresholds cover both sides of mu.
        fractions = rng.dirichlet(np.ones(n_states + 1))
        groups = []
        for l_n in range(n_states + 1):
            order = [w >= l_n for w in range(n_states)]
            groups.append((_chain_utilities(rng, order, n_states), float(fractions[l_n])))
        prior = rng.dirichlet(np.ones(n_states)) * 0.9 + 0.1 / n_states
        family = InstanceFamily(
            threshold=mu,
            prior=StatePrior(prior / prior.sum()),
            channel=channel,
            groups=tuple(groups),
            setting="nonbinary",
        )
        try:
            family.validate()
        except Exception:
            continue
        # A clear margin keeps integer rounding from flipping the informed
        # majority decision at moderate instance sizes.
        if np.min(np.abs(family.alpha_accept - mu)) < 0.1:
            continue
        return family


def random_strategy(rng: np.random.Generator, n_signals: int = 2) -> Strategy:
    return Strategy(rng.uniform(0.0, 1.0, size=n_signals))


def random_profile(rng: np.random.Generator, inst: Instance) -> Profile:
    """Fully heterogeneous profile: every agent gets an independent strategy."""
    return Profile(tuple(random_strategy(rng, inst.n_signals) for _ in range(inst.n_agents)))


def random_regular_profile(rng: np.random.Generator, inst: Instance) -> Profile:
    """Regular profile with independent random strategies for contingent agents."""
    base = regular_profile(inst, random_strategy(rng, inst.n_signals))
    updates = {
        i: random_strategy(rng, inst.n_signals) for i in inst.contingent_indices()
    }
    return base.replace(updates)


def random_binary_instance(rng: np.random.Generator, n_agents: int) -> Instance:
    return random_binary_family(rng).instantiate(n_agents)
