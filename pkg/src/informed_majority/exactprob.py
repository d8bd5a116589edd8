"""Exact and Monte Carlo evaluation of vote outcomes.

Conditioned on a world state, the number of accept votes is a sum of
independent, non-identical Bernoulli trials (one per agent), i.e. a
Poisson-binomial variable.  Its probability mass function is computed exactly
by incremental convolution in O(N^2); a brute-force enumeration over all vote
vectors serves as an independent oracle for small N.  From the per-state win
probabilities follow fidelity (the probability that the informed majority
decision is reached), the error rate, and every agent's ex-ante expected
utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ACCEPT,
    Instance,
    Profile,
    SignalChannel,
    Strategy,
    informed_majority,
)

#: Enumeration guard for the brute-force oracle.
BRUTE_FORCE_MAX_AGENTS = 20


class InstanceTooLarge(ValueError):
    pass


def vote_prob(strategy: Strategy, channel: SignalChannel, state: int) -> float:
    """Probability that an agent playing ``strategy`` votes A in ``state``."""
    return float(np.dot(channel.cond_probs[state], strategy.vote_probs))


def profile_vote_probs(profile: Profile, channel: SignalChannel) -> np.ndarray:
    """(T, N) matrix of per-state, per-agent accept probabilities."""
    return channel.cond_probs @ profile.matrix.T


def poisson_binomial_pmf(probs: np.ndarray) -> np.ndarray:
    """Exact pmf of a sum of independent Bernoulli trials.

    Agents with probability exactly 0 or 1 only shift the support and are
    excluded from the convolution.
    """
    probs = np.asarray(probs, dtype=float)
    n = len(probs)
    shift = int(np.count_nonzero(probs == 1.0))
    core = probs[(probs != 0.0) & (probs != 1.0)]
    pmf = np.zeros(len(core) + 1)
    pmf[0] = 1.0
    for k, p in enumerate(core):
        pmf[1 : k + 2] = pmf[1 : k + 2] * (1.0 - p) + pmf[0 : k + 1] * p
        pmf[0] *= 1.0 - p
    full = np.zeros(n + 1)
    full[shift : shift + len(pmf)] = pmf
    return full


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Exact distribution of the number of accept votes in a fixed state."""

    pmf: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pmf, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "pmf", arr)

    @property
    def n_agents(self) -> int:
        return len(self.pmf) - 1

    def tail_probability(self, k: int) -> float:
        """Pr[count >= k], accumulated in ascending index order."""
        if k <= 0:
            return 1.0
        return math.fsum(self.pmf[k:])


def outcome_distribution(profile: Profile, inst: Instance, state: int) -> OutcomeDistribution:
    """Exact accept-vote distribution under ``profile`` conditioned on ``state``."""
    if len(profile) != inst.n_agents:
        raise ValueError(f"profile has {len(profile)} strategies, instance {inst.n_agents}")
    probs = inst.channel.cond_probs[state] @ profile.matrix.T
    return OutcomeDistribution(poisson_binomial_pmf(probs))


def brute_force_distribution(profile: Profile, inst: Instance, state: int) -> OutcomeDistribution:
    """Independent oracle: enumerate all 2^N vote vectors and sum their weights."""
    n = inst.n_agents
    if n > BRUTE_FORCE_MAX_AGENTS:
        raise InstanceTooLarge(f"brute force enumerates 2^N vectors; N={n} exceeds the guard")
    if len(profile) != n:
        raise ValueError(f"profile has {len(profile)} strategies, instance {n}")
    probs = inst.channel.cond_probs[state] @ profile.matrix.T
    pmf = np.zeros(n + 1)
    codes = np.arange(2**n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)) & 1
    weights = np.prod(np.where(bits == 1, probs, 1.0 - probs), axis=1)
    counts = bits.sum(axis=1)
    np.add.at(pmf, counts, weights)
    return OutcomeDistribution(pmf)


def expected_utility_from_lambdas(lambda_accept, lambda_reject, prior, utility) -> float:
    """Ex-ante expected utility as a function of the per-state win probabilities.

    This is the only code path that maps win probabilities to utilities, so
    recomputing from a report's lambda vectors reproduces it bit for bit.
    """
    total = 0.0
    for w in range(prior.n_states):
        total += float(prior.probs[w]) * (
            lambda_accept[w] * utility.accept_value(w)
            + lambda_reject[w] * utility.reject_value(w)
        )
    return total


@dataclass(frozen=True, eq=False)
class AnalysisReport:
    """Per-state win probabilities, fidelity, error rate, and expected utilities."""

    lambda_accept: np.ndarray
    lambda_reject: np.ndarray
    fidelity: float
    error_rate: float
    expected_utilities: np.ndarray

    def __post_init__(self):
        for name in ("lambda_accept", "lambda_reject", "expected_utilities"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def analyze(profile: Profile, inst: Instance) -> AnalysisReport:
    """Exact fidelity, error rate, and per-agent expected utilities.

    Fidelity weighs the win probability of R over the states where R is the
    informed majority decision and of A over the states where A is.
    """
    needed = inst.winning_votes
    lambda_accept = np.empty(inst.n_states)
    for w in range(inst.n_states):
        dist = outcome_distribution(profile, inst, w)
        lambda_accept[w] = dist.tail_probability(needed)
    lambda_reject = 1.0 - lambda_accept
    fidelity = math.fsum(
        float(inst.prior.probs[w])
        * (lambda_accept[w] if w in inst.high_states else lambda_reject[w])
        for w in range(inst.n_states)
    )
    error_rate = math.fsum(
        float(inst.prior.probs[w])
        * (lambda_reject[w] if w in inst.high_states else lambda_accept[w])
        for w in range(inst.n_states)
    )
    cache = {}
    utilities = np.empty(inst.n_agents)
    for i, utility in enumerate(inst.agents):
        key = id(utility)
        if key not in cache:
            cache[key] = expected_utility_from_lambdas(
                lambda_accept, lambda_reject, inst.prior, utility
            )
        utilities[i] = cache[key]
    return AnalysisReport(
        lambda_accept=lambda_accept,
        lambda_reject=lambda_reject,
        fidelity=fidelity,
        error_rate=error_rate,
        expected_utilities=utilities,
    )


@dataclass(frozen=True)
class MonteCarloFidelity:
    """Stratified Monte Carlo fidelity estimate with its binomial standard error."""

    estimate: float
    stderr: float
    per_state_rates: tuple
    samples: int
    seed: int


_MAX_SEED = 2**64


def _stream(seed: int, stream_index: int, offset: int) -> np.random.Generator:
    # Philox is counter-based: the key encodes (seed, stream) and the counter
    # is advanced to the sample offset, so estimates do not depend on how
    # samples are chunked or distributed over workers.
    bit_gen = np.random.Philox(key=(int(seed) % _MAX_SEED) * _MAX_SEED + stream_index)
    if offset:
        bit_gen.advance(offset)
    return np.random.Generator(bit_gen)


def monte_carlo_fidelity(
    profile: Profile, inst: Instance, samples: int, seed: int
) -> MonteCarloFidelity:
    """Estimate fidelity by simulating signals and votes.

    Sampling is stratified by world state with exact prior weights: for each
    state, ``samples`` signal and vote vectors are drawn from dedicated
    counter-based streams keyed by (seed, state, agent), and the per-state hit
    rates are combined through the prior.  Deterministic given the seed.
    """
    if samples < 1:
        raise ValueError(f"samples must be positive: {samples}")
    if len(profile) != inst.n_agents:
        raise ValueError(f"profile has {len(profile)} strategies, instance {inst.n_agents}")
    n = inst.n_agents
    needed = inst.winning_votes
    betas = profile.matrix
    chunk_size = max(1, min(samples, (1 << 22) // max(n, 1)))
    rates = []
    for w in range(inst.n_states):
        cum = np.cumsum(inst.channel.cond_probs[w])
        cum[-1] = 1.0
        want_accept = informed_majority(inst, w) == ACCEPT
        hits = 0
        done = 0
        while done < samples:
            count = min(chunk_size, samples - done)
            votes_for_a = np.zeros(count, dtype=np.int32)
            for agent in range(n):
                base = 2 * (w * n + agent)
                u_signal = _stream(seed, base + 1, done).random(count)
                u_vote = _stream(seed, base + 2, done).random(count)
                signals = np.searchsorted(cum, u_signal, side="right")
                votes_for_a += u_vote < betas[agent, signals]
            wins = votes_for_a >= needed
            hits += int(np.count_nonzero(wins if want_accept else ~wins))
            done += count
        rates.append(hits / samples)
    estimate = math.fsum(
        float(inst.prior.probs[w]) * rates[w] for w in range(inst.n_states)
    )
    variance = math.fsum(
        float(inst.prior.probs[w]) ** 2 * rates[w] * (1.0 - rates[w]) / samples
        for w in range(inst.n_states)
    )
    return MonteCarloFidelity(
        estimate=estimate,
        stderr=math.sqrt(variance),
        per_state_rates=tuple(rates),
        samples=samples,
        seed=seed,
    )
