"""Seeded Monte Carlo elections.

Trials are cut into fixed blocks of ``BLOCK_SIZE``. Block ``b`` draws from its
own PCG64 stream seeded by ``SeedSequence(seed, spawn_key=(b,))``, so a run
depends only on ``(config, seed)``. It does not matter how many workers
process the blocks or in what order.

Each trial scores 1 for an A win, 1/2 for a tie and 0 otherwise. Scores are
accumulated as integer half-wins so the reduction is exact.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, NamedTuple

import numpy as np

from .distributions import Explicit, PointMass, Poisson, VoterCountDistribution, describe
from .engine import DelegationPolicy
from .kernels import free_delegation_kernel_exact

__all__ = [
    "BLOCK_SIZE",
    "SimulationConfig",
    "SimulationReport",
    "JointCountDistribution",
    "COUNTEREXAMPLE_JOINT",
    "simulate",
    "simulate_instance",
    "simulate_joint",
    "joint_win_probability_exact",
    "JuryExample",
    "jury_example",
]

BLOCK_SIZE = 1 << 16
# cap on cells in the per-voter scratch arrays
_MAX_CELLS = 1 << 22

FreeSampler = Literal["party", "voter"]


@dataclass(frozen=True)
class SimulationConfig:
    dist: VoterCountDistribution
    p: float
    policy: DelegationPolicy
    trials: int
    seed: int = 0
    free_sampler: FreeSampler = "party"

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        _check_run(self.trials, self.seed)
        if self.free_sampler not in ("party", "voter"):
            raise ValueError(f"unknown free sampler {self.free_sampler!r}")


@dataclass(frozen=True)
class SimulationReport:
    estimate: float
    std_error: float
    ci95_low: float
    ci95_high: float
    trials: int
    seed: int
    wins: float

    @classmethod
    def from_half_wins(cls, half_wins: int, half_wins_sq: int, trials: int, seed: int) -> SimulationReport:
        mean = half_wins / (2 * trials)
        second = half_wins_sq / (4 * trials)
        se = math.sqrt(max(second - mean * mean, 0.0) / trials)
        return cls(
            estimate=mean,
            std_error=se,
            ci95_low=max(0.0, mean - 1.96 * se),
            ci95_high=min(1.0, mean + 1.96 * se),
            trials=trials,
            seed=seed,
            wins=half_wins / 2,
        )

    def covers(self, value: float, sigmas: float = 4.0) -> bool:
        return abs(self.estimate - value) <= sigmas * self.std_error

    def to_dict(self) -> dict:
        return {
            "method": "simulated",
            "estimate": self.estimate,
            "std_error": self.std_error,
            "ci95_low": self.ci95_low,
            "ci95_high": self.ci95_high,
            "trials": self.trials,
            "seed": self.seed,
            "wins": self.wins,
            "block_size": BLOCK_SIZE,
        }


def _check_run(trials, seed):
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials!r}")
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _run_blocks(trials: int, seed: int, block_fn, workers: int) -> SimulationReport:
    sizes = [min(BLOCK_SIZE, trials - start) for start in range(0, trials, BLOCK_SIZE)]

    def run(b):
        half = block_fn(_block_rng(seed, b), sizes[b])
        return int(half.sum()), int((half * half).sum())

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    total = sum(s for s, _ in parts)
    total_sq = sum(s for _, s in parts)
    return SimulationReport.from_half_wins(total, total_sq, trials, seed)


def _sample_counts(dist: VoterCountDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(dist, Poisson):
        return rng.poisson(dist.mean, size)
    if isinstance(dist, PointMass):
        return np.full(size, dist.count, dtype=np.int64)
    counts = np.array([i for i, _ in dist.pmf])
    masses = np.array([w for _, w in dist.pmf])
    return counts[rng.choice(counts.size, size=size, p=masses)]


def _half_score(a_votes: np.ndarray, b_votes: np.ndarray) -> np.ndarray:
    return np.where(a_votes > b_votes, 2, np.where(a_votes == b_votes, 1, 0)).astype(np.int64)


def _party_share(k, l, m, rng) -> np.ndarray:
    """Delegated votes landing on the A-party, drawn as Bin(m, k/(k+l))."""
    n = k + l
    q = np.where(n > 0, k / np.maximum(n, 1), 0.0)
    return rng.binomial(m, q)


def _voter_share(k, l, m, rng) -> np.ndarray:
    """Same quantity as :func:`_party_share`, assigning each vote to an individual voter."""
    n = np.maximum(k + l, 1)
    out = np.empty(k.size, dtype=np.int64)
    rows = max(1, _MAX_CELLS // max(m, 1))
    for start in range(0, k.size, rows):
        sl = slice(start, start + rows)
        picks = rng.integers(0, n[sl, None], size=(n[sl].size, m))
        out[sl] = (picks < k[sl, None]).sum(axis=1)
    return out


def _capped_process_votes(k, l, m, c, rng):
    """Capped delegation run voter by voter, batched over trials.

    Per trial: every voter starts with one vote. While votes remain and some
    voter is below the cap, draw a voter uniformly from all voters; if they are
    below the cap they take the vote. Leftover votes are discarded.
    Voters ``0 .. k-1`` are the A-party.
    """
    i = k + l
    a_total = np.empty(i.size, dtype=np.int64)
    b_total = np.empty(i.size, dtype=np.int64)
    width = max(int(i.max(initial=0)), 1)
    rows = max(1, _MAX_CELLS // width)
    cols = np.arange(width)
    for start in range(0, i.size, rows):
        sl = slice(start, start + rows)
        ki, ii = k[sl], i[sl]
        votes = np.ones((ii.size, width), dtype=np.int64)
        remaining = np.full(ii.size, m, dtype=np.int64)
        # with c == 1 every voter starts at the cap
        reached = ii.copy() if c == 1 else np.zeros(ii.size, dtype=np.int64)
        active = np.flatnonzero((remaining > 0) & (reached != ii))
        while active.size:
            j = rng.integers(0, ii[active])
            ok = votes[active, j] < c
            hit, hit_j = active[ok], j[ok]
            votes[hit, hit_j] += 1
            remaining[hit] -= 1
            reached[hit] += votes[hit, hit_j] == c
            active = active[(remaining[active] > 0) & (reached[active] != ii[active])]
        in_a = cols < ki[:, None]
        in_b = ~in_a & (cols < ii[:, None])
        a_total[sl] = (votes * in_a).sum(axis=1)
        b_total[sl] = (votes * in_b).sum(axis=1)
    return a_total, b_total


def _tally(k, l, policy: DelegationPolicy, rng, free_sampler: FreeSampler = "party") -> np.ndarray:
    """Half-win scores for arrays of party sizes under ``policy``."""
    m = policy.m
    if policy.kind == "conventional" or m == 0:
        return _half_score(k, l)
    if policy.kind == "capped-process":
        a, b = _capped_process_votes(k, l, m, policy.c, rng)
    else:
        share = _voter_share if (policy.kind == "free" and free_sampler == "voter") else _party_share
        h = share(k, l, m, rng)
        a, b = k + h, l + (m - h)
        if policy.kind == "capped":
            a = np.minimum(a, policy.c * k)
            b = np.minimum(b, policy.c * l)
    score = _half_score(a, b)
    score[(k + l) == 0] = 1
    return score


def simulate(config: SimulationConfig, workers: int = 1) -> SimulationReport:
    """Monte Carlo estimate of P(A wins) for a full random election."""

    def block(rng, size):
        i = _sample_counts(config.dist, rng, size)
        k = rng.binomial(i, config.p)
        return _tally(k, i - k, config.policy, rng, config.free_sampler)

    return _run_blocks(config.trials, config.seed, block, workers)


def simulate_instance(
    k: int,
    l: int,
    policy: DelegationPolicy,
    trials: int,
    seed: int = 0,
    free_sampler: FreeSampler = "party",
    workers: int = 1,
) -> SimulationReport:
    """Monte Carlo estimate of a kernel: the tally is fixed at ``k`` A-voters and ``l`` B-voters."""
    _check_run(trials, seed)
    if k < 0 or l < 0:
        raise ValueError("party sizes must be non-negative")

    def block(rng, size):
        ks = np.full(size, k, dtype=np.int64)
        ls = np.full(size, l, dtype=np.int64)
        return _tally(ks, ls, policy, rng, free_sampler)

    return _run_blocks(trials, seed, block, workers)


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class JointCountDistribution:
    """Joint law of (A-voters, B-voters) as ``((a, b, mass), ...)``.

    Float masses are read as their decimal literal (``0.6`` is 3/5) so the
    exact evaluation is not polluted by binary rounding.
    """

    entries: tuple[tuple[int, int, Fraction], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("joint distribution needs at least one entry")
        clean = []
        for a, b, mass in self.entries:
            if int(a) != a or int(b) != b or a < 0 or b < 0:
                raise ValueError(f"joint counts must be non-negative integers, got {(a, b)}")
            mass = _as_fraction(mass)
            if mass < 0:
                raise ValueError(f"negative mass {mass}")
            clean.append((int(a), int(b), mass))
        total = sum(mass for _, _, mass in clean)
        if abs(total - 1) > Fraction(1, 10**12):
            raise ValueError(f"joint masses sum to {float(total)}, expected 1")
        object.__setattr__(self, "entries", tuple(clean))


# two A-voter scenarios (4 or 1) against two B-voters; the A-party wins 60% of the time
COUNTEREXAMPLE_JOINT = JointCountDistribution(((4, 2, Fraction(3, 5)), (1, 2, Fraction(2, 5))))


def joint_win_probability_exact(joint: JointCountDistribution, m: int) -> Fraction:
    """Exact P(A wins) with ``m`` freely delegated votes under a joint type law."""
    return sum((mass * free_delegation_kernel_exact(a, b, m) for a, b, mass in joint.entries), Fraction(0))


def simulate_joint(
    joint: JointCountDistribution, m: int, trials: int, seed: int = 0, workers: int = 1
) -> SimulationReport:
    _check_run(trials, seed)
    a = np.array([e[0] for e in joint.entries], dtype=np.int64)
    b = np.array([e[1] for e in joint.entries], dtype=np.int64)
    masses = np.array([float(e[2]) for e in joint.entries])
    masses /= masses.sum()
    policy = DelegationPolicy.free(m)

    def block(rng, size):
        pick = rng.choice(a.size, size=size, p=masses)
        return _tally(a[pick], b[pick], policy, rng)

    return _run_blocks(trials, seed, block, workers)


class JuryExample(NamedTuple):
    abstain: object  # float, or Fraction when p is a Fraction
    delegate: object
    quoted_expression: object  # 8/9 * abstain + 1/9 * p


def jury_example(p, voters: int = 3, delegators: int = 2) -> JuryExample:
    """Probability that the correct alternative wins, with delegators abstaining vs delegating.

    Each voter is independently right with probability ``p``. Delegation is
    enumerated exactly over every assignment of the delegated votes to voters
    (each equally likely) and every right/wrong profile. The commonly quoted
    shortcut ``8/9 * r + 1/9 * p`` is returned alongside for comparison.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    one = Fraction(1) if isinstance(p, Fraction) else 1.0
    n_assign = voters**delegators

    def win_prob(weights):
        acc = 0 * one
        total = sum(weights)
        for profile in itertools.product((True, False), repeat=voters):
            right = sum(w for w, ok in zip(weights, profile) if ok)
            prob = one
            for ok in profile:
                prob *= p if ok else 1 - p
            score = 1 if 2 * right > total else Fraction(1, 2) if 2 * right == total else 0
            acc += prob * score
        return acc

    abstain = win_prob([1] * voters)
    delegate = 0 * one
    for targets in itertools.product(range(voters), repeat=delegators):
        weights = [1] * voters
        for t in targets:
            weights[t] += 1
        delegate += win_prob(weights)
    delegate = delegate / n_assign
    quoted = Fraction(8, 9) * abstain + Fraction(1, 9) * p if isinstance(p, Fraction) else 8 / 9 * abstain + p / 9
    return JuryExample(abstain, delegate, quoted)
