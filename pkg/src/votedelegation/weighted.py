"""Weighted majority voting with independent signals.

Each of ``n`` voters independently votes for the correct alternative with
probability ``p``. The correct alternative wins when its supporters carry more
than half the total weight; an exact half counts 1/2. Probabilities are
obtained by enumerating all ``2**n`` supporter sets, grouped by set size.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

__all__ = [
    "ENUMERATION_CAP",
    "WeightedProfile",
    "DominanceReport",
    "unweighted_majority_prob",
    "weighted_majority_prob",
    "winning_counts",
    "has_light_winning_subset",
    "weight_dominance_check",
]

ENUMERATION_CAP = 20
# relative band in which a float weight comparison is re-done in exact arithmetic
_TIE_BAND = 1e-9


@dataclass(frozen=True)
class WeightedProfile:
    weights: tuple[float, ...]
    cap: int = field(default=ENUMERATION_CAP, compare=False)

    def __post_init__(self):
        w = tuple(self.weights)
        if not w:
            raise ValueError("need at least one voter")
        if len(w) > self.cap:
            raise ValueError(f"{len(w)} voters exceeds the enumeration cap of {self.cap}")
        if any(not (x >= 0) for x in w):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.weights)


@functools.lru_cache(maxsize=ENUMERATION_CAP + 1)
def _subset_bits(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    bits.setflags(write=False)
    return bits


def _compare_to_half(bits: np.ndarray, weights: Sequence) -> np.ndarray:
    """sign(w(S) - w(N \\ S)) for every subset row of ``bits``.

    Floats decide the clear cases; rows inside a narrow band around a tie are
    settled with exact ``Fraction`` sums of the given weights.
    """
    w = np.asarray([float(x) for x in weights])
    total = w.sum()
    diff = bits @ w * 2 - total
    sign = np.sign(diff).astype(np.int64)
    close = np.flatnonzero(np.abs(diff) <= _TIE_BAND * max(total, 1.0))
    if close.size:
        exact = [Fraction(x) for x in weights]
        exact_total = sum(exact)
        for row in close:
            s = sum((x for x, b in zip(exact, bits[row]) if b), Fraction(0))
            d = 2 * s - exact_total
            sign[row] = (d > 0) - (d < 0)
    return sign


def winning_counts(weights: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Per set size ``s``: number of supporter sets that win outright, and that tie."""
    n = len(weights)
    if n > ENUMERATION_CAP:
        raise ValueError(f"{n} voters exceeds the enumeration cap of {ENUMERATION_CAP}")
    bits = _subset_bits(n)
    sign = _compare_to_half(bits, weights)
    sizes = bits.sum(axis=1)
    wins = np.bincount(sizes[sign > 0], minlength=n + 1)
    ties = np.bincount(sizes[sign == 0], minlength=n + 1)
    return wins, ties


def _size_probs(n: int, p):
    return [p**s * (1 - p) ** (n - s) for s in range(n + 1)]


def unweighted_majority_prob(n: int, p):
    """Simple majority of ``n`` voters; a tie at ``n/2`` counts 1/2."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    probs = _size_probs(n, p)
    total = sum(comb(n, s) * probs[s] for s in range(n // 2 + 1, n + 1))
    if n % 2 == 0:
        total += comb(n, n // 2) * probs[n // 2] / 2
    return total


def weighted_majority_prob(profile: WeightedProfile | Sequence, p):
    """Weighted majority by full subset enumeration.

    >>> weighted_majority_prob([2, 0.5, 0.5], 0.6)
    0.6
    """
    if not isinstance(profile, WeightedProfile):
        profile = WeightedProfile(tuple(profile))
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    wins, ties = winning_counts(profile.weights)
    probs = _size_probs(profile.n, p)
    half = Fraction(1, 2) if isinstance(p, Fraction) else 0.5
    return sum(int(wins[s]) * probs[s] + int(ties[s]) * probs[s] * half for s in range(profile.n + 1))


def has_light_winning_subset(weights: Sequence) -> bool:
    """True if some set of fewer than n/2 voters weighs at least as much as the rest.

    When no such set exists the weighted and unweighted probabilities coincide.
    """
    n = len(weights)
    bits = _subset_bits(n)
    sizes = bits.sum(axis=1)
    light = 2 * sizes < n
    return bool(np.any(_compare_to_half(bits[light], weights) >= 0))


@dataclass
class DominanceReport:
    n: int
    p: float
    samples: int
    unweighted: float
    violations: int
    min_gap: float
    max_gap: float
    light_subset_profiles: int
    # profiles with no light winning subset whose gap is not ~0
    equality_failures: int
    gaps: list[float] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.pop("gaps")
        return d


def weight_dominance_check(
    n: int,
    p: float,
    weight_samples: Sequence[Sequence[float]],
    tolerance: float = 1e-12,
) -> DominanceReport:
    """Check unweighted >= weighted majority for each sampled weight vector."""
    base = unweighted_majority_prob(n, p)
    gaps, light, eq_fail = [], 0, 0
    for w in weight_samples:
        if len(w) != n:
            raise ValueError(f"weight vector of length {len(w)} for n={n}")
        gap = base - weighted_majority_prob(WeightedProfile(tuple(w)), p)
        gaps.append(gap)
        if has_light_winning_subset(w):
            light += 1
        elif abs(gap) > tolerance:
            eq_fail += 1
    return DominanceReport(
        n=n,
        p=p,
        samples=len(gaps),
        unweighted=base,
        violations=sum(g < -tolerance for g in gaps),
        min_gap=min(gaps, default=0.0),
        max_gap=max(gaps, default=0.0),
        light_subset_profiles=light,
        equality_failures=eq_fail,
        gaps=gaps,
    )
