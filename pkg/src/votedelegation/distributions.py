"""Voter-count distributions and truncation of sums over them.

Three kinds are supported:

- ``Poisson(mean)``: the Poisson-game case, pmf ``mean**i * exp(-mean) / i!``.
- ``Explicit(pmf)``: a finite table of ``count -> mass``.
- ``PointMass(count)``: a fixed electorate.

Every quantity is evaluated in log space and exponentiated at the end, so
means in the thousands do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import gammaln, pdtrc

__all__ = [
    "Poisson",
    "Explicit",
    "PointMass",
    "VoterCountDistribution",
    "TruncationBudget",
    "TruncationError",
    "pmf",
    "pmf_array",
    "tail_mass",
    "truncation_index",
    "poisson_type_marginal",
    "log_binom_pmf",
    "parse_distribution",
    "describe",
]

# Explicit tables within this distance of total mass 1 are renormalised.
_NORMALISE_TOLERANCE = 1e-9


class TruncationError(ValueError):
    """Raised when the truncation index would exceed the safety cap."""


@dataclass(frozen=True)
class Poisson:
    mean: float

    def __post_init__(self):
        if not (self.mean > 0 and math.isfinite(self.mean)):
            raise ValueError(f"Poisson mean must be positive and finite, got {self.mean}")


@dataclass(frozen=True)
class PointMass:
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 0:
            raise ValueError(f"point mass count must be a non-negative integer, got {self.count}")


@dataclass(frozen=True)
class Explicit:
    """Finite pmf given as ``((count, mass), ...)``.

    Duplicate counts are merged. Tables whose total mass is within 1e-9 of 1
    are renormalised; anything further off is rejected as a user error.
    """

    pmf: tuple[tuple[int, float], ...]
    _table: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        table: dict[int, float] = {}
        for count, mass in self.pmf:
            if int(count) != count or count < 0:
                raise ValueError(f"explicit count must be a non-negative integer, got {count}")
            if not (mass >= 0 and math.isfinite(mass)):
                raise ValueError(f"explicit mass must be non-negative, got {mass}")
            table[int(count)] = table.get(int(count), 0.0) + float(mass)
        if not table:
            raise ValueError("explicit distribution needs at least one entry")
        total = math.fsum(table.values())
        if abs(total - 1.0) > _NORMALISE_TOLERANCE:
            raise ValueError(f"explicit masses sum to {total!r}, expected 1")
        table = {i: mass / total for i, mass in sorted(table.items())}
        object.__setattr__(self, "pmf", tuple(table.items()))
        object.__setattr__(self, "_table", table)


VoterCountDistribution = Union[Poisson, Explicit, PointMass]


@dataclass(frozen=True)
class TruncationBudget:
    """How much outer tail mass an infinite sum may drop.

    ``max_support`` of ``None`` means ``max(10 * mean, 200)``.
    """

    tail_mass_bound: float = 1e-9
    max_support: int | None = None

    def __post_init__(self):
        if not 0.0 < self.tail_mass_bound < 1.0:
            raise ValueError(f"tail_mass_bound must lie in (0, 1), got {self.tail_mass_bound}")
        if self.max_support is not None and self.max_support < 1:
            raise ValueError("max_support must be a positive integer")


def _mean(dist: VoterCountDistribution) -> float:
    if isinstance(dist, Poisson):
        return dist.mean
    if isinstance(dist, PointMass):
        return float(dist.count)
    return math.fsum(i * w for i, w in dist.pmf)


def pmf(dist: VoterCountDistribution, i: int) -> float:
    """Probability that there are exactly ``i`` voters (0 outside the support)."""
    if i < 0:
        return 0.0
    if isinstance(dist, Poisson):
        return math.exp(i * math.log(dist.mean) - dist.mean - math.lgamma(i + 1))
    if isinstance(dist, PointMass):
        return 1.0 if i == dist.count else 0.0
    return dist._table.get(i, 0.0)


def pmf_array(dist: VoterCountDistribution, upto: int) -> np.ndarray:
    """``[pmf(dist, 0), ..., pmf(dist, upto)]`` as an array."""
    i = np.arange(upto + 1)
    if isinstance(dist, Poisson):
        return np.exp(i * math.log(dist.mean) - dist.mean - gammaln(i + 1))
    out = np.zeros(upto + 1)
    if isinstance(dist, PointMass):
        if dist.count <= upto:
            out[dist.count] = 1.0
        return out
    for count, mass in dist.pmf:
        if count <= upto:
            out[count] = mass
    return out


def tail_mass(dist: VoterCountDistribution, index: int) -> float:
    """Mass strictly above ``index``."""
    if isinstance(dist, Poisson):
        return float(pdtrc(index, dist.mean))
    if isinstance(dist, PointMass):
        return 1.0 if dist.count > index else 0.0
    return math.fsum(w for i, w in dist.pmf if i > index)


def truncation_index(dist: VoterCountDistribution, budget: TruncationBudget | None = None) -> int:
    """Smallest ``I`` whose tail mass above ``I`` is within the budget.

    Finite distributions return the top of their support. Raises
    :class:`TruncationError` if ``I`` would exceed the budget's safety cap.
    """
    budget = budget or TruncationBudget()
    cap = budget.max_support
    if cap is None:
        cap = max(int(math.ceil(10 * _mean(dist))), 200)

    if isinstance(dist, PointMass):
        index = dist.count
    elif isinstance(dist, Explicit):
        index = dist.pmf[-1][0]
    else:
        # bisect on the non-increasing CCDF
        lo, hi = 0, cap + 1
        while lo < hi:
            mid = (lo + hi) // 2
            if pdtrc(mid, dist.mean) <= budget.tail_mass_bound:
                hi = mid
            else:
                lo = mid + 1
        index = lo
    if index > cap:
        raise TruncationError(
            f"truncation index {index} exceeds the safety cap {cap} for {describe(dist)}"
        )
    return index


def log_binom_pmf(n: int, k, q: float):
    """Log of ``C(n, k) q**k (1-q)**(n-k)``; ``k`` may be an array.

    ``q`` of exactly 0 or 1 is handled (``0 * log 0 = 0``).
    """
    k = np.asarray(k)
    with np.errstate(divide="ignore"):
        log_q = math.log(q) if q > 0 else -np.inf
        log_1q = math.log1p(-q) if q < 1 else -np.inf
        a = np.where(k > 0, k * log_q, 0.0)
        b = np.where(n - k > 0, (n - k) * log_1q, 0.0)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + a + b


def poisson_type_marginal(n: float, p: float, k: int) -> float:
    """P(exactly ``k`` A-voters) when the electorate is Poisson(``n``) and each voter is A w.p. ``p``.

    By Poisson thinning this is the Poisson(``n * p``) pmf at ``k``.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if k < 0:
        return 0.0
    rate = n * p
    if rate == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(rate) - rate - math.lgamma(k + 1))


def parse_distribution(text: str) -> VoterCountDistribution:
    """Parse ``poisson:20``, ``point:5`` or ``explicit:4=0.6,1=0.4``."""
    kind, sep, body = text.strip().partition(":")
    kind = kind.lower()
    if not sep or not body:
        raise ValueError(f"bad distribution literal {text!r}")
    try:
        if kind == "poisson":
            return Poisson(float(body))
        if kind in ("point", "pointmass"):
            return PointMass(int(body))
        if kind == "explicit":
            entries = []
            for item in body.split(","):
                count, eq, mass = item.partition("=")
                if not eq:
                    raise ValueError(f"bad explicit entry {item!r}")
                entries.append((int(count), float(mass)))
            return Explicit(tuple(entries))
    except ValueError as exc:
        raise ValueError(f"bad distribution literal {text!r}: {exc}") from None
    raise ValueError(f"unknown distribution kind {kind!r} in {text!r}")


def describe(dist: VoterCountDistribution) -> str:
    """Inverse of :func:`parse_distribution`."""
    if isinstance(dist, Poisson):
        return f"poisson:{dist.mean:g}"
    if isinstance(dist, PointMass):
        return f"point:{dist.count}"
    return "explicit:" + ",".join(f"{i}={w:.17g}" for i, w in dist.pmf)
