"""Win probabilities averaged over a random electorate.

Each policy evaluates

    sum_i F(i) sum_k C(i, k) p^k (1-p)^(i-k) K(k, i-k)

with ``K`` the matching tally kernel, truncated at the first index whose
remaining tail mass fits the :class:`TruncationBudget`. The reported
``truncation_error`` is that raw tail mass: the worst case in which every
dropped electorate flips the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, NamedTuple, Sequence

import numpy as np

from .distributions import (
    Poisson,
    TruncationBudget,
    VoterCountDistribution,
    describe,
    log_binom_pmf,
    pmf_array,
    tail_mass,
    truncation_index,
)
from .kernels import (
    PROCESS_ORACLE_LIMIT,
    OracleScaleError,
    capped_process_kernel_exact,
    kernel_table,
    majority_indicator,
)

__all__ = [
    "DelegationPolicy",
    "WinProbability",
    "conventional",
    "free_delegation",
    "capped_delegation",
    "capped_process",
    "evaluate",
    "limit_check_p_to_1",
    "limit_check_n_to_inf",
    "limit_check_m_to_inf",
    "MLimitPoint",
    "ConjectureRow",
    "conjecture_report",
]

PolicyKind = Literal["conventional", "free", "capped", "capped-process"]


@dataclass(frozen=True)
class DelegationPolicy:
    """What the ``m`` delegators do: abstain, delegate freely, or delegate under cap ``c``.

    ``capped`` is the closed form that discards each party's overflow;
    ``capped-process`` is the sequential redraw-until-uncapped process.
    """

    kind: PolicyKind = "conventional"
    m: int = 0
    c: int | None = None

    def __post_init__(self):
        if self.kind not in ("conventional", "free", "capped", "capped-process"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"m must be a non-negative integer, got {self.m!r}")
        if self.kind.startswith("capped"):
            if self.c is None or int(self.c) != self.c or self.c < 1:
                raise ValueError(f"capped policies need an integer cap c >= 1, got {self.c!r}")
        elif self.c is not None:
            raise ValueError(f"{self.kind} policy takes no cap")
        if self.kind == "conventional" and self.m:
            object.__setattr__(self, "m", 0)

    @classmethod
    def conventional(cls) -> DelegationPolicy:
        return cls("conventional")

    @classmethod
    def free(cls, m: int) -> DelegationPolicy:
        return cls("free", m)

    @classmethod
    def capped(cls, m: int, c: int) -> DelegationPolicy:
        return cls("capped", m, c)

    @classmethod
    def capped_process(cls, m: int, c: int) -> DelegationPolicy:
        return cls("capped-process", m, c)

    @classmethod
    def parse(cls, text: str) -> DelegationPolicy:
        """``conv``, ``free:M``, ``capped:M,C`` or ``capped-process:M,C``."""
        kind, _, args = text.strip().lower().partition(":")
        try:
            if kind in ("conv", "conventional") and not args:
                return cls.conventional()
            if kind == "free":
                return cls.free(int(args))
            if kind in ("capped", "capped-process"):
                m, c = (int(x) for x in args.split(","))
                return cls(kind, m, c)
        except ValueError as exc:
            raise ValueError(f"bad policy {text!r}: {exc}") from None
        raise ValueError(f"bad policy {text!r}")

    def __str__(self) -> str:
        if self.kind == "conventional":
            return "conv"
        if self.kind == "free":
            return f"free:{self.m}"
        return f"{self.kind}:{self.m},{self.c}"


@dataclass(frozen=True)
class WinProbability:
    value: float
    truncation_error: float
    policy: DelegationPolicy
    p: float
    dist: VoterCountDistribution

    @property
    def interval(self) -> tuple[float, float]:
        return max(0.0, self.value - self.truncation_error), min(1.0, self.value + self.truncation_error)

    def to_dict(self) -> dict:
        return {
            "dist": describe(self.dist),
            "p": self.p,
            "policy": str(self.policy),
            "m": self.policy.m,
            "c": self.policy.c,
            "method": "exact",
            "value": self.value,
            "truncation_error": self.truncation_error,
        }


def _check_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in the open interval (0, 1), got {p}")


def _policy_table(policy: DelegationPolicy, upto: int) -> np.ndarray:
    if policy.kind == "conventional":
        kk, ll = np.meshgrid(np.arange(upto + 1), np.arange(upto + 1), indexing="ij")
        return majority_indicator(kk, ll)
    if policy.kind == "free":
        return kernel_table(upto, policy.m)
    if policy.kind == "capped":
        return kernel_table(upto, policy.m, policy.c)
    return _process_table(upto, policy.m, policy.c)


def _process_table(upto: int, m: int, c: int) -> np.ndarray:
    max_voters, max_m = PROCESS_ORACLE_LIMIT
    if upto > max_voters or m > max_m:
        raise OracleScaleError(
            f"capped-process needs at most {max_voters} voters and m <= {max_m}; "
            f"got support up to {upto} and m={m} (use the simulator instead)"
        )
    table = np.full((upto + 1, upto + 1), np.nan)
    for k in range(upto + 1):
        for l in range(upto + 1 - k):
            table[k, l] = float(capped_process_kernel_exact(k, l, m, c))
    return table


def evaluate(
    dist: VoterCountDistribution,
    p: float,
    policy: DelegationPolicy,
    budget: TruncationBudget | None = None,
) -> WinProbability:
    """P(A wins) for ``policy`` when the electorate is drawn from ``dist``."""
    _check_p(p)
    budget = budget or TruncationBudget()
    upto = truncation_index(dist, budget)
    masses = pmf_array(dist, upto)
    table = _policy_table(policy, upto)

    # fixed ascending-i order keeps the sum reproducible
    total = 0.0
    for i in range(upto + 1):
        if masses[i] == 0.0:
            continue
        k = np.arange(i + 1)
        weights = np.exp(log_binom_pmf(i, k, p))
        total += masses[i] * float(np.dot(weights, table[k, i - k]))
    value = min(max(float(total), 0.0), 1.0)
    return WinProbability(value, tail_mass(dist, upto), policy, p, dist)


def conventional(dist, p, budget=None) -> WinProbability:
    return evaluate(dist, p, DelegationPolicy.conventional(), budget)


def free_delegation(dist, p, m, budget=None) -> WinProbability:
    return evaluate(dist, p, DelegationPolicy.free(m), budget)


def capped_delegation(dist, p, m, c, budget=None) -> WinProbability:
    return evaluate(dist, p, DelegationPolicy.capped(m, c), budget)


def capped_process(dist, p, m, c, budget=None) -> WinProbability:
    """Sequential capped process; only for electorates of at most 12 voters and m <= 12."""
    return evaluate(dist, p, DelegationPolicy.capped_process(m, c), budget)


def limit_check_p_to_1(
    dist: VoterCountDistribution,
    m: int,
    p_grid: Sequence[float],
    budget: TruncationBudget | None = None,
) -> list[tuple[float, WinProbability]]:
    """Free delegation along an ascending grid of ``p`` values in (0, 1].

    At ``p == 1`` every voter is an A-voter and the sum collapses to
    ``sum_i F(i) * g(i + m, 0)``, evaluated directly.
    """
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p_grid must be strictly ascending")
    budget = budget or TruncationBudget()
    policy = DelegationPolicy.free(m)
    out = []
    for p in p_grid:
        if p == 1.0:
            upto = truncation_index(dist, budget)
            masses = pmf_array(dist, upto)
            value = math.fsum(
                float(masses[i]) * majority_indicator(i + m, 0) for i in range(upto + 1) if masses[i]
            )
            out.append((p, WinProbability(value, tail_mass(dist, upto), policy, p, dist)))
        else:
            out.append((p, evaluate(dist, p, policy, budget)))
    return out


def limit_check_n_to_inf(
    p: float,
    m_rule: int | Callable[[float], int],
    n_grid: Iterable[float],
    budget: TruncationBudget | None = None,
) -> list[tuple[float, WinProbability]]:
    """Free delegation under Poisson(n) electorates; ``m_rule`` is a constant or ``n -> m``."""
    rule = m_rule if callable(m_rule) else (lambda n: m_rule)
    return [(n, free_delegation(Poisson(n), p, int(rule(n)), budget)) for n in n_grid]


class MLimitPoint(NamedTuple):
    m: int
    result: WinProbability
    gap: float  # conventional minus free


def limit_check_m_to_inf(
    dist: VoterCountDistribution,
    p: float,
    m_grid: Iterable[int],
    budget: TruncationBudget | None = None,
) -> list[MLimitPoint]:
    base = conventional(dist, p, budget).value
    points = []
    for m in m_grid:
        res = free_delegation(dist, p, m, budget)
        points.append(MLimitPoint(m, res, base - res.value))
    return points


class ConjectureRow(NamedTuple):
    dist: str
    p: float
    m: int
    c: int
    free: float
    capped: float
    holds: bool


def conjecture_report(
    dists: Iterable[VoterCountDistribution],
    ps: Iterable[float],
    ms: Iterable[int],
    cs: Iterable[int],
    budget: TruncationBudget | None = None,
) -> list[ConjectureRow]:
    """Compare free and capped delegation across a grid.

    ``holds`` is ``free <= capped`` up to twice the truncation error. Nothing
    is raised on a violation; this is an exploration aid.
    """
    ps, ms, cs = list(ps), list(ms), list(cs)
    rows = []
    for dist in dists:
        for p in ps:
            for m in ms:
                free = free_delegation(dist, p, m, budget)
                for c in cs:
                    capped = capped_delegation(dist, p, m, c, budget)
                    slack = free.truncation_error + capped.truncation_error
                    rows.append(
                        ConjectureRow(
                            describe(dist), p, m, c, free.value, capped.value,
                            free.value <= capped.value + slack,
                        )
                    )
    return rows
