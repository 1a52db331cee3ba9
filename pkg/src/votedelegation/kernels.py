"""Win-probability kernels for a fixed tally of A-voters and B-voters.

``k`` A-voters and ``l`` B-voters face ``m`` delegated votes, each landing on a
uniformly random voter. The A-party therefore receives ``h ~ Bin(m, k/(k+l))``
extra votes. Kernels:

- :func:`majority_indicator`: no delegation; 1, 1/2 or 0.
- :func:`free_delegation_kernel`: unlimited accumulation.
- :func:`capped_delegation_kernel`: closed form with party totals clipped at
  ``c*k`` and ``c*l``; votes above a party's capacity are thrown away.
- :func:`capped_process_kernel_exact`: the sequential capped process, where a
  vote that hits a capped voter is redrawn until it finds an uncapped voter of
  *either* party, and is only thrown away once every voter is capped.

The two capped variants are not the same mechanism. For ``(k, l, m, c) =
(2, 1, 3, 2)`` the closed form gives 53/54 while the process gives 1: under the
closed form, the ``1/27`` event that all three votes land on the lone B-voter
produces a 2-2 tie; in the process the two surplus votes spill over to A.

With no voters at all (``k == l == 0``) every kernel returns 1/2: the delegated
votes have nowhere to go and the result is a coin flip.

Float kernels work in log space and agree with the exact ``Fraction`` oracles
to ~1e-15 at oracle scale.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

__all__ = [
    "TallyInstance",
    "ExactProbability",
    "majority_indicator",
    "free_delegation_kernel",
    "capped_delegation_kernel",
    "kernel_table",
    "free_delegation_kernel_exact",
    "capped_delegation_kernel_exact",
    "capped_process_kernel_exact",
    "OracleScaleError",
    "FREE_ORACLE_LIMIT",
    "PROCESS_ORACLE_LIMIT",
]

ExactProbability = Fraction

# (max k + l, max m)
FREE_ORACLE_LIMIT = (30, 20)
PROCESS_ORACLE_LIMIT = (12, 12)

# cap on pairs * (m + 1) float64 cells held at once by kernel_table
_CHUNK_CELLS = 1 << 22


class OracleScaleError(ValueError):
    """Instance too large for an exact enumeration oracle."""


@dataclass(frozen=True)
class TallyInstance:
    k: int
    l: int
    m: int = 0
    c: int | None = None

    def __post_init__(self):
        _check_counts(self.k, self.l, self.m)
        if self.c is not None:
            _check_cap(self.c)


def _check_counts(k, l, m):
    for name, v in (("k", k), ("l", l), ("m", m)):
        if int(v) != v or v < 0:
            raise ValueError(f"{name} must be a non-negative integer, got {v!r}")


def _check_cap(c):
    if int(c) != c or c < 1:
        raise ValueError(f"cap must be an integer >= 1, got {c!r}")


def majority_indicator(k, l):
    """1 if ``k > l``, 1/2 on a tie, 0 otherwise. Works elementwise on arrays."""
    if np.ndim(k) == 0 and np.ndim(l) == 0:
        return 1.0 if k > l else 0.5 if k == l else 0.0
    return np.where(k > l, 1.0, np.where(k == l, 0.5, 0.0))


def _kernel_rows(k: np.ndarray, l: np.ndarray, m: int, cap: int | None) -> np.ndarray:
    """Kernel values for aligned arrays of party sizes (ascending-h summation)."""
    h = np.arange(m + 1, dtype=float)
    log_comb = gammaln(m + 1) - gammaln(h + 1) - gammaln(m - h + 1)
    n = k + l
    empty = n == 0
    q = np.where(empty, 0.5, k / np.where(empty, 1, n))[:, None]
    weights = np.exp(log_comb + xlogy(h, q) + xlog1py(m - h, -q))
    a_votes = k[:, None] + h
    b_votes = l[:, None] + (m - h)
    if cap is not None:
        a_votes = np.minimum(a_votes, cap * k[:, None])
        b_votes = np.minimum(b_votes, cap * l[:, None])
    out = np.sum(weights * majority_indicator(a_votes, b_votes), axis=1)
    np.clip(out, 0.0, 1.0, out=out)
    out[empty] = 0.5
    return out


@functools.lru_cache(maxsize=65536)
def free_delegation_kernel(k: int, l: int, m: int) -> float:
    """P(A wins) with ``k`` A-voters, ``l`` B-voters and ``m`` freely delegated votes."""
    _check_counts(k, l, m)
    return float(_kernel_rows(np.array([k]), np.array([l]), m, None)[0])


@functools.lru_cache(maxsize=65536)
def capped_delegation_kernel(k: int, l: int, m: int, c: int) -> float:
    """Closed-form capped kernel: totals clipped at ``c*k`` and ``c*l``, overflow discarded."""
    _check_counts(k, l, m)
    _check_cap(c)
    return float(_kernel_rows(np.array([k]), np.array([l]), m, c)[0])


@functools.lru_cache(maxsize=64)
def kernel_table(upto: int, m: int, cap: int | None = None) -> np.ndarray:
    """``T[k, l]`` = kernel for every ``k + l <= upto`` (free if ``cap`` is None).

    Entries with ``k + l > upto`` are NaN. The returned array is read-only and
    shared between callers.
    """
    _check_counts(upto, 0, m)
    if cap is not None:
        _check_cap(cap)
    kk, ll = np.meshgrid(np.arange(upto + 1), np.arange(upto + 1), indexing="ij")
    mask = kk + ll <= upto
    ks, ls = kk[mask], ll[mask]
    values = np.empty(ks.size)
    step = max(1, _CHUNK_CELLS // (m + 1))
    for start in range(0, ks.size, step):
        sl = slice(start, start + step)
        values[sl] = _kernel_rows(ks[sl], ls[sl], m, cap)
    table = np.full((upto + 1, upto + 1), np.nan)
    table[ks, ls] = values
    table.setflags(write=False)
    return table


def _check_oracle_scale(k, l, m, limit):
    if k + l > limit[0] or m > limit[1]:
        raise OracleScaleError(
            f"instance (k={k}, l={l}, m={m}) exceeds oracle scale k+l<={limit[0]}, m<={limit[1]}"
        )


def _g_exact(a: int, b: int) -> Fraction:
    return Fraction(1) if a > b else Fraction(1, 2) if a == b else Fraction(0)


def free_delegation_kernel_exact(k: int, l: int, m: int) -> Fraction:
    """Exact rational twin of :func:`free_delegation_kernel`."""
    _check_counts(k, l, m)
    _check_oracle_scale(k, l, m, FREE_ORACLE_LIMIT)
    if k == l == 0:
        return Fraction(1, 2)
    n = k + l
    total = sum(comb(m, h) * k**h * l ** (m - h) * _g_exact(k + h, l + m - h) for h in range(m + 1))
    return Fraction(total) / n**m


def capped_delegation_kernel_exact(k: int, l: int, m: int, c: int) -> Fraction:
    """Exact rational twin of :func:`capped_delegation_kernel`."""
    _check_counts(k, l, m)
    _check_cap(c)
    _check_oracle_scale(k, l, m, FREE_ORACLE_LIMIT)
    if k == l == 0:
        return Fraction(1, 2)
    n = k + l
    total = sum(
        comb(m, h) * k**h * l ** (m - h) * _g_exact(min(k + h, c * k), min(l + m - h, c * l))
        for h in range(m + 1)
    )
    return Fraction(total) / n**m


def capped_process_kernel_exact(k: int, l: int, m: int, c: int) -> Fraction:
    """Exact P(A wins) under the sequential capped-delegation process.

    Each delegated vote is drawn uniformly over all voters and redrawn while it
    hits a capped voter, so it lands uniformly on an *uncapped* voter. The
    process stops when the votes run out or every voter is capped; whatever is
    left over is discarded.

    Voters of one party are exchangeable, so a party's state is the number of
    its voters sitting at each vote level ``1 .. c-1`` (capped voters are
    implicit). The recursion runs over these level-count vectors.
    """
    _check_counts(k, l, m)
    _check_cap(c)
    _check_oracle_scale(k, l, m, PROCESS_ORACLE_LIMIT)
    if k == l == 0:
        return Fraction(1, 2)

    def total_votes(levels: tuple[int, ...], size: int) -> int:
        uncapped = sum(levels)
        return sum((v + 1) * n for v, n in enumerate(levels)) + c * (size - uncapped)

    def bump(levels: tuple[int, ...], v: int) -> tuple[int, ...]:
        out = list(levels)
        out[v] -= 1
        if v + 1 < len(out):
            out[v + 1] += 1
        return tuple(out)

    @functools.lru_cache(maxsize=None)
    def win(a_levels: tuple[int, ...], b_levels: tuple[int, ...], left: int) -> Fraction:
        uncapped = sum(a_levels) + sum(b_levels)
        if left == 0 or uncapped == 0:
            return _g_exact(total_votes(a_levels, k), total_votes(b_levels, l))
        acc = Fraction(0)
        for v, n in enumerate(a_levels):
            if n:
                acc += Fraction(n, uncapped) * win(bump(a_levels, v), b_levels, left - 1)
        for v, n in enumerate(b_levels):
            if n:
                acc += Fraction(n, uncapped) * win(a_levels, bump(b_levels, v), left - 1)
        return acc

    # level index v holds voters with v + 1 votes; with c == 1 everyone starts capped
    start_a = tuple([k] + [0] * (c - 2)) if c > 1 else ()
    start_b = tuple([l] + [0] * (c - 2)) if c > 1 else ()
    return win(start_a, start_b, m)
