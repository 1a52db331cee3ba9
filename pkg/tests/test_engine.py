import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votedelegation.distributions import (
    Explicit,
    PointMass,
    Poisson,
    TruncationBudget,
    poisson_type_marginal,
    truncation_index,
)
from votedelegation.engine import (
    DelegationPolicy,
    capped_delegation,
    capped_process,
    conjecture_report,
    conventional,
    evaluate,
    free_delegation,
    limit_check_m_to_inf,
    limit_check_n_to_inf,
    limit_check_p_to_1,
)
from votedelegation.kernels import (
    OracleScaleError,
    capped_delegation_kernel,
    capped_process_kernel_exact,
    free_delegation_kernel,
    free_delegation_kernel_exact,
)

POISSON20 = Poisson(20)

# reference table: (m, free, capped with c = 2); conventional is 0.81413 throughout
TABLE1 = [
    (1, 0.808443, 0.808443),
    (2, 0.804256, 0.804256),
    (5, 0.796578, 0.796616),
    (10, 0.791246, 0.792627),
    (300, 0.808516, 0.81413),
]


def test_table1_conventional():
    assert conventional(POISSON20, 0.6).value == pytest.approx(0.81413, abs=5e-6)


@pytest.mark.parametrize("m,free,capped", TABLE1)
def test_table1_rows(m, free, capped):
    assert free_delegation(POISSON20, 0.6, m).value == pytest.approx(free, abs=5e-6)
    assert capped_delegation(POISSON20, 0.6, m, 2).value == pytest.approx(capped, abs=5e-6)


def test_m2_capped_and_free_differ_below_reporting_precision():
    # the two published m=2 entries agree only after rounding to 6 digits
    free = free_delegation(POISSON20, 0.6, 2).value
    capped = capped_delegation(POISSON20, 0.6, 2, 2).value
    assert 0 < capped - free < 5e-7


@pytest.mark.parametrize("p", [0.3, 0.6, 0.97])
def test_single_voter_wins_alone(p):
    assert conventional(PointMass(1), p).value == pytest.approx(p, abs=1e-15)
    assert free_delegation(PointMass(1), p, 4).value == pytest.approx(p, abs=1e-15)


@pytest.mark.parametrize("dist", [POISSON20, Poisson(3.5), PointMass(6), Explicit(((4, 0.6), (1, 0.4)))])
def test_even_split_is_a_coin_flip(dist):
    for policy in (DelegationPolicy.conventional(), DelegationPolicy.free(3), DelegationPolicy.capped(5, 2)):
        res = evaluate(dist, 0.5, policy)
        assert res.value == pytest.approx(0.5, abs=max(res.truncation_error, 1e-14))


def test_explicit_against_rational_oracle():
    p = Fraction(3, 5)
    expected = sum(
        math.comb(3, k) * p**k * (1 - p) ** (3 - k) * free_delegation_kernel_exact(k, 3 - k, 2) for k in range(4)
    )
    res = free_delegation(Explicit(((3, 1.0),)), 0.6, 2)
    assert res.value == pytest.approx(float(expected), abs=1e-15)
    assert res.truncation_error == 0


@pytest.mark.parametrize("n,p,m", [(20, 0.6, 10), (7, 0.75, 3), (12, 0.55, 40)])
def test_poisson_matches_independent_party_decomposition(n, p, m):
    # Poisson thinning: A and B counts are independent Poissons
    budget = TruncationBudget(1e-13)
    top = truncation_index(Poisson(n), budget)
    route = math.fsum(
        poisson_type_marginal(n, p, k) * poisson_type_marginal(n, 1 - p, l) * free_delegation_kernel(k, l, m)
        for k in range(top + 1)
        for l in range(top + 1)
    )
    assert free_delegation(Poisson(n), p, m, budget).value == pytest.approx(route, abs=1e-10)


COINCIDENCE_DISTS = [Poisson(5), POISSON20, PointMass(9), Explicit(((4, 0.6), (1, 0.4)))]


@pytest.mark.parametrize("dist", COINCIDENCE_DISTS)
@pytest.mark.parametrize("p", [0.55, 0.7, 0.9])
def test_coincidence_identities(dist, p):
    conv = conventional(dist, p).value
    assert free_delegation(dist, p, 0).value == pytest.approx(conv, abs=1e-12)
    for m in (1, 2, 5, 12):
        assert capped_delegation(dist, p, m, 1).value == pytest.approx(conv, abs=1e-12)
        assert capped_delegation(dist, p, m, m + 1).value == pytest.approx(free_delegation(dist, p, m).value, abs=1e-12)
    for c in (2, 3, 7):
        assert capped_delegation(dist, p, 1, c).value == pytest.approx(free_delegation(dist, p, 1).value, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    n=st.floats(1, 30),
    p=st.floats(0.05, 0.95),
    m=st.integers(0, 25),
    c=st.integers(1, 4),
)
def test_symmetry_in_p(n, p, m, c):
    dist = Poisson(n)
    for policy in (DelegationPolicy.free(m), DelegationPolicy.capped(m, c)):
        a = evaluate(dist, p, policy)
        b = evaluate(dist, 1 - p, policy)
        assert a.value + b.value == pytest.approx(1.0, abs=2 * a.truncation_error + 1e-12)


def test_truncation_error_within_budget():
    for tail in (1e-6, 1e-9, 1e-12):
        res = free_delegation(POISSON20, 0.6, 5, TruncationBudget(tail))
        assert 0 < res.truncation_error <= tail


def test_process_policy_at_oracle_scale():
    p = 0.6
    expected = sum(
        math.comb(5, k) * p**k * (1 - p) ** (5 - k) * float(capped_process_kernel_exact(k, 5 - k, 4, 2))
        for k in range(6)
    )
    assert capped_process(PointMass(5), p, 4, 2).value == pytest.approx(expected, abs=1e-14)


def test_process_policy_rejects_large_electorates():
    with pytest.raises(OracleScaleError):
        capped_process(POISSON20, 0.6, 3, 2)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_p_must_be_interior(p):
    with pytest.raises(ValueError):
        conventional(POISSON20, p)


def test_p_to_1_limit():
    pts = limit_check_p_to_1(POISSON20, 5, [0.5, 0.9, 0.99, 0.999, 1.0])
    values = [r.value for _, r in pts]
    assert values[0] == pytest.approx(0.5, abs=pts[0][1].truncation_error)
    assert values[1] < values[2] < values[3] < values[4]
    last = pts[-1][1]
    # summed masses and the CCDF tail are rounded independently
    assert last.value >= 1 - last.truncation_error - 1e-14


def test_p_grid_must_ascend():
    with pytest.raises(ValueError):
        limit_check_p_to_1(POISSON20, 5, [0.9, 0.6])


def test_n_to_inf_limit():
    fixed = [r.value for _, r in limit_check_n_to_inf(0.6, 10, [20, 50, 100])]
    assert fixed[0] < fixed[1] < fixed[2]
    assert fixed[2] > 0.97
    scaled = [r.value for _, r in limit_check_n_to_inf(0.6, lambda n: int(n), [20, 50, 100])]
    assert scaled[0] < scaled[1] < scaled[2]
    assert conventional(Poisson(50), 0.99).value > 0.999999


def test_m_to_inf_limit():
    pts = {pt.m: pt for pt in limit_check_m_to_inf(POISSON20, 0.6, [1, 2, 300, 3000])}
    # published gaps: 0.81413 - 0.808443 and 0.81413 - 0.804256
    assert pts[1].gap == pytest.approx(0.005687, abs=1e-5)
    assert pts[2].gap == pytest.approx(0.009874, abs=1e-5)
    assert pts[300].gap == pytest.approx(0.81413 - 0.808516, abs=1e-5)
    assert abs(pts[3000].gap) < abs(pts[300].gap)


def test_conjecture_report_is_informational():
    rows = conjecture_report([Poisson(5), PointMass(9)], [0.6, 0.9], range(1, 8), [2, 3])
    assert len(rows) == 2 * 2 * 7 * 2
    bad = [r for r in rows if not r.holds]
    print(f"free <= capped held in {len(rows) - len(bad)}/{len(rows)} cases")


def test_policy_parse_round_trip():
    for text in ("conv", "free:10", "capped:10,2", "capped-process:3,2"):
        assert str(DelegationPolicy.parse(text)) == text
    for bad in ("free", "capped:3", "capped:3,0", "vote:1", "free:-1"):
        with pytest.raises(ValueError):
            DelegationPolicy.parse(bad)


def test_kernels_stay_in_unit_interval():
    for k, l, m in itertools.product(range(8), range(8), range(12)):
        assert 0.0 <= free_delegation_kernel(k, l, m) <= 1.0
        assert 0.0 <= capped_delegation_kernel(k, l, m, 2) <= 1.0
