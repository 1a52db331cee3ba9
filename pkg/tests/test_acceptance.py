"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line that is printed at the end of the pytest
run. Run directly with ``python tests/test_acceptance.py`` to see only these.
"""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from votedelegation.cli import TABLE1_PUBLISHED, TABLE1_TOLERANCE, table1_rows
from votedelegation.distributions import PointMass, Poisson, TruncationBudget
from votedelegation.engine import (
    DelegationPolicy,
    capped_delegation,
    conventional,
    evaluate,
    free_delegation,
    limit_check_m_to_inf,
    limit_check_n_to_inf,
    limit_check_p_to_1,
)
from votedelegation.kernels import (
    capped_delegation_kernel,
    capped_delegation_kernel_exact,
    capped_process_kernel_exact,
    free_delegation_kernel,
    free_delegation_kernel_exact,
)
from votedelegation.simulator import (
    COUNTEREXAMPLE_JOINT,
    joint_win_probability_exact,
    simulate,
    simulate_instance,
    simulate_joint,
    SimulationConfig,
)
from votedelegation.weighted import unweighted_majority_prob, weight_dominance_check, weighted_majority_prob

P = DelegationPolicy


def test_table1_reproduction(record):
    start = time.perf_counter()
    rows = table1_rows(TruncationBudget(1e-9))
    elapsed = time.perf_counter() - start
    deltas = []
    for row in rows:
        published = TABLE1_PUBLISHED[row["m"]]
        for col, ref in zip(("conventional", "free", "capped"), published):
            deltas.append(abs(row[col] - ref))
    worst = max(deltas)
    ok = len(deltas) == 15 and worst <= TABLE1_TOLERANCE and elapsed < 60
    record("table1", ok, f"15 values, max |delta| = {worst:.2e} (tol 5e-6), {elapsed:.2f} s")
    assert ok


def test_kernel_identities(record):
    worst, exact_ok, cases = 0.0, True, 0
    for l, t, m in itertools.product(range(11), repeat=3):
        cases += 1
        worst = max(worst, abs(free_delegation_kernel(l + t, l, m) + free_delegation_kernel(l, l + t, m) - 1))
        exact_ok &= free_delegation_kernel_exact(l + t, l, m) + free_delegation_kernel_exact(l, l + t, m) == 1
        for c in (2, 3, 4):
            worst = max(worst, abs(capped_delegation_kernel(l + t, l, m, c) + capped_delegation_kernel(l, l + t, m, c) - 1))
            exact_ok &= capped_delegation_kernel_exact(l + t, l, m, c) + capped_delegation_kernel_exact(l, l + t, m, c) == 1
            if t == 0:
                worst = max(worst, abs(capped_delegation_kernel(l, l, m, c) - 0.5))
                exact_ok &= capped_delegation_kernel_exact(l, l, m, c) == Fraction(1, 2)
    ok = worst <= 1e-12 and exact_ok
    record("kernel identities", ok, f"{cases} (l,t,m) points x c in {{2,3,4}}, max float error {worst:.1e}, exact equality {exact_ok}")
    assert ok


def test_delegation_strictly_worse(record):
    dists = [Poisson(5), Poisson(10), Poisson(20), PointMass(9)]
    failures, min_ratio, count = [], np.inf, 0
    for dist, p in itertools.product(dists, (0.55, 0.6, 0.7, 0.9)):
        base = conventional(dist, p)
        for m in range(1, 21):
            for res in [free_delegation(dist, p, m)] + [capped_delegation(dist, p, m, c) for c in (2, 3, 5)]:
                count += 1
                margin = base.value - res.value
                err = base.truncation_error + res.truncation_error
                if not margin > 10 * err:
                    failures.append((dist, p, str(res.policy), margin, err))
                if err > 0:
                    min_ratio = min(min_ratio, margin / err)
    ok = not failures
    record(
        "delegation strictly below conventional",
        ok,
        f"{count - len(failures)}/{count} cases, smallest margin/truncation ratio {min_ratio:.3g}",
    )
    assert ok, failures[:5]


def test_counterexample(record):
    conv = joint_win_probability_exact(COUNTEREXAMPLE_JOINT, 0)
    deleg = joint_win_probability_exact(COUNTEREXAMPLE_JOINT, 1)
    sim = simulate_joint(COUNTEREXAMPLE_JOINT, 1, 1_000_000, seed=1)
    ok = conv == Fraction(3, 5) and deleg == Fraction(2, 3) and sim.ci95_low <= 2 / 3 <= sim.ci95_high
    record(
        "counterexample",
        ok,
        f"exact {conv} vs {deleg}; 1e6 trials seed 1: {sim.estimate:.5f} "
        f"ci95 [{sim.ci95_low:.5f}, {sim.ci95_high:.5f}]",
    )
    assert ok


def test_weighted_majority_dominance(record):
    rng = np.random.default_rng(2024)
    violations, equal_err, checked = 0, 0.0, 0
    for n, p in itertools.product((3, 5, 9, 13), (0.55, 0.7, 0.9)):
        report = weight_dominance_check(n, p, rng.random((1000, n)))
        violations += report.violations
        checked += report.samples
        equal_err = max(equal_err, abs(weighted_majority_prob([1.0] * n, p) - unweighted_majority_prob(n, p)))
    ok = violations == 0 and equal_err <= 1e-12
    record("weighted majority", ok, f"{violations} violations in {checked} profiles, equal weights off by {equal_err:.1e}")
    assert ok


def test_process_vs_formula(record):
    process = capped_process_kernel_exact(2, 1, 3, 2)
    formula = capped_delegation_kernel_exact(2, 1, 3, 2)
    mc = simulate_instance(2, 1, P.capped_process(3, 2), 100_000, seed=0)
    within = abs(mc.estimate - float(process)) <= 4 * mc.std_error
    ok = process == 1 and formula == Fraction(53, 54) and within
    record(
        "process vs closed form",
        ok,
        f"process {process}, closed form {formula}, MC 1e5 conditional trials {mc.estimate} +/- {mc.std_error:.1e}",
    )
    assert ok


def test_convergence(record):
    dist = Poisson(20)
    # m >= 1: the lone delegate decides the empty-electorate case, so no coin flip remains
    p1 = [res for m in (1, 2, 5, 10, 300) for _, res in limit_check_p_to_1(dist, m, [1.0])]
    p1_ok = all(abs(1 - r.value) <= r.truncation_error + 1e-14 for r in p1)

    pts = {pt.m: pt for pt in limit_check_m_to_inf(dist, 0.6, [300, 3000])}
    m_ok = abs(pts[3000].gap) < abs(pts[300].gap)

    ns = [r.value for _, r in limit_check_n_to_inf(0.6, 10, [20, 50, 100])]
    n_ok = ns[0] < ns[1] < ns[2] < 1 and (1 - ns[2]) < (1 - ns[0])

    ok = p1_ok and m_ok and n_ok
    record(
        "convergence",
        ok,
        f"P(1,m)=1 up to truncation: {p1_ok}; gap m=300 {pts[300].gap:.2e} > m=3000 {pts[3000].gap:.2e}; "
        f"n=20,50,100 -> {ns[0]:.5f}, {ns[1]:.5f}, {ns[2]:.5f}",
    )
    assert ok


def _agreement_grid():
    """(label, report thunk, exact value) over small fixed instances."""
    cases = []
    seed = 100
    for k, l, m, c in itertools.product(range(4), range(4), (1, 2, 4, 7), (2, 3)):
        exacts = {
            "free": free_delegation_kernel(k, l, m),
            "capped": capped_delegation_kernel(k, l, m, c),
            "capped-process": float(capped_process_kernel_exact(k, l, m, c)),
        }
        policies = {"free": P.free(m), "capped": P.capped(m, c), "capped-process": P.capped_process(m, c)}
        for name, policy in policies.items():
            seed += 1
            cases.append((name, lambda s=seed, pol=policy, k=k, l=l: simulate_instance(k, l, pol, 20_000, seed=s), exacts[name]))
    for dist, p in ((PointMass(5), 0.6), (PointMass(8), 0.7), (Poisson(4), 0.65)):
        for policy in (P.conventional(), P.free(3), P.capped(3, 2), P.capped_process(3, 2)):
            if policy.kind == "capped-process" and isinstance(dist, Poisson):
                continue
            seed += 1
            exact = evaluate(dist, p, policy).value
            name = "conventional" if policy.kind == "conventional" else policy.kind
            cases.append((name, lambda s=seed, d=dist, q=p, pol=policy: simulate(SimulationConfig(d, q, pol, 20_000, seed=s)), exact))
    return cases


def test_simulator_oracle_agreement(record):
    tallies = {}
    for name, run, exact in _agreement_grid():
        report = run()
        hit = abs(report.estimate - exact) <= 4 * report.std_error + 1e-12
        good, total = tallies.get(name, (0, 0))
        tallies[name] = (good + hit, total + 1)
    rates = {name: good / total for name, (good, total) in tallies.items()}
    ok = all(rate >= 0.95 for rate in rates.values())
    detail = ", ".join(f"{name} {good}/{total}" for name, (good, total) in tallies.items())
    record("simulator vs exact", ok, f"within 4 SE: {detail}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
