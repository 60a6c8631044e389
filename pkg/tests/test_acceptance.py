"""Acceptance gate: twelve numbered criteria, one printed pass/fail line each.

Run with `pytest -s tests/test_acceptance.py` to see the verdict lines.
Each criterion is a separate test so a failure pinpoints the broken claim.
"""

import math
import time

import pytest

from costshare import (
    Allocation,
    Instance,
    ItemUniverse,
    ObjectiveSpec,
    PotentialTable,
    SetFunctionSpec,
    build_counterexample,
    bb_inequality_audit,
    check_class,
    enumerate_allocations,
    harmonic,
    minimality_audit,
    optimal_social_cost,
    potential_recursive,
    run_potential,
    run_potential_symmetric_fast,
    run_sequential,
    run_vcg_baseline,
    simple_symmetric_instance,
    social_cost,
    symmetric_potential,
    welfare_gap,
)
from costshare import test_group_deviation as group_deviation_audit
from costshare import test_strategyproof as sp_audit
from costshare.cli import demo_report
from costshare.generators import (
    random_coverage_cost,
    random_instance,
    random_instance_small,
    random_instance_supermodular_submodular,
    random_instance_symmetric,
    random_instance_two_players,
    random_monotone_table,
    random_simple_symmetric_levels,
    random_subadditive_table,
    random_universe,
    random_unit_demand_valuation,
)
from costshare.mechanisms import run_pay_your_bid
from costshare.potential import potential_table_spec
from costshare.rng import Xoshiro256


def verdict(number, label, ok):
    print(f"criterion {number:2d} ({label}): {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {number} ({label}) failed"


def epg_unit_demand(values):
    n = len(values)
    universe = ItemUniverse.of([[f"g{i}"] for i in range(n)])
    vals = tuple(
        SetFunctionSpec.unit_demand((f"g{i}",), values[i]) for i in range(n)
    )
    return Instance(
        universe, vals, SetFunctionSpec.epg(tuple(f"g{i}" for i in range(n)))
    )


def _cost_corpus(seed, builder, count):
    """(universe, cost, instance-with-random-valuations) triples."""
    rng = Xoshiro256(seed)
    corpus = []
    for _ in range(count):
        universe = random_universe(rng)
        cost = builder(rng, sorted(universe.items()))
        valuations = tuple(
            random_unit_demand_valuation(rng, universe.per_player[i])
            if universe.per_player[i]
            else SetFunctionSpec.unit_demand((), 0.0)
            for i in range(universe.n)
        )
        corpus.append((universe, cost, Instance(universe, valuations, cost)))
    return corpus


@pytest.fixture(scope="module")
def submodular_corpus():
    return _cost_corpus(301, random_coverage_cost, 100)


@pytest.fixture(scope="module")
def subadditive_corpus():
    return _cost_corpus(302, random_subadditive_table, 100)


def test_criterion_01_potential_identity():
    started = time.perf_counter()
    rng = Xoshiro256(101)
    ok = True
    for _ in range(200):
        universe = random_universe(rng)
        cost = random_monotone_table(rng, sorted(universe.items()))
        table = PotentialTable(cost)
        for alloc in enumerate_allocations(universe):
            gradients = math.fsum(
                table.marginal(alloc, i) for i in range(universe.n)
            )
            if abs(gradients - cost.value(alloc.items())) > 1e-9:
                ok = False
            if abs(table.value(alloc) - potential_recursive(cost, alloc)) > 1e-9:
                ok = False
    elapsed = time.perf_counter() - started
    verdict(1, "potential identity", ok and elapsed < 10.0)


def test_criterion_02_epg_potential_harmonic():
    ok = True
    pot = symmetric_potential([0.0] + [1.0] * 20)
    for k in range(21):
        if abs(pot.value_at(k) - harmonic(k)) > 1e-12:
            ok = False
    # generic evaluator agreement up to 12 served players
    items = tuple(f"g{i}" for i in range(12))
    cost = SetFunctionSpec.epg(items)
    table = PotentialTable(cost)
    for k in range(13):
        alloc = Allocation.of(
            [(items[i],) if i < k else () for i in range(12)]
        )
        if abs(table.value(alloc) - harmonic(k)) > 1e-12:
            ok = False
    # the two spot values: one served player costs 1, two cost 1.5
    one = Allocation.of([(items[0],)] + [()] * 11)
    two = Allocation.of([(items[0],), (items[1],)] + [()] * 10)
    ok = ok and table.value(one) == 1.0 and table.value(two) == 1.5
    verdict(2, "epg potential = harmonic", ok)


def test_criterion_03_potential_bounds(submodular_corpus, subadditive_corpus):
    ok = True
    for universe, cost, _ in submodular_corpus:
        table = PotentialTable(cost)
        h_n = harmonic(universe.n)
        for alloc in enumerate_allocations(universe):
            c = cost.value(alloc.items())
            p = table.value(alloc)
            if p < c - 1e-9 or p > h_n * c + 1e-9:
                ok = False
    for universe, cost, _ in subadditive_corpus:
        table = PotentialTable(cost)
        h_n = harmonic(universe.n)
        for alloc in enumerate_allocations(universe):
            c = cost.value(alloc.items())
            p = table.value(alloc)
            if p < c / 2.0 - 1e-9 or p > h_n * c + 1e-9:
                ok = False
    verdict(3, "potential bounds", ok)


def test_criterion_04_submodularity_preserved(submodular_corpus):
    ok = True
    for universe, cost, _ in submodular_corpus:
        spec = potential_table_spec(cost, universe)
        if not check_class(spec, "submodular").holds:
            ok = False
    verdict(4, "submodularity preserved", ok)


def test_criterion_05_cost_recovery():
    rng = Xoshiro256(505)
    ok = True
    for _ in range(500):
        inst = random_instance(rng)
        out = run_potential(inst)
        if out.payment_total() < out.cost_incurred - 1e-9:
            ok = False
    vcg = run_vcg_baseline(epg_unit_demand([2.0, 2.0]))
    deficit_shown = vcg.payment_total() == 0.0 and vcg.cost_incurred == 1.0
    verdict(5, "cost recovery", ok and deficit_shown)


def test_criterion_06_budget_balance_settings():
    rng = Xoshiro256(606)
    ok = True
    generators = (
        random_instance_supermodular_submodular,
        random_instance_symmetric,
        random_instance_two_players,
    )
    for gen in generators:
        for _ in range(200):
            inst = gen(rng)
            out = run_potential(inst)
            h_n = harmonic(inst.n)
            if out.payment_total() > h_n * out.cost_incurred + 1e-9:
                ok = False
            if not bb_inequality_audit(inst, out)["holds"]:
                ok = False
    verdict(6, "budget balance in three settings", ok)


def test_criterion_07_efficiency(submodular_corpus, subadditive_corpus):
    ok = True
    for corpus, ratio_factor, gap_factor in (
        (submodular_corpus, 1.0, 1.0),
        (subadditive_corpus, 2.0, 2.0),
    ):
        for universe, cost, inst in corpus:
            out = run_potential(inst)
            h_n = harmonic(inst.n)
            pi_alg = social_cost(inst, out.allocation)
            pi_opt, opt_alloc = optimal_social_cost(inst)
            if pi_opt > 1e-12:
                if pi_alg / pi_opt > ratio_factor * h_n + 1e-9:
                    ok = False
            elif pi_alg > 1e-9:
                ok = False
            gap = welfare_gap(inst, out.allocation)
            bound = (gap_factor * h_n - 1.0) * inst.cost_of(opt_alloc)
            if gap > bound + 1e-9:
                ok = False
    verdict(7, "efficiency bounds", ok)


def test_criterion_08_incentives():
    rng = Xoshiro256(808)
    ok = True
    for _ in range(100):
        inst = random_instance_small(rng)
        if sp_audit(inst, run_potential) is not None:
            ok = False
        if sp_audit(inst, run_sequential) is not None:
            ok = False
    control = sp_audit(epg_unit_demand([2.0, 2.0]), run_pay_your_bid)
    ok = ok and control is not None
    inst, expected = build_counterexample("gsp-epg", 2)
    witness = group_deviation_audit(inst, run_potential, notion="wgsp")
    ok = ok and witness is not None
    if witness is not None:
        for g in witness.gains():
            if abs(g - expected["coalition_gain"]) > 1e-9:
                ok = False
    verdict(8, "incentive audits", ok)


def test_criterion_09_named_counterexamples():
    ok = True

    report, matched = demo_report("non-subadditive", 8, 0.125)
    ok = ok and matched
    ok = ok and abs(report["measured"]["social_cost_ratio"] - 4.0) <= 1e-6

    report, matched = demo_report("unit-demand-overcharge", 4)
    ok = ok and matched
    ok = ok and all(
        abs(p - 1.0) <= 1e-6 for p in report["measured"]["payments"]
    )
    ok = ok and abs(report["measured"]["budget_ratio"] - 2.0) <= 1e-6

    report, matched = demo_report("epg-overcharge", 10)
    ok = ok and matched
    h10 = harmonic(10)
    total = report["measured"]["payment_sum"]
    ok = ok and h10 - 1e-3 <= total <= h10
    ok = ok and report["measured"]["cost"] == 1.0

    report, matched = demo_report("sequential-tight", 8, 1e-3)
    ok = ok and matched
    ok = ok and report["measured"]["social_cost_ratio"] >= 8 * (1 - 1e-3) - 1e-6

    verdict(9, "named counterexamples", ok)


def test_criterion_10_sequential_mechanism():
    rng = Xoshiro256(1010)
    ok = True
    for _ in range(500):
        inst = random_instance(rng)
        out = run_sequential(inst)
        # telescoping makes the payment sum equal the cost bitwise
        if out.payment_total() != out.cost_incurred:
            ok = False
        pi_alg = social_cost(inst, out.allocation)
        pi_opt, _ = optimal_social_cost(inst)
        if pi_opt > 1e-12:
            if pi_alg > inst.n * pi_opt + 1e-9:
                ok = False
        elif pi_alg > 1e-9:
            ok = False
    rng2 = Xoshiro256(1011)
    for _ in range(100):
        inst = random_instance_supermodular_submodular(rng2)
        out = run_sequential(inst)
        for step in out.steps:
            ms = set(step.maximizers)
            for a in step.maximizers:
                for b in step.maximizers:
                    if tuple(sorted(set(a) | set(b))) not in ms:
                        ok = False
    verdict(10, "sequential mechanism", ok)


def test_criterion_11_minimality():
    inst = epg_unit_demand([1.0, 1.0])
    witness = minimality_audit(
        ObjectiveSpec.cost_fn(inst.cost), inst.cost, inst.universe
    )
    ok = witness is not None
    if witness is not None:
        ok = ok and witness.violating == inst.universe.full_allocation()
        ok = ok and witness.profile_amount == 2.0
        ok = ok and math.fsum(witness.payments) == 0.0
        ok = ok and witness.deficit == -1.0
    passes = minimality_audit(
        ObjectiveSpec.potential(inst.cost), inst.cost, inst.universe
    )
    verdict(11, "minimality of the potential", ok and passes is None)


def test_criterion_12_fast_path_performance():
    rng = Xoshiro256(1212)
    ok = True
    for n in range(2, 13):
        for _ in range(3):
            levels, values = random_simple_symmetric_levels(rng, n)
            fast = run_potential_symmetric_fast(n, levels, values)
            slow = run_potential(simple_symmetric_instance(levels, values))
            if fast.allocation != slow.allocation:
                ok = False
            if any(
                abs(a - b) > 1e-9
                for a, b in zip(fast.payments, slow.payments)
            ):
                ok = False
    n = 100_000
    values = [rng.dyadic(256) for _ in range(n)]
    levels = [0.0] + [1.0] * n
    started = time.perf_counter()
    out = run_potential_symmetric_fast(n, levels, values)
    elapsed = time.perf_counter() - started
    ok = ok and out.payment_total() >= out.cost_incurred - 1e-9
    verdict(12, "symmetric fast path", ok and elapsed < 1.0)
