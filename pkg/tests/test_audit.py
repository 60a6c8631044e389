import math

import pytest

from costshare import (
    Instance,
    ItemUniverse,
    ObjectiveSpec,
    SetFunctionSpec,
    UnknownName,
    audit_outcome,
    bb_inequality_audit,
    budget_ratio,
    build_counterexample,
    harmonic,
    minimality_audit,
    optimal_social_cost,
    run_potential,
    run_sequential,
    social_cost,
    symmetric_marginal_audit,
    welfare_gap,
)
from costshare import test_group_deviation as group_deviation_audit
from costshare import test_strategyproof as sp_audit
from costshare.audit import DeviationGrid, misreports
from costshare.generators import random_instance_small
from costshare.mechanisms import run_pay_your_bid
from costshare.rng import Xoshiro256


def epg_unit_demand(values):
    n = len(values)
    universe = ItemUniverse.of([[f"g{i}"] for i in range(n)])
    vals = tuple(
        SetFunctionSpec.unit_demand((f"g{i}",), values[i]) for i in range(n)
    )
    return Instance(
        universe, vals, SetFunctionSpec.epg(tuple(f"g{i}" for i in range(n)))
    )


def test_social_cost_counts_excluded_value():
    inst = epg_unit_demand([2.0, 3.0])
    empty = inst.universe.full_allocation().without(0).without(1)
    assert social_cost(inst, empty) == 5.0
    full = inst.universe.full_allocation()
    assert social_cost(inst, full) == 1.0


def test_optimal_social_cost_tie_break_is_canonical():
    inst = epg_unit_demand([2.0, 3.0])
    value, alloc = optimal_social_cost(inst)
    assert value == 1.0
    assert alloc == inst.universe.full_allocation()


def test_welfare_gap_nonnegative():
    inst = epg_unit_demand([2.0, 0.25])
    out = run_potential(inst)
    assert welfare_gap(inst, out.allocation) >= -1e-9


def test_budget_ratio_edge_cases():
    out = run_sequential(epg_unit_demand([0.25, 0.25]))
    # nobody is served: zero payments over zero cost reads as balanced
    assert out.cost_incurred == 0.0
    assert budget_ratio(out) == 1.0


def test_audit_outcome_flags():
    inst = epg_unit_demand([2.0, 2.0])
    report = audit_outcome(inst, run_potential(inst))
    assert report.ir_ok and report.npt_ok and report.cost_recovered
    assert report.social_cost_ratio >= 1.0 - 1e-9


def test_misreports_include_scalings_and_table_grid():
    ud = SetFunctionSpec.unit_demand(("a",), 1.0)
    assert len(misreports(ud)) == 5
    table = SetFunctionSpec.table_fn(("a",), {"": 0.0, "a": 1.0})
    reports = misreports(table)
    assert len(reports) == 5 + 9  # scalings plus the one-key grid


def test_potential_mechanism_sp_over_grid():
    rng = Xoshiro256(404)
    for _ in range(20):
        inst = random_instance_small(rng)
        assert sp_audit(inst, run_potential) is None


def test_sequential_sp_over_grid():
    rng = Xoshiro256(505)
    for _ in range(20):
        inst = random_instance_small(rng)
        assert sp_audit(inst, run_sequential) is None


def test_pay_your_bid_is_manipulable():
    inst = epg_unit_demand([2.0, 2.0])
    witness = sp_audit(inst, run_pay_your_bid)
    assert witness is not None
    assert all(g > 1e-9 for g in witness.gains())


def test_group_deviation_wgsp_on_gsp_epg():
    inst, expected = build_counterexample("gsp-epg", 2)
    witness = group_deviation_audit(inst, run_potential, notion="wgsp")
    assert witness is not None
    assert witness.coalition == (0, 1)
    for g in witness.gains():
        assert abs(g - expected["coalition_gain"]) <= 1e-9


def test_group_deviation_notion_validation():
    inst = epg_unit_demand([2.0, 2.0])
    with pytest.raises(ValueError):
        group_deviation_audit(inst, run_potential, notion="nope")


def test_bb_inequality_on_potential_run():
    inst = epg_unit_demand([2.0, 2.0, 2.0])
    out = run_potential(inst)
    result = bb_inequality_audit(inst, out)
    assert result["holds"]
    assert result["lhs"] <= result["rhs"] + 1e-9


def test_minimality_h_cost_epg():
    inst = epg_unit_demand([1.0, 1.0])
    h = ObjectiveSpec.cost_fn(inst.cost)
    witness = minimality_audit(h, inst.cost, inst.universe)
    assert witness is not None
    assert witness.violating == inst.universe.full_allocation()
    assert witness.profile_amount == 2.0
    assert witness.payments == (0.0, 0.0)
    assert witness.deficit == -1.0


def test_minimality_h_potential_passes():
    inst = epg_unit_demand([1.0, 1.0])
    h = ObjectiveSpec.potential(inst.cost)
    assert minimality_audit(h, inst.cost, inst.universe) is None


def test_symmetric_marginal_audit():
    assert symmetric_marginal_audit([harmonic(k) for k in range(8)]) is None
    assert symmetric_marginal_audit([math.sqrt(k) for k in range(8)]) == 2


def test_build_counterexample_validation():
    with pytest.raises(UnknownName):
        build_counterexample("nope", 4)
    with pytest.raises(ValueError):
        build_counterexample("gsp-epg", 1)
    with pytest.raises(ValueError):
        build_counterexample("gsp-epg", 4, epsilon=0.5)


def test_counterexample_non_subadditive_metrics():
    inst, expected = build_counterexample("non-subadditive", 4)
    out = run_potential(inst)
    assert out.allocation == inst.universe.full_allocation()
    pi_opt, _ = optimal_social_cost(inst)
    ratio = social_cost(inst, out.allocation) / pi_opt
    assert abs(ratio - expected["social_cost_ratio"]) <= 1e-9


def test_counterexample_sequential_tight():
    inst, expected = build_counterexample("sequential-tight", 4)
    out = run_sequential(inst)
    assert out.allocation.is_empty()
    pi_opt, _ = optimal_social_cost(inst)
    ratio = social_cost(inst, out.allocation) / pi_opt
    assert abs(ratio - expected["social_cost_ratio"]) <= 1e-9


def test_group_deviation_custom_grid():
    inst = epg_unit_demand([2.0, 2.0])
    grid = DeviationGrid(scale_factors=(1.0,))
    # the truthful profile alone yields no strict gain
    assert group_deviation_audit(inst, run_potential, grid=grid) is None
