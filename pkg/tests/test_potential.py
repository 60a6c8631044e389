import math

import pytest

from costshare import (
    Allocation,
    ItemUniverse,
    NotNormalized,
    PotentialTable,
    SetFunctionSpec,
    check_class,
    enumerate_allocations,
    expected_density,
    harmonic,
    marginal,
    potential_recursive,
    potential_value,
    symmetric_potential,
)
from costshare.generators import random_coverage_cost, random_monotone_table
from costshare.potential import potential_table_spec
from costshare.rng import Xoshiro256


def epg_instance_parts(n):
    items = tuple(f"g{i}" for i in range(n))
    universe = ItemUniverse.of([[it] for it in items])
    return universe, SetFunctionSpec.epg(items)


def test_harmonic_values():
    assert harmonic(1) == 1.0
    assert abs(harmonic(2) - 1.5) < 1e-15
    assert abs(harmonic(4) - (1 + 0.5 + 1 / 3 + 0.25)) < 1e-15


def test_epg_potential_is_harmonic():
    universe, cost = epg_instance_parts(4)
    for alloc in enumerate_allocations(universe):
        k = len(alloc.support())
        assert abs(potential_value(cost, alloc) - harmonic(k)) < 1e-12


def test_potential_small_closed_values():
    # serving one player of an epg costs 1, serving two costs H_2 = 1.5
    universe, cost = epg_instance_parts(3)
    one = Allocation.of([("g0",), (), ()])
    two = Allocation.of([("g0",), ("g1",), ()])
    assert potential_value(cost, one) == 1.0
    assert abs(potential_value(cost, two) - 1.5) < 1e-12


def test_closed_form_matches_recursion():
    rng = Xoshiro256(99)
    for _ in range(15):
        universe = ItemUniverse.of([["a"], ["b", "c"], ["d"]])
        cost = random_monotone_table(rng, sorted(universe.items()))
        for alloc in enumerate_allocations(universe):
            closed = potential_value(cost, alloc)
            rec = potential_recursive(cost, alloc)
            assert abs(closed - rec) < 1e-9


def test_gradient_identity():
    rng = Xoshiro256(7)
    universe = ItemUniverse.of([["a", "b"], ["c"], ["d"]])
    cost = random_monotone_table(rng, sorted(universe.items()))
    table = PotentialTable(cost)
    for alloc in enumerate_allocations(universe):
        grad = math.fsum(table.marginal(alloc, i) for i in range(universe.n))
        assert abs(grad - cost.value(alloc.items())) < 1e-9


def test_marginal_matches_shapley_permutation_average():
    # brute-force Shapley over arrival orders of the supporting players
    import itertools

    rng = Xoshiro256(13)
    universe = ItemUniverse.of([["a"], ["b"], ["c"]])
    cost = random_monotone_table(rng, sorted(universe.items()))
    alloc = universe.full_allocation()
    n = universe.n
    for i in range(n):
        contributions = []
        for order in itertools.permutations(range(n)):
            before = order[: order.index(i)]
            with_i = alloc.union_over(list(before) + [i])
            without_i = alloc.union_over(before)
            contributions.append(cost.value(with_i) - cost.value(without_i))
        shapley = math.fsum(contributions) / math.factorial(n)
        assert abs(marginal(cost, alloc, i) - shapley) < 1e-9


def test_potential_depends_only_on_support():
    universe, cost = epg_instance_parts(5)
    a = Allocation.of([("g0",), ("g1",), (), (), ()])
    # padding extra always-empty players must not change the value
    b = Allocation.of([("g0",), ("g1",)])
    assert potential_value(cost, a) == potential_value(cost, b)


def test_expected_density_decomposition():
    rng = Xoshiro256(31)
    universe = ItemUniverse.of([["a"], ["b"], ["c"]])
    cost = random_monotone_table(rng, sorted(universe.items()))
    alloc = universe.full_allocation()
    total = math.fsum(
        expected_density(cost, alloc, l) for l in range(1, universe.n + 1)
    )
    assert abs(total - potential_value(cost, alloc)) < 1e-9


def test_expected_density_level_range():
    universe, cost = epg_instance_parts(2)
    with pytest.raises(ValueError):
        expected_density(cost, universe.full_allocation(), 0)


def test_symmetric_potential_recursion_and_validation():
    pot = symmetric_potential([0.0, 1.0, 1.0, 1.0])
    assert pot.value_at(2) == 1.5
    with pytest.raises(NotNormalized):
        symmetric_potential([0.5, 1.0])


def test_potential_upper_bound_harmonic():
    rng = Xoshiro256(55)
    universe = ItemUniverse.of([["a"], ["b"], ["c", "d"]])
    h_n = harmonic(universe.n)
    for _ in range(10):
        cost = random_monotone_table(rng, sorted(universe.items()))
        table = PotentialTable(cost)
        for alloc in enumerate_allocations(universe):
            c = cost.value(alloc.items())
            assert table.value(alloc) <= h_n * c + 1e-9


def test_potential_preserves_submodularity():
    rng = Xoshiro256(77)
    universe = ItemUniverse.of([["a"], ["b"], ["c"]])
    for _ in range(5):
        cost = random_coverage_cost(rng, sorted(universe.items()))
        spec = potential_table_spec(cost, universe)
        assert check_class(spec, "submodular").holds
        assert check_class(spec, "monotone").holds
