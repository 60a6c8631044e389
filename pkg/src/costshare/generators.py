"""Seeded random instance families for tests and audits.

All generated values live on a dyadic grid (multiples of 1/256) so that
sums and differences of cost values are exact in binary64; the sequential
mechanism's telescoping payment sum is then bitwise exact.
"""

from __future__ import annotations

import itertools
import math

from .model import (
    Allocation,
    Instance,
    ItemUniverse,
    SetFunctionSpec,
    bundle_key,
)
from .rng import Xoshiro256

UNIT = 1.0 / 256.0


def _subsets(items):
    items = sorted(items)
    for r in range(len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield combo


def random_monotone_table(rng: Xoshiro256, items) -> SetFunctionSpec:
    """Random normalized monotone table: each set's value is the maximum over
    its one-smaller subsets plus a nonnegative dyadic step."""
    items = sorted(items)
    values = {frozenset(): 0.0}
    for size in range(1, len(items) + 1):
        for combo in itertools.combinations(items, size):
            s = frozenset(combo)
            floor = max(values[s - {x}] for x in s)
            values[s] = floor + rng.dyadic(64)
    entries = {bundle_key(s): v for s, v in values.items()}
    return SetFunctionSpec.table_fn(items, entries)


def random_coverage_cost(
    rng: Xoshiro256, items, ground_size: int = 6
) -> SetFunctionSpec:
    """Weighted coverage function, materialized as a table: monotone,
    submodular and normalized by construction."""
    items = sorted(items)
    weights = [rng.dyadic(128) + UNIT for _ in range(ground_size)]
    covers = {}
    for item in items:
        mask = 0
        while mask == 0:
            mask = rng.randint(1, 2 ** ground_size - 1)
        covers[item] = mask
    entries = {}
    for combo in _subsets(items):
        mask = 0
        for item in combo:
            mask |= covers[item]
        entries[bundle_key(combo)] = math.fsum(
            weights[b] for b in range(ground_size) if mask >> b & 1
        )
    return SetFunctionSpec.table_fn(items, entries)


def subadditive_closure(spec: SetFunctionSpec) -> SetFunctionSpec:
    """Cheapest-cover closure of a monotone table: f*(S) = min over
    partitions of S of the summed original values.  Monotone, normalized and
    subadditive."""
    items = sorted(spec.scope)
    closed = {frozenset(): 0.0}
    for size in range(1, len(items) + 1):
        for combo in itertools.combinations(items, size):
            s = frozenset(combo)
            best = spec.value(s)
            members = sorted(s)
            anchor = members[0]
            # anchor-containing parts suffice: every partition has a part
            # holding the anchor
            for part in _subsets(members[1:]):
                t = frozenset(part) | {anchor}
                if t == s:
                    continue
                best = min(best, spec.value(t) + closed[s - t])
            closed[s] = best
    entries = {bundle_key(s): v for s, v in closed.items()}
    return SetFunctionSpec.table_fn(items, entries)


def random_subadditive_table(rng: Xoshiro256, items) -> SetFunctionSpec:
    return subadditive_closure(random_monotone_table(rng, items))


def random_supermodular_valuation(rng: Xoshiro256, items) -> SetFunctionSpec:
    """Additive part plus a convex size bonus; supermodular and monotone."""
    items = sorted(items)
    weights = {item: rng.dyadic(64) for item in items}
    step = rng.dyadic(16)
    bonus = [0.0]
    for k in range(1, len(items) + 1):
        step += rng.dyadic(16)
        bonus.append(bonus[-1] + step)
    entries = {}
    for combo in _subsets(items):
        entries[bundle_key(combo)] = (
            math.fsum(weights[i] for i in combo) + bonus[len(combo)]
        )
    if not items:
        return SetFunctionSpec.table_fn(items, {"": 0.0})
    return SetFunctionSpec.table_fn(items, entries)


def random_symmetric_valuation(rng: Xoshiro256, items) -> SetFunctionSpec:
    levels = [0.0]
    for _ in range(len(items)):
        levels.append(levels[-1] + rng.dyadic(64))
    return SetFunctionSpec.symmetric(tuple(items), levels)


def random_additive_valuation(rng: Xoshiro256, items) -> SetFunctionSpec:
    return SetFunctionSpec.additive(
        tuple(items), {item: rng.dyadic(96) for item in items}
    )


def random_unit_demand_valuation(rng: Xoshiro256, items) -> SetFunctionSpec:
    return SetFunctionSpec.unit_demand(tuple(items), rng.dyadic(128))


def random_xos_valuation(rng: Xoshiro256, items) -> SetFunctionSpec:
    items = sorted(items)
    clauses = []
    for _ in range(rng.randint(1, 3)):
        clauses.append({item: rng.dyadic(64) for item in items})
    return SetFunctionSpec.xos(tuple(items), clauses)


def random_table_valuation(rng: Xoshiro256, items) -> SetFunctionSpec:
    return random_monotone_table(rng, items)


_VALUATION_FAMILIES = (
    random_unit_demand_valuation,
    random_additive_valuation,
    random_symmetric_valuation,
    random_table_valuation,
    random_xos_valuation,
    random_supermodular_valuation,
)


def random_universe(
    rng: Xoshiro256,
    max_players: int = 4,
    max_items: int = 2,
    min_players: int = 2,
    allow_empty: bool = True,
) -> ItemUniverse:
    n = rng.randint(min_players, max_players)
    lo = 0 if allow_empty else 1
    per_player = []
    for i in range(n):
        m = rng.randint(lo, max_items)
        per_player.append([f"i{i}_{k}" for k in range(m)])
    if all(not p for p in per_player):
        per_player[0] = ["i0_0"]
    return ItemUniverse.of(per_player)


def _random_cost(rng: Xoshiro256, universe: ItemUniverse) -> SetFunctionSpec:
    items = sorted(universe.items())
    pick = rng.randint(0, 3)
    if pick == 0:
        return random_monotone_table(rng, items)
    if pick == 1:
        return random_coverage_cost(rng, items)
    if pick == 2:
        return random_subadditive_table(rng, items)
    return SetFunctionSpec.epg(tuple(items))


def random_instance(
    rng: Xoshiro256, max_players: int = 4, max_items: int = 2
) -> Instance:
    """Mixed-family instance: random universe, one random valuation family
    per player, random cost family."""
    universe = random_universe(rng, max_players=max_players, max_items=max_items)
    valuations = tuple(
        rng.choice(_VALUATION_FAMILIES)(rng, universe.per_player[i])
        for i in range(universe.n)
    )
    return Instance(universe, valuations, _random_cost(rng, universe))


def random_instance_supermodular_submodular(
    rng: Xoshiro256, max_players: int = 4, max_items: int = 2
) -> Instance:
    """First budget-balance setting: supermodular valuations, submodular
    (coverage) cost."""
    universe = random_universe(rng, max_players=max_players, max_items=max_items)
    valuations = tuple(
        random_supermodular_valuation(rng, universe.per_player[i])
        for i in range(universe.n)
    )
    cost = random_coverage_cost(rng, sorted(universe.items()))
    return Instance(universe, valuations, cost)


def random_player_symmetric_submodular_cost(
    rng: Xoshiro256, universe: ItemUniverse
) -> SetFunctionSpec:
    """Concave function of the total served count plus per-player concave
    terms: player-wise symmetric and submodular over 2^M."""
    sizes = [len(p) for p in universe.per_player]
    total = sum(sizes)

    def concave_increments(length):
        steps = sorted((rng.dyadic(32) for _ in range(length)), reverse=True)
        levels = [0.0]
        for s in steps:
            levels.append(levels[-1] + s)
        return levels

    phi = concave_increments(total)
    per_player = [concave_increments(m) for m in sizes]
    entries = {}
    for counts in itertools.product(*(range(m + 1) for m in sizes)):
        value = phi[sum(counts)] + math.fsum(
            per_player[i][c] for i, c in enumerate(counts)
        )
        entries[",".join(str(c) for c in counts)] = value
    return SetFunctionSpec.player_symmetric(universe.per_player, entries)


def random_instance_symmetric(
    rng: Xoshiro256, max_players: int = 4, max_items: int = 2
) -> Instance:
    """Second budget-balance setting: symmetric valuations, player-wise
    symmetric submodular cost."""
    universe = random_universe(rng, max_players=max_players, max_items=max_items)
    valuations = tuple(
        random_symmetric_valuation(rng, universe.per_player[i])
        for i in range(universe.n)
    )
    cost = random_player_symmetric_submodular_cost(rng, universe)
    return Instance(universe, valuations, cost)


def random_instance_two_players(
    rng: Xoshiro256, max_items: int = 2
) -> Instance:
    """Third budget-balance setting: two players, arbitrary monotone
    valuations, submodular cost."""
    universe = random_universe(
        rng, max_players=2, min_players=2, max_items=max_items
    )
    valuations = tuple(
        random_monotone_table(rng, universe.per_player[i])
        for i in range(universe.n)
    )
    cost = random_coverage_cost(rng, sorted(universe.items()))
    return Instance(universe, valuations, cost)


def random_instance_small(rng: Xoshiro256) -> Instance:
    """Small instances for the incentive audits: n in {2, 3}, single-item
    universes, structured valuations (so deviation grids stay tractable)."""
    n = rng.randint(2, 3)
    universe = ItemUniverse.of([[f"i{i}_0"] for i in range(n)])
    valuations = []
    for i in range(n):
        if rng.randint(0, 3) == 0:
            valuations.append(
                random_monotone_table(rng, universe.per_player[i])
            )
        else:
            valuations.append(
                random_unit_demand_valuation(rng, universe.per_player[i])
            )
    return Instance(universe, tuple(valuations), _random_cost(rng, universe))


def random_simple_symmetric_levels(rng: Xoshiro256, n: int):
    """(cost levels, values) for a simple symmetric instance."""
    levels = [0.0]
    for _ in range(n):
        levels.append(levels[-1] + rng.dyadic(32))
    values = [rng.dyadic(128) for _ in range(n)]
    return levels, values
