"""Instance model: item universes, set-function specs, allocations,
validation, enumeration and structural class checkers.

All values are binary64; checkers compare with absolute tolerance TOL.
Everything here is immutable after construction and all operations are pure.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import (
    DisjointnessViolation,
    NotMonotone,
    NotNormalized,
    ScopeViolation,
    SizeLimit,
    UnsupportedClass,
)

TOL = 1e-9
SIZE_LIMIT = 2 ** 20
SUBADDITIVE_SCOPE_LIMIT = 12

FUNCTION_CLASSES = (
    "monotone",
    "submodular",
    "supermodular",
    "subadditive",
    "symmetric",
    "player_symmetric",
)


def bundle_key(items: Iterable[str]) -> str:
    """Canonical table key: sorted identifiers joined by ','; '' is empty."""
    return ",".join(sorted(items))


def parse_bundle_key(key: str) -> frozenset:
    return frozenset(k for k in key.split(",") if k)


@dataclass(frozen=True)
class Allocation:
    """One bundle per player; bundles are sorted item tuples."""

    bundles: tuple

    @staticmethod
    def of(bundles: Iterable[Iterable[str]]) -> "Allocation":
        return Allocation(tuple(tuple(sorted(b)) for b in bundles))

    @staticmethod
    def empty(n: int) -> "Allocation":
        return Allocation(((),) * n)

    @property
    def n(self) -> int:
        return len(self.bundles)

    def bundle(self, i: int) -> frozenset:
        return frozenset(self.bundles[i])

    def items(self) -> frozenset:
        return frozenset(itertools.chain.from_iterable(self.bundles))

    def union_over(self, players: Iterable[int]) -> frozenset:
        return frozenset(
            itertools.chain.from_iterable(self.bundles[i] for i in players)
        )

    def without(self, i: int) -> "Allocation":
        if not self.bundles[i]:
            return self
        bs = list(self.bundles)
        bs[i] = ()
        return Allocation(tuple(bs))

    def size(self) -> int:
        return sum(len(b) for b in self.bundles)

    def is_empty(self) -> bool:
        return all(not b for b in self.bundles)

    def support(self) -> tuple:
        return tuple(i for i, b in enumerate(self.bundles) if b)

    def contains(self, other: "Allocation") -> bool:
        return all(
            set(o) <= set(s) for s, o in zip(self.bundles, other.bundles)
        )

    def sort_key(self):
        """Deterministic total order: fewest items first, then lexicographic
        on the canonical per-player encoding."""
        return (self.size(), self.bundles)


@dataclass(frozen=True)
class ItemUniverse:
    """Per-player item identifier lists (order is meaningful: it defines the
    prefix used by the symmetric tie-break)."""

    per_player: tuple

    @staticmethod
    def of(per_player: Iterable[Iterable[str]]) -> "ItemUniverse":
        u = ItemUniverse(tuple(tuple(p) for p in per_player))
        u.validate()
        return u

    def validate(self) -> None:
        seen = {}
        for i, items in enumerate(self.per_player):
            for item in items:
                if not isinstance(item, str) or not item or "," in item:
                    raise ScopeViolation(
                        f"invalid item identifier {item!r} for player {i}"
                    )
                if item in seen:
                    raise DisjointnessViolation(
                        f"item {item!r} appears for players {seen[item]} and {i}"
                    )
                seen[item] = i

    @property
    def n(self) -> int:
        return len(self.per_player)

    def items(self) -> frozenset:
        return frozenset(itertools.chain.from_iterable(self.per_player))

    def player_items(self, i: int) -> frozenset:
        return frozenset(self.per_player[i])

    def allocation_count(self) -> int:
        count = 1
        for items in self.per_player:
            count *= 2 ** len(items)
        return count

    def full_allocation(self) -> Allocation:
        return Allocation.of(self.per_player)

    def allocation_of_itemset(self, s: Iterable[str]) -> Allocation:
        """Split an item set into the per-player allocation it induces."""
        s = frozenset(s)
        extra = s - self.items()
        if extra:
            raise ScopeViolation(f"items outside the universe: {sorted(extra)}")
        return Allocation.of(
            tuple(s & self.player_items(i) for i in range(self.n))
        )


@dataclass(frozen=True, eq=False)
class SetFunctionSpec:
    """A normalized monotone set function over item subsets.

    kind is one of table, additive, unit_demand, symmetric, xos, epg,
    player_symmetric.  Table-like kinds are checked for normalization and
    monotonicity on construction; structured kinds hold by construction
    (parameters are validated instead).
    """

    kind: str
    scope: tuple  # ordered item identifiers
    table: Optional[dict] = None  # canonical key -> value
    weights: Optional[dict] = None
    value_if_any: Optional[float] = None
    levels: Optional[tuple] = None
    clauses: Optional[tuple] = None  # tuple of {item: weight}
    partition: Optional[tuple] = None  # per-player item tuples
    count_table: Optional[dict] = None  # count vector tuple -> value

    # -- constructors ------------------------------------------------------

    @staticmethod
    def table_fn(scope, entries: dict) -> "SetFunctionSpec":
        scope = tuple(scope)
        items = frozenset(scope)
        table = {}
        for key, value in entries.items():
            s = parse_bundle_key(key)
            if not s <= items:
                raise ScopeViolation(f"table key {key!r} mentions foreign items")
            canon = bundle_key(s)
            if canon in table:
                raise ScopeViolation(f"duplicate table key {key!r}")
            table[canon] = float(value)
        expected = 2 ** len(items)
        if len(table) != expected:
            raise ScopeViolation(
                f"table enumerates {len(table)} of {expected} subsets"
            )
        spec = SetFunctionSpec(kind="table", scope=scope, table=table)
        _check_table_normal_monotone(spec)
        return spec

    @staticmethod
    def additive(scope, weights: dict) -> "SetFunctionSpec":
        scope = tuple(scope)
        items = frozenset(scope)
        w = {}
        for item, weight in weights.items():
            if item not in items:
                raise ScopeViolation(f"weight for foreign item {item!r}")
            if float(weight) < 0:
                raise NotMonotone(f"negative weight for item {item!r}")
            w[item] = float(weight)
        return SetFunctionSpec(kind="additive", scope=scope, weights=w)

    @staticmethod
    def unit_demand(scope, value: float) -> "SetFunctionSpec":
        if float(value) < 0:
            raise NotMonotone("unit-demand value must be nonnegative")
        return SetFunctionSpec(
            kind="unit_demand", scope=tuple(scope), value_if_any=float(value)
        )

    @staticmethod
    def symmetric(scope, levels) -> "SetFunctionSpec":
        scope = tuple(scope)
        levels = tuple(float(v) for v in levels)
        if len(levels) != len(scope) + 1:
            raise ScopeViolation(
                f"expected {len(scope) + 1} levels, got {len(levels)}"
            )
        if levels and levels[0] != 0.0:
            raise NotNormalized("symmetric levels must start at 0")
        for k in range(1, len(levels)):
            if levels[k] < levels[k - 1] - TOL:
                raise NotMonotone(f"levels decrease at size {k}")
        return SetFunctionSpec(kind="symmetric", scope=scope, levels=levels)

    @staticmethod
    def xos(scope, clauses) -> "SetFunctionSpec":
        scope = tuple(scope)
        items = frozenset(scope)
        out = []
        for clause in clauses:
            c = {}
            for item, weight in clause.items():
                if item not in items:
                    raise ScopeViolation(f"clause mentions foreign item {item!r}")
                if float(weight) < 0:
                    raise NotMonotone("XOS clause weights must be nonnegative")
                c[item] = float(weight)
            out.append(c)
        if not out:
            raise ScopeViolation("XOS spec requires at least one clause")
        return SetFunctionSpec(kind="xos", scope=scope, clauses=tuple(out))

    @staticmethod
    def epg(scope) -> "SetFunctionSpec":
        return SetFunctionSpec(kind="epg", scope=tuple(scope))

    @staticmethod
    def player_symmetric(partition, entries: dict) -> "SetFunctionSpec":
        partition = tuple(tuple(p) for p in partition)
        scope = tuple(itertools.chain.from_iterable(partition))
        sizes = tuple(len(p) for p in partition)
        table = {}
        for key, value in entries.items():
            counts = tuple(int(k) for k in str(key).split(","))
            if len(counts) != len(sizes) or any(
                c < 0 or c > s for c, s in zip(counts, sizes)
            ):
                raise ScopeViolation(f"count vector {key!r} out of range")
            if counts in table:
                raise ScopeViolation(f"duplicate count vector {key!r}")
            table[counts] = float(value)
        expected = math.prod(s + 1 for s in sizes)
        if len(table) != expected:
            raise ScopeViolation(
                f"count table enumerates {len(table)} of {expected} vectors"
            )
        spec = SetFunctionSpec(
            kind="player_symmetric",
            scope=scope,
            partition=partition,
            count_table=table,
        )
        zero = tuple(0 for _ in sizes)
        if abs(table[zero]) > 0:
            raise NotNormalized("count table value at the zero vector is not 0")
        for counts, value in table.items():
            for j in range(len(sizes)):
                if counts[j] > 0:
                    below = counts[:j] + (counts[j] - 1,) + counts[j + 1:]
                    if value < table[below] - TOL:
                        raise NotMonotone(
                            f"count table decreases from {below} to {counts}"
                        )
        return spec

    # -- evaluation --------------------------------------------------------

    def scope_set(self) -> frozenset:
        return frozenset(self.scope)

    def value(self, s: Iterable[str]) -> float:
        s = frozenset(s)
        extra = s - self.scope_set()
        if extra:
            raise ScopeViolation(
                f"items outside the function scope: {sorted(extra)}"
            )
        if self.kind == "table":
            return self.table[bundle_key(s)]
        if self.kind == "additive":
            return math.fsum(self.weights.get(item, 0.0) for item in s)
        if self.kind == "unit_demand":
            return self.value_if_any if s else 0.0
        if self.kind == "symmetric":
            return self.levels[len(s)]
        if self.kind == "xos":
            return max(
                math.fsum(c.get(item, 0.0) for item in s) for c in self.clauses
            )
        if self.kind == "epg":
            return 1.0 if s else 0.0
        if self.kind == "player_symmetric":
            counts = tuple(
                sum(1 for item in part if item in s) for part in self.partition
            )
            return self.count_table[counts]
        raise UnsupportedClass(f"unknown function kind {self.kind!r}")

    def scaled(self, factor: float) -> "SetFunctionSpec":
        """A copy with all values multiplied by a nonnegative factor.  Used by
        the incentive audits to build misreports."""
        if factor < 0:
            raise NotMonotone("scaling factor must be nonnegative")
        if self.kind == "table":
            return SetFunctionSpec(
                kind="table",
                scope=self.scope,
                table={k: v * factor for k, v in self.table.items()},
            )
        if self.kind == "additive":
            return SetFunctionSpec.additive(
                self.scope, {k: v * factor for k, v in self.weights.items()}
            )
        if self.kind == "unit_demand":
            return SetFunctionSpec.unit_demand(
                self.scope, self.value_if_any * factor
            )
        if self.kind == "symmetric":
            return SetFunctionSpec(
                kind="symmetric",
                scope=self.scope,
                levels=tuple(v * factor for v in self.levels),
            )
        if self.kind == "xos":
            return SetFunctionSpec.xos(
                self.scope,
                [{k: v * factor for k, v in c.items()} for c in self.clauses],
            )
        if self.kind == "epg":
            return SetFunctionSpec(
                kind="symmetric",
                scope=self.scope,
                levels=(0.0,) + (factor,) * len(self.scope),
            )
        if self.kind == "player_symmetric":
            return SetFunctionSpec(
                kind="player_symmetric",
                scope=self.scope,
                partition=self.partition,
                count_table={
                    k: v * factor for k, v in self.count_table.items()
                },
            )
        raise UnsupportedClass(f"unknown function kind {self.kind!r}")

    def to_json(self) -> dict:
        if self.kind == "table":
            return {"type": "table", "entries": dict(self.table)}
        if self.kind == "additive":
            return {"type": "additive", "weights": dict(self.weights)}
        if self.kind == "unit_demand":
            return {"type": "unit_demand", "value": self.value_if_any}
        if self.kind == "symmetric":
            return {"type": "symmetric", "levels": list(self.levels)}
        if self.kind == "xos":
            return {"type": "xos", "clauses": [dict(c) for c in self.clauses]}
        if self.kind == "epg":
            return {"type": "epg"}
        if self.kind == "player_symmetric":
            return {
                "type": "player_symmetric",
                "entries": {
                    ",".join(str(c) for c in k): v
                    for k, v in self.count_table.items()
                },
            }
        raise UnsupportedClass(f"unknown function kind {self.kind!r}")


def _check_table_normal_monotone(spec: SetFunctionSpec) -> None:
    table = spec.table
    if abs(table[""]) > 0:
        raise NotNormalized(f"value at the empty set is {table['']}")
    items = sorted(spec.scope)
    for key, value in table.items():
        s = parse_bundle_key(key)
        for item in items:
            if item in s:
                below = bundle_key(s - {item})
                if value < table[below] - TOL:
                    raise NotMonotone(
                        f"f({below!r})={table[below]} > f({key!r})={value}"
                    )


@dataclass(frozen=True, eq=False)
class Instance:
    """A validated combinatorial cost-sharing instance."""

    universe: ItemUniverse
    valuations: tuple
    cost: SetFunctionSpec

    @property
    def n(self) -> int:
        return self.universe.n

    def valuation(self, i: int) -> SetFunctionSpec:
        return self.valuations[i]

    def with_valuation(self, i: int, spec: SetFunctionSpec) -> "Instance":
        if frozenset(spec.scope) != self.universe.player_items(i):
            raise ScopeViolation("misreport scope differs from the universe")
        vals = list(self.valuations)
        vals[i] = spec
        return Instance(self.universe, tuple(vals), self.cost)

    def total_value(self, alloc: Allocation) -> float:
        return math.fsum(
            self.valuations[i].value(alloc.bundle(i)) for i in range(self.n)
        )

    def cost_of(self, alloc: Allocation) -> float:
        return self.cost.value(alloc.items())

    def to_json(self) -> dict:
        return {
            "schema": "costshare-instance/1",
            "players": self.n,
            "items": [list(p) for p in self.universe.per_player],
            "valuations": [v.to_json() for v in self.valuations],
            "cost": self.cost.to_json(),
        }


def _parse_function_spec(raw: dict, scope, partition=None) -> SetFunctionSpec:
    if not isinstance(raw, dict) or "type" not in raw:
        raise ScopeViolation("function spec must be an object with a 'type'")
    kind = raw["type"]
    if kind == "table":
        return SetFunctionSpec.table_fn(scope, raw["entries"])
    if kind == "additive":
        return SetFunctionSpec.additive(scope, raw["weights"])
    if kind == "unit_demand":
        return SetFunctionSpec.unit_demand(scope, raw["value"])
    if kind == "symmetric":
        return SetFunctionSpec.symmetric(scope, raw["levels"])
    if kind == "xos":
        return SetFunctionSpec.xos(scope, raw["clauses"])
    if kind == "epg":
        return SetFunctionSpec.epg(scope)
    if kind == "player_symmetric":
        if partition is None:
            raise ScopeViolation(
                "player_symmetric requires the per-player partition"
            )
        return SetFunctionSpec.player_symmetric(partition, raw["entries"])
    raise ScopeViolation(f"unknown function type {kind!r}")


def validate_instance(raw: dict, force: bool = False) -> Instance:
    """Validate a parsed instance document and return an Instance.

    Enforces disjoint universes, scoping, normalization and monotonicity.
    Rejects instances whose allocation lattice exceeds the size guard unless
    force is set.
    """
    if not isinstance(raw, dict):
        raise ScopeViolation("instance document must be a JSON object")
    if raw.get("schema") != "costshare-instance/1":
        raise ScopeViolation("missing or unknown schema tag")
    items = raw.get("items")
    if not isinstance(items, list):
        raise ScopeViolation("'items' must be a list of per-player lists")
    universe = ItemUniverse.of(items)
    n = raw.get("players")
    if n != universe.n:
        raise ScopeViolation(
            f"'players'={n} but {universe.n} item universes given"
        )
    if not force and universe.allocation_count() > SIZE_LIMIT:
        raise SizeLimit(
            f"{universe.allocation_count()} allocations exceed the "
            f"2^20 guard (pass force to override)"
        )
    raw_vals = raw.get("valuations")
    if not isinstance(raw_vals, list) or len(raw_vals) != universe.n:
        raise ScopeViolation("one valuation per player required")
    valuations = tuple(
        _parse_function_spec(rv, universe.per_player[i])
        for i, rv in enumerate(raw_vals)
    )
    cost = _parse_function_spec(
        raw.get("cost"),
        tuple(itertools.chain.from_iterable(universe.per_player)),
        partition=universe.per_player,
    )
    return Instance(universe, valuations, cost)


def load_instance(path: str, force: bool = False) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_instance(json.load(fh), force=force)


def _player_bundles(items) -> list:
    subsets = []
    for r in range(len(items) + 1):
        for combo in itertools.combinations(sorted(items), r):
            subsets.append(combo)
    subsets.sort()
    return subsets


def enumerate_allocations(universe: ItemUniverse, force: bool = False):
    """Yield every allocation exactly once, in canonical (lexicographic on
    the per-player encoding) order; the empty allocation comes first."""
    if not force and universe.allocation_count() > SIZE_LIMIT:
        raise SizeLimit(
            f"{universe.allocation_count()} allocations exceed the 2^20 guard"
        )
    per_player = [_player_bundles(items) for items in universe.per_player]
    for combo in itertools.product(*per_player):
        yield Allocation(tuple(combo))


@dataclass(frozen=True)
class Verdict:
    holds: bool
    witness: Optional[tuple] = None


def _powerset(items):
    items = sorted(items)
    for r in range(len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield frozenset(combo)


def check_class(
    f: SetFunctionSpec, cls: str, partition=None, tol: float = TOL
) -> Verdict:
    """Exhaustively check a structural class over f's scope.

    Witnesses carry the violating tuple together with both side values.
    """
    if cls not in FUNCTION_CLASSES:
        raise UnsupportedClass(f"cannot decide membership in {cls!r}")
    scope = sorted(f.scope_set())
    m = len(scope)
    if m > 20:
        raise SizeLimit(f"scope of {m} items exceeds the enumeration guard")
    if cls == "subadditive" and m > SUBADDITIVE_SCOPE_LIMIT:
        raise SizeLimit(
            f"subadditivity check is O(4^m); limited to m <= "
            f"{SUBADDITIVE_SCOPE_LIMIT}, got {m}"
        )

    if cls == "monotone":
        for s in _powerset(scope):
            fs = f.value(s)
            for x in scope:
                if x in s:
                    continue
                fsx = f.value(s | {x})
                if fsx < fs - tol:
                    return Verdict(False, (s, x, fs, fsx))
        return Verdict(True)

    if cls in ("submodular", "supermodular"):
        for s in _powerset(scope):
            fs = f.value(s)
            rest = [x for x in scope if x not in s]
            for a in range(len(rest)):
                for b in range(a + 1, len(rest)):
                    x, y = rest[a], rest[b]
                    lhs = f.value(s | {x}) + f.value(s | {y})
                    rhs = f.value(s | {x, y}) + fs
                    if cls == "submodular" and lhs < rhs - tol:
                        return Verdict(False, (s, x, y, lhs, rhs))
                    if cls == "supermodular" and lhs > rhs + tol:
                        return Verdict(False, (s, x, y, lhs, rhs))
        return Verdict(True)

    if cls == "subadditive":
        sets = list(_powerset(scope))
        for s in sets:
            fs = f.value(s)
            for t in sets:
                lhs = fs + f.value(t)
                rhs = f.value(s | t)
                if lhs < rhs - tol:
                    return Verdict(False, (s, t, lhs, rhs))
        return Verdict(True)

    if cls == "symmetric":
        by_size = {}
        for s in _powerset(scope):
            v = f.value(s)
            prev = by_size.get(len(s))
            if prev is None:
                by_size[len(s)] = (s, v)
            elif abs(prev[1] - v) > tol:
                return Verdict(False, (prev[0], s, prev[1], v))
        return Verdict(True)

    # player_symmetric
    partition = partition or f.partition
    if partition is None:
        raise UnsupportedClass(
            "player_symmetric check requires the per-player partition"
        )
    by_counts = {}
    for s in _powerset(scope):
        counts = tuple(sum(1 for i in part if i in s) for part in partition)
        v = f.value(s)
        prev = by_counts.get(counts)
        if prev is None:
            by_counts[counts] = (s, v)
        elif abs(prev[1] - v) > tol:
            return Verdict(False, (prev[0], s, prev[1], v))
    return Verdict(True)
