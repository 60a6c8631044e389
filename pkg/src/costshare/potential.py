"""Hart–Mas-Colell potential of a cost function, generalized to allocations.

Two evaluation paths are provided: the closed form (default) and the
memoized recursion (oracle).  Their agreement on every allocation is a
standing test.  A linear-time fast path covers fully symmetric simple cost
sharing (one item per player, cost a function of the served count).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import NotMonotone, NotNormalized, SizeLimit
from .model import TOL, Allocation, ItemUniverse, SetFunctionSpec

SUPPORT_LIMIT = 20


def harmonic(k: int) -> float:
    """H_k by direct summation, largest term first."""
    total = 0.0
    for i in range(1, k + 1):
        total += 1.0 / i
    return total


def _closed_form(cost: SetFunctionSpec, alloc: Allocation) -> float:
    # The potential of an allocation depends only on its nonempty bundles
    # (the recursion never touches empty ones), so the closed-form sweep runs
    # over the support rather than all n players.
    support = [b for b in alloc.bundles if b]
    k = len(support)
    if k == 0:
        return 0.0
    if k > SUPPORT_LIMIT:
        raise SizeLimit(
            f"closed form sweeps 2^{k} player subsets; limit is "
            f"2^{SUPPORT_LIMIT}"
        )
    terms = []
    for size in range(1, k + 1):
        coef = 1.0 / (size * math.comb(k, size))
        for combo in itertools.combinations(support, size):
            union = frozenset(itertools.chain.from_iterable(combo))
            terms.append(coef * cost.value(union))
    return math.fsum(terms)


class PotentialTable:
    """Memoized potential evaluator for one cost function.

    The cache is keyed by the canonical allocation encoding and is confined
    to this object; sharing it across computations over the same cost
    function is safe because evaluation is pure.
    """

    def __init__(self, cost: SetFunctionSpec):
        self.cost = cost
        self._cache = {}

    def value(self, alloc: Allocation) -> float:
        key = alloc.bundles
        cached = self._cache.get(key)
        if cached is None:
            cached = self._cache[key] = _closed_form(self.cost, alloc)
        return cached

    def marginal(self, alloc: Allocation, i: int) -> float:
        return self.value(alloc) - self.value(alloc.without(i))


def potential_value(cost: SetFunctionSpec, alloc: Allocation) -> float:
    """Closed-form potential: sum over player subsets I of
    C(union of bundles in I) / (|I| * binom(n, |I|))."""
    return _closed_form(cost, alloc)


def potential_recursive(cost: SetFunctionSpec, alloc: Allocation) -> float:
    """Recursion path: P(S) = (C(S) + sum over nonempty i of P(S - S_i)) / n_S
    with memoization over sub-allocations."""
    if len(alloc.support()) > SUPPORT_LIMIT:
        raise SizeLimit(
            f"recursion memoizes 2^{len(alloc.support())} sub-allocations"
        )
    memo = {}

    def rec(a: Allocation) -> float:
        support = a.support()
        if not support:
            return 0.0
        key = a.bundles
        cached = memo.get(key)
        if cached is not None:
            return cached
        total = cost.value(a.items())
        for i in support:
            total += rec(a.without(i))
        result = total / len(support)
        memo[key] = result
        return result

    return rec(alloc)


def marginal(cost: SetFunctionSpec, alloc: Allocation, i: int) -> float:
    """P(S) - P(S - S_i): the Shapley value of player i in the induced
    cooperative game."""
    table = PotentialTable(cost)
    return table.marginal(alloc, i)


def expected_density(cost: SetFunctionSpec, alloc: Allocation, l: int) -> float:
    """Expected density of a uniformly random size-l player set:
    D(S, l) = sum over |I| = l of C(union) / (l * binom(n, l))."""
    n = alloc.n
    if not 1 <= l <= n:
        raise ValueError(f"density level {l} outside 1..{n}")
    if n > SUPPORT_LIMIT:
        raise SizeLimit(f"density sweep over binom({n},{l}) player sets")
    coef = 1.0 / (l * math.comb(n, l))
    terms = []
    for combo in itertools.combinations(range(n), l):
        terms.append(coef * cost.value(alloc.union_over(combo)))
    return math.fsum(terms)


@dataclass(frozen=True)
class SymmetricPotential:
    """Potential levels for fully symmetric simple cost sharing:
    p(k) = (c(k) + k * p(k-1)) / k, p(0) = 0."""

    cost_levels: tuple
    levels: tuple

    def value_at(self, k: int) -> float:
        return self.levels[k]


def symmetric_potential(c_levels) -> SymmetricPotential:
    c = tuple(float(v) for v in c_levels)
    if not c or c[0] != 0.0:
        raise NotNormalized("cost levels must start at 0")
    for k in range(1, len(c)):
        if c[k] < c[k - 1] - TOL:
            raise NotMonotone(f"cost levels decrease at size {k}")
    p = [0.0]
    for k in range(1, len(c)):
        p.append(c[k] / k + p[k - 1])
    return SymmetricPotential(cost_levels=c, levels=tuple(p))


def potential_table_spec(
    cost: SetFunctionSpec, universe: ItemUniverse
) -> SetFunctionSpec:
    """The potential viewed as a set function over 2^M, materialized as a
    table spec (for the structural preservation checks)."""
    from .model import bundle_key, enumerate_allocations

    table = PotentialTable(cost)
    entries = {}
    for alloc in enumerate_allocations(universe):
        entries[bundle_key(alloc.items())] = table.value(alloc)
    return SetFunctionSpec.table_fn(sorted(universe.items()), entries)
