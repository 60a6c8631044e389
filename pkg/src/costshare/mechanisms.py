"""Mechanisms: the affine-maximizer engine with VCG payments, the Potential
Mechanism, a welfare-maximizing VCG baseline, the Sequential Mechanism in its
two tie-break variants, and a fast path for simple symmetric instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import (
    InternalConsistencyError,
    InvalidTieBreak,
    NotMonotone,
    SizeLimit,
)
from .model import (
    SIZE_LIMIT,
    TOL,
    Allocation,
    Instance,
    ItemUniverse,
    SetFunctionSpec,
    check_class,
    _player_bundles,
)
from .potential import PotentialTable, SymmetricPotential, symmetric_potential

TIE_BREAKS = ("canonical_min", "symmetric_prefix")


@dataclass(frozen=True)
class ObjectiveSpec:
    """The function H subtracted from reported welfare by the maximizer."""

    label: str
    fn: Callable[[Allocation], float]

    @staticmethod
    def potential(cost: SetFunctionSpec) -> "ObjectiveSpec":
        table = PotentialTable(cost)
        return ObjectiveSpec(label="potential", fn=table.value)

    @staticmethod
    def cost_fn(cost: SetFunctionSpec) -> "ObjectiveSpec":
        return ObjectiveSpec(label="cost", fn=lambda a: cost.value(a.items()))

    @staticmethod
    def custom(fn: Callable[[Allocation], float]) -> "ObjectiveSpec":
        return ObjectiveSpec(label="custom", fn=fn)


@dataclass(frozen=True)
class PlayerDiagnostic:
    """The constrained optimum with this player forced to the empty bundle."""

    allocation: Allocation
    objective: float


@dataclass(frozen=True)
class MechanismOutcome:
    mechanism: str
    allocation: Allocation
    payments: tuple
    cost_incurred: float
    objective_value: float
    h_of_alg: float
    diagnostics: Optional[tuple] = None  # one PlayerDiagnostic per player
    steps: Optional[tuple] = None  # sequential mechanism only

    def payment_total(self) -> float:
        return math.fsum(self.payments)


def instance_is_symmetric(instance: Instance) -> bool:
    """True when every valuation is symmetric and the cost is player-wise
    symmetric; this is the setting where the prefix tie-break is valid."""
    for v in instance.valuations:
        if not check_class(v, "symmetric").holds:
            return False
    return check_class(
        instance.cost, "player_symmetric", partition=instance.universe.per_player
    ).holds


def _prefix_form(universe: ItemUniverse, alloc: Allocation) -> Allocation:
    return Allocation.of(
        universe.per_player[i][: len(alloc.bundles[i])]
        for i in range(universe.n)
    )


def affine_argmax(
    instance: Instance,
    objective: ObjectiveSpec,
    constraint: Optional[int] = None,
    tie: str = "canonical_min",
):
    """Maximize sum of reported values minus the objective over the
    (optionally constrained) allocation lattice.

    Allocations within TOL of the maximum are all treated as maximizers;
    among them the canonical minimum (fewest items, then lexicographic) is
    returned.  With symmetric_prefix the winner's bundles are replaced by
    same-size prefixes of each player's universe order.

    Returns (allocation, objective value).
    """
    if tie not in TIE_BREAKS:
        raise InvalidTieBreak(f"unknown tie-break {tie!r}")
    if tie == "symmetric_prefix" and not instance_is_symmetric(instance):
        raise InvalidTieBreak(
            "symmetric_prefix requires symmetric valuations and a "
            "player-wise symmetric cost"
        )
    universe = instance.universe
    if universe.allocation_count() > SIZE_LIMIT:
        raise SizeLimit(
            f"{universe.allocation_count()} allocations exceed the 2^20 guard"
        )
    per_player = []
    for i in range(instance.n):
        bundles = (
            [()] if constraint == i else _player_bundles(universe.per_player[i])
        )
        vals = instance.valuations[i]
        per_player.append([(b, vals.value(b)) for b in bundles])

    best = -math.inf
    candidates = []  # (sort_key, allocation, objective) within TOL of best
    for combo in itertools.product(*per_player):
        alloc = Allocation(tuple(b for b, _ in combo))
        obj = math.fsum(v for _, v in combo) - objective.fn(alloc)
        if obj > best + TOL:
            best = obj
            candidates = [(alloc.sort_key(), alloc, obj)]
        elif obj >= best - TOL:
            if obj > best:
                best = obj
                candidates = [c for c in candidates if c[2] >= best - TOL]
            candidates.append((alloc.sort_key(), alloc, obj))
    _, winner, winner_obj = min(candidates, key=lambda c: c[0])
    if tie == "symmetric_prefix":
        winner = _prefix_form(universe, winner)
    return winner, winner_obj


def vcg_payments(
    instance: Instance,
    objective: ObjectiveSpec,
    alg: Allocation,
    alg_objective: float,
    tie: str = "canonical_min",
):
    """VCG payments against the given unconstrained optimum:
    p_i = [opt with i forced empty] - [reported welfare of others at ALG
    minus H(ALG)].  Returns (payments, per-player diagnostics)."""
    payments = []
    diagnostics = []
    for i in range(instance.n):
        constrained, constrained_obj = affine_argmax(
            instance, objective, constraint=i, tie=tie
        )
        v_i = instance.valuations[i].value(alg.bundle(i))
        p = constrained_obj - (alg_objective - v_i)
        if p < -TOL:
            raise InternalConsistencyError(
                f"negative VCG payment {p} for player {i}"
            )
        payments.append(max(p, 0.0))
        diagnostics.append(
            PlayerDiagnostic(allocation=constrained, objective=constrained_obj)
        )
    return tuple(payments), tuple(diagnostics)


def _run_affine(instance: Instance, objective: ObjectiveSpec, tie, name):
    alg, obj = affine_argmax(instance, objective, tie=tie)
    payments, diagnostics = vcg_payments(instance, objective, alg, obj, tie=tie)
    return MechanismOutcome(
        mechanism=name,
        allocation=alg,
        payments=payments,
        cost_incurred=instance.cost_of(alg),
        objective_value=obj,
        h_of_alg=instance.total_value(alg) - obj,
        diagnostics=diagnostics,
    )


def run_potential(
    instance: Instance, tie: Optional[str] = None
) -> MechanismOutcome:
    """The Potential Mechanism: affine maximizer with H = the potential of
    the cost function, VCG payments.  Unless a tie-break is forced, the
    prefix rule is auto-selected on symmetric instances (the budget-balance
    guarantee for that setting requires prefix bundles)."""
    if tie is None:
        tie = (
            "symmetric_prefix"
            if instance_is_symmetric(instance)
            else "canonical_min"
        )
    objective = ObjectiveSpec.potential(instance.cost)
    return _run_affine(instance, objective, tie, "potential")


def run_vcg_baseline(instance: Instance) -> MechanismOutcome:
    """Welfare-maximizing VCG (H = C).  No budget guarantee."""
    objective = ObjectiveSpec.cost_fn(instance.cost)
    return _run_affine(instance, objective, "canonical_min", "vcg")


def run_pay_your_bid(instance: Instance) -> MechanismOutcome:
    """Control mechanism for the incentive audits: the potential-objective
    argmax, but each player pays their reported value.  Not strategyproof."""
    objective = ObjectiveSpec.potential(instance.cost)
    alg, obj = affine_argmax(instance, objective)
    payments = tuple(
        instance.valuations[i].value(alg.bundle(i)) for i in range(instance.n)
    )
    return MechanismOutcome(
        mechanism="pay-your-bid",
        allocation=alg,
        payments=payments,
        cost_incurred=instance.cost_of(alg),
        objective_value=obj,
        h_of_alg=instance.total_value(alg) - obj,
    )


@dataclass(frozen=True)
class SequentialStep:
    player: int
    maximizers: tuple  # every profit-maximizing bundle, canonical order
    chosen: tuple
    price: float


SEQUENTIAL_VARIANTS = ("gsp_max_size", "wgsp_lexicographic")


def run_sequential(
    instance: Instance, variant: str = "gsp_max_size"
) -> MechanismOutcome:
    """Serve players in index order at marginal-cost prices.

    gsp_max_size picks a maximum-size profit-maximizing bundle (canonical
    minimum among those); wgsp_lexicographic picks the lexicographically
    first maximizer.  Payments telescope to C(ALG) exactly.
    """
    if variant not in SEQUENTIAL_VARIANTS:
        raise InvalidTieBreak(f"unknown sequential variant {variant!r}")
    universe = instance.universe
    bundles_so_far = []
    prefix_items = set()
    prefix_cost = 0.0
    payments = []
    steps = []
    for i in range(instance.n):
        if 2 ** len(universe.per_player[i]) > SIZE_LIMIT:
            raise SizeLimit(f"player {i} bundle lattice exceeds the guard")
        vals = instance.valuations[i]
        best = -math.inf
        maximizers = []
        for bundle in _player_bundles(universe.per_player[i]):
            price = (
                instance.cost.value(prefix_items | set(bundle)) - prefix_cost
            )
            profit = vals.value(bundle) - price
            if profit > best + TOL:
                best = profit
                maximizers = [(bundle, price, profit)]
            elif profit >= best - TOL:
                if profit > best:
                    best = profit
                    maximizers = [
                        m for m in maximizers if m[2] >= best - TOL
                    ]
                maximizers.append((bundle, price, profit))
        if variant == "gsp_max_size":
            chosen = min(
                maximizers, key=lambda m: (-len(m[0]), m[0])
            )
        else:
            chosen = min(maximizers, key=lambda m: m[0])
        bundle, price, _ = chosen
        bundles_so_far.append(bundle)
        prefix_items |= set(bundle)
        new_cost = instance.cost.value(prefix_items)
        payment = new_cost - prefix_cost
        prefix_cost = new_cost
        if payment < -TOL:
            raise InternalConsistencyError(
                f"negative sequential payment {payment} for player {i}"
            )
        payments.append(max(payment, 0.0))
        steps.append(
            SequentialStep(
                player=i,
                maximizers=tuple(m[0] for m in maximizers),
                chosen=bundle,
                price=price,
            )
        )
    alloc = Allocation(tuple(bundles_so_far))
    cost = instance.cost_of(alloc)
    return MechanismOutcome(
        mechanism=(
            "sequential-gsp" if variant == "gsp_max_size" else "sequential-wgsp"
        ),
        allocation=alloc,
        payments=tuple(payments),
        cost_incurred=cost,
        objective_value=instance.total_value(alloc) - cost,
        h_of_alg=cost,
        steps=tuple(steps),
    )


def simple_symmetric_instance(
    c_levels, values, item_prefix: str = "g"
) -> Instance:
    """The generic instance equivalent to a simple symmetric problem:
    player i owns the single item '<prefix><i>', values it at values[i], and
    the cost of any allocation is c_levels[number of served players]."""
    n = len(values)
    universe = ItemUniverse.of([[f"{item_prefix}{i}"] for i in range(n)])
    scope = tuple(f"{item_prefix}{i}" for i in range(n))
    valuations = tuple(
        SetFunctionSpec.unit_demand((f"{item_prefix}{i}",), values[i])
        for i in range(n)
    )
    cost = SetFunctionSpec.symmetric(scope, c_levels)
    return Instance(universe, valuations, cost)


def run_potential_symmetric_fast(
    n: int, c_levels, values, item_prefix: str = "g"
) -> MechanismOutcome:
    """O(n log n) Potential Mechanism for simple symmetric cost sharing.

    Produces the same allocation and payments as run_potential on the
    instance built by simple_symmetric_instance.  Per-player diagnostics are
    omitted (only their objective values are used internally).
    """
    values = [float(v) for v in values]
    if len(values) != n:
        raise ValueError(f"expected {n} values, got {len(values)}")
    if any(v < 0 for v in values):
        raise NotMonotone("unit-demand values must be nonnegative")
    pot: SymmetricPotential = symmetric_potential(c_levels)
    if len(pot.levels) != n + 1:
        raise ValueError(f"expected {n + 1} cost levels")

    # Serve the k highest values; among equal values prefer larger player
    # indices, which matches the canonical (lexicographic-minimum) tie-break.
    order = sorted(range(n), key=lambda i: (-values[i], -i))
    prefix = [0.0] * (n + 1)
    for k, i in enumerate(order):
        prefix[k + 1] = prefix[k] + values[i]
    objective = [prefix[k] - pot.levels[k] for k in range(n + 1)]

    best = max(objective)
    best_k = next(k for k in range(n + 1) if objective[k] >= best - TOL)
    best = objective[best_k]
    served = set(order[:best_k])

    # Constrained optima: for the player at sorted rank r, the best
    # allocation without them is either a top-k set with k <= r, or a top-k
    # set that skips rank r (sum = prefix[k+1] - v_i).
    prefix_max = [objective[0]]
    for k in range(1, n + 1):
        prefix_max.append(max(prefix_max[k - 1], objective[k]))
    skip = [prefix[k + 1] - pot.levels[k] for k in range(n)]
    suffix_max = [0.0] * (n + 1)
    suffix_max[n] = -math.inf
    for k in range(n - 1, -1, -1):
        suffix_max[k] = max(suffix_max[k + 1], skip[k])

    rank_of = {i: r for r, i in enumerate(order)}
    payments = [0.0] * n
    for i in served:
        r = rank_of[i]
        constrained = max(prefix_max[r], suffix_max[r] - values[i])
        p = constrained - (best - values[i])
        if p < -TOL:
            raise InternalConsistencyError(
                f"negative fast-path payment {p} for player {i}"
            )
        payments[i] = max(p, 0.0)

    cost = pot.cost_levels[best_k]
    if math.fsum(payments) < cost - TOL:
        raise InternalConsistencyError(
            "fast path failed to cover the incurred cost"
        )
    alloc = Allocation(
        tuple(
            (f"{item_prefix}{i}",) if i in served else ()
            for i in range(n)
        )
    )
    return MechanismOutcome(
        mechanism="potential-symmetric-fast",
        allocation=alloc,
        payments=tuple(payments),
        cost_incurred=cost,
        objective_value=best,
        h_of_alg=pot.levels[best_k],
    )
