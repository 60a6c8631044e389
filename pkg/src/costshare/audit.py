"""Metrics, brute-force optima, incentive testers, structural audits and the
counterexample instance builders.

Incentive testers replay a mechanism over finite deviation grids; a pass is
evidence over the grid, not a proof.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import NotMonotone, SizeLimit, UnknownName
from .model import (
    TOL,
    Allocation,
    Instance,
    ItemUniverse,
    SetFunctionSpec,
    bundle_key,
    enumerate_allocations,
)
from .mechanisms import (
    MechanismOutcome,
    ObjectiveSpec,
    affine_argmax,
    vcg_payments,
)
from .potential import PotentialTable, harmonic

STRICT_GAIN = 1e-9

Mechanism = Callable[[Instance], MechanismOutcome]


# -- metrics ---------------------------------------------------------------


def social_cost(instance: Instance, alloc: Allocation) -> float:
    """pi(S) = C(S) + total value excluded from unserved bundles."""
    excluded = math.fsum(
        instance.valuations[i].value(instance.universe.player_items(i))
        - instance.valuations[i].value(alloc.bundle(i))
        for i in range(instance.n)
    )
    return instance.cost_of(alloc) + excluded


def optimal_social_cost(instance: Instance):
    """Brute-force social-cost minimum with the canonical tie-break."""
    best = math.inf
    candidates = []
    for alloc in enumerate_allocations(instance.universe):
        pi = social_cost(instance, alloc)
        if pi < best - TOL:
            best = pi
            candidates = [(alloc.sort_key(), alloc, pi)]
        elif pi <= best + TOL:
            if pi < best:
                best = pi
                candidates = [c for c in candidates if c[2] <= best + TOL]
            candidates.append((alloc.sort_key(), alloc, pi))
    _, winner, value = min(candidates, key=lambda c: c[0])
    return value, winner


def welfare(instance: Instance, alloc: Allocation) -> float:
    return instance.total_value(alloc) - instance.cost_of(alloc)


def optimal_welfare(instance: Instance):
    best = -math.inf
    winner = None
    for alloc in enumerate_allocations(instance.universe):
        sw = welfare(instance, alloc)
        if sw > best:
            best = sw
            winner = alloc
    return best, winner


def welfare_gap(instance: Instance, alloc: Allocation) -> float:
    """SW(OPT) - SW(S) with OPT the brute-force welfare maximum."""
    best, _ = optimal_welfare(instance)
    return best - welfare(instance, alloc)


def budget_ratio(outcome: MechanismOutcome) -> float:
    """Sum of payments over incurred cost; 1.0 when both are zero."""
    total = outcome.payment_total()
    cost = outcome.cost_incurred
    if cost == 0.0 and total == 0.0:
        return 1.0
    if cost == 0.0:
        return math.inf
    return total / cost


@dataclass(frozen=True)
class AuditReport:
    social_cost_alg: float
    social_cost_opt: float
    social_cost_ratio: float
    welfare_gap: float
    budget_ratio: float
    ir_ok: bool
    npt_ok: bool
    cost_recovered: bool
    witnesses: Optional[dict] = None


def audit_outcome(instance: Instance, outcome: MechanismOutcome) -> AuditReport:
    pi_alg = social_cost(instance, outcome.allocation)
    pi_opt, _ = optimal_social_cost(instance)
    if pi_opt > 0:
        ratio = pi_alg / pi_opt
    else:
        ratio = 1.0 if pi_alg <= TOL else math.inf
    gap = welfare_gap(instance, outcome.allocation)
    ir_ok = all(
        outcome.payments[i]
        <= instance.valuations[i].value(outcome.allocation.bundle(i)) + TOL
        for i in range(instance.n)
    )
    npt_ok = all(p >= -TOL for p in outcome.payments)
    recovered = outcome.payment_total() >= outcome.cost_incurred - TOL
    return AuditReport(
        social_cost_alg=pi_alg,
        social_cost_opt=pi_opt,
        social_cost_ratio=ratio,
        welfare_gap=gap,
        budget_ratio=budget_ratio(outcome),
        ir_ok=ir_ok,
        npt_ok=npt_ok,
        cost_recovered=recovered,
    )


# -- deviation grids and incentive testers ---------------------------------


@dataclass(frozen=True)
class DeviationGrid:
    """Finite misreport surrogate: scaling factors applied to the truth,
    plus entry-wise grids for table valuations when the grid stays small."""

    scale_factors: tuple = (0.0, 0.5, 0.9, 1.1, 2.0)
    table_values: tuple = tuple(i * 0.25 for i in range(9))  # 0, 0.25, .., 2
    max_joint: int = 10 ** 6


DEFAULT_GRID = DeviationGrid()


def misreports(spec: SetFunctionSpec, grid: DeviationGrid = DEFAULT_GRID):
    """Deterministically ordered candidate misreports for one valuation."""
    out = [spec.scaled(f) for f in grid.scale_factors]
    if spec.kind == "table":
        keys = sorted(k for k in spec.table if k)
        if keys and len(grid.table_values) ** len(keys) <= grid.max_joint:
            for combo in itertools.product(grid.table_values, repeat=len(keys)):
                entries = {"": 0.0}
                entries.update(dict(zip(keys, combo)))
                try:
                    out.append(SetFunctionSpec.table_fn(spec.scope, entries))
                except NotMonotone:
                    continue
    return out


@dataclass(frozen=True)
class DeviationWitness:
    coalition: tuple
    reported: tuple  # one SetFunctionSpec per coalition member
    utility_before: tuple
    utility_after: tuple

    def gains(self) -> tuple:
        return tuple(
            a - b for a, b in zip(self.utility_after, self.utility_before)
        )


def _utility(instance: Instance, i: int, outcome: MechanismOutcome) -> float:
    return (
        instance.valuations[i].value(outcome.allocation.bundle(i))
        - outcome.payments[i]
    )


def test_strategyproof(
    instance: Instance,
    mechanism: Mechanism,
    grid: DeviationGrid = DEFAULT_GRID,
) -> Optional[DeviationWitness]:
    """Replay the mechanism under every unilateral misreport in the grid.
    Returns the first strictly utility-improving deviation, or None."""
    truthful = mechanism(instance)
    for i in range(instance.n):
        base = _utility(instance, i, truthful)
        for reported in misreports(instance.valuations[i], grid):
            deviated = mechanism(instance.with_valuation(i, reported))
            after = _utility(instance, i, deviated)
            if after > base + STRICT_GAIN:
                return DeviationWitness(
                    coalition=(i,),
                    reported=(reported,),
                    utility_before=(base,),
                    utility_after=(after,),
                )
    return None


def test_group_deviation(
    instance: Instance,
    mechanism: Mechanism,
    notion: str = "wgsp",
    grid: DeviationGrid = DEFAULT_GRID,
) -> Optional[DeviationWitness]:
    """Exhaustive coalition misreports over the joint grid.

    wgsp witness: every member strictly gains.  gsp witness: some member
    strictly gains and no member strictly loses.
    """
    if notion not in ("wgsp", "gsp"):
        raise ValueError(f"unknown notion {notion!r}")
    truthful = mechanism(instance)
    base = [_utility(instance, i, truthful) for i in range(instance.n)]
    players = range(instance.n)
    coalitions = []
    for size in range(1, instance.n + 1):
        coalitions.extend(itertools.combinations(players, size))
    for coalition in coalitions:
        member_reports = [
            misreports(instance.valuations[i], grid) for i in coalition
        ]
        joint = math.prod(len(r) for r in member_reports)
        if joint > grid.max_joint:
            raise SizeLimit(
                f"joint grid of {joint} reports for coalition {coalition}"
            )
        for combo in itertools.product(*member_reports):
            deviated_instance = instance
            for i, spec in zip(coalition, combo):
                deviated_instance = deviated_instance.with_valuation(i, spec)
            deviated = mechanism(deviated_instance)
            after = [_utility(instance, i, deviated) for i in coalition]
            gains = [a - base[i] for a, i in zip(after, coalition)]
            if notion == "wgsp":
                hit = all(g > STRICT_GAIN for g in gains)
            else:
                hit = any(g > STRICT_GAIN for g in gains) and all(
                    g > -STRICT_GAIN for g in gains
                )
            if hit:
                return DeviationWitness(
                    coalition=coalition,
                    reported=tuple(combo),
                    utility_before=tuple(base[i] for i in coalition),
                    utility_after=tuple(after),
                )
    return None


# -- structural audits ------------------------------------------------------


def bb_inequality_audit(instance: Instance, outcome: MechanismOutcome) -> dict:
    """Check sum_i [constrained objective without i] <= (n-1) * [objective],
    the inequality behind the budget-balance bound."""
    if outcome.diagnostics is None:
        raise ValueError("outcome carries no per-player diagnostics")
    lhs = math.fsum(d.objective for d in outcome.diagnostics)
    rhs = (instance.n - 1) * outcome.objective_value
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + TOL}


@dataclass(frozen=True)
class MinimalityWitness:
    violating: Allocation
    profile_amount: float
    alg: Allocation
    payments: tuple
    deficit: float  # sum of payments minus incurred cost; negative


def minimality_audit(
    h: ObjectiveSpec, cost: SetFunctionSpec, universe: ItemUniverse
) -> Optional[MinimalityWitness]:
    """Search for an inclusion-minimal allocation where h drops below the
    potential; if found, replay the proof's additive profile through the
    h-maximizer and report the resulting deficit."""
    table = PotentialTable(cost)
    violations = [
        alloc
        for alloc in enumerate_allocations(universe)
        if h.fn(alloc) < table.value(alloc) - TOL
    ]
    if not violations:
        return None
    minimal = [
        v
        for v in violations
        if not any(v.contains(o) and o != v for o in violations)
    ]
    target = min(minimal, key=lambda a: a.sort_key())

    amount = max(2.0 * h.fn(universe.full_allocation()), 1.0)
    valuations = tuple(
        SetFunctionSpec.additive(
            universe.per_player[i],
            {item: amount for item in target.bundles[i]},
        )
        for i in range(universe.n)
    )
    probe = Instance(universe, valuations, cost)
    alg, obj = affine_argmax(probe, h)
    payments, _ = vcg_payments(probe, h, alg, obj)
    deficit = math.fsum(payments) - probe.cost_of(alg)
    return MinimalityWitness(
        violating=target,
        profile_amount=amount,
        alg=alg,
        payments=payments,
        deficit=deficit,
    )


def symmetric_marginal_audit(h_levels) -> Optional[int]:
    """Check h(k) - h(k-1) >= 1/k for all sizes; returns the first failing
    size, or None.  A failure rules out covering the cost while keeping a
    finite social-cost approximation with this symmetric h."""
    levels = [float(v) for v in h_levels]
    for k in range(1, len(levels)):
        if levels[k] - levels[k - 1] < 1.0 / k - STRICT_GAIN:
            return k
    return None


# -- counterexample builders -------------------------------------------------

COUNTEREXAMPLE_NAMES = (
    "gsp-epg",
    "non-subadditive",
    "unit-demand-overcharge",
    "epg-overcharge",
    "sequential-tight",
)

_DEFAULT_EPSILON = {
    "gsp-epg": 0.01,
    "non-subadditive": None,  # 1/n
    "unit-demand-overcharge": 0.01,  # unused by the construction
    "epg-overcharge": 1e-6,
    "sequential-tight": 1e-3,
}


def _simple_universe(n: int) -> ItemUniverse:
    return ItemUniverse.of([[f"g{i}"] for i in range(n)])


def _unit_demand_profile(universe: ItemUniverse, values):
    return tuple(
        SetFunctionSpec.unit_demand(universe.per_player[i], values[i])
        for i in range(universe.n)
    )


def _overcharge_cost_value(n: int, per_player_items) -> float:
    if all(not s for s in per_player_items):
        return 0.0
    if any(len(s) > 1 for s in per_player_items):
        return 2.0
    for j in range(n):
        if per_player_items[j]:
            continue
        if all(
            not s or s == {f"m{j}_{i}"}
            for i, s in enumerate(per_player_items)
            if i != j
        ):
            return 1.0
    return 2.0


def build_counterexample(name: str, n: int, epsilon: Optional[float] = None):
    """Named instances reproducing the known failure modes, together with a
    record of the metrics they are expected to exhibit."""
    if name not in COUNTEREXAMPLE_NAMES:
        raise UnknownName(f"unknown counterexample {name!r}")
    if n < 2:
        raise ValueError("counterexamples need at least 2 players")
    if epsilon is None:
        epsilon = _DEFAULT_EPSILON[name]
        if epsilon is None:
            epsilon = min(1.0 / n, 0.25)
    if not 0 < epsilon <= 0.25:
        raise ValueError(f"epsilon {epsilon} outside (0, 0.25]")

    if name == "gsp-epg":
        universe = _simple_universe(n)
        instance = Instance(
            universe,
            _unit_demand_profile(universe, [0.5 + epsilon] * n),
            SetFunctionSpec.epg(tuple(f"g{i}" for i in range(n))),
        )
        return instance, {
            "mechanism": "potential",
            "allocation_empty": True,
            "coalition_gain": epsilon,
        }

    if name == "non-subadditive":
        universe = _simple_universe(n)
        scope = tuple(f"g{i}" for i in range(n))
        full = bundle_key(scope)
        entries = {}
        for size in range(n + 1):
            for combo in itertools.combinations(sorted(scope), size):
                key = bundle_key(combo)
                entries[key] = 1.0 if key == full else 0.0
        instance = Instance(
            universe,
            _unit_demand_profile(universe, [1.0 / n + epsilon] * n),
            SetFunctionSpec.table_fn(scope, entries),
        )
        return instance, {
            "mechanism": "potential",
            "allocation_full": True,
            "social_cost_ratio": n / (1.0 + n * epsilon),
        }

    if name == "unit-demand-overcharge":
        per_player = [
            [f"m{j}_{i}" for j in range(n) if j != i] for i in range(n)
        ]
        universe = ItemUniverse.of(per_player)
        all_items = sorted(universe.items())
        entries = {}
        for size in range(len(all_items) + 1):
            for combo in itertools.combinations(all_items, size):
                s = set(combo)
                split = [s & universe.player_items(i) for i in range(n)]
                entries[bundle_key(combo)] = _overcharge_cost_value(n, split)
        level = 2.0 * harmonic(n) + 1.0  # any value above 2 H_n works
        instance = Instance(
            universe,
            _unit_demand_profile(universe, [level] * n),
            SetFunctionSpec.table_fn(all_items, entries),
        )
        return instance, {
            "mechanism": "potential",
            "payment_each": 1.0,
            "cost": 2.0,
            "budget_ratio": n / 2.0,
        }

    if name == "epg-overcharge":
        h_n = harmonic(n)
        gap = min(
            harmonic(k) - k * h_n / n for k in range(1, n)
        )  # smallest strict slack among subset densities
        eps = min(epsilon, 1e-6, gap / (2.0 * n))
        universe = _simple_universe(n)
        instance = Instance(
            universe,
            _unit_demand_profile(universe, [h_n / n + eps] * n),
            SetFunctionSpec.epg(tuple(f"g{i}" for i in range(n))),
        )
        return instance, {
            "mechanism": "potential",
            "allocation_full": True,
            "cost": 1.0,
            "payment_sum_range": (h_n - 1e-3, h_n),
        }

    # sequential-tight
    universe = _simple_universe(n)
    instance = Instance(
        universe,
        _unit_demand_profile(universe, [1.0 - epsilon] * n),
        SetFunctionSpec.epg(tuple(f"g{i}" for i in range(n))),
    )
    return instance, {
        "mechanism": "sequential-gsp",
        "allocation_empty": True,
        "social_cost_ratio": n * (1.0 - epsilon),
    }
