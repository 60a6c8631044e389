"""Command-line entry point: run mechanisms on instance files, check
structural properties, replay the named demo instances, and run audits.

Exit codes: 0 pass, 1 property or audit violation, 2 input error, 3 size
guard.  Reports are JSON documents with sorted keys; apart from the
wall-clock field they are byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

from .audit import (
    COUNTEREXAMPLE_NAMES,
    DeviationGrid,
    audit_outcome,
    bb_inequality_audit,
    build_counterexample,
    minimality_audit,
    optimal_social_cost,
    social_cost,
    symmetric_marginal_audit,
    test_group_deviation,
    test_strategyproof,
)
from .errors import CostShareError, SizeLimit
from .mechanisms import (
    MechanismOutcome,
    ObjectiveSpec,
    run_potential,
    run_sequential,
    run_vcg_baseline,
)
from .model import TOL, Instance, check_class, enumerate_allocations, load_instance
from .potential import PotentialTable, harmonic, potential_recursive

MECHANISMS = ("potential", "sequential-gsp", "sequential-wgsp", "vcg")
TIE_FLAGS = {"canonical": "canonical_min", "symmetric-prefix": "symmetric_prefix"}
PROPERTIES = (
    "submodular-cost",
    "supermodular-valuations",
    "symmetric",
    "subadditive-cost",
    "potential-bounds",
    "potential-identity",
)
AUDITS = ("sp", "wgsp", "gsp", "bb-inequality", "minimality", "marginal")


def _run_mechanism(instance: Instance, name: str, tie=None) -> MechanismOutcome:
    if name == "potential":
        return run_potential(instance, tie=tie)
    if name == "sequential-gsp":
        return run_sequential(instance, variant="gsp_max_size")
    if name == "sequential-wgsp":
        return run_sequential(instance, variant="wgsp_lexicographic")
    if name == "vcg":
        return run_vcg_baseline(instance)
    raise CostShareError(f"unknown mechanism {name!r}")


def _emit(report: dict, out_path=None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out_path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out_path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _beta(outcome: MechanismOutcome) -> float:
    total = outcome.payment_total()
    if outcome.cost_incurred == 0.0:
        return 1.0 if total == 0.0 else math.inf
    return total / outcome.cost_incurred


def cmd_run(args) -> int:
    started = time.monotonic()
    instance = load_instance(args.instance, force=args.force)
    tie = TIE_FLAGS[args.tie_break] if args.tie_break else None
    outcome = _run_mechanism(instance, args.mechanism, tie=tie)
    table = PotentialTable(instance.cost)
    pi_alg = social_cost(instance, outcome.allocation)
    report = {
        "schema": "costshare-report/1",
        "mechanism": outcome.mechanism,
        "allocation": [list(b) for b in outcome.allocation.bundles],
        "payments": list(outcome.payments),
        "cost_incurred": outcome.cost_incurred,
        "potential_of_alg": table.value(outcome.allocation),
        "social_cost": pi_alg,
        "ratios": {"beta": _beta(outcome)},
        "audit": {
            "ir_ok": all(
                outcome.payments[i]
                <= instance.valuations[i].value(outcome.allocation.bundle(i))
                + TOL
                for i in range(instance.n)
            ),
            "npt_ok": all(p >= -TOL for p in outcome.payments),
            "cost_recovered": outcome.payment_total()
            >= outcome.cost_incurred - TOL,
        },
        "seed": args.seed,
    }
    if args.opt:
        pi_opt, _ = optimal_social_cost(instance)
        report["opt_social_cost"] = pi_opt
        if pi_opt > 0:
            report["ratios"]["rho"] = pi_alg / pi_opt
        else:
            report["ratios"]["rho"] = 1.0 if pi_alg <= TOL else math.inf
    report["wall_clock_ms"] = (time.monotonic() - started) * 1000.0
    _emit(report, args.out)
    return 0


def _print_witness(label: str, witness) -> None:
    sys.stdout.write(f"{label}: {witness}\n")


def cmd_check(args) -> int:
    instance = load_instance(args.instance, force=args.force)
    prop = args.property

    if prop == "submodular-cost":
        verdict = check_class(instance.cost, "submodular")
        if not verdict.holds:
            _print_witness("submodularity violated", verdict.witness)
            return 1
        return 0

    if prop == "supermodular-valuations":
        for i, v in enumerate(instance.valuations):
            verdict = check_class(v, "supermodular")
            if not verdict.holds:
                _print_witness(
                    f"supermodularity violated for player {i}", verdict.witness
                )
                return 1
        return 0

    if prop == "symmetric":
        for i, v in enumerate(instance.valuations):
            verdict = check_class(v, "symmetric")
            if not verdict.holds:
                _print_witness(
                    f"valuation of player {i} not symmetric", verdict.witness
                )
                return 1
        verdict = check_class(
            instance.cost,
            "player_symmetric",
            partition=instance.universe.per_player,
        )
        if not verdict.holds:
            _print_witness("cost not player-wise symmetric", verdict.witness)
            return 1
        return 0

    if prop == "subadditive-cost":
        verdict = check_class(instance.cost, "subadditive")
        if not verdict.holds:
            _print_witness("subadditivity violated", verdict.witness)
            return 1
        return 0

    if prop == "potential-bounds":
        table = PotentialTable(instance.cost)
        h_n = harmonic(instance.n)
        submodular = check_class(instance.cost, "submodular").holds
        subadditive = (
            submodular
            or len(instance.cost.scope) > 12
            or check_class(instance.cost, "subadditive").holds
        )
        for alloc in enumerate_allocations(instance.universe):
            c = instance.cost_of(alloc)
            p = table.value(alloc)
            if p > h_n * c + TOL:
                _print_witness(
                    "potential above H_n * cost", (alloc.bundles, p, h_n * c)
                )
                return 1
            if submodular and p < c - TOL:
                _print_witness("potential below cost", (alloc.bundles, p, c))
                return 1
            if subadditive and p < c / 2.0 - TOL:
                _print_witness(
                    "potential below cost/2", (alloc.bundles, p, c / 2.0)
                )
                return 1
        return 0

    # potential-identity
    table = PotentialTable(instance.cost)
    for alloc in enumerate_allocations(instance.universe):
        gradients = math.fsum(
            table.marginal(alloc, i) for i in range(instance.n)
        )
        c = instance.cost_of(alloc)
        if abs(gradients - c) > TOL:
            _print_witness(
                "gradient identity violated", (alloc.bundles, gradients, c)
            )
            return 1
        recursive = potential_recursive(instance.cost, alloc)
        if abs(table.value(alloc) - recursive) > TOL:
            _print_witness(
                "closed form disagrees with recursion",
                (alloc.bundles, table.value(alloc), recursive),
            )
            return 1
    return 0


def _relative_close(measured: float, expected: float, tol: float) -> bool:
    scale = max(abs(expected), 1e-12)
    return abs(measured - expected) <= tol * scale


def demo_report(name: str, players: int, epsilon=None):
    """Build a named instance, run its mechanism, and compare the measured
    metrics against the expected ones.  Returns (report dict, all matched)."""
    instance, expected = build_counterexample(name, players, epsilon)
    outcome = _run_mechanism(instance, expected["mechanism"])
    measured = {"mechanism": expected["mechanism"]}
    matches = {}
    tol = 1e-6

    if "allocation_empty" in expected:
        measured["allocation_empty"] = outcome.allocation.is_empty()
        matches["allocation_empty"] = (
            measured["allocation_empty"] == expected["allocation_empty"]
        )
    if "allocation_full" in expected:
        full = instance.universe.full_allocation()
        measured["allocation_full"] = outcome.allocation == full
        matches["allocation_full"] = (
            measured["allocation_full"] == expected["allocation_full"]
        )
    if "social_cost_ratio" in expected:
        pi_alg = social_cost(instance, outcome.allocation)
        pi_opt, _ = optimal_social_cost(instance)
        measured["social_cost_ratio"] = pi_alg / pi_opt
        matches["social_cost_ratio"] = _relative_close(
            measured["social_cost_ratio"], expected["social_cost_ratio"], tol
        )
    if "payment_each" in expected:
        measured["payments"] = list(outcome.payments)
        matches["payment_each"] = all(
            abs(p - expected["payment_each"]) <= tol for p in outcome.payments
        )
    if "cost" in expected:
        measured["cost"] = outcome.cost_incurred
        matches["cost"] = abs(measured["cost"] - expected["cost"]) <= tol
    if "budget_ratio" in expected:
        measured["budget_ratio"] = _beta(outcome)
        matches["budget_ratio"] = _relative_close(
            measured["budget_ratio"], expected["budget_ratio"], tol
        )
    if "payment_sum_range" in expected:
        lo, hi = expected["payment_sum_range"]
        measured["payment_sum"] = outcome.payment_total()
        matches["payment_sum_range"] = lo <= measured["payment_sum"] <= hi
    if "coalition_gain" in expected:
        witness = test_group_deviation(instance, run_potential, notion="wgsp")
        if witness is None:
            measured["coalition_gain"] = None
            matches["coalition_gain"] = False
        else:
            gains = witness.gains()
            measured["coalition"] = list(witness.coalition)
            measured["coalition_gain"] = list(gains)
            matches["coalition_gain"] = all(
                abs(g - expected["coalition_gain"]) <= tol for g in gains
            )

    report = {
        "schema": "costshare-report/1",
        "demo": name,
        "players": players,
        "expected": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in expected.items()
        },
        "measured": measured,
        "matches": matches,
    }
    return report, all(matches.values())


def cmd_demo(args) -> int:
    report, ok = demo_report(args.name, args.players, args.epsilon)
    _emit(report, args.out)
    return 0 if ok else 1


def _parse_grid(spec: str) -> DeviationGrid:
    try:
        factors = tuple(float(v) for v in spec.split(",") if v.strip() != "")
    except ValueError as exc:
        raise CostShareError(f"bad grid spec {spec!r}: {exc}") from exc
    if not factors:
        raise CostShareError("grid spec lists no scale factors")
    return DeviationGrid(scale_factors=factors)


def _witness_json(witness) -> dict:
    return {
        "coalition": list(witness.coalition),
        "reported": [spec.to_json() for spec in witness.reported],
        "utility_before": list(witness.utility_before),
        "utility_after": list(witness.utility_after),
        "gains": list(witness.gains()),
    }


def cmd_audit(args) -> int:
    kind = args.audit
    report = {"schema": "costshare-report/1", "audit": kind, "seed": args.seed}

    if kind == "marginal":
        if args.h_levels is None:
            raise CostShareError("audit marginal requires --h-levels")
        levels = [float(v) for v in args.h_levels.split(",")]
        failing = symmetric_marginal_audit(levels)
        report["holds"] = failing is None
        if failing is not None:
            report["witness"] = {
                "size": failing,
                "increment": levels[failing] - levels[failing - 1],
                "required": 1.0 / failing,
            }
        _emit(report, args.out)
        return 0 if failing is None else 1

    if args.instance is None:
        raise CostShareError(f"audit {kind} requires --instance")
    instance = load_instance(args.instance, force=args.force)

    if kind == "minimality":
        if args.h == "cost":
            objective = ObjectiveSpec.cost_fn(instance.cost)
        else:
            objective = ObjectiveSpec.potential(instance.cost)
        witness = minimality_audit(
            objective, instance.cost, instance.universe
        )
        report["holds"] = witness is None
        if witness is not None:
            report["witness"] = {
                "violating_allocation": [
                    list(b) for b in witness.violating.bundles
                ],
                "profile_amount": witness.profile_amount,
                "alg": [list(b) for b in witness.alg.bundles],
                "payments": list(witness.payments),
                "deficit": witness.deficit,
            }
        _emit(report, args.out)
        return 0 if witness is None else 1

    if kind == "bb-inequality":
        outcome = run_potential(instance)
        result = bb_inequality_audit(instance, outcome)
        report.update(result)
        report["holds"] = bool(result["holds"])
        _emit(report, args.out)
        return 0 if report["holds"] else 1

    # sp / wgsp / gsp
    grid = _parse_grid(args.grid) if args.grid else DeviationGrid()

    def mechanism(inst):
        return _run_mechanism(inst, args.mechanism)

    if kind == "sp":
        witness = test_strategyproof(instance, mechanism, grid)
    else:
        witness = test_group_deviation(instance, mechanism, notion=kind, grid=grid)
    report["mechanism"] = args.mechanism
    report["holds"] = witness is None
    if witness is not None:
        report["witness"] = _witness_json(witness)
    _emit(report, args.out)
    return 0 if witness is None else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costshare",
        description="Run and audit combinatorial cost-sharing mechanisms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a mechanism on an instance file")
    run.add_argument("--instance", required=True)
    run.add_argument("--mechanism", required=True, choices=MECHANISMS)
    run.add_argument("--tie-break", choices=sorted(TIE_FLAGS))
    run.add_argument("--opt", action="store_true",
                     help="also compute the brute-force social-cost optimum")
    run.add_argument("--out")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--force", action="store_true",
                     help="override the allocation-count size guard")
    run.set_defaults(fn=cmd_run)

    check = sub.add_parser("check", help="check a structural property")
    check.add_argument("--instance", required=True)
    check.add_argument("--property", required=True, choices=PROPERTIES)
    check.add_argument("--force", action="store_true")
    check.set_defaults(fn=cmd_check)

    demo = sub.add_parser("demo", help="replay a named instance")
    demo.add_argument("--name", required=True, choices=COUNTEREXAMPLE_NAMES)
    demo.add_argument("--players", required=True, type=int)
    demo.add_argument("--epsilon", type=float)
    demo.add_argument("--out")
    demo.set_defaults(fn=cmd_demo)

    audit = sub.add_parser("audit", help="run an incentive or structural audit")
    audit.add_argument("--instance")
    audit.add_argument("--audit", required=True, choices=AUDITS)
    audit.add_argument("--mechanism", default="potential", choices=MECHANISMS)
    audit.add_argument("--grid", help="comma-separated misreport scale factors")
    audit.add_argument("--seed", type=int, default=0)
    audit.add_argument("--h", default="cost", choices=("cost", "potential"),
                       help="objective for the minimality audit")
    audit.add_argument("--h-levels",
                       help="comma-separated levels for the marginal audit")
    audit.add_argument("--out")
    audit.add_argument("--force", action="store_true")
    audit.set_defaults(fn=cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SizeLimit as exc:
        sys.stderr.write(f"size guard: {exc}\n")
        return 3
    except (CostShareError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 2
    except json.JSONDecodeError as exc:  # pragma: no cover - subclass above
        sys.stderr.write(f"input error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
