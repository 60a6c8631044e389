"""Combinatorial cost-sharing mechanisms and their audits."""

from .errors import (
    CostShareError,
    DisjointnessViolation,
    InternalConsistencyError,
    InvalidTieBreak,
    NotMonotone,
    NotNormalized,
    ScopeViolation,
    SizeLimit,
    UnknownName,
    UnsupportedClass,
)
from .model import (
    SIZE_LIMIT,
    TOL,
    Allocation,
    Instance,
    ItemUniverse,
    SetFunctionSpec,
    Verdict,
    bundle_key,
    check_class,
    enumerate_allocations,
    load_instance,
    validate_instance,
)
from .potential import (
    PotentialTable,
    SymmetricPotential,
    expected_density,
    harmonic,
    marginal,
    potential_recursive,
    potential_value,
    symmetric_potential,
)
from .mechanisms import (
    MechanismOutcome,
    ObjectiveSpec,
    affine_argmax,
    run_potential,
    run_potential_symmetric_fast,
    run_sequential,
    run_vcg_baseline,
    simple_symmetric_instance,
    vcg_payments,
)
from .audit import (
    AuditReport,
    DeviationGrid,
    DeviationWitness,
    audit_outcome,
    bb_inequality_audit,
    build_counterexample,
    budget_ratio,
    minimality_audit,
    optimal_social_cost,
    optimal_welfare,
    social_cost,
    symmetric_marginal_audit,
    test_group_deviation,
    test_strategyproof,
    welfare,
    welfare_gap,
)
from .rng import Xoshiro256

__all__ = [
    "Allocation",
    "AuditReport",
    "CostShareError",
    "DeviationGrid",
    "DeviationWitness",
    "DisjointnessViolation",
    "Instance",
    "InternalConsistencyError",
    "InvalidTieBreak",
    "ItemUniverse",
    "MechanismOutcome",
    "NotMonotone",
    "NotNormalized",
    "ObjectiveSpec",
    "PotentialTable",
    "ScopeViolation",
    "SetFunctionSpec",
    "SIZE_LIMIT",
    "SizeLimit",
    "SymmetricPotential",
    "TOL",
    "UnknownName",
    "UnsupportedClass",
    "Verdict",
    "Xoshiro256",
    "affine_argmax",
    "audit_outcome",
    "bb_inequality_audit",
    "build_counterexample",
    "budget_ratio",
    "bundle_key",
    "check_class",
    "enumerate_allocations",
    "expected_density",
    "harmonic",
    "load_instance",
    "marginal",
    "minimality_audit",
    "optimal_social_cost",
    "optimal_welfare",
    "potential_recursive",
    "potential_value",
    "run_potential",
    "run_potential_symmetric_fast",
    "run_sequential",
    "run_vcg_baseline",
    "simple_symmetric_instance",
    "social_cost",
    "symmetric_marginal_audit",
    "symmetric_potential",
    "test_group_deviation",
    "test_strategyproof",
    "validate_instance",
    "vcg_payments",
    "welfare",
    "welfare_gap",
]
