"""Restoration model assembly, solution and plan extraction."""
from .build import FAMILIES, ModelIndex, build_model, resolve_horizon, rule_based_schedule, sync_order, vid
from .config import SYNC_MODES, PlanningConfig
from .plan import Closure, GfmiState, Metrics, RestorationPlan, StepRecord, metrics
from .planning import PlanError, PlanInfeasible, canonical_roots, energized_islands, extract_plan, solve_plan

__all__ = [
    "FAMILIES", "SYNC_MODES", "Closure", "GfmiState", "Metrics", "ModelIndex", "PlanError",
    "PlanInfeasible", "PlanningConfig", "RestorationPlan", "StepRecord", "build_model",
    "canonical_roots", "energized_islands", "extract_plan", "metrics", "resolve_horizon",
    "rule_based_schedule", "solve_plan", "sync_order", "vid",
]
