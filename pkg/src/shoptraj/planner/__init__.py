"""Hierarchical trajectory planning: rank sampling, roadmap global planning, DWA local planning."""

from .params import PlannerParams, KinematicState
from .ranks import RankAssignment, sample_category_ranks
from .prm import Roadmap, build_roadmap, plan_global, NoPathError, SamplingStarvedError
from .dwa import DwaCommand, plan_local_dwa
from .generate import (
    AnnotatedTrajectory,
    UnreachableItemError,
    StepBudgetError,
    generate_trajectory,
)

__all__ = [
    "PlannerParams",
    "KinematicState",
    "RankAssignment",
    "sample_category_ranks",
    "Roadmap",
    "build_roadmap",
    "plan_global",
    "NoPathError",
    "SamplingStarvedError",
    "DwaCommand",
    "plan_local_dwa",
    "AnnotatedTrajectory",
    "UnreachableItemError",
    "StepBudgetError",
    "generate_trajectory",
]
