"""Planner hyperparameters and the kinematic agent state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..geometry import Point

DEFAULT_RANK_SIGMA = {1: 0.0, 2: 0.5, 3: 1.0, 4: 2.0, 5: 4.0}


@dataclass(frozen=True)
class PlannerParams:
    dt: float = 0.5
    v_max: float = 1.2
    a_max: float = 0.8
    omega_max: float = math.pi
    alpha_max: float = math.pi
    dwa_horizon: float = 2.0
    dwa_samples: tuple[int, int] = (11, 21)  # (n_v, n_omega)
    # heading must dominate clearance, or standing in open space outscores
    # entering the narrower corridors where the items live
    w_heading: float = 0.7
    w_clearance: float = 0.05
    w_velocity: float = 0.25
    clearance_cap: float = 1.0
    prm_samples: int = 500
    prm_radius: float = 3.0
    dwell_steps: int = 4
    rank_sigma: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_RANK_SIGMA))
    waypoint_radius: float = 0.6
    max_steps: int = 4000
    stall_limit: int = 60

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.dwa_horizon <= 0:
            raise ValueError("dt and dwa_horizon must be positive")
        if min(self.v_max, self.a_max, self.omega_max, self.alpha_max) < 0:
            raise ValueError("kinematic limits must be non-negative")
        if self.dwa_samples[0] < 1 or self.dwa_samples[1] < 1:
            raise ValueError("dwa_samples must be >= 1 in both axes")
        if self.w_heading + self.w_clearance + self.w_velocity <= 0:
            raise ValueError("objective weights must sum to a positive value")
        if self.prm_samples < 1 or self.prm_radius <= 0:
            raise ValueError("prm_samples and prm_radius must be positive")
        if self.dwell_steps < 1:
            raise ValueError("dwell_steps must be >= 1")
        if sorted(self.rank_sigma) != [1, 2, 3, 4, 5]:
            raise ValueError("rank_sigma must map considerations 1..5")
        sigmas = [self.rank_sigma[c] for c in range(1, 6)]
        if any(b < a for a, b in zip(sigmas, sigmas[1:])):
            raise ValueError("rank_sigma must be non-decreasing in consideration")

    @property
    def interest_dwell_steps(self) -> int:
        """Interest items get half the purchase dwell, rounded up."""
        return math.ceil(self.dwell_steps / 2)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PlannerParams":
        kwargs: dict[str, Any] = dict(doc)
        if "dwa_samples" in kwargs:
            kwargs["dwa_samples"] = tuple(kwargs["dwa_samples"])
        if "rank_sigma" in kwargs:
            kwargs["rank_sigma"] = {int(k): float(v) for k, v in kwargs["rank_sigma"].items()}
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dt": self.dt,
            "v_max": self.v_max,
            "a_max": self.a_max,
            "omega_max": self.omega_max,
            "alpha_max": self.alpha_max,
            "dwa_horizon": self.dwa_horizon,
            "dwa_samples": list(self.dwa_samples),
            "w_heading": self.w_heading,
            "w_clearance": self.w_clearance,
            "w_velocity": self.w_velocity,
            "clearance_cap": self.clearance_cap,
            "prm_samples": self.prm_samples,
            "prm_radius": self.prm_radius,
            "dwell_steps": self.dwell_steps,
            "rank_sigma": {str(k): v for k, v in sorted(self.rank_sigma.items())},
            "waypoint_radius": self.waypoint_radius,
            "max_steps": self.max_steps,
            "stall_limit": self.stall_limit,
        }


@dataclass(frozen=True)
class KinematicState:
    position: Point
    heading: float
    v: float = 0.0
    omega: float = 0.0
