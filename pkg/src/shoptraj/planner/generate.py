"""End-to-end trajectory generation: visit targets in rank order, dwell, annotate.

The agent starts at the entrance, walks to each target item in the sampled
visit order (global roadmap path followed by DWA steps), dwells at every
reached target with zero velocity, records purchases, and finishes inside
the cashier region.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..captions import ItemLists
from ..geometry import Point, dist
from ..storemap import Item, StoreMap, free_point_in_region
from .dwa import plan_local_dwa
from .params import KinematicState, PlannerParams
from .prm import NoPathError, Roadmap, build_roadmap, plan_global, segment_is_free
from .ranks import sample_category_ranks

log = logging.getLogger(__name__)

EMERGENCY_FLAG = "emergency_stop"


class UnreachableItemError(Exception):
    """A purchase-list item could not be reached."""


class StepBudgetError(Exception):
    """Trajectory generation exceeded the configured step budget."""


@dataclass
class AnnotatedTrajectory:
    """Timed positions with per-step items in contact and the purchased subset."""

    positions: list[Point]
    items_in_contact: list[str]
    purchased: list[str]
    provenance: str  # "synthesized" | "human"
    map_id: str
    caption_id: str
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.positions) != len(self.items_in_contact):
            raise ValueError("positions and items_in_contact must have equal length")
        if not set(self.purchased) <= set(self.items_in_contact):
            raise ValueError("purchased items must be a subset of items in contact")


class _Walker:
    """DWA stepping toward one goal at a time with stall detection."""

    def __init__(self, store: StoreMap, params: PlannerParams, start: KinematicState):
        self.store = store
        self.params = params
        self.state = start
        self.positions: list[Point] = [start.position]
        self.emergencies = 0
        self.steps = 0

    def walk_to(self, waypoints: list[Point], arrived) -> bool:
        """Step until `arrived(position)` holds; False when progress stalls."""
        goal = waypoints[-1]
        wp_idx = 0
        best = dist(self.state.position, goal)
        since_best = 0
        while not arrived(self.state.position):
            if self.steps >= self.params.max_steps:
                raise StepBudgetError(f"exceeded {self.params.max_steps} steps")
            last = len(waypoints) - 1
            while (
                wp_idx < last
                and dist(self.state.position, waypoints[wp_idx]) <= self.params.waypoint_radius
            ):
                wp_idx += 1
            # cut corners only along straight segments verified collision-free,
            # otherwise the chase direction can pin the agent against a shelf
            while wp_idx < last and segment_is_free(
                self.store, self.state.position, waypoints[wp_idx + 1], self.store.agent_radius
            ):
                wp_idx += 1
            cmd, self.state = plan_local_dwa(
                self.store, self.state, waypoints[wp_idx], self.params
            )
            if cmd.emergency:
                self.emergencies += 1
            self.positions.append(self.state.position)
            self.steps += 1
            d = dist(self.state.position, goal)
            if d < best - 1e-3:
                best = d
                since_best = 0
            else:
                since_best += 1
                if since_best >= self.params.stall_limit:
                    return False
        return True

    def dwell(self, frames: int) -> None:
        self.state = KinematicState(
            position=self.state.position, heading=self.state.heading, v=0.0, omega=0.0
        )
        for _ in range(frames):
            self.positions.append(self.state.position)
            self.steps += 1


def _item_arrival(store: StoreMap, item: Item):
    def arrived(p: Point) -> bool:
        return (
            dist(p, item.position) <= store.reach_distance
            and store.nearest_item(p).id == item.id
        )

    return arrived


def generate_trajectory(
    store: StoreMap,
    lists: ItemLists,
    consideration: int,
    params: PlannerParams,
    rng: np.random.Generator,
    roadmap: Roadmap | None = None,
    caption_id: str = "",
) -> AnnotatedTrajectory:
    """Plan one annotated shopper trajectory over the store map.

    Unreachable interest items are skipped with a warning; an unreachable
    purchase item fails the sample. Deterministic for a fixed rng state.
    """
    if roadmap is None:
        roadmap = build_roadmap(store, params, rng)
    assignment = sample_category_ranks(store, lists, consideration, params, rng)
    purchase_set = set(lists.purchase)

    cashier_goal = free_point_in_region(store, store.cashier)
    first_goal = assignment.visit_order[0].position if assignment.visit_order else cashier_goal
    heading = math.atan2(
        first_goal[1] - store.entrance[1], first_goal[0] - store.entrance[0]
    )
    walker = _Walker(store, params, KinematicState(position=store.entrance, heading=heading))

    purchased: list[str] = []
    for item in assignment.visit_order:
        is_purchase = item.name in purchase_set
        try:
            reached = _walk_with_replan(store, params, walker, roadmap, item.position,
                                        _item_arrival(store, item))
        except NoPathError:
            reached = False
        if not reached:
            if is_purchase:
                raise UnreachableItemError(f"purchase item '{item.name}' is unreachable")
            log.warning("skipping unreachable interest item '%s'", item.name)
            continue
        walker.dwell(params.dwell_steps if is_purchase else params.interest_dwell_steps)
        if is_purchase:
            purchased.append(item.id)

    def at_cashier(p: Point) -> bool:
        return store.cashier.contains(p)

    if not _walk_with_replan(store, params, walker, roadmap, cashier_goal, at_cashier):
        raise UnreachableItemError("cashier region is unreachable")

    positions = walker.positions
    items_in_contact = store.nearest_item_ids(np.asarray(positions))
    flags = [EMERGENCY_FLAG] if walker.emergencies else []
    return AnnotatedTrajectory(
        positions=positions,
        items_in_contact=items_in_contact,
        purchased=purchased,
        provenance="synthesized",
        map_id=store.map_id,
        caption_id=caption_id,
        flags=flags,
    )


def _walk_with_replan(
    store: StoreMap,
    params: PlannerParams,
    walker: _Walker,
    roadmap: Roadmap,
    goal: Point,
    arrived,
) -> bool:
    """Walk to a goal, replanning the global path once if progress stalls."""
    for attempt in range(2):
        waypoints = plan_global(store, roadmap, walker.state.position, goal, params.prm_radius)
        if walker.walk_to(waypoints, arrived):
            return True
        if attempt == 0:
            log.debug("stalled on the way to %s; replanning once", goal)
    return False
