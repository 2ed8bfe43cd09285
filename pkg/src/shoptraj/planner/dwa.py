"""Dynamic-window local planner for a unicycle point agent.

Each step samples candidate (v, omega) commands from the reachable window,
forward-simulates them over a short horizon, discards colliding rollouts and
picks the best weighted heading/clearance/velocity score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import Point, wrap_angle
from ..storemap import StoreMap
from .params import KinematicState, PlannerParams

_OMEGA_EPS = 1e-9


@dataclass(frozen=True)
class DwaCommand:
    v: float
    omega: float
    emergency: bool = False


def integrate(position: Point, heading: float, v: float, omega: float, dt: float) -> tuple[Point, float]:
    """Exact constant-command unicycle integration over dt."""
    x, y = position
    if abs(omega) < _OMEGA_EPS:
        return (x + v * math.cos(heading) * dt, y + v * math.sin(heading) * dt), heading
    radius = v / omega
    new_heading = heading + omega * dt
    x += radius * (math.sin(new_heading) - math.sin(heading))
    y += -radius * (math.cos(new_heading) - math.cos(heading))
    return (x, y), wrap_angle(new_heading)


def velocity_window(state: KinematicState, params: PlannerParams) -> tuple[float, float, float, float]:
    """Reachable (v_lo, v_hi, w_lo, w_hi); linear velocity clipped to [0, v_max]."""
    v_lo = max(0.0, state.v - params.a_max * params.dt)
    v_hi = min(params.v_max, state.v + params.a_max * params.dt)
    w_lo = max(-params.omega_max, state.omega - params.alpha_max * params.dt)
    w_hi = min(params.omega_max, state.omega + params.alpha_max * params.dt)
    return v_lo, v_hi, w_lo, w_hi


def _rollout(
    state: KinematicState, vs: np.ndarray, ws: np.ndarray, params: PlannerParams, fine: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate all candidates over the horizon (closed-form constant-command arcs).

    Returns pose samples (C, S, 2) for collision checking plus the position
    and heading after the first dt step (the state each command produces).
    """
    n_steps = max(1, round(params.dwa_horizon / params.dt))
    total = n_steps * fine
    dt_fine = params.dt / fine
    t = dt_fine * np.arange(1, total + 1)  # (S,)
    th0 = state.heading
    th = th0 + ws[:, None] * t[None, :]  # (C, S)
    straight = np.abs(ws) < _OMEGA_EPS
    radius = np.divide(vs, ws, out=np.zeros_like(vs), where=~straight)
    dx = np.where(
        straight[:, None],
        vs[:, None] * math.cos(th0) * t[None, :],
        radius[:, None] * (np.sin(th) - math.sin(th0)),
    )
    dy = np.where(
        straight[:, None],
        vs[:, None] * math.sin(th0) * t[None, :],
        radius[:, None] * (math.cos(th0) - np.cos(th)),
    )
    samples = np.stack([state.position[0] + dx, state.position[1] + dy], axis=2)
    step_pos = samples[:, fine - 1, :]
    step_heading = th[:, fine - 1]
    return samples, step_pos, step_heading


def _clearances(store: StoreMap, points: np.ndarray) -> np.ndarray:
    """Distance from each point (..., 2) to the nearest shelf surface or wall."""
    return store.batch_clearance(points)


def plan_local_dwa(
    store: StoreMap,
    state: KinematicState,
    waypoint: Point,
    params: PlannerParams,
) -> tuple[DwaCommand, KinematicState]:
    """One DWA step toward the waypoint.

    When every candidate rollout collides the command degrades to an
    emergency stop (v=0, omega=0) with the flag set.
    """
    n_v, n_w = params.dwa_samples
    v_lo, v_hi, w_lo, w_hi = velocity_window(state, params)
    v_grid = np.linspace(v_lo, v_hi, n_v)
    w_grid = np.linspace(w_lo, w_hi, n_w)
    vs = np.repeat(v_grid, n_w)
    ws = np.tile(w_grid, n_v)

    # fine substeps keep pose samples at most agent_radius/2 apart along rollouts
    max_chord = max(v_hi * params.dt, 1e-9)
    fine = max(1, math.ceil(max_chord / (store.agent_radius / 2.0)))
    samples, step_pos, step_heading = _rollout(state, vs, ws, params, fine)

    # constant half-spacing inflation covers the continuous sweep between pose
    # samples and guarantees every surviving pose keeps the same margin, so a
    # position recorded by one step can never fail the next step's v=0 rollout
    inflated = store.agent_radius + store.agent_radius / 4.0
    clear = _clearances(store, samples)  # negative outside the map
    collides = clear.min(axis=1) < inflated
    if collides.all():
        stopped = KinematicState(position=state.position, heading=state.heading, v=0.0, omega=0.0)
        return DwaCommand(0.0, 0.0, emergency=True), stopped

    # heading judged at the state each command produces after one dt step;
    # the long horizon only vetoes collisions
    ok = ~collides
    # a stationary command can outscore every turn needed to escape a tight
    # spot (alignment stays perfect while standing); prefer motion whenever
    # any moving rollout is collision-free
    moving = ok & (vs > 0.0)
    if moving.any():
        ok = moving
    to_wp = np.asarray(waypoint) - step_pos
    wp_dist = np.hypot(to_wp[:, 0], to_wp[:, 1])
    diff = np.arctan2(to_wp[:, 1], to_wp[:, 0]) - step_heading
    angle_off = np.abs(np.arctan2(np.sin(diff), np.cos(diff)))
    heading_score = np.where(wp_dist < 1e-9, 1.0, 1.0 - angle_off / math.pi)
    margin = np.maximum(clear.min(axis=1) - store.agent_radius, 0.0)
    clearance_score = np.minimum(margin, params.clearance_cap) / params.clearance_cap
    velocity_score = vs / params.v_max if params.v_max > 0 else np.zeros_like(vs)
    total = (
        params.w_heading * heading_score
        + params.w_clearance * clearance_score
        + params.w_velocity * velocity_score
    )
    total = np.where(ok, total, -np.inf)
    best = int(np.argmax(total))

    v, omega = float(vs[best]), float(ws[best])
    position, heading = integrate(state.position, state.heading, v, omega, params.dt)
    return DwaCommand(v, omega), KinematicState(position=position, heading=heading, v=v, omega=omega)
