"""Probabilistic roadmap construction and shortest-path queries on a store map."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import Point, dist
from ..storemap import StoreMap

REJECTION_FACTOR = 200  # sampling attempts per requested node before giving up


class NoPathError(Exception):
    """Start and goal lie in different roadmap components."""


class SamplingStarvedError(Exception):
    """Free-space rejection sampling exceeded its attempt budget."""


@dataclass
class Roadmap:
    nodes: np.ndarray  # (N, 2) free-space points
    edges: list[tuple[int, int, float]]  # (i, j, length) with i < j
    adjacency: dict[int, list[tuple[int, float]]] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self.adjacency:
            adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(len(self.nodes))}
            for i, j, w in self.edges:
                adj[i].append((j, w))
                adj[j].append((i, w))
            self.adjacency = adj


def segment_is_free(store: StoreMap, a: Point, b: Point, radius: float) -> bool:
    """Conservative free check of a swept disc along segment a-b.

    Samples at most radius/2 apart and inflates the check radius by half the
    sample spacing, so a pass guarantees the continuous sweep is free.
    """
    spacing = max(radius / 2.0, 1e-6)
    length = dist(a, b)
    n = max(1, math.ceil(length / spacing))
    inflated = radius + (length / n) / 2.0
    t = np.linspace(0.0, 1.0, n + 1)
    pts = np.empty((n + 1, 2))
    pts[:, 0] = a[0] + (b[0] - a[0]) * t
    pts[:, 1] = a[1] + (b[1] - a[1]) * t
    return bool((store.batch_clearance(pts) >= inflated).all())


def sample_free_points(
    store: StoreMap, count: int, rng: np.random.Generator, radius: float
) -> np.ndarray:
    points = np.empty((count, 2))
    found = 0
    for _ in range(count * REJECTION_FACTOR):
        if found == count:
            break
        p = (rng.uniform(0.0, store.width), rng.uniform(0.0, store.height))
        if store.is_free(p, radius):
            points[found] = p
            found += 1
    if found < count:
        raise SamplingStarvedError(
            f"sampled only {found}/{count} free points in {count * REJECTION_FACTOR} attempts"
        )
    return points


def build_roadmap(store: StoreMap, params, rng: np.random.Generator) -> Roadmap:
    """Sample free nodes uniformly and connect collision-free neighbors within radius."""
    nodes = sample_free_points(store, params.prm_samples, rng, store.agent_radius)
    tree = cKDTree(nodes)
    edges: list[tuple[int, int, float]] = []
    for i, j in sorted(tree.query_pairs(params.prm_radius)):
        a = (float(nodes[i, 0]), float(nodes[i, 1]))
        b = (float(nodes[j, 0]), float(nodes[j, 1]))
        if segment_is_free(store, a, b, store.agent_radius):
            edges.append((i, j, dist(a, b)))
    return Roadmap(nodes=nodes, edges=edges)


def _connect_point(
    store: StoreMap, roadmap: Roadmap, p: Point, radius: float
) -> list[tuple[int, float]]:
    """Roadmap nodes reachable from p by a free straight segment within radius."""
    links: list[tuple[int, float]] = []
    if len(roadmap.nodes) == 0:
        return links
    deltas = roadmap.nodes - np.asarray(p)
    dists = np.hypot(deltas[:, 0], deltas[:, 1])
    for i in np.nonzero(dists <= radius)[0]:
        node = (float(roadmap.nodes[i, 0]), float(roadmap.nodes[i, 1]))
        if segment_is_free(store, p, node, store.agent_radius):
            links.append((int(i), float(dists[i])))
    return links


def _dijkstra(
    adjacency: dict[int, list[tuple[int, float]]], start: int, goal: int
) -> list[int] | None:
    best: dict[int, float] = {start: 0.0}
    prev: dict[int, int] = {}
    queue: list[tuple[float, int]] = [(0.0, start)]
    while queue:
        d, u = heapq.heappop(queue)
        if u == goal:
            path = [u]
            while u != start:
                u = prev[u]
                path.append(u)
            return path[::-1]
        if d > best.get(u, math.inf):
            continue
        for v, w in adjacency.get(u, ()):
            nd = d + w
            if nd < best.get(v, math.inf):
                best[v] = nd
                prev[v] = u
                heapq.heappush(queue, (nd, v))
    return None


def shortcut_path(store: StoreMap, path: list[Point]) -> list[Point]:
    """Greedy waypoint reduction: skip ahead whenever the direct segment is free."""
    if len(path) <= 2:
        return path
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not segment_is_free(store, path[i], path[j], store.agent_radius):
            j -= 1
        out.append(path[j])
        i = j
    return out


def plan_global(
    store: StoreMap,
    roadmap: Roadmap,
    start: Point,
    goal: Point,
    prm_radius: float,
) -> list[Point]:
    """Shortest waypoint sequence from start to goal through the roadmap.

    Start and goal are linked temporarily to nearby nodes; the shared roadmap
    is never mutated, so concurrent queries are safe. Raises NoPathError when
    the two points sit in different components.
    """
    if start == goal:
        return [start]
    if segment_is_free(store, start, goal, store.agent_radius):
        return [start, goal]

    start_links = _connect_point(store, roadmap, start, prm_radius)
    goal_links = _connect_point(store, roadmap, goal, prm_radius)
    if not start_links or not goal_links:
        raise NoPathError("start or goal could not be linked to the roadmap")

    n = len(roadmap.nodes)
    s_idx, g_idx = n, n + 1
    overlay: dict[int, list[tuple[int, float]]] = {s_idx: [], g_idx: []}
    for i, w in start_links:
        overlay[s_idx].append((i, w))
        overlay.setdefault(i, list(roadmap.adjacency[i])).append((s_idx, w))
    for i, w in goal_links:
        overlay[g_idx].append((i, w))
        overlay.setdefault(i, list(roadmap.adjacency[i])).append((g_idx, w))

    merged = {**roadmap.adjacency, **overlay}
    node_path = _dijkstra(merged, s_idx, g_idx)
    if node_path is None:
        raise NoPathError("no roadmap path between start and goal")

    points: list[Point] = []
    for idx in node_path:
        if idx == s_idx:
            points.append(start)
        elif idx == g_idx:
            points.append(goal)
        else:
            points.append((float(roadmap.nodes[idx, 0]), float(roadmap.nodes[idx, 1])))
    return shortcut_path(store, points)


def path_length(points: list[Point]) -> float:
    return sum(dist(a, b) for a, b in zip(points, points[1:]))
