"""Immutable 2D store world model: shelves, item catalog, collision and nearest-item queries.

Maps load from JSON documents (see docs/map_schema.md). A loaded map is frozen
and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - accelerator only
    njit = None

from .geometry import Point, Rect, dist

DEFAULT_AGENT_RADIUS = 0.25
DEFAULT_REACH_DISTANCE = 0.6


if njit is not None:

    @njit(cache=True)
    def _clearance_kernel(points, rects, width, height, out):
        for i in range(points.shape[0]):
            x = points[i, 0]
            y = points[i, 1]
            c = min(min(x, y), min(width - x, height - y))
            for k in range(rects.shape[0]):
                dx = max(max(rects[k, 0] - x, x - rects[k, 2]), 0.0)
                dy = max(max(rects[k, 1] - y, y - rects[k, 3]), 0.0)
                d = (dx * dx + dy * dy) ** 0.5
                if d < c:
                    c = d
            out[i] = c

else:  # pragma: no cover - accelerator only
    _clearance_kernel = None


class MapError(Exception):
    """Base class for store map loading and query failures."""


class MapSchemaError(MapError):
    """The map document is structurally invalid (missing field, bad type, bad value)."""


class MapGeometryError(MapError):
    """The map geometry violates an invariant (overlaps, blocked entrance, ...)."""


class MapRankError(MapError):
    """A category used by the catalog has no base rank."""


@dataclass(frozen=True)
class Shelf:
    rect: Rect
    category: str


@dataclass(frozen=True)
class Item:
    id: str
    name: str
    category: str
    position: Point
    attributes: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class StoreMap:
    map_id: str
    width: float
    height: float
    entrance: Point
    cashier: Rect
    shelves: tuple[Shelf, ...]
    items: tuple[Item, ...]  # sorted by item id
    category_base_ranks: Mapping[str, float]
    agent_radius: float = DEFAULT_AGENT_RADIUS
    reach_distance: float = DEFAULT_REACH_DISTANCE

    @cached_property
    def categories(self) -> tuple[str, ...]:
        """Catalog categories ordered by base rank, then name."""
        cats = {it.category for it in self.items}
        return tuple(sorted(cats, key=lambda c: (self.category_base_ranks[c], c)))

    @cached_property
    def _item_positions(self) -> np.ndarray:
        if not self.items:
            return np.zeros((0, 2))
        return np.array([it.position for it in self.items], dtype=float)

    @cached_property
    def _shelf_rects(self) -> np.ndarray:
        if not self.shelves:
            return np.zeros((0, 4))
        return np.array([s.rect.as_tuple() for s in self.shelves], dtype=float)

    @cached_property
    def items_by_id(self) -> Mapping[str, Item]:
        return {it.id: it for it in self.items}

    @cached_property
    def items_by_name(self) -> Mapping[str, Item]:
        """Lookup by lowercased display name."""
        return {it.name.lower(): it for it in self.items}

    def in_bounds(self, p: Point, radius: float = 0.0) -> bool:
        return (
            p[0] - radius >= 0.0
            and p[1] - radius >= 0.0
            and p[0] + radius <= self.width
            and p[1] + radius <= self.height
        )

    def clearance(self, p: Point) -> float:
        """Distance from p to the nearest shelf surface or map boundary."""
        return float(self.batch_clearance(np.asarray(p, dtype=float)[None, :])[0])

    def batch_clearance(self, points: np.ndarray) -> np.ndarray:
        """Vectorized clearance for an (..., 2) array; negative outside bounds."""
        pts = np.ascontiguousarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        if _clearance_kernel is not None and flat.shape[0] > 16:
            out = np.empty(flat.shape[0])
            _clearance_kernel(flat, self._shelf_rects, self.width, self.height, out)
            return out.reshape(pts.shape[:-1])
        px = flat[:, 0]
        py = flat[:, 1]
        clear = np.minimum(np.minimum(px, py), np.minimum(self.width - px, self.height - py))
        rects = self._shelf_rects
        if rects.size:
            dx = np.maximum(
                np.maximum(rects[:, 0] - px[:, None], px[:, None] - rects[:, 2]), 0.0
            )
            dy = np.maximum(
                np.maximum(rects[:, 1] - py[:, None], py[:, None] - rects[:, 3]), 0.0
            )
            clear = np.minimum(clear, np.hypot(dx, dy).min(axis=-1))
        return clear.reshape(pts.shape[:-1])

    def is_free(self, p: Point, radius: float) -> bool:
        """True iff a disc of `radius` at p avoids every shelf and stays in bounds."""
        if radius < 0:
            raise ValueError("radius must be non-negative")
        if not self.in_bounds(p, radius):
            return False
        return not any(s.rect.intersects_disc(p, radius) for s in self.shelves)

    def nearest_item(self, p: Point) -> Item:
        """Catalog item closest to p; ties resolved by lowest item id."""
        if not self.items:
            raise MapError("nearest_item on an empty catalog")
        d = self._item_positions - np.asarray(p, dtype=float)
        # items are stored sorted by id, so argmin's first-match rule is the tie rule
        idx = int(np.argmin(np.hypot(d[:, 0], d[:, 1])))
        return self.items[idx]

    def nearest_item_ids(self, positions: np.ndarray) -> list[str]:
        """Vectorized nearest-item query for an (N, 2) array of positions."""
        if not self.items:
            raise MapError("nearest_item on an empty catalog")
        pts = np.asarray(positions, dtype=float)
        diff = pts[:, None, :] - self._item_positions[None, :, :]
        idx = np.argmin(np.hypot(diff[..., 0], diff[..., 1]), axis=1)
        return [self.items[i].id for i in idx]

    def serialize(self) -> dict[str, Any]:
        """Document form of the map; load_map(serialize(m)) == m."""
        return {
            "map_id": self.map_id,
            "width": self.width,
            "height": self.height,
            "entrance": list(self.entrance),
            "cashier": {"rect": list(self.cashier.as_tuple())},
            "agent_radius": self.agent_radius,
            "reach_distance": self.reach_distance,
            "shelves": [
                {"rect": list(s.rect.as_tuple()), "category": s.category}
                for s in self.shelves
            ],
            "items": [
                {
                    "id": it.id,
                    "name": it.name,
                    "category": it.category,
                    "position": list(it.position),
                    "attributes": dict(it.attributes),
                }
                for it in self.items
            ],
            "category_base_ranks": dict(self.category_base_ranks),
        }


def _require(doc: Mapping[str, Any], key: str, where: str = "map") -> Any:
    if key not in doc:
        raise MapSchemaError(f"{where}: missing field '{key}'")
    return doc[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MapSchemaError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _point(value: Any, where: str) -> Point:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise MapSchemaError(f"{where}: expected [x, y]")
    return (_number(value[0], where), _number(value[1], where))


def _rect(value: Any, where: str) -> Rect:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise MapSchemaError(f"{where}: expected [x0, y0, x1, y1]")
    try:
        return Rect.from_seq([_number(v, where) for v in value])
    except ValueError as exc:
        raise MapSchemaError(f"{where}: {exc}") from None


def load_map(doc: Mapping[str, Any]) -> StoreMap:
    """Build and validate a StoreMap from a document dict.

    Raises MapSchemaError, MapGeometryError or MapRankError on any invariant
    violation; loading is deterministic.
    """
    width = _number(_require(doc, "width"), "width")
    height = _number(_require(doc, "height"), "height")
    if width <= 0 or height <= 0:
        raise MapSchemaError(f"store dimensions must be positive, got {width} x {height}")

    map_id = str(doc.get("map_id", "unnamed"))
    entrance = _point(_require(doc, "entrance"), "entrance")
    cashier_doc = _require(doc, "cashier")
    if not isinstance(cashier_doc, Mapping):
        raise MapSchemaError("cashier: expected {rect: [...]}")
    cashier = _rect(_require(cashier_doc, "rect", "cashier"), "cashier.rect")
    agent_radius = _number(doc.get("agent_radius", DEFAULT_AGENT_RADIUS), "agent_radius")
    reach = _number(doc.get("reach_distance", DEFAULT_REACH_DISTANCE), "reach_distance")
    if agent_radius < 0 or reach <= 0:
        raise MapSchemaError("agent_radius must be >= 0 and reach_distance > 0")

    shelves: list[Shelf] = []
    for i, sd in enumerate(_require(doc, "shelves")):
        where = f"shelves[{i}]"
        shelves.append(
            Shelf(
                rect=_rect(_require(sd, "rect", where), where),
                category=str(_require(sd, "category", where)),
            )
        )

    items: list[Item] = []
    seen_ids: set[str] = set()
    for i, idoc in enumerate(_require(doc, "items")):
        where = f"items[{i}]"
        item = Item(
            id=str(_require(idoc, "id", where)),
            name=str(_require(idoc, "name", where)),
            category=str(_require(idoc, "category", where)),
            position=_point(_require(idoc, "position", where), where),
            attributes={str(k): str(v) for k, v in idoc.get("attributes", {}).items()},
        )
        if not item.category:
            raise MapSchemaError(f"{where}: empty category")
        if item.id in seen_ids:
            raise MapSchemaError(f"{where}: duplicate item id '{item.id}'")
        seen_ids.add(item.id)
        items.append(item)
    items.sort(key=lambda it: it.id)

    ranks_doc = _require(doc, "category_base_ranks")
    if not isinstance(ranks_doc, Mapping):
        raise MapSchemaError("category_base_ranks: expected a mapping")
    ranks = {str(k): _number(v, f"category_base_ranks[{k}]") for k, v in ranks_doc.items()}

    store = StoreMap(
        map_id=map_id,
        width=width,
        height=height,
        entrance=entrance,
        cashier=cashier,
        shelves=tuple(shelves),
        items=tuple(items),
        category_base_ranks=ranks,
        agent_radius=agent_radius,
        reach_distance=reach,
    )
    _validate_geometry(store)
    return store


def load_map_file(path: str | Path) -> StoreMap:
    with open(path, "r", encoding="utf-8") as fh:
        return load_map(json.load(fh))


def _validate_geometry(store: StoreMap) -> None:
    for i, a in enumerate(store.shelves):
        for b in store.shelves[i + 1 :]:
            if a.rect.overlaps(b.rect):
                raise MapGeometryError(
                    f"shelves overlap: {a.rect.as_tuple()} and {b.rect.as_tuple()}"
                )
    for s in store.shelves:
        r = s.rect
        if r.x0 < 0 or r.y0 < 0 or r.x1 > store.width or r.y1 > store.height:
            raise MapGeometryError(f"shelf outside store bounds: {r.as_tuple()}")

    if not store.is_free(store.entrance, store.agent_radius):
        raise MapGeometryError(f"entrance {store.entrance} is not in free space")

    if not _region_touches_free_space(store, store.cashier):
        raise MapGeometryError("cashier region does not intersect free space")

    for it in store.items:
        if not store.in_bounds(it.position):
            raise MapGeometryError(f"item '{it.id}' outside store bounds")
        adjacent = [s for s in store.shelves if s.rect.distance_to(it.position) <= store.reach_distance]
        if len(adjacent) != 1:
            raise MapGeometryError(
                f"item '{it.id}' must be adjacent to exactly one shelf, found {len(adjacent)}"
            )

    missing = {it.category for it in store.items} - set(store.category_base_ranks)
    if missing:
        raise MapRankError(f"categories without a base rank: {sorted(missing)}")


def _region_touches_free_space(store: StoreMap, region: Rect) -> bool:
    nx = max(2, math.ceil(region.width / store.agent_radius))
    ny = max(2, math.ceil(region.height / store.agent_radius))
    for ix in range(nx + 1):
        for iy in range(ny + 1):
            p = (
                region.x0 + region.width * ix / nx,
                region.y0 + region.height * iy / ny,
            )
            if store.is_free(p, store.agent_radius):
                return True
    return False


def free_point_in_region(store: StoreMap, region: Rect) -> Point:
    """A free-space point inside the region, preferring its center."""
    if store.is_free(region.center, store.agent_radius):
        return region.center
    nx = max(2, math.ceil(region.width / store.agent_radius))
    ny = max(2, math.ceil(region.height / store.agent_radius))
    best: Point | None = None
    best_d = math.inf
    for ix in range(nx + 1):
        for iy in range(ny + 1):
            p = (
                region.x0 + region.width * ix / nx,
                region.y0 + region.height * iy / ny,
            )
            if store.is_free(p, store.agent_radius):
                d = dist(p, region.center)
                if d < best_d:
                    best, best_d = p, d
    if best is None:
        raise MapGeometryError("region has no free interior point")
    return best
