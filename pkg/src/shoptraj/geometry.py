"""Planar geometry primitives shared by the store model and the planners."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

Point = tuple[float, float]


def dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    theta = math.fmod(theta + math.pi, 2.0 * math.pi)
    if theta <= 0.0:
        theta += 2.0 * math.pi
    return theta - math.pi


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle with corners (x0, y0) and (x1, y1), closed."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"rectangle has non-positive area: {self.as_tuple()}")

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "Rect":
        if len(seq) != 4:
            raise ValueError(f"rectangle needs 4 numbers, got {len(seq)}")
        return cls(float(seq[0]), float(seq[1]), float(seq[2]), float(seq[3]))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> Point:
        return ((self.x0 + self.x1) * 0.5, (self.y0 + self.y1) * 0.5)

    def contains(self, p: Point) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    def distance_to(self, p: Point) -> float:
        """Euclidean distance from a point to the rectangle; 0 inside."""
        dx = max(self.x0 - p[0], 0.0, p[0] - self.x1)
        dy = max(self.y0 - p[1], 0.0, p[1] - self.y1)
        return math.hypot(dx, dy)

    def intersects_disc(self, p: Point, radius: float) -> bool:
        return self.distance_to(p) < radius

    def overlaps(self, other: "Rect") -> bool:
        """True if the open interiors intersect (shared edges do not count)."""
        return (
            self.x0 < other.x1
            and other.x0 < self.x1
            and self.y0 < other.y1
            and other.y0 < self.y1
        )


def segment_samples(a: Point, b: Point, spacing: float) -> Iterable[Point]:
    """Points along segment a-b at most `spacing` apart, endpoints included."""
    length = dist(a, b)
    n = max(1, math.ceil(length / spacing))
    for i in range(n + 1):
        t = i / n
        yield (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)
