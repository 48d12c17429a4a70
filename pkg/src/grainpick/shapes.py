"""Registry of 2D target-object shapes.

Every shape is either a disc or a simple polygon given in its body frame,
re-centered so the body origin is the centroid. Polygons may be non-convex
(star, L); collision queries only ever test circles against them, which works
for any simple polygon. Dimensions are desk-scale analogs of the physical
training set and are part of the documented configuration reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DISC = "disc"
POLYGON = "polygon"


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise winding)."""
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(verts: np.ndarray) -> np.ndarray:
    x, y = verts[:, 0], verts[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    a = 0.5 * np.sum(cross)
    cx = np.sum((x + np.roll(x, -1)) * cross) / (6.0 * a)
    cy = np.sum((y + np.roll(y, -1)) * cross) / (6.0 * a)
    return np.array([cx, cy])


def polygon_gyradius_sq(verts: np.ndarray) -> float:
    """Second polar moment of area about the centroid, divided by area.

    Equals I/m for a uniform lamina, independent of density.
    """
    v = verts - polygon_centroid(verts)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    ix = np.sum(cross * (y * y + y * yn + yn * yn)) / 12.0
    iy = np.sum(cross * (x * x + x * xn + xn * xn)) / 12.0
    return float((ix + iy) / a)


@dataclass(frozen=True)
class ObjectShape:
    """Collision geometry of one rigid target object.

    kind: DISC or POLYGON. For discs `radius` is set and `verts` is empty;
    for polygons `verts` holds CCW body-frame vertices centered on the
    centroid. `bound_radius` circumscribes the shape for broad-phase tests.
    """

    name: str
    kind: str
    radius: float = 0.0
    verts: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @cached_property
    def area(self) -> float:
        if self.kind == DISC:
            return math.pi * self.radius**2
        return polygon_area(self.verts)

    @cached_property
    def gyradius_sq(self) -> float:
        if self.kind == DISC:
            return 0.5 * self.radius**2
        return polygon_gyradius_sq(self.verts)

    @cached_property
    def bound_radius(self) -> float:
        if self.kind == DISC:
            return self.radius
        return float(np.max(np.hypot(self.verts[:, 0], self.verts[:, 1])))


def _disc(name: str, radius: float) -> ObjectShape:
    return ObjectShape(name=name, kind=DISC, radius=radius)


def _polygon(name: str, verts) -> ObjectShape:
    v = np.asarray(verts, dtype=np.float64)
    if polygon_area(v) < 0.0:
        v = v[::-1].copy()
    v = v - polygon_centroid(v)
    return ObjectShape(name=name, kind=POLYGON, verts=v)


def _box_verts(w: float, h: float):
    return [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]


def _star_verts(points: int, r_outer: float, inner_ratio: float):
    # inner_ratio for a regular {5/2} pentagram: sin(pi/10)/sin(3*pi/10)
    r_inner = r_outer * inner_ratio
    verts = []
    for k in range(points * 2):
        r = r_outer if k % 2 == 0 else r_inner
        a = math.pi / 2 + k * math.pi / points
        verts.append((r * math.cos(a), r * math.sin(a)))
    return verts


def _l_verts(arm: float, thick: float):
    return [
        (0.0, 0.0),
        (arm, 0.0),
        (arm, thick),
        (thick, thick),
        (thick, arm),
        (0.0, arm),
    ]


_REGISTRY: dict[str, ObjectShape] = {}


def register_shape(shape: ObjectShape) -> None:
    _REGISTRY[shape.name] = shape


def get_shape(name: str) -> ObjectShape:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown object {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


def registered_shapes() -> list[str]:
    return sorted(_REGISTRY)


# Analogs of the physical training set, in meters.
register_shape(_polygon("square", _box_verts(0.04, 0.04)))
register_shape(_polygon("long-bar", _box_verts(0.12, 0.03)))
register_shape(_disc("disc", 0.03))
register_shape(
    _polygon(
        "pentagram",
        _star_verts(5, 0.04, math.sin(math.pi / 10) / math.sin(3 * math.pi / 10)),
    )
)
register_shape(_polygon("l-shape", _l_verts(0.08, 0.03)))
register_shape(_disc("small-disc", 0.026))
register_shape(_polygon("rectangle", _box_verts(0.08, 0.05)))
