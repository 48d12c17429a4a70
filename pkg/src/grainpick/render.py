"""Deterministic top-down rasterizer producing binary PPM (P6) frames."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .shapes import DISC
from .world import WorldState

BG = (244, 241, 234)
WALL = (120, 114, 104)
PARTICLE = (189, 183, 170)
OBJECT = (196, 94, 66)
FINGER_LEFT = (70, 120, 190)
FINGER_RIGHT = (170, 70, 150)
CONTACT = (20, 20, 20)


def _fill_circle(img, scale, cx, cy, r, color):
    h, w, _ = img.shape
    x0 = max(0, int((cx - r) * scale))
    x1 = min(w - 1, int((cx + r) * scale) + 1)
    y0 = max(0, int((cy - r) * scale))
    y1 = min(h - 1, int((cy + r) * scale) + 1)
    if x1 < x0 or y1 < y0:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    px = (xs + 0.5) / scale
    py = (ys + 0.5) / scale
    mask = (px - cx) ** 2 + (py - cy) ** 2 <= r * r
    img[y0:y1 + 1, x0:x1 + 1][mask] = color


def _fill_polygon(img, scale, verts, color):
    h, w, _ = img.shape
    x0 = max(0, int(verts[:, 0].min() * scale))
    x1 = min(w - 1, int(verts[:, 0].max() * scale) + 1)
    y0 = max(0, int(verts[:, 1].min() * scale))
    y1 = min(h - 1, int(verts[:, 1].max() * scale) + 1)
    if x1 < x0 or y1 < y0:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    px = (xs + 0.5) / scale
    py = (ys + 0.5) / scale
    inside = np.zeros(px.shape, dtype=bool)
    n = verts.shape[0]
    j = n - 1
    for i in range(n):
        xi, yi = verts[i]
        xj, yj = verts[j]
        cond = (yi > py) != (yj > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(cond, (py - yi) / np.where(yj == yi, 1.0, yj - yi), 0.0)
        crosses = cond & (px < xi + t * (xj - xi))
        inside ^= crosses
        j = i
    img[y0:y1 + 1, x0:x1 + 1][inside] = color


def render_frame(state: WorldState, contacts=None, px: int = 360) -> np.ndarray:
    """Rasterize one world state to an (px, px, 3) uint8 image."""
    w, h = state.config.workspace
    scale = px / max(w, h)
    img = np.empty((px, px, 3), dtype=np.uint8)
    img[:] = BG
    border = max(1, int(0.004 * scale))
    img[:border, :] = WALL
    img[-border:, :] = WALL
    img[:, :border] = WALL
    img[:, -border:] = WALL

    for i in range(state.particles.shape[0]):
        _fill_circle(img, scale, state.particles[i, 0], state.particles[i, 1],
                     state.config.particle_radius, PARTICLE)

    if state.obj.shape.kind == DISC:
        _fill_circle(img, scale, state.obj.pose[0], state.obj.pose[1],
                     state.obj.shape.radius, OBJECT)
    else:
        _fill_polygon(img, scale, state.obj.verts_world, OBJECT)

    fingers = state.gripper.fingers()
    _fill_circle(img, scale, fingers[0, 0], fingers[0, 1],
                 state.config.finger_radius, FINGER_LEFT)
    _fill_circle(img, scale, fingers[1, 0], fingers[1, 1],
                 state.config.finger_radius, FINGER_RIGHT)

    for e in contacts or ():
        _fill_circle(img, scale, e.point_world[0], e.point_world[1],
                     0.0025, CONTACT)
    # image rows top-down: flip so +y points up
    return img[::-1]


def save_ppm(img: np.ndarray, path) -> None:
    h, w, _ = img.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())
