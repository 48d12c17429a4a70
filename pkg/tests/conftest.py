import numpy as np
import pytest

from grainpick import world as W
from grainpick.shapes import ObjectShape, get_shape


def make_state(cfg: W.WorldConfig, obj_spec, obj_pose, grip_pose,
               opening=None, particles=None) -> W.WorldState:
    """Hand-built world state for physics unit tests."""
    shape = obj_spec if isinstance(obj_spec, ObjectShape) else get_shape(obj_spec)
    obj = W.RigidObject(shape, np.asarray(obj_pose, dtype=np.float64),
                        np.zeros_like(shape.verts))
    obj.sync()
    grip = W.GripperState(np.asarray(grip_pose, dtype=np.float64),
                          cfg.finger_span if opening is None else opening)
    parts = np.zeros((0, 2)) if particles is None else \
        np.asarray(particles, dtype=np.float64).reshape(-1, 2)
    return W.WorldState(cfg, parts, obj, grip, seed=0)


def pair_scan(state: W.WorldState):
    """Brute-force O(n^2) maximum penetration over every body pair.

    Independent of the solver's broad phase: particle-particle,
    particle-wall, particle-finger, particle-object, finger-object, and
    object-wall overlaps are all measured directly from the geometry.
    """
    from grainpick import _kernels as K
    cfg = state.config
    p = state.particles
    r = cfg.particle_radius
    worst = 0.0
    n = p.shape[0]
    if n:
        d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
        np.fill_diagonal(d, np.inf)
        worst = max(worst, float(np.max(2 * r - d)))
        w, h = cfg.workspace
        worst = max(worst, float(np.max(r - p[:, 0])), float(np.max(p[:, 0] - (w - r))))
        worst = max(worst, float(np.max(r - p[:, 1])), float(np.max(p[:, 1] - (h - r))))
        for f in state.gripper.fingers():
            df = np.hypot(p[:, 0] - f[0], p[:, 1] - f[1])
            worst = max(worst, float(np.max(r + cfg.finger_radius - df)))
        for i in range(n):
            pen, _, _, _, _ = K.circle_object_contact(
                p[i, 0], p[i, 1], r, state.obj.kind_code(), state.obj.pose,
                state.obj.shape.radius, state.obj.verts_world)
            worst = max(worst, pen)
    for f in state.gripper.fingers():
        pen, _, _, _, _ = K.circle_object_contact(
            f[0], f[1], cfg.finger_radius, state.obj.kind_code(),
            state.obj.pose, state.obj.shape.radius, state.obj.verts_world)
        worst = max(worst, pen)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
