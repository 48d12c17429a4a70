"""2D quasi-static contact world: granular discs, one rigid object, a
two-finger kinematic gripper, and pseudo-force sensing at the fingers.

Motion model: bodies are advanced kinematically (gripper) or by Gauss-Seidel
penetration projection (particles, object). The object carries a static
breakaway force mu * m * g; below it the object holds position, so a finger
pressing it sustains a residual penetration whose implied elastic force
(k_c * penetration) is what the tactile channel reports. Free granular discs
yield completely, which keeps their contact forces near zero -- that split is
what separates low-force ubiquitous contact from high-force pushing contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .shapes import DISC, ObjectShape, get_shape

TABLETOP = "tabletop"
GRANULAR = "granular"

LEFT = "left"
RIGHT = "right"
SIDES = (LEFT, RIGHT)

SRC_PARTICLE = "particle"
SRC_OBJECT = "object"
SRC_WALL = "wall"


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    mode: str = GRANULAR
    particle_count: int = 600
    particle_radius: float = 0.007
    workspace: tuple[float, float] = (0.5, 0.5)
    contact_stiffness: float = 1000.0
    friction_mu: float = 0.4
    substeps: int = 8
    resolution_iterations: int = 16
    # gripper geometry (full-open span is the physical 143 mm constant)
    finger_span: float = 0.143
    finger_radius: float = 0.015
    # calibrated masses: object mass fixes the push-breakaway force at
    # mu * m * g = 4.0 N so direct pushes clear the 3 N sensing filter
    object_mass: float = 4.0 / (0.4 * 9.81)
    particle_mass: float = 0.05
    gravity: float = 9.81
    # grasp closure: 2 mm jaw decrements, stall at the drive force limit
    grasp_step: float = 0.002
    grip_stop_force: float = 6.0
    # episode staging: gripper start x, nominal object x ("fixed distance")
    gripper_start_x: float = 0.07
    object_x: float = 0.28
    lateral_offset: float = 0.02
    penetration_tol: float = 1e-4

    def __post_init__(self):
        if self.mode not in (TABLETOP, GRANULAR):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        for name in ("particle_radius", "contact_stiffness", "friction_mu",
                     "finger_span", "finger_radius", "object_mass",
                     "particle_mass", "grasp_step", "grip_stop_force"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.substeps < 1 or self.resolution_iterations < 1:
            raise ConfigurationError("substeps and iterations must be >= 1")
        if self.particle_count < 0:
            raise ConfigurationError("particle_count must be >= 0")

    @property
    def effective_particle_count(self) -> int:
        """Tabletop mode always runs with zero particles."""
        return 0 if self.mode == TABLETOP else self.particle_count

    @property
    def breakaway_force(self) -> float:
        return self.friction_mu * self.object_mass * self.gravity

    @property
    def hold_penetration(self) -> float:
        return self.breakaway_force / self.contact_stiffness


@dataclass
class GripperState:
    pose: np.ndarray  # (3,) x, y, theta
    opening: float

    def axis(self) -> np.ndarray:
        """Unit closing axis (the line through both finger centers)."""
        return np.array([-math.sin(self.pose[2]), math.cos(self.pose[2])])

    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.pose[2]), math.sin(self.pose[2])])

    def fingers(self) -> np.ndarray:
        """(2, 2) world centers, row 0 = left (+axis side), row 1 = right."""
        half = 0.5 * self.opening * self.axis()
        return np.stack([self.pose[:2] + half, self.pose[:2] - half])

    def copy(self) -> "GripperState":
        return GripperState(self.pose.copy(), self.opening)


@dataclass
class RigidObject:
    shape: ObjectShape
    pose: np.ndarray  # (3,) x, y, theta
    verts_world: np.ndarray  # (V, 2), empty for discs

    def sync(self) -> None:
        if self.shape.kind != DISC:
            K.poly_to_world(self.shape.verts, self.pose, self.verts_world)

    def kind_code(self) -> int:
        return K.OBJ_DISC if self.shape.kind == DISC else K.OBJ_POLY

    def copy(self) -> "RigidObject":
        return RigidObject(self.shape, self.pose.copy(), self.verts_world.copy())


@dataclass(frozen=True)
class ContactEvent:
    side: str
    location: np.ndarray      # (2,) contact point in the finger frame
    force: np.ndarray         # (2,) force on the finger, finger frame
    normal_world: np.ndarray  # (2,) unit, from source body toward finger
    point_world: np.ndarray   # (2,) contact point on the finger surface
    penetration: float
    force_magnitude: float
    source: str
    source_index: int = -1


@dataclass
class ResolveReport:
    iterations_used: int
    residual: float
    converged: bool
    finger_correction: tuple[float, float]


@dataclass
class WorldState:
    config: WorldConfig
    particles: np.ndarray  # (N, 2) centers
    obj: RigidObject
    gripper: GripperState
    seed: int
    _scratch: dict = field(default_factory=dict, repr=False)

    def copy(self) -> "WorldState":
        return WorldState(self.config, self.particles.copy(), self.obj.copy(),
                          self.gripper.copy(), self.seed)

    @property
    def box(self) -> np.ndarray:
        w, h = self.config.workspace
        return np.array([0.0, 0.0, w, h])


def _scratch_buffers(state: WorldState) -> dict:
    s = state._scratch
    n = state.particles.shape[0]
    if not s or s.get("n") != n:
        max_pairs = max(16, 24 * n)
        cutoff = 2.0 * state.config.particle_radius + 0.014
        w, h = state.config.workspace
        nx = max(1, int(math.ceil(w / cutoff)))
        ny = max(1, int(math.ceil(h / cutoff)))
        cfg = state.config
        shape = state.obj.shape
        s.clear()
        s.update(
            n=n, cutoff=cutoff, nx=nx, ny=ny,
            head=np.empty(nx * ny, dtype=np.int64),
            nxt=np.empty(max(1, n), dtype=np.int64),
            pairs=np.empty((max_pairs, 2), dtype=np.int64),
            near_f=np.empty(max(1, n), dtype=np.int64),
            near_o=np.empty(max(1, n), dtype=np.int64),
            fingers=np.empty((2, 2)),
            box=state.box,
            inv_m=1.0 / cfg.object_mass,
            inv_i=1.0 / (cfg.object_mass * shape.gyradius_sq),
            bound_r=shape.bound_radius,
            inv_mp=1.0 / cfg.particle_mass,
        )
    return s


def _candidates(state: WorldState, s: dict, fingers, finger_slack: float,
                obj_slack: float):
    """Broad-phase index lists; slacks must cover the motion of the call."""
    parts = state.particles
    n = parts.shape[0]
    if not n:
        return 0, 0, 0
    cfg = state.config
    n_pairs = K.build_particle_pairs(
        parts, s["cutoff"], s["nx"], s["ny"], 0.0, 0.0, s["cutoff"],
        s["head"], s["nxt"], s["pairs"])
    reach_f = cfg.finger_radius + cfg.particle_radius + finger_slack
    d_l = np.hypot(parts[:, 0] - fingers[0, 0], parts[:, 1] - fingers[0, 1])
    d_r = np.hypot(parts[:, 0] - fingers[1, 0], parts[:, 1] - fingers[1, 1])
    near_f = np.nonzero((d_l < reach_f) | (d_r < reach_f))[0]
    reach_o = s["bound_r"] + cfg.particle_radius + obj_slack
    d_o = np.hypot(parts[:, 0] - state.obj.pose[0],
                   parts[:, 1] - state.obj.pose[1])
    near_o = np.nonzero(d_o < reach_o)[0]
    s["near_f"][: near_f.size] = near_f
    s["near_o"][: near_o.size] = near_o
    return n_pairs, near_f.size, near_o.size


def resolve_penetrations(state: WorldState, iterations: int | None = None,
                         drives: np.ndarray | None = None) -> ResolveReport:
    """Project out penetrations; kinematic fingers and walls never move.

    `drives` optionally gives each finger's motion direction for the
    finger-object friction model (used by the grasp closure); without it,
    finger-object escapes follow the contact normal.
    """
    cfg = state.config
    if iterations is None:
        iterations = cfg.resolution_iterations
    if drives is None:
        drives = np.zeros((2, 2))
    s = _scratch_buffers(state)
    fingers = state.gripper.fingers()
    n_pairs, n_near_f, n_near_o = _candidates(state, s, fingers, 0.012, 0.03)
    it_used, residual, c_l, c_r = K.resolve_kernel(
        state.particles, cfg.particle_radius, s["pairs"], n_pairs,
        s["near_f"], n_near_f, s["near_o"], n_near_o,
        fingers, cfg.finger_radius, drives, cfg.friction_mu,
        state.obj.kind_code(), state.obj.pose,
        state.obj.shape.radius, state.obj.shape.verts, state.obj.verts_world,
        s["inv_m"], s["inv_i"], s["bound_r"], cfg.hold_penetration,
        s["inv_mp"], s["box"], iterations, cfg.penetration_tol)
    return ResolveReport(it_used, residual, residual <= cfg.penetration_tol,
                         (c_l, c_r))


def detect_contacts(state: WorldState) -> list[ContactEvent]:
    """Instantaneous contacts on each finger; force = k_c * penetration."""
    cfg = state.config
    fingers = state.gripper.fingers()
    theta = state.gripper.pose[2]
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    events: list[ContactEvent] = []

    def to_finger_frame(v):
        return np.array([cos_t * v[0] + sin_t * v[1],
                         -sin_t * v[0] + cos_t * v[1]])

    for f_idx, side in enumerate(SIDES):
        fc = fingers[f_idx]
        # particles
        if state.particles.shape[0]:
            d = np.hypot(state.particles[:, 0] - fc[0],
                         state.particles[:, 1] - fc[1])
            touch = np.nonzero(d < cfg.particle_radius + cfg.finger_radius)[0]
            for i in touch:
                dist = d[i]
                pen = cfg.particle_radius + cfg.finger_radius - dist
                if dist > 1e-12:
                    n = (fc - state.particles[i]) / dist
                else:
                    n = np.array([1.0, 0.0])
                events.append(_make_event(state, side, fc, n, pen,
                                          SRC_PARTICLE, int(i), to_finger_frame))
        # object
        pen, nx, ny, _, _ = K.circle_object_contact(
            fc[0], fc[1], cfg.finger_radius, state.obj.kind_code(),
            state.obj.pose, state.obj.shape.radius, state.obj.verts_world)
        if pen > 0.0:
            events.append(_make_event(state, side, fc, np.array([nx, ny]),
                                      pen, SRC_OBJECT, -1, to_finger_frame))
        # walls
        box = state.box
        for axis in range(2):
            lo = box[axis] + cfg.finger_radius - fc[axis]
            if lo > 0.0:
                n = np.zeros(2)
                n[axis] = 1.0
                events.append(_make_event(state, side, fc, n, lo,
                                          SRC_WALL, -1, to_finger_frame))
            hi = fc[axis] - (box[2 + axis] - cfg.finger_radius)
            if hi > 0.0:
                n = np.zeros(2)
                n[axis] = -1.0
                events.append(_make_event(state, side, fc, n, hi,
                                          SRC_WALL, -1, to_finger_frame))
    return events


def _make_event(state, side, fc, n, pen, source, source_index, to_finger_frame):
    force_mag = state.config.contact_stiffness * pen
    point_world = fc - n * state.config.finger_radius
    return ContactEvent(
        side=side,
        location=to_finger_frame(point_world - fc),
        force=to_finger_frame(force_mag * n),
        normal_world=n,
        point_world=point_world,
        penetration=pen,
        force_magnitude=force_mag,
        source=source,
        source_index=source_index,
    )


def finger_reading(contacts: list[ContactEvent], side: str):
    """Net force plus the location of the single strongest contact.

    Returns (location, net_force) in the finger frame, or None when the
    finger has no contacts this step.
    """
    mine = [e for e in contacts if e.side == side]
    if not mine:
        return None
    net = np.zeros(2)
    for e in mine:
        net += e.force
    best = max(mine, key=lambda e: e.force_magnitude)
    return best.location.copy(), net


def _clamped_pose(cfg: WorldConfig, pose: np.ndarray, opening: float):
    """Clamp the gripper center so both fingers stay inside the walls."""
    w, h = cfg.workspace
    ax = np.array([-math.sin(pose[2]), math.cos(pose[2])])
    off = np.abs(0.5 * opening * ax) + cfg.finger_radius
    out = pose.copy()
    clamped = False
    for axis, limit in ((0, w), (1, h)):
        lo, hi = off[axis], limit - off[axis]
        if out[axis] < lo:
            out[axis] = lo
            clamped = True
        elif out[axis] > hi:
            out[axis] = hi
            clamped = True
    return out, clamped


@dataclass
class StepOutcome:
    contacts: list[ContactEvent]
    boundary_clamped: bool
    report: ResolveReport


def step_world(state: WorldState, delta) -> StepOutcome:
    """Advance the gripper by (dx, dy, dtheta) over equal substeps.

    Penetrations are resolved after every increment, so a 1 cm push can never
    tunnel through a 14 mm particle. The returned contacts describe the final
    post-resolution state.
    """
    cfg = state.config
    dx, dy, dth = float(delta[0]), float(delta[1]), float(delta[2])
    target = state.gripper.pose + np.array([dx, dy, dth])
    target, clamped = _clamped_pose(cfg, target, state.gripper.opening)
    start = state.gripper.pose.copy()
    move = target - start
    s = _scratch_buffers(state)
    sweep = (math.hypot(move[0], move[1])
             + abs(move[2]) * (0.5 * state.gripper.opening + cfg.finger_radius))
    n_pairs, n_near_f, n_near_o = _candidates(
        state, s, state.gripper.fingers(), sweep + 0.012, 0.035)
    it_used, residual, c_l, c_r = K.step_kernel(
        state.particles, cfg.particle_radius, s["pairs"], n_pairs,
        s["near_f"], n_near_f, s["near_o"], n_near_o,
        start, move, state.gripper.opening, cfg.finger_radius, cfg.substeps,
        cfg.friction_mu,
        state.obj.kind_code(), state.obj.pose,
        state.obj.shape.radius, state.obj.shape.verts, state.obj.verts_world,
        s["inv_m"], s["inv_i"], s["bound_r"], cfg.hold_penetration,
        s["inv_mp"], s["box"], cfg.resolution_iterations, cfg.penetration_tol,
        s["fingers"])
    state.gripper.pose[:] = target
    report = ResolveReport(it_used, residual,
                           residual <= cfg.penetration_tol, (c_l, c_r))
    contacts = detect_contacts(state)
    return StepOutcome(contacts, clamped, report)


@dataclass
class GraspOutcome:
    success: bool
    reason: str
    final_state: WorldState
    contacts: list[ContactEvent]


def close_gripper(state: WorldState) -> GraspOutcome:
    """Close the jaw in 2 mm decrements and judge the resulting pinch.

    Success requires, at stall or full closure: a direct object contact on
    both fingers, both contact normals inside the friction cone of the
    closing axis, the object centroid between the two contact points, and no
    granular disc bridging a finger and the object (the stuck-bead failure).
    """
    cfg = state.config
    contacts = detect_contacts(state)
    axis = state.gripper.axis()
    drives = np.stack([-axis, axis])  # fingers move toward each other
    while state.gripper.opening > 0.0:
        state.gripper.opening = max(0.0, state.gripper.opening - cfg.grasp_step)
        resolve_penetrations(state, drives=drives)
        contacts = detect_contacts(state)
        stalled = False
        for side in SIDES:
            forces = [e.force_magnitude for e in contacts if e.side == side]
            if forces and max(forces) >= cfg.grip_stop_force:
                stalled = True
        if stalled:
            break

    by_side = {}
    for side in SIDES:
        obj_events = [e for e in contacts
                      if e.side == side and e.source == SRC_OBJECT]
        by_side[side] = max(obj_events, key=lambda e: e.penetration) \
            if obj_events else None
    if by_side[LEFT] is None or by_side[RIGHT] is None:
        return GraspOutcome(False, "no-direct-contact", state, contacts)

    if _bridging_particle(state):
        return GraspOutcome(False, "interposed-particle", state, contacts)

    axis = state.gripper.axis()
    cone = math.atan(cfg.friction_mu) + 1e-9
    for side in SIDES:
        n = by_side[side].normal_world
        angle = math.acos(min(1.0, abs(float(n @ axis))))
        if angle > cone:
            return GraspOutcome(False, "outside-friction-cone", state, contacts)

    t_l = float((by_side[LEFT].point_world - state.gripper.pose[:2]) @ axis)
    t_r = float((by_side[RIGHT].point_world - state.gripper.pose[:2]) @ axis)
    t_c = float((state.obj.pose[:2] - state.gripper.pose[:2]) @ axis)
    lo, hi = min(t_l, t_r), max(t_l, t_r)
    if not (lo < t_c < hi):
        return GraspOutcome(False, "centroid-outside-pinch", state, contacts)
    return GraspOutcome(True, "pinch", state, contacts)


def _bridging_particle(state: WorldState) -> bool:
    """A particle simultaneously overlapping a finger and the object."""
    cfg = state.config
    if not state.particles.shape[0]:
        return False
    fingers = state.gripper.fingers()
    for f in range(2):
        d = np.hypot(state.particles[:, 0] - fingers[f, 0],
                     state.particles[:, 1] - fingers[f, 1])
        touch = np.nonzero(d < cfg.particle_radius + cfg.finger_radius - 1e-9)[0]
        for i in touch:
            pen, _, _, _, _ = K.circle_object_contact(
                state.particles[i, 0], state.particles[i, 1],
                cfg.particle_radius, state.obj.kind_code(), state.obj.pose,
                state.obj.shape.radius, state.obj.verts_world)
            if pen > 1e-9:
                return True
    return False


def _make_object(cfg: WorldConfig, shape: ObjectShape, pose) -> RigidObject:
    verts_world = np.zeros_like(shape.verts)
    obj = RigidObject(shape, np.asarray(pose, dtype=np.float64), verts_world)
    obj.sync()
    return obj


def _ring_positions(obj: RigidObject, r_p: float, shells: int = 2):
    """Particle centers packed around the object boundary, shell by shell."""
    out = []
    for shell in range(shells):
        gap = r_p * (1.02 + 2.04 * shell)
        if obj.shape.kind == DISC:
            ring_r = obj.shape.radius + gap
            n = max(6, int(math.floor(math.pi * ring_r / (r_p * 1.02))))
            for k in range(n):
                a = 2.0 * math.pi * k / n
                out.append(obj.pose[:2] + ring_r * np.array([math.cos(a), math.sin(a)]))
        else:
            verts = obj.verts_world
            m = verts.shape[0]
            for i in range(m):
                a, b = verts[i], verts[(i + 1) % m]
                edge = b - a
                length = float(np.hypot(*edge))
                if length < 1e-9:
                    continue
                t_hat = edge / length
                n_hat = np.array([t_hat[1], -t_hat[0]])  # outward for CCW
                steps = max(1, int(length / (2 * r_p * 1.05)))
                for k in range(steps):
                    p = a + (k + 0.5) / steps * edge + n_hat * gap
                    out.append(p)
    return out


def build_world(config: WorldConfig, object_spec, rng: np.random.Generator,
                seed: int = 0) -> WorldState:
    """Stage an episode: gripper at the near edge, object ahead of one finger
    with a +-2 cm lateral draw and a uniform random orientation, and (in
    granular mode) a settled particle bed that fully surrounds the object.
    """
    cfg = config
    shape = object_spec if isinstance(object_spec, ObjectShape) else get_shape(object_spec)
    w, h = cfg.workspace
    if shape.bound_radius * 2 >= min(w, h) - 4 * cfg.particle_radius:
        raise ConfigurationError(f"object {shape.name!r} does not fit the workspace")

    gripper = GripperState(np.array([cfg.gripper_start_x, h / 2, 0.0]),
                           cfg.finger_span)
    side = 0 if rng.random() < 0.5 else 1
    offset = rng.uniform(-cfg.lateral_offset, cfg.lateral_offset)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    finger_y = gripper.fingers()[side, 1]
    obj_y = min(max(finger_y + offset, shape.bound_radius + 2 * cfg.particle_radius),
                h - shape.bound_radius - 2 * cfg.particle_radius)
    obj = _make_object(cfg, shape, [cfg.object_x, obj_y, angle])

    n = cfg.effective_particle_count
    state = WorldState(cfg, np.zeros((0, 2)), obj, gripper, seed)
    if n == 0:
        return state

    r_p = cfg.particle_radius
    fingers = gripper.fingers()
    placed = np.empty((n, 2))
    box = state.box
    finger_clear = r_p + cfg.finger_radius + 1e-3

    rings = _ring_positions(obj, r_p)
    ring_arr = np.array(rings) if rings else np.zeros((0, 2))
    count = K.place_particles(
        placed, 0, ring_arr, n, 2 * r_p * 0.999, r_p, box, obj.kind_code(),
        obj.pose, shape.radius, obj.verts_world, fingers, finger_clear)

    rounds = 0
    while count < n and rounds < 100:
        rounds += 1
        draws = rng.uniform([r_p, r_p], [w - r_p, h - r_p], size=(4 * n, 2))
        count = K.place_particles(
            placed, count, draws, n, 2 * r_p * 1.01, r_p, box, obj.kind_code(),
            obj.pose, shape.radius, obj.verts_world, fingers, finger_clear)
    if count < n:
        raise ConfigurationError(
            f"could not place {n} particles (placed {count}); "
            "workspace too crowded")

    state.particles = placed
    for _ in range(20):
        report = resolve_penetrations(state, iterations=32)
        if report.converged:
            break
    return state
