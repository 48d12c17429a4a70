"""Tactile pipeline: force filtering, per-finger selection, sensor noise,
spurious contacts, and the 10-step observation window.

Contacts arrive as planar vectors but are carried as 3-vectors with a zero
out-of-plane component, so the 160-slot observation layout matches the
3D-capable interface and checkpoints stay portable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .world import LEFT, RIGHT, ContactEvent, finger_reading

WINDOW_STEPS = 10
SLOTS_PER_STEP = 16  # 2 fingers * (loc 3 + force 3) + previous action 4
OBS_DIM = WINDOW_STEPS * SLOTS_PER_STEP


@dataclass(frozen=True)
class SensorConfig:
    # 3.0 N is the simulation filter; the physical rig uses 4.0 N
    force_threshold: float = 3.0
    loc_noise_halfwidth: float = 0.01
    force_noise_halfwidth: float = 0.2
    # false pushing contacts per finger per step (granular mode only)
    spurious_rate: float = 0.02
    spurious_force: tuple[float, float] = (3.0, 3.5)

    def __post_init__(self):
        if min(self.force_threshold, self.loc_noise_halfwidth,
               self.force_noise_halfwidth, self.spurious_rate) < 0:
            raise ValueError("sensor parameters must be >= 0")


@dataclass
class FingerSample:
    location: np.ndarray  # (3,) finger frame, [2] fixed at 0
    force: np.ndarray     # (3,) finger frame, [2] fixed at 0
    present: bool

    @staticmethod
    def absent() -> "FingerSample":
        return FingerSample(np.zeros(3), np.zeros(3), False)

    def copy(self) -> "FingerSample":
        return FingerSample(self.location.copy(), self.force.copy(), self.present)


def filter_and_select(contacts: list[ContactEvent], side: str,
                      cfg: SensorConfig) -> FingerSample:
    """Drop sub-threshold contacts, then report the net force of the
    survivors with the location of the strongest one."""
    survivors = [e for e in contacts
                 if e.side == side and e.force_magnitude > cfg.force_threshold]
    if not survivors:
        return FingerSample.absent()
    reading = finger_reading(survivors, side)
    loc2, net2 = reading
    return FingerSample(np.array([loc2[0], loc2[1], 0.0]),
                        np.array([net2[0], net2[1], 0.0]), True)


def apply_noise(sample: FingerSample, cfg: SensorConfig,
                rng: np.random.Generator) -> FingerSample:
    """Element-wise uniform noise on present samples; absent samples stay
    exactly zero (noising them would fabricate phantom contacts)."""
    if not sample.present:
        return sample
    out = sample.copy()
    for i in range(2):
        out.location[i] += rng.uniform(-cfg.loc_noise_halfwidth,
                                       cfg.loc_noise_halfwidth)
    for i in range(2):
        out.force[i] += rng.uniform(-cfg.force_noise_halfwidth,
                                    cfg.force_noise_halfwidth)
    return out


def maybe_spurious(sample: FingerSample, cfg: SensorConfig, finger_radius: float,
                   rng: np.random.Generator) -> FingerSample:
    """With probability `spurious_rate`, replace an absent sample by a
    plausible false pushing contact on the finger shell."""
    if sample.present or cfg.spurious_rate <= 0.0:
        return sample
    if rng.random() >= cfg.spurious_rate:
        return sample
    loc_angle = rng.uniform(0.0, 2.0 * math.pi)
    force_angle = rng.uniform(0.0, 2.0 * math.pi)
    mag = rng.uniform(*cfg.spurious_force)
    loc = finger_radius * np.array([math.cos(loc_angle), math.sin(loc_angle), 0.0])
    force = mag * np.array([math.cos(force_angle), math.sin(force_angle), 0.0])
    return FingerSample(loc, force, True)


def sense_step(contacts: list[ContactEvent], cfg: SensorConfig,
               finger_radius: float, rng: np.random.Generator,
               spurious: bool) -> tuple[FingerSample, FingerSample]:
    """Full per-step pipeline for both fingers, fixed left-then-right order
    so the rng stream is reproducible."""
    out = []
    for side in (LEFT, RIGHT):
        s = filter_and_select(contacts, side, cfg)
        if spurious:
            s = maybe_spurious(s, cfg, finger_radius, rng)
        s = apply_noise(s, cfg, rng)
        out.append(s)
    return out[0], out[1]


@dataclass
class StepRecord:
    left: FingerSample
    right: FingerSample
    prev_action: np.ndarray  # (4,) [dx, dy, dtheta, T], physical units

    @staticmethod
    def zeros() -> "StepRecord":
        return StepRecord(FingerSample.absent(), FingerSample.absent(),
                          np.zeros(4))


@dataclass
class ObservationWindow:
    """Fixed 10-record FIFO; fresh windows hold all zeros."""
    records: list[StepRecord] = field(
        default_factory=lambda: [StepRecord.zeros() for _ in range(WINDOW_STEPS)])

    def copy(self) -> "ObservationWindow":
        return ObservationWindow([
            StepRecord(r.left.copy(), r.right.copy(), r.prev_action.copy())
            for r in self.records])


def push_step(window: ObservationWindow, left: FingerSample,
              right: FingerSample, prev_action) -> ObservationWindow:
    """Evict the oldest record and append the newest (value semantics)."""
    out = window.copy()
    out.records.pop(0)
    out.records.append(StepRecord(left.copy(), right.copy(),
                                  np.asarray(prev_action, dtype=np.float64).copy()))
    return out


def flatten(window: ObservationWindow) -> np.ndarray:
    """Layout, oldest step first:
    [left.loc(3), left.force(3), right.loc(3), right.force(3), prev_action(4)]
    per step. This ordering is part of the checkpoint compatibility contract.
    """
    out = np.empty(OBS_DIM)
    for i, rec in enumerate(window.records):
        base = i * SLOTS_PER_STEP
        out[base:base + 3] = rec.left.location
        out[base + 3:base + 6] = rec.left.force
        out[base + 6:base + 9] = rec.right.location
        out[base + 9:base + 12] = rec.right.force
        out[base + 12:base + 16] = rec.prev_action
    return out


def unflatten(vec: np.ndarray) -> ObservationWindow:
    """Inverse of flatten (test helper; presence is inferred from nonzeros)."""
    assert vec.shape == (OBS_DIM,)
    records = []
    for i in range(WINDOW_STEPS):
        base = i * SLOTS_PER_STEP
        chunk = vec[base:base + SLOTS_PER_STEP]
        left = FingerSample(chunk[0:3].copy(), chunk[3:6].copy(),
                            bool(np.any(chunk[0:6])))
        right = FingerSample(chunk[6:9].copy(), chunk[9:12].copy(),
                             bool(np.any(chunk[6:12])))
        records.append(StepRecord(left, right, chunk[12:16].copy()))
    return ObservationWindow(records)
