"""Heuristic align-to-grasp policies.

A2G estimates the object location from the first accepted pushing contact
(the contact force direction localizes the touched point on the finger
shell), rotates its approach axis onto that estimate, drives forward until
the estimate sits between the fingers, and closes. Everything after the
trigger is open loop: a single noisy force reading corrupts the whole grasp,
which is exactly the weakness these baselines are meant to expose.

The push variant waits for five consecutive contacts on the same finger
before trusting a reading, which filters the spurious contacts granular
media produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .env import Action
from .sensing import FingerSample

APPROACH = "approach"
ALIGN = "align"
ADVANCE = "advance"
GRASP = "grasp"

ALIGN_TOL = math.radians(7.5)
TURN = math.radians(15.0)
# assumed half-depth of the unknown object behind the touched surface
TARGET_DEPTH = 0.02
MAX_ADVANCE = 24


@dataclass(frozen=True)
class A2gState:
    consecutive_required: int
    phase: str = APPROACH
    target_angle: float = 0.0
    consecutive_count: int = 0
    counted_finger: str = "none"
    goal: tuple[float, float] = (0.0, 0.0)  # estimated object center, world
    advance_steps: int = 0


def a2g_reset(consecutive_required: int = 1) -> A2gState:
    return A2gState(consecutive_required=consecutive_required)


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _grid(v: float) -> int:
    """Map a desired axis move to the nearest {-1, 0, +1} grid index + 1."""
    if v > 0.005:
        return 2
    if v < -0.005:
        return 0
    return 1


def _object_estimate(sample: FingerSample, side: str, gripper,
                     finger_radius: float = 0.015):
    """Estimated object center and the heading that points at it.

    The contact force pushes the finger away from the touched body, so the
    body lies opposite the force, one finger radius plus an assumed object
    half-depth beyond the finger center.
    """
    theta = float(gripper.pose[2])
    f_idx = 0 if side == "left" else 1
    finger = gripper.fingers()[f_idx]
    fx, fy = float(sample.force[0]), float(sample.force[1])
    mag = math.hypot(fx, fy)
    if mag < 1e-12:
        return theta, (float(finger[0]), float(finger[1]))
    c, s = math.cos(theta), math.sin(theta)
    fwx = (c * fx - s * fy) / mag  # unit force, world frame
    fwy = (s * fx + c * fy) / mag
    gx = float(finger[0] - fwx * (finger_radius + TARGET_DEPTH))
    gy = float(finger[1] - fwy * (finger_radius + TARGET_DEPTH))
    heading = math.atan2(gy - float(gripper.pose[1]),
                         gx - float(gripper.pose[0]))
    return _wrap(heading), (gx, gy)


def a2g_step(state: A2gState, left: FingerSample, right: FingerSample,
             gripper) -> tuple[Action, A2gState]:
    """One transition of the align-to-grasp machine.

    Approach counts consecutive present samples on a single finger (a gap or
    finger switch resets the count) while moving straight ahead. The
    triggering reading freezes the target; Align rotates the heading onto it,
    Advance drives the gripper until the estimate lies between the fingers,
    and Grasp closes.
    """
    theta = float(gripper.pose[2])
    if state.phase == APPROACH:
        if left.present and right.present:
            # both fingers read contact: keep the finger already counted
            name = "left" if state.counted_finger != "right" else "right"
            chosen = left if name == "left" else right
        elif left.present:
            chosen, name = left, "left"
        elif right.present:
            chosen, name = right, "right"
        else:
            chosen, name = None, "none"

        if chosen is None or state.counted_finger not in ("none", name):
            state = replace(state, consecutive_count=1 if chosen else 0,
                            counted_finger=name)
        else:
            state = replace(state, consecutive_count=state.consecutive_count + 1,
                            counted_finger=name)

        if chosen is not None and state.consecutive_count >= state.consecutive_required:
            target, goal = _object_estimate(chosen, name, gripper)
            state = replace(state, phase=ALIGN, target_angle=target, goal=goal)
        else:
            dx = 0.01 * math.cos(theta)
            dy = 0.01 * math.sin(theta)
            return Action(_grid(dx), _grid(dy), 1, 0), state

    if state.phase == ALIGN:
        diff = _wrap(state.target_angle - theta)
        if abs(diff) > ALIGN_TOL:
            return Action(1, 1, 2 if diff > 0 else 0, 0), state
        state = replace(state, phase=ADVANCE)

    if state.phase == ADVANCE:
        dx = state.goal[0] - float(gripper.pose[0])
        dy = state.goal[1] - float(gripper.pose[1])
        if (max(abs(dx), abs(dy)) > 0.0075
                and state.advance_steps < MAX_ADVANCE):
            state = replace(state, advance_steps=state.advance_steps + 1)
            return Action(_grid(dx), _grid(dy), 1, 0), state
        state = replace(state, phase=GRASP)

    return Action(1, 1, 1, 1), state


class A2gPolicy:
    """Adapter giving the baselines the same act() surface as a policy."""

    def __init__(self, consecutive_required: int = 1):
        self.required = consecutive_required
        self.state = a2g_reset(consecutive_required)

    def start_episode(self) -> None:
        self.state = a2g_reset(self.required)

    def act(self, observation, env) -> Action:
        left, right = env.last_samples
        action, self.state = a2g_step(self.state, left, right,
                                      env.state.gripper)
        return action


def make_baseline(name: str) -> A2gPolicy:
    if name == "a2g":
        return A2gPolicy(1)
    if name == "a2g-push":
        return A2gPolicy(5)
    raise ValueError(f"unknown baseline {name!r}")
