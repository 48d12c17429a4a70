"""Episode lifecycle: straight-line approach until first pushing contact,
discrete push/rotate actions, distance-shaped reward, and terminal grasp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sensing, world
from .world import GRANULAR, WorldConfig, WorldState

DX_CHOICES = (-0.01, 0.0, 0.01)
DY_CHOICES = (-0.01, 0.0, 0.01)
DTH_CHOICES = (-math.radians(15.0), 0.0, math.radians(15.0))
T_CHOICES = (0, 1)
HEAD_SIZES = (3, 3, 3, 2)
N_ACTIONS = 54


@dataclass(frozen=True)
class Action:
    """One move on the 3 x 3 x 3 x 2 action grid, stored as head indices."""
    dx_i: int
    dy_i: int
    dth_i: int
    t_i: int

    @property
    def dx(self) -> float:
        return DX_CHOICES[self.dx_i]

    @property
    def dy(self) -> float:
        return DY_CHOICES[self.dy_i]

    @property
    def dtheta(self) -> float:
        return DTH_CHOICES[self.dth_i]

    @property
    def grasp(self) -> bool:
        return self.t_i == 1

    def vector(self) -> np.ndarray:
        """Physical [dx, dy, dtheta, T] as recorded in the observation."""
        return np.array([self.dx, self.dy, self.dtheta, float(self.t_i)])

    @staticmethod
    def from_indices(idx) -> "Action":
        a = Action(int(idx[0]), int(idx[1]), int(idx[2]), int(idx[3]))
        for i, size in zip((a.dx_i, a.dy_i, a.dth_i, a.t_i), HEAD_SIZES):
            if not 0 <= i < size:
                raise ValueError(f"action index {idx} outside the grid")
        return a


def all_actions() -> list[Action]:
    return [Action(i, j, k, t)
            for i in range(3) for j in range(3) for k in range(3)
            for t in range(2)]


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 20.0
    beta: float = 800.0
    offset: float = 0.1  # meters, softens the inverse-distance term

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 100
    approach_step: float = 0.01

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def compute_reward(d_t: float, d_prev: float, grasp_success,
                   cfg: RewardConfig) -> float:
    """Dense inverse-distance shaping plus the sparse retrieval bonus."""
    dense = cfg.alpha * (1.0 / (d_t + cfg.offset) - 1.0 / (d_prev + cfg.offset))
    if grasp_success:
        return dense + cfg.beta
    return dense


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


class EpisodeFinished(RuntimeError):
    """step() was called after the episode terminated."""


@dataclass
class EnvConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    sensor: sensing.SensorConfig = field(default_factory=sensing.SensorConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    objects: tuple[str, ...] = ("square",)


class RetrievalEnv:
    """Single-episode-at-a-time environment around one WorldState.

    reset() returns the first observation, or None when the gripper crossed
    the workspace without any pushing contact (the episode is skipped and
    excluded from metrics). Spurious contacts count: a false reading starts
    the episode just like it would on the physical rig.
    """

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.state: WorldState | None = None
        self.window = sensing.ObservationWindow()
        self.rng: np.random.Generator | None = None
        self.step_count = 0
        self.done = True
        self.object_name = ""
        self.last_samples = (sensing.FingerSample.absent(),
                             sensing.FingerSample.absent())
        self.skip_count = 0

    # -- helpers -----------------------------------------------------------

    def _spurious_on(self) -> bool:
        return self.cfg.world.mode == GRANULAR

    def distance(self) -> float:
        g = self.state.gripper.pose[:2]
        o = self.state.obj.pose[:2]
        return float(np.hypot(g[0] - o[0], g[1] - o[1]))

    def _sense(self, contacts):
        return sensing.sense_step(contacts, self.cfg.sensor,
                                  self.cfg.world.finger_radius, self.rng,
                                  self._spurious_on())

    # -- api ---------------------------------------------------------------

    def reset(self, seed: int, object_id: str | None = None):
        if object_id is None:
            names = self.cfg.objects
            pick = int(np.random.default_rng(seed ^ 0x9E3779B9).integers(len(names)))
            object_id = names[pick]
        self.object_name = object_id
        self.rng = np.random.default_rng(seed)
        self.state = world.build_world(self.cfg.world, object_id, self.rng, seed)
        self.window = sensing.ObservationWindow()
        self.step_count = 0
        self.done = False

        approach = np.array([self.cfg.episode.approach_step, 0.0, 0.0])
        max_approach = int(self.cfg.world.workspace[0]
                           / self.cfg.episode.approach_step) + 4
        for _ in range(max_approach):
            outcome = world.step_world(self.state, approach)
            left, right = self._sense(outcome.contacts)
            if left.present or right.present:
                prev = np.array([approach[0], 0.0, 0.0, 0.0])
                self.window = sensing.push_step(self.window, left, right, prev)
                self.last_samples = (left, right)
                return sensing.flatten(self.window)
            if outcome.boundary_clamped:
                break
        self.done = True
        self.skip_count += 1
        return None

    def step(self, action: Action) -> StepResult:
        if self.done or self.state is None:
            raise EpisodeFinished("episode is finished; call reset() first")
        d_prev = self.distance()
        info = {"grasp_attempted": False, "grasp_success": False,
                "boundary_clamped": False, "object": self.object_name}

        if action.grasp:
            grasp = world.close_gripper(self.state)
            d_t = self.distance()
            reward = compute_reward(d_t, d_prev, grasp.success, self.cfg.reward)
            left, right = self._sense(grasp.contacts)
            self.window = sensing.push_step(self.window, left, right,
                                            action.vector())
            self.done = True
            info.update(grasp_attempted=True, grasp_success=grasp.success,
                        grasp_reason=grasp.reason)
        else:
            outcome = world.step_world(
                self.state, (action.dx, action.dy, action.dtheta))
            d_t = self.distance()
            reward = compute_reward(d_t, d_prev, False, self.cfg.reward)
            left, right = self._sense(outcome.contacts)
            self.window = sensing.push_step(self.window, left, right,
                                            action.vector())
            self.step_count += 1
            info["boundary_clamped"] = outcome.boundary_clamped
            if self.step_count >= self.cfg.episode.max_steps:
                self.done = True
            self.last_samples = (left, right)

        info["d"] = d_t
        info["d_prev"] = d_prev
        info["steps"] = self.step_count
        return StepResult(sensing.flatten(self.window), reward, self.done, info)
