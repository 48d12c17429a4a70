"""Textual key=value run configuration.

One flat namespace covers the world, sensing, reward, episode, PPO, and
orchestration settings. Unknown keys are rejected, every key has a documented
default, and a fully resolved snapshot is written next to every output
artifact so runs are reproducible from their own records.
"""

from __future__ import annotations

from pathlib import Path

from .agent import PpoConfig
from .env import EnvConfig, EpisodeConfig, RewardConfig
from .sensing import SensorConfig
from .world import WorldConfig


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


# key -> (type tag, default)
DEFAULTS: dict[str, tuple[str, object]] = {
    "world.mode": ("str", "granular"),
    "world.particle_count": ("int", 600),
    "world.particle_radius": ("float", 0.007),
    "world.workspace_w": ("float", 0.5),
    "world.workspace_h": ("float", 0.5),
    "world.contact_stiffness": ("float", 1000.0),
    "world.friction_mu": ("float", 0.4),
    "world.substeps": ("int", 8),
    "world.resolution_iterations": ("int", 16),
    "world.finger_span": ("float", 0.143),
    "world.finger_radius": ("float", 0.015),
    "world.object_mass": ("float", 4.0 / (0.4 * 9.81)),
    "world.particle_mass": ("float", 0.05),
    "world.grasp_step": ("float", 0.002),
    "world.grip_stop_force": ("float", 6.0),
    "world.gripper_start_x": ("float", 0.07),
    "world.object_x": ("float", 0.28),
    "world.lateral_offset": ("float", 0.02),
    "world.penetration_tol": ("float", 1e-4),
    "sensor.force_threshold": ("float", 3.0),
    "sensor.loc_noise_halfwidth": ("float", 0.01),
    "sensor.force_noise_halfwidth": ("float", 0.2),
    "sensor.spurious_rate": ("float", 0.02),
    "sensor.spurious_force_lo": ("float", 3.0),
    "sensor.spurious_force_hi": ("float", 3.5),
    "reward.alpha": ("float", 20.0),
    "reward.beta": ("float", 800.0),
    "reward.offset": ("float", 0.1),
    "episode.max_steps": ("int", 100),
    "episode.approach_step": ("float", 0.01),
    "ppo.gamma": ("float", 0.99),
    "ppo.gae_lambda": ("float", 0.95),
    "ppo.clip_epsilon": ("float", 0.2),
    "ppo.epochs_per_batch": ("int", 4),
    "ppo.minibatch_size": ("int", 256),
    "ppo.learning_rate": ("float", 3e-4),
    "ppo.value_coef": ("float", 0.5),
    "ppo.entropy_coef": ("float", 0.01),
    "ppo.rollout_steps": ("int", 4096),
    "ppo.grad_clip_norm": ("float", 0.5),
    "ppo.num_envs": ("int", 16),
    "ppo.reward_scale": ("float", 0.02),
    "ppo.adam_beta1": ("float", 0.9),
    "ppo.adam_beta2": ("float", 0.999),
    "ppo.adam_eps": ("float", 1e-8),
    "objects": ("str", "square"),
    "seed": ("int", 0),
    "train.total_steps": ("int", 500_000),
    "train.checkpoint_every": ("int", 100_000),
    "eval.trials": ("int", 200),
}


def _coerce(key: str, raw: str):
    kind, _ = DEFAULTS[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _parse_bool(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


class RunConfig:
    def __init__(self, values: dict | None = None):
        self.values = {k: d for k, (_, d) in DEFAULTS.items()}
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key: str, value) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        if isinstance(value, str):
            value = _coerce(key, value)
        kind, _ = DEFAULTS[key]
        if kind == "int":
            value = int(value)
        elif kind == "float":
            value = float(value)
        self.values[key] = value

    def __getitem__(self, key: str):
        return self.values[key]

    @staticmethod
    def from_file(path) -> "RunConfig":
        cfg = RunConfig()
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, raw = stripped.partition("=")
            cfg.set(key.strip(), raw.strip())
        return cfg

    def copy(self) -> "RunConfig":
        return RunConfig(dict(self.values))

    def objects(self) -> tuple[str, ...]:
        return tuple(s.strip() for s in str(self["objects"]).split(",") if s.strip())

    def world_config(self) -> WorldConfig:
        v = self.values
        return WorldConfig(
            mode=v["world.mode"],
            particle_count=v["world.particle_count"],
            particle_radius=v["world.particle_radius"],
            workspace=(v["world.workspace_w"], v["world.workspace_h"]),
            contact_stiffness=v["world.contact_stiffness"],
            friction_mu=v["world.friction_mu"],
            substeps=v["world.substeps"],
            resolution_iterations=v["world.resolution_iterations"],
            finger_span=v["world.finger_span"],
            finger_radius=v["world.finger_radius"],
            object_mass=v["world.object_mass"],
            particle_mass=v["world.particle_mass"],
            grasp_step=v["world.grasp_step"],
            grip_stop_force=v["world.grip_stop_force"],
            gripper_start_x=v["world.gripper_start_x"],
            object_x=v["world.object_x"],
            lateral_offset=v["world.lateral_offset"],
            penetration_tol=v["world.penetration_tol"],
        )

    def sensor_config(self) -> SensorConfig:
        v = self.values
        return SensorConfig(
            force_threshold=v["sensor.force_threshold"],
            loc_noise_halfwidth=v["sensor.loc_noise_halfwidth"],
            force_noise_halfwidth=v["sensor.force_noise_halfwidth"],
            spurious_rate=v["sensor.spurious_rate"],
            spurious_force=(v["sensor.spurious_force_lo"],
                            v["sensor.spurious_force_hi"]),
        )

    def env_config(self) -> EnvConfig:
        v = self.values
        return EnvConfig(
            world=self.world_config(),
            sensor=self.sensor_config(),
            reward=RewardConfig(alpha=v["reward.alpha"], beta=v["reward.beta"],
                                offset=v["reward.offset"]),
            episode=EpisodeConfig(max_steps=v["episode.max_steps"],
                                  approach_step=v["episode.approach_step"]),
            objects=self.objects(),
        )

    def ppo_config(self) -> PpoConfig:
        v = self.values
        return PpoConfig(
            gamma=v["ppo.gamma"], gae_lambda=v["ppo.gae_lambda"],
            clip_epsilon=v["ppo.clip_epsilon"],
            epochs_per_batch=v["ppo.epochs_per_batch"],
            minibatch_size=v["ppo.minibatch_size"],
            learning_rate=v["ppo.learning_rate"],
            value_coef=v["ppo.value_coef"], entropy_coef=v["ppo.entropy_coef"],
            rollout_steps=v["ppo.rollout_steps"],
            grad_clip_norm=v["ppo.grad_clip_norm"], num_envs=v["ppo.num_envs"],
            reward_scale=v["ppo.reward_scale"],
            adam_beta1=v["ppo.adam_beta1"], adam_beta2=v["ppo.adam_beta2"],
            adam_eps=v["ppo.adam_eps"],
        )

    def snapshot_text(self) -> str:
        # plain key=value so a snapshot can be re-read with from_file
        lines = [f"{k}={self.values[k]}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    def write_snapshot(self, path) -> None:
        Path(path).write_text(self.snapshot_text())
