"""grainpick: retrieving objects buried in granular media with tactile-only
push-grasping.

A 2D quasi-static contact simulator (granular discs, rigid object, two-finger
gripper), a tactile sensing pipeline with force filtering and noise, a PPO
trainer built from scratch in numpy, align-to-grasp heuristic baselines, and
batch orchestration for the tabletop-to-granular training curriculum.
"""

from .agent import MlpParams, PpoConfig, gae, init_params, ppo_update
from .baselines import A2gPolicy, a2g_reset, a2g_step, make_baseline
from .checkpoint import load_params, save_params
from .env import (Action, EnvConfig, EpisodeConfig, RetrievalEnv, RewardConfig,
                  StepResult, compute_reward)
from .evaluate import evaluate, run_episode, sweep_noise
from .metrics import MetricsSeries
from .runconfig import RunConfig
from .sensing import (FingerSample, ObservationWindow, SensorConfig,
                      apply_noise, filter_and_select, flatten, push_step,
                      unflatten)
from .shapes import ObjectShape, get_shape, register_shape, registered_shapes
from .training import TrainResult, train
from .world import (ContactEvent, GraspOutcome, GripperState, RigidObject,
                    WorldConfig, WorldState, build_world, close_gripper,
                    detect_contacts, finger_reading, resolve_penetrations,
                    step_world)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
