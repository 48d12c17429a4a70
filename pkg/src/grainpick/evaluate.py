"""Policy evaluation: per-object success tables and force-noise sweeps.

Learned policies act by argmax (deterministic); heuristic baselines run
their state machines. Trials use a fixed seed grid so identical invocations
produce identical tables, and skipped episodes (no first contact) are
reported separately rather than counted as failures.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import agent
from .baselines import make_baseline
from .checkpoint import load_params
from .env import Action, RetrievalEnv
from .episode_log import EpisodeLogWriter
from .runconfig import RunConfig

BASELINE_NAMES = ("a2g", "a2g-push")


class LearnedPolicy:
    def __init__(self, params):
        self.params = params

    def start_episode(self) -> None:
        pass

    def act(self, observation, env) -> Action:
        heads = agent.forward_actor(self.params, agent.scale_observation(observation))
        return Action.from_indices(agent.argmax_action(heads))


def resolve_policy(policy_ref: str):
    if policy_ref in BASELINE_NAMES:
        return make_baseline(policy_ref)
    path = Path(policy_ref)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {policy_ref}")
    return LearnedPolicy(load_params(path))


@dataclass
class ObjectResult:
    object: str
    trials: int
    completed: int
    skipped: int
    successes: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.completed if self.completed else 0.0


def run_episode(env: RetrievalEnv, policy, seed: int, object_id: str,
                log_path=None, run_cfg: RunConfig | None = None):
    """Returns (completed, success). Skipped episodes return (False, False)."""
    obs = env.reset(seed, object_id)
    if obs is None:
        return False, False
    policy.start_episode()
    writer = None
    if log_path is not None:
        writer = EpisodeLogWriter(log_path, run_cfg, seed, object_id)
    success = False
    while True:
        action = policy.act(obs, env)
        result = env.step(action)
        if writer is not None:
            writer.record(env, action, result)
        obs = result.observation
        if result.done:
            success = bool(result.info["grasp_success"])
            break
    if writer is not None:
        writer.close()
    return True, success


def evaluate(policy_ref: str, run_cfg: RunConfig, objects, trials: int,
             seed: int, log_dir=None) -> list[ObjectResult]:
    env = RetrievalEnv(run_cfg.env_config())
    policy = resolve_policy(policy_ref)
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
    results = []
    for obj_idx, obj in enumerate(objects):
        completed = skipped = successes = 0
        for trial in range(trials):
            ep_seed = int(np.random.SeedSequence(
                (seed, 0xE7A1, obj_idx, trial)).generate_state(1, np.uint64)[0])
            log_path = None
            if log_dir is not None:
                log_path = Path(log_dir) / f"{obj}_{trial:04d}.jsonl"
            done, success = run_episode(env, policy, ep_seed, obj,
                                        log_path, run_cfg)
            if not done:
                skipped += 1
            else:
                completed += 1
                successes += int(success)
        results.append(ObjectResult(obj, trials, completed, skipped, successes))
    return results


def results_csv(results: list[ObjectResult]) -> str:
    lines = ["object,trials,completed,skipped,successes,success_rate"]
    for r in results:
        lines.append(f"{r.object},{r.trials},{r.completed},{r.skipped},"
                     f"{r.successes},{r.success_rate!r}")
    if results:
        avg = float(np.mean([r.success_rate for r in results]))
        total_skip = sum(r.skipped for r in results)
        lines.append(f"average,,,{total_skip},,{avg!r}")
    return "\n".join(lines) + "\n"


def average_success(results: list[ObjectResult]) -> float:
    return float(np.mean([r.success_rate for r in results])) if results else 0.0


def sweep_noise(policy_refs, run_cfg: RunConfig, objects, trials: int,
                seed: int, noise_grid) -> str:
    """One evaluation per (policy, force-noise halfwidth) grid cell."""
    for x in noise_grid:
        if x < 0:
            raise ValueError("noise grid values must be >= 0")
    lines = ["policy,force_noise,object,trials,completed,skipped,successes,"
             "success_rate"]
    for ref in policy_refs:
        for noise in noise_grid:
            cfg = run_cfg.copy()
            cfg.set("sensor.force_noise_halfwidth", float(noise))
            results = evaluate(ref, cfg, objects, trials, seed)
            for r in results:
                lines.append(f"{ref},{noise},{r.object},{r.trials},{r.completed},"
                             f"{r.skipped},{r.successes},{r.success_rate!r}")
            lines.append(f"{ref},{noise},average,,,,,{average_success(results)!r}")
    return "\n".join(lines) + "\n"
