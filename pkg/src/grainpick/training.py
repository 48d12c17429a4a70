"""PPO training loop over a batch of independent environments.

Environments run in lockstep so actor/critic forward passes are batched;
each environment owns its own seed stream, and the whole run is a
deterministic function of (config, seed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import agent
from .agent import AdamState, MlpParams, PpoConfig
from .checkpoint import save_params
from .env import Action, RetrievalEnv
from .metrics import MetricsSeries
from .runconfig import RunConfig


def episode_seed(base_seed: int, env_idx: int, episode_idx: int) -> int:
    ss = np.random.SeedSequence((base_seed, env_idx, episode_idx))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class TrainResult:
    checkpoint_path: Path
    best_checkpoint_path: Path
    metrics_path: Path
    env_steps: int
    episodes: int
    skipped: int
    best_running: float
    final_running: float
    elapsed: float


class _EnvSlot:
    def __init__(self, env: RetrievalEnv, base_seed: int, idx: int):
        self.env = env
        self.base_seed = base_seed
        self.idx = idx
        self.episode_idx = 0
        self.obs = None
        self.reward_sum = 0.0
        self.steps = 0

    def begin_episode(self):
        """Reset, skipping no-contact episodes, and return the first obs."""
        skipped = 0
        while True:
            seed = episode_seed(self.base_seed, self.idx, self.episode_idx)
            self.episode_idx += 1
            obs = self.env.reset(seed)
            if obs is not None:
                self.obs = obs
                self.reward_sum = 0.0
                self.steps = 0
                return skipped
            skipped += 1


def _metrics_row(episode, env_steps, obj, steps, success, reward_sum, running):
    return (f"{episode},{env_steps},{obj},{steps},{int(success)},"
            f"{reward_sum!r},{running!r}")


def train(run_cfg: RunConfig, out_dir, seed: int, total_steps: int,
          init_params: MlpParams | None = None,
          tag: str = "policy",
          stop_when_running: float | None = None,
          stop_min_episodes: int = 400) -> TrainResult:
    """Run PPO for `total_steps` environment steps and write artifacts.

    Artifacts in `out_dir`: <tag>_final.ckpt, <tag>_best.ckpt (best trailing
    running success), periodic <tag>_step<N>.ckpt, <tag>_metrics.csv, and
    config.snapshot. Fine-tuning passes `init_params`; the optimizer state
    always starts fresh. `stop_when_running` ends the run early once the
    trailing success rate reaches the threshold (after at least
    `stop_min_episodes` episodes).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_cfg = run_cfg.copy()
    run_cfg.set("seed", seed)
    run_cfg.write_snapshot(out / "config.snapshot")

    ppo: PpoConfig = run_cfg.ppo_config()
    env_cfg = run_cfg.env_config()
    ckpt_every = int(run_cfg["train.checkpoint_every"])

    params = init_params.copy() if init_params is not None else agent.init_params(seed)
    params.validate()
    opt = AdamState.like(params)
    trainer_rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA11CE)))

    slots = [_EnvSlot(RetrievalEnv(env_cfg), seed, i) for i in range(ppo.num_envs)]
    metrics = MetricsSeries(window=1000)
    rows = ["episode,env_steps,object,steps,success,reward_sum,running_success"]
    skipped = 0
    for s in slots:
        skipped += s.begin_episode()

    n_envs = ppo.num_envs
    horizon = max(1, ppo.rollout_steps // n_envs)
    env_steps = 0
    episodes = 0
    best_running = 0.0
    best_params = params.copy()
    next_ckpt = ckpt_every
    t0 = time.monotonic()

    while env_steps < total_steps:
        obs_buf = np.empty((horizon, n_envs, agent.OBS_DIM))
        act_buf = np.empty((horizon, n_envs, 4), dtype=np.int64)
        logp_buf = np.empty((horizon, n_envs))
        val_buf = np.empty((horizon, n_envs))
        rew_buf = np.empty((horizon, n_envs))
        done_buf = np.empty((horizon, n_envs), dtype=bool)

        for t in range(horizon):
            obs = np.stack([s.obs for s in slots])
            scaled = agent.scale_observation(obs)
            heads = agent.forward_actor(params, scaled)
            values = agent.forward_critic(params, scaled)
            obs_buf[t] = scaled
            val_buf[t] = values
            for i, slot in enumerate(slots):
                idx, logp = agent.sample_action([g[i] for g in heads], trainer_rng)
                act_buf[t, i] = idx
                logp_buf[t, i] = logp
                result = slot.env.step(Action.from_indices(idx))
                rew_buf[t, i] = result.reward * ppo.reward_scale
                done_buf[t, i] = result.done
                slot.reward_sum += result.reward
                slot.steps += 1
                if result.done:
                    episodes += 1
                    running = metrics.add(result.info["grasp_success"])
                    rows.append(_metrics_row(
                        episodes, env_steps + t * n_envs + i + 1,
                        result.info["object"], slot.steps,
                        result.info["grasp_success"], slot.reward_sum, running))
                    if running > best_running and len(metrics) >= 50:
                        best_running = running
                        best_params = params.copy()
                    skipped += slot.begin_episode()
                else:
                    slot.obs = result.observation
        env_steps += horizon * n_envs

        last_obs = np.stack([s.obs for s in slots])
        last_values = agent.forward_critic(params, agent.scale_observation(last_obs))

        adv = np.empty((horizon, n_envs))
        ret = np.empty((horizon, n_envs))
        for i in range(n_envs):
            adv[:, i], ret[:, i] = agent.gae(
                rew_buf[:, i], val_buf[:, i], done_buf[:, i],
                float(last_values[i]), ppo.gamma, ppo.gae_lambda)

        batch_obs = obs_buf.reshape(-1, agent.OBS_DIM)
        batch_act = act_buf.reshape(-1, 4)
        batch_logp = logp_buf.reshape(-1)
        batch_adv = agent.normalize_advantages(adv.reshape(-1))
        batch_ret = ret.reshape(-1)
        n = batch_obs.shape[0]
        mb = min(ppo.minibatch_size, n)
        for _ in range(ppo.epochs_per_batch):
            order = trainer_rng.permutation(n)
            for start in range(0, n - mb + 1, mb):
                sel = order[start:start + mb]
                params, report = agent.ppo_update(params, {
                    "obs": batch_obs[sel], "actions": batch_act[sel],
                    "logp": batch_logp[sel], "advantages": batch_adv[sel],
                    "returns": batch_ret[sel]}, ppo, opt)
                if report.get("aborted"):
                    rows.append(f"# aborted non-finite update at {env_steps}")
                    break

        if env_steps >= next_ckpt and env_steps < total_steps:
            save_params(params, out / f"{tag}_step{env_steps}.ckpt")
            next_ckpt += ckpt_every

        if (stop_when_running is not None
                and len(metrics) >= stop_min_episodes
                and metrics.running_rate() >= stop_when_running):
            break

    final_path = out / f"{tag}_final.ckpt"
    best_path = out / f"{tag}_best.ckpt"
    save_params(params, final_path)
    if len(metrics) < 50:
        best_params = params
        best_running = metrics.running_rate()
    save_params(best_params, best_path)
    metrics_path = out / f"{tag}_metrics.csv"
    metrics_path.write_text("\n".join(rows) + "\n")
    return TrainResult(final_path, best_path, metrics_path, env_steps,
                       episodes, skipped, best_running,
                       metrics.running_rate(), time.monotonic() - t0)
