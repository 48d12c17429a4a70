"""Actor-critic MLPs with arctan activations, factored categorical policy
over the 54-way action grid, GAE, and clipped-surrogate PPO updates.

Gradients are computed by hand in float64; every path is covered by a
finite-difference oracle in the tests. No autodiff framework is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import HEAD_SIZES
from .sensing import OBS_DIM, SLOTS_PER_STEP, WINDOW_STEPS

HIDDEN = 256
N_LAYERS = 5
ACTOR_OUT = sum(HEAD_SIZES)  # 11 logits split (3, 3, 3, 2)
HEAD_OFFSETS = np.concatenate([[0], np.cumsum(HEAD_SIZES)])

# Fixed affine scaling so MLP inputs are O(1): meters x10, newtons x0.25,
# actions mapped to unit grid steps. Applied before the first layer only.
_step_scale = np.concatenate([
    np.full(3, 10.0), np.full(3, 0.25),   # left location / force
    np.full(3, 10.0), np.full(3, 0.25),   # right location / force
    [100.0, 100.0, 1.0 / math.radians(15.0), 1.0],
])
OBS_SCALE = np.tile(_step_scale, WINDOW_STEPS)
assert OBS_SCALE.shape == (OBS_DIM,) and _step_scale.shape == (SLOTS_PER_STEP,)


def scale_observation(obs: np.ndarray) -> np.ndarray:
    return obs * OBS_SCALE


def layer_sizes(output: int) -> list[tuple[int, int]]:
    dims = [OBS_DIM] + [HIDDEN] * (N_LAYERS - 1) + [output]
    return [(dims[i + 1], dims[i]) for i in range(N_LAYERS)]


@dataclass
class MlpParams:
    """Disjoint actor and critic stacks; layers are (W, b) with W (out, in)."""
    actor: list[tuple[np.ndarray, np.ndarray]]
    critic: list[tuple[np.ndarray, np.ndarray]]

    def tensors(self) -> list[np.ndarray]:
        out = []
        for W, b in self.actor + self.critic:
            out.extend((W, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([(W.copy(), b.copy()) for W, b in self.actor],
                         [(W.copy(), b.copy()) for W, b in self.critic])

    def validate(self) -> None:
        for stack, out_dim in ((self.actor, ACTOR_OUT), (self.critic, 1)):
            expect = layer_sizes(out_dim)
            got = [W.shape for W, _ in stack]
            if got != expect:
                raise ValueError(f"architecture mismatch: {got} != {expect}")


def init_params(seed: int, scheme: str = "lecun-uniform") -> MlpParams:
    """Scaled-uniform fan-in init: W ~ U(+-sqrt(3/fan_in)), output layers
    additionally scaled by 0.01 so the initial policy is near uniform."""
    if scheme != "lecun-uniform":
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)

    def stack(output):
        layers = []
        for i, (rows, cols) in enumerate(layer_sizes(output)):
            limit = math.sqrt(3.0 / cols)
            if i == N_LAYERS - 1:
                limit *= 0.01
            W = rng.uniform(-limit, limit, size=(rows, cols))
            layers.append((W, np.zeros(rows)))
        return layers

    return MlpParams(stack(ACTOR_OUT), stack(1))


# -- forward / backward ------------------------------------------------------

def _forward(layers, x):
    """x (B, in) -> output (B, out) plus cache; arctan on hidden layers."""
    acts = [x]
    zs = []
    h = x
    for i, (W, b) in enumerate(layers):
        z = h @ W.T + b
        zs.append(z)
        h = np.arctan(z) if i < len(layers) - 1 else z
        acts.append(h)
    return h, (acts, zs)


def _backward(layers, cache, dout):
    acts, zs = cache
    grads = [None] * len(layers)
    dh = dout
    for i in reversed(range(len(layers))):
        W, _ = layers[i]
        dz = dh if i == len(layers) - 1 else dh / (1.0 + zs[i] ** 2)
        grads[i] = (dz.T @ acts[i], dz.sum(axis=0))
        dh = dz @ W
    return grads


def forward_actor(params: MlpParams, obs: np.ndarray) -> list[np.ndarray]:
    """Raw logits per action head for one observation or a batch."""
    single = obs.ndim == 1
    x = obs[None, :] if single else obs
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("non-finite observation")
    out, _ = _forward(params.actor, x)
    heads = [out[:, HEAD_OFFSETS[h]:HEAD_OFFSETS[h + 1]]
             for h in range(len(HEAD_SIZES))]
    if single:
        heads = [g[0] for g in heads]
    return heads


def forward_critic(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    single = obs.ndim == 1
    x = obs[None, :] if single else obs
    out, _ = _forward(params.critic, x)
    v = out[:, 0]
    return float(v[0]) if single else v


def _log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def sample_action(logit_groups, rng: np.random.Generator):
    """Independent categorical draw per head; joint logprob is the sum."""
    idx = np.empty(len(logit_groups), dtype=np.int64)
    logprob = 0.0
    for h, logits in enumerate(logit_groups):
        logp = _log_softmax(logits)
        p = np.exp(logp)
        u = rng.random()
        c = np.cumsum(p)
        k = int(np.searchsorted(c, u * c[-1], side="right"))
        idx[h] = min(k, len(p) - 1)
        logprob += float(logp[idx[h]])
    return idx, logprob


def argmax_action(logit_groups):
    return np.array([int(np.argmax(g)) for g in logit_groups], dtype=np.int64)


def action_logprobs(logit_groups, idx):
    """Joint log-probabilities of given head indices for a batch."""
    total = 0.0
    for h, logits in enumerate(logit_groups):
        logp = _log_softmax(logits)
        total = total + logp[np.arange(logits.shape[0]), idx[:, h]]
    return total


# -- GAE ---------------------------------------------------------------------

def gae(rewards, values, dones, last_value, gamma: float, lam: float):
    """Standard recursive estimator; the bootstrap value is zeroed at done."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    n = rewards.shape[0]
    adv = np.zeros(n)
    carry = 0.0
    for t in range(n - 1, -1, -1):
        next_v = 0.0 if dones[t] else (last_value if t == n - 1 else values[t + 1])
        if dones[t]:
            carry = 0.0
        delta = rewards[t] + gamma * next_v - values[t]
        carry = delta + gamma * lam * carry
        adv[t] = carry
    return adv, adv + values


# -- PPO update ----------------------------------------------------------------

@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    epochs_per_batch: int = 4
    minibatch_size: int = 256
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    rollout_steps: int = 4096
    grad_clip_norm: float = 0.5
    num_envs: int = 16
    # internal return scaling keeps the critic well conditioned against the
    # sparse 800 bonus; policy advantages are normalized so it cancels there
    reward_scale: float = 0.02
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("lambda must be in [0, 1]")
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @staticmethod
    def like(params: MlpParams) -> "AdamState":
        ts = params.tensors()
        return AdamState([np.zeros_like(a) for a in ts],
                         [np.zeros_like(a) for a in ts], 0)


def ppo_loss_and_grads(params: MlpParams, batch: dict, cfg: PpoConfig):
    """Clipped-surrogate loss with value and entropy terms, plus analytic
    gradients for every parameter tensor (same order as params.tensors())."""
    obs = batch["obs"]
    act = batch["actions"]
    logp_old = batch["logp"]
    adv = batch["advantages"]
    ret = batch["returns"]
    B = obs.shape[0]

    a_out, a_cache = _forward(params.actor, obs)
    v_out, c_cache = _forward(params.critic, obs)
    v = v_out[:, 0]

    logp_new = np.zeros(B)
    probs = []
    logps = []
    for h in range(len(HEAD_SIZES)):
        logits = a_out[:, HEAD_OFFSETS[h]:HEAD_OFFSETS[h + 1]]
        lp = _log_softmax(logits)
        logps.append(lp)
        probs.append(np.exp(lp))
        logp_new += lp[np.arange(B), act[:, h]]

    ratio = np.exp(logp_new - logp_old)
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * adv
    policy_loss = -np.mean(np.minimum(surr1, surr2))

    entropies = [-(p * lp).sum(axis=1) for p, lp in zip(probs, logps)]
    entropy = float(np.mean(np.sum(entropies, axis=0)))

    value_err = v - ret
    value_loss = float(np.mean(value_err**2))

    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    report = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float(np.mean((np.abs(ratio - 1.0) > cfg.clip_epsilon))),
        "approx_kl": float(np.mean(logp_old - logp_new)),
    }
    if not math.isfinite(float(loss)):
        return float(loss), [], report

    # grad wrt joint logprob: active only where the unclipped branch attains
    # the min; ties resolve to the unclipped branch
    active = (surr1 <= surr2).astype(np.float64)
    g_logp = -(adv * ratio * active) / B

    d_logits = np.zeros_like(a_out)
    for h in range(len(HEAD_SIZES)):
        lo, hi = HEAD_OFFSETS[h], HEAD_OFFSETS[h + 1]
        p, lp = probs[h], logps[h]
        onehot = np.zeros_like(p)
        onehot[np.arange(B), act[:, h]] = 1.0
        d_logits[:, lo:hi] += g_logp[:, None] * (onehot - p)
        h_h = entropies[h][:, None]
        d_logits[:, lo:hi] += (cfg.entropy_coef / B) * p * (lp + h_h)

    d_v = np.zeros_like(v_out)
    d_v[:, 0] = cfg.value_coef * 2.0 * value_err / B

    a_grads = _backward(params.actor, a_cache, d_logits)
    c_grads = _backward(params.critic, c_cache, d_v)

    flat = []
    for gW, gb in a_grads + c_grads:
        flat.extend((gW, gb))
    return float(loss), flat, report


def clip_global_norm(grads, max_norm: float) -> float:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def ppo_update(params: MlpParams, batch: dict, cfg: PpoConfig,
               opt: AdamState):
    """One clipped-surrogate gradient step (Adam) on a normalized minibatch.

    Returns (params, report); on a non-finite loss the update is aborted and
    the incoming parameters are returned untouched.
    """
    loss, grads, report = ppo_loss_and_grads(params, batch, cfg)
    if not math.isfinite(loss):
        report["aborted"] = True
        return params, report
    report["aborted"] = False
    report["grad_norm"] = clip_global_norm(grads, cfg.grad_clip_norm)

    opt.t += 1
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    c1 = 1.0 - b1**opt.t
    c2 = 1.0 - b2**opt.t
    tensors = params.tensors()
    for i, (th, g) in enumerate(zip(tensors, grads)):
        opt.m[i] = b1 * opt.m[i] + (1 - b1) * g
        opt.v[i] = b2 * opt.v[i] + (1 - b2) * g * g
        th -= cfg.learning_rate * (opt.m[i] / c1) / (np.sqrt(opt.v[i] / c2) + eps)
    return params, report


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    std = float(np.std(adv))
    return (adv - float(np.mean(adv))) / max(std, 1e-8)
