import math

import numpy as np
import pytest

import grainpick.agent as A
from grainpick.checkpoint import CheckpointError, load_params, save_params


def zero_params():
    return A.MlpParams(
        [(np.zeros((r, c)), np.zeros(r)) for r, c in A.layer_sizes(A.ACTOR_OUT)],
        [(np.zeros((r, c)), np.zeros(r)) for r, c in A.layer_sizes(1)])


def random_batch(rng, n=5):
    obs = rng.normal(size=(n, A.OBS_DIM)) * 0.5
    actions = np.stack([rng.integers(0, s, size=n) for s in (3, 3, 3, 2)], axis=1)
    logp = rng.normal(size=n) - 4.0
    adv = rng.normal(size=n)
    adv = (adv - adv.mean()) / max(adv.std(), 1e-8)
    ret = rng.normal(size=n)
    return {"obs": obs, "actions": actions, "logp": logp,
            "advantages": adv, "returns": ret}


# -- forward -------------------------------------------------------------------

def test_zero_weights_uniform_policy():
    heads = A.forward_actor(zero_params(), np.zeros(A.OBS_DIM))
    for h in heads:
        assert np.all(h == 0.0)


def test_arctan_values():
    assert math.atan(0.0) == 0.0
    assert math.atan(1.0) == pytest.approx(0.7853981633974483, abs=1e-15)


def test_forward_uses_arctan_hidden(rng):
    params = A.init_params(3)
    obs = rng.normal(size=A.OBS_DIM)
    out, (acts, zs) = A._forward(params.actor, obs[None, :])
    for i in range(len(params.actor) - 1):
        assert np.allclose(acts[i + 1], np.arctan(zs[i]))
    assert np.array_equal(acts[-1], zs[-1])  # linear output layer


def test_forward_input_sensitivity_finite_difference(rng):
    params = A.init_params(1)
    obs = rng.normal(size=A.OBS_DIM) * 0.3
    h = 1e-6
    for slot in rng.integers(0, A.OBS_DIM, size=4):
        up, down = obs.copy(), obs.copy()
        up[slot] += h
        down[slot] -= h
        num = (np.concatenate(A.forward_actor(params, up))
               - np.concatenate(A.forward_actor(params, down))) / (2 * h)
        x = obs[None, :].copy()
        out, cache = A._forward(params.actor, x)
        for j in range(A.ACTOR_OUT):
            dout = np.zeros((1, A.ACTOR_OUT))
            dout[0, j] = 1.0
            acts, zsv = cache
            dh = dout
            for i in reversed(range(len(params.actor))):
                W, _ = params.actor[i]
                dz = dh if i == len(params.actor) - 1 else dh / (1 + zsv[i] ** 2)
                dh = dz @ W
            rel = abs(dh[0, slot] - num[j]) / max(abs(num[j]), 1e-6)
            assert rel <= 1e-4


def test_non_finite_input_faults():
    params = A.init_params(0)
    bad = np.zeros(A.OBS_DIM)
    bad[3] = np.nan
    with pytest.raises(FloatingPointError):
        A.forward_actor(params, bad)


# -- sampling -------------------------------------------------------------------

def test_uniform_logits_equal_probability(rng):
    heads = [np.zeros(s) for s in (3, 3, 3, 2)]
    _, logp = A.sample_action(heads, rng)
    assert logp == pytest.approx(math.log(1.0 / 54.0), abs=1e-12)


def test_saturated_head_deterministic(rng):
    heads = [np.zeros(3), np.zeros(3), np.zeros(3), np.array([0.0, 50.0])]
    for _ in range(200):
        idx, _ = A.sample_action(heads, rng)
        assert idx[3] == 1


def test_sample_frequencies_match_softmax():
    rng = np.random.default_rng(99)
    heads = [np.array([0.3, -0.5, 1.1]), np.array([0.0, 0.0, 2.0]),
             np.array([-1.0, 0.0, 1.0]), np.array([0.4, -0.4])]
    n = 1_000_000
    counts = [np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(2)]
    for _ in range(n):
        idx, _ = A.sample_action(heads, rng)
        for h in range(4):
            counts[h][idx[h]] += 1
    for h, logits in enumerate(heads):
        p = np.exp(logits - logits.max())
        p /= p.sum()
        for k in range(len(p)):
            se = math.sqrt(p[k] * (1 - p[k]) / n)
            assert abs(counts[h][k] / n - p[k]) <= 3.0 * se + 1e-9


def test_argmax_action():
    heads = [np.array([0.0, 2.0, 1.0]), np.array([3.0, 0.0, 0.0]),
             np.array([0.0, 0.0, 5.0]), np.array([1.0, 0.0])]
    assert A.argmax_action(heads).tolist() == [1, 0, 2, 0]


def test_logit_shift_invariance(rng):
    heads = [rng.normal(size=s) for s in (3, 3, 3, 2)]
    shifted = [h.copy() for h in heads]
    shifted[1] = shifted[1] + 7.3
    r1, r2 = np.random.default_rng(4), np.random.default_rng(4)
    idx1, lp1 = A.sample_action(heads, r1)
    idx2, lp2 = A.sample_action(shifted, r2)
    assert np.array_equal(idx1, idx2)
    assert lp1 == pytest.approx(lp2, abs=1e-9)
    assert np.array_equal(A.argmax_action(heads), A.argmax_action(shifted))


def test_softmax_normalization(rng):
    for _ in range(50):
        logits = rng.normal(size=3) * 10
        p = np.exp(A._log_softmax(logits))
        assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_entropy_bounds(rng):
    for size in (2, 3):
        for _ in range(50):
            logits = rng.normal(size=size) * 5
            lp = A._log_softmax(logits)
            h = float(-(np.exp(lp) * lp).sum())
            assert -1e-12 <= h <= math.log(size) + 1e-12


# -- GAE -----------------------------------------------------------------------

def test_gae_single_terminal_step():
    adv, ret = A.gae([1.0], [0.0], [True], 0.0, 0.99, 0.95)
    assert adv[0] == pytest.approx(1.0)
    assert ret[0] == pytest.approx(1.0)


def test_gae_lambda_zero_is_td0(rng):
    n = 12
    rews = rng.normal(size=n)
    vals = rng.normal(size=n)
    dones = np.zeros(n, dtype=bool)
    dones[5] = True
    last_v = 0.7
    adv, _ = A.gae(rews, vals, dones, last_v, 0.9, 0.0)
    for t in range(n):
        nv = 0.0 if dones[t] else (last_v if t == n - 1 else vals[t + 1])
        assert adv[t] == pytest.approx(rews[t] + 0.9 * nv - vals[t], abs=1e-12)


def test_gae_lambda_one_matches_discounted_return():
    # with lambda = 1, advantage = discounted return minus value (brute force)
    rews = [1.0, 2.0, 3.0]
    vals = [0.5, -0.2, 0.1]
    dones = [False, False, True]
    gamma = 0.9
    adv, ret = A.gae(rews, vals, dones, 0.0, gamma, 1.0)
    returns = [1.0 + gamma * 2.0 + gamma**2 * 3.0, 2.0 + gamma * 3.0, 3.0]
    for t in range(3):
        assert adv[t] == pytest.approx(returns[t] - vals[t], abs=1e-12)
        assert ret[t] == pytest.approx(returns[t], abs=1e-12)


# -- PPO loss ------------------------------------------------------------------

def test_clip_formula_positive_advantage(rng):
    # ratio 1.5 with A = +1 and eps = 0.2 contributes min(1.5, 1.2) = 1.2
    params = A.init_params(5)
    cfg = A.PpoConfig()
    obs = rng.normal(size=(1, A.OBS_DIM)) * 0.2
    heads = A.forward_actor(params, obs)
    act = np.array([[0, 0, 0, 0]])
    logp_new = float(A.action_logprobs(heads, act))
    batch = {"obs": obs, "actions": act,
             "logp": np.array([logp_new - math.log(1.5)]),
             "advantages": np.array([1.0]), "returns": np.array([0.0])}
    loss, _, report = A.ppo_loss_and_grads(params, batch, cfg)
    assert report["policy_loss"] == pytest.approx(-1.2, abs=1e-9)
    assert report["clip_fraction"] == 1.0


def test_ratio_one_grad_equals_vanilla_pg(rng):
    params = A.init_params(6)
    cfg = A.PpoConfig(entropy_coef=0.0, value_coef=0.0)
    batch = random_batch(rng, n=8)
    heads = A.forward_actor(params, batch["obs"])
    batch["logp"] = A.action_logprobs(heads, batch["actions"])  # ratio = 1
    _, grads, _ = A.ppo_loss_and_grads(params, batch, cfg)
    # vanilla policy gradient of -mean(logp * A) via finite differences
    flat_idx = [(0, 3, 17), (2, 10, 100), (4, 5, 200)]
    h = 1e-6
    for li, r, c in flat_idx:
        W, _ = params.actor[li]
        W[r, c] += h
        lp_up = A.action_logprobs(A.forward_actor(params, batch["obs"]),
                                  batch["actions"])
        W[r, c] -= 2 * h
        lp_dn = A.action_logprobs(A.forward_actor(params, batch["obs"]),
                                  batch["actions"])
        W[r, c] += h
        num = -np.mean(batch["advantages"] * (lp_up - lp_dn) / (2 * h))
        assert grads[2 * li][r, c] == pytest.approx(num, rel=1e-4, abs=1e-10)


def _loss_value(params, batch, cfg):
    loss, _, _ = A.ppo_loss_and_grads(params, batch, cfg)
    return loss


def test_gradient_matches_central_differences(rng):
    params = A.init_params(7)
    cfg = A.PpoConfig()
    batch = random_batch(rng, n=5)
    # keep ratios inside the clip band so the loss is differentiable
    heads = A.forward_actor(params, batch["obs"])
    batch["logp"] = A.action_logprobs(heads, batch["actions"]) + \
        rng.uniform(-0.05, 0.05, size=5)
    _, grads, _ = A.ppo_loss_and_grads(params, batch, cfg)
    tensors = params.tensors()
    h = 1e-5
    worst = 0.0
    for ti, tensor in enumerate(tensors):
        flat = tensor.reshape(-1)
        for k in rng.integers(0, flat.size, size=4):
            old = flat[k]
            flat[k] = old + h
            up = _loss_value(params, batch, cfg)
            flat[k] = old - h
            dn = _loss_value(params, batch, cfg)
            flat[k] = old
            num = (up - dn) / (2 * h)
            ana = grads[ti].reshape(-1)[k]
            rel = abs(ana - num) / max(abs(num), abs(ana), 1e-6)
            worst = max(worst, rel)
    assert worst <= 1e-4


def test_update_is_deterministic(rng):
    batch = random_batch(np.random.default_rng(3), n=16)

    def run():
        params = A.init_params(11)
        opt = A.AdamState.like(params)
        for _ in range(3):
            params, _ = A.ppo_update(params, batch, A.PpoConfig(), opt)
        return params

    a, b = run(), run()
    for ta, tb in zip(a.tensors(), b.tensors()):
        assert np.array_equal(ta, tb)


def test_nonfinite_loss_aborts(rng):
    params = A.init_params(2)
    batch = random_batch(rng, n=4)
    batch["advantages"] = np.array([np.inf, 0.0, 0.0, 0.0])
    before = [t.copy() for t in params.tensors()]
    opt = A.AdamState.like(params)
    params, report = A.ppo_update(params, batch, A.PpoConfig(), opt)
    assert report["aborted"]
    for t, b in zip(params.tensors(), before):
        assert np.array_equal(t, b)


def test_grad_clip_global_norm():
    grads = [np.full(4, 3.0), np.full(2, 4.0)]
    norm = A.clip_global_norm(grads, 0.5)
    assert norm == pytest.approx(math.sqrt(4 * 9 + 2 * 16))
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    assert total == pytest.approx(0.5, abs=1e-12)


def test_advantage_normalization(rng):
    adv = rng.normal(size=100) * 7 + 3
    out = A.normalize_advantages(adv)
    assert out.mean() == pytest.approx(0.0, abs=1e-12)
    assert out.std() == pytest.approx(1.0, abs=1e-9)
    same = A.normalize_advantages(np.full(5, 2.0))
    assert np.all(np.isfinite(same))


# -- init ----------------------------------------------------------------------

def test_init_deterministic():
    a, b = A.init_params(42), A.init_params(42)
    for ta, tb in zip(a.tensors(), b.tensors()):
        assert np.array_equal(ta, tb)
    c = A.init_params(43)
    assert not np.array_equal(a.actor[0][0], c.actor[0][0])


def test_init_std_matches_scheme():
    params = A.init_params(9)
    for i, (W, b) in enumerate(params.actor):
        fan_in = W.shape[1]
        expect = 1.0 / math.sqrt(fan_in)
        if i == A.N_LAYERS - 1:
            expect *= 0.01
        assert np.std(W) == pytest.approx(expect, rel=0.10)
        assert np.all(b == 0.0)


def test_init_forward_bounded(rng):
    params = A.init_params(10)
    for _ in range(20):
        obs = rng.normal(size=A.OBS_DIM)
        heads = A.forward_actor(params, obs)
        flat = np.concatenate(heads)
        assert np.all(np.isfinite(flat)) and np.max(np.abs(flat)) < 50.0


# -- observation scaling --------------------------------------------------------

def test_observation_scaling_layout():
    obs = np.zeros(A.OBS_DIM)
    obs[0] = 0.05   # left location x, meters
    obs[4] = 4.0    # left force y, newtons
    obs[12] = 0.01  # prev action dx
    obs[15] = 1.0   # prev action T
    scaled = A.scale_observation(obs)
    assert scaled[0] == pytest.approx(0.5)
    assert scaled[4] == pytest.approx(1.0)
    assert scaled[12] == pytest.approx(1.0)
    assert scaled[15] == 1.0


# -- checkpoints -----------------------------------------------------------------

def test_checkpoint_roundtrip_bit_exact(tmp_path):
    params = A.init_params(21)
    path = tmp_path / "p.ckpt"
    save_params(params, path)
    loaded = load_params(path)
    for ta, tb in zip(params.tensors(), loaded.tensors()):
        assert np.array_equal(ta, tb)
    save_params(loaded, tmp_path / "q.ckpt")
    assert (tmp_path / "p.ckpt").read_bytes() == (tmp_path / "q.ckpt").read_bytes()


def test_checkpoint_magic(tmp_path):
    params = A.init_params(1)
    path = tmp_path / "p.ckpt"
    save_params(params, path)
    assert path.read_bytes()[:8] == b"GEOTACT1"


def test_checkpoint_corruption_detected(tmp_path):
    params = A.init_params(1)
    path = tmp_path / "p.ckpt"
    save_params(params, path)
    blob = bytearray(path.read_bytes())
    blob[100] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError):
        load_params(path)


def test_checkpoint_architecture_mismatch(tmp_path):
    params = A.init_params(1)
    params.actor[2] = (np.zeros((8, 256)), np.zeros(8))
    with pytest.raises(ValueError):
        save_params(params, tmp_path / "bad.ckpt")
    # well-formed file with the wrong shapes must be refused on load
    import struct
    import zlib
    blob = bytearray()
    blob += b"GEOTACT1"
    blob += struct.pack("<I", 2)
    for rows, cols in ((4, 3), (1, 4)):
        blob += struct.pack("<II", rows, cols)
    for rows, cols in ((4, 3), (1, 4)):
        blob += np.zeros((rows, cols)).tobytes() + np.zeros(rows).tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    path = tmp_path / "wrong.ckpt"
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError):
        load_params(path)
