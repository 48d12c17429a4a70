import math

import numpy as np
import pytest

import grainpick.baselines as B
import grainpick.env as E
from grainpick.sensing import FingerSample
from grainpick.world import GripperState


def grip(theta=0.0, x=0.25, y=0.25, opening=0.143):
    return GripperState(np.array([x, y, theta]), opening)


def contact(force_dir_deg, mag=4.0, loc=(0.015, 0.0)):
    a = math.radians(force_dir_deg)
    return FingerSample(np.array([loc[0], loc[1], 0.0]),
                        np.array([mag * math.cos(a), mag * math.sin(a), 0.0]),
                        True)


ABSENT = FingerSample.absent()


def test_reset_state():
    s = B.a2g_reset()
    assert s.phase == B.APPROACH
    assert s.consecutive_count == 0 and s.counted_finger == "none"
    assert B.a2g_reset() == B.a2g_reset()


def test_approach_moves_forward_without_contact():
    s = B.a2g_reset()
    a, s = B.a2g_step(s, ABSENT, ABSENT, grip(0.0))
    assert (a.dx_i, a.dy_i, a.dth_i, a.t_i) == (2, 1, 1, 0)
    a, s = B.a2g_step(s, ABSENT, ABSENT, grip(math.pi / 2))
    assert (a.dx_i, a.dy_i) == (1, 2)  # heading mapped to the nearest grid move


def test_align_rotation_sequence_for_offset_target():
    # a contact whose implied target is ~+30 deg away: two +15 turns, then
    # advance straight, then grasp
    s = B.a2g_reset(1)
    g = grip(0.0)
    # force pointing from up-ahead-left down toward the left finger: pick a
    # direction whose alignment target lands near +30 degrees
    sample = contact(120.0 - 180.0)  # object up-left of the left finger
    a, s = B.a2g_step(s, sample, ABSENT, g)
    assert s.phase in (B.ALIGN, B.ADVANCE)
    rotations = 0
    theta = 0.0
    for _ in range(40):
        if a.t_i == 1:
            break
        if a.dth_i != 1:
            rotations += 1
        theta += a.dtheta
        g = grip(theta, x=g.pose[0] + a.dx, y=g.pose[1] + a.dy)
        a, s = B.a2g_step(s, ABSENT, ABSENT, g)
    assert a.t_i == 1
    assert rotations >= 1


def test_aligned_contact_grasps_without_rotation():
    # object dead ahead of the gripper center line: target within tolerance
    s = B.a2gState = B.a2g_reset(1)
    g = grip(0.0, x=0.25, y=0.25)
    # contact on the left finger pushing straight back, i.e. the object sits
    # directly ahead of the finger; the machine should not rotate more than
    # the quantization forces it to
    sample = contact(180.0)
    a, s = B.a2g_step(s, sample, ABSENT, g)
    assert s.phase in (B.ALIGN, B.ADVANCE, B.GRASP)
    # drive the machine with no further contacts; it must grasp eventually
    theta = 0.0
    steps = 0
    while a.t_i != 1 and steps < 60:
        theta += a.dtheta
        g = grip(theta, x=g.pose[0] + a.dx, y=g.pose[1] + a.dy)
        a, s = B.a2g_step(s, ABSENT, ABSENT, g)
        steps += 1
    assert a.t_i == 1


def test_push_variant_counts_consecutive_same_finger():
    s = B.a2g_reset(5)
    g = grip(0.0)
    for i in range(4):
        a, s = B.a2g_step(s, contact(180.0), ABSENT, g)
        assert s.phase == B.APPROACH
        assert s.consecutive_count == i + 1
    # gap at step 5 resets the counter
    a, s = B.a2g_step(s, ABSENT, ABSENT, g)
    assert s.phase == B.APPROACH
    assert s.consecutive_count == 0
    # finger switch also resets (restarts at 1 on the new finger)
    for i in range(3):
        a, s = B.a2g_step(s, contact(180.0), ABSENT, g)
    a, s = B.a2g_step(s, ABSENT, contact(180.0), g)
    assert s.consecutive_count == 1 and s.counted_finger == "right"
    # five in a row triggers
    for i in range(4):
        a, s = B.a2g_step(s, ABSENT, contact(180.0), g)
    assert s.phase in (B.ALIGN, B.ADVANCE)


def test_determinism_identical_traces():
    samples = [ABSENT, contact(170.0), contact(175.0), ABSENT, contact(160.0)]

    def run():
        s = B.a2g_reset(1)
        g = grip(0.0)
        out = []
        theta = 0.0
        for k in range(30):
            smp = samples[k % len(samples)]
            a, s = B.a2g_step(s, smp, ABSENT, g)
            out.append((a.dx_i, a.dy_i, a.dth_i, a.t_i))
            theta += a.dtheta
            g = grip(theta, x=g.pose[0] + a.dx, y=g.pose[1] + a.dy)
        return out

    assert run() == run()


def test_phase_monotone_and_bounded():
    order = {B.APPROACH: 0, B.ALIGN: 1, B.ADVANCE: 2, B.GRASP: 3}
    for force_deg in range(0, 360, 17):
        s = B.a2g_reset(1)
        g = grip(0.0)
        theta = 0.0
        prev = 0
        align_steps = 0
        for k in range(80):
            a, s = B.a2g_step(s, contact(float(force_deg)) if k == 0 else ABSENT,
                              ABSENT, g)
            assert order[s.phase] >= prev
            prev = order[s.phase]
            if s.phase == B.ALIGN:
                align_steps += 1
            if a.t_i == 1:
                break
            theta += a.dtheta
            g = grip(theta, x=g.pose[0] + a.dx, y=g.pose[1] + a.dy)
        assert a.t_i == 1, f"never grasped for force at {force_deg} deg"
        assert align_steps <= 24


def test_no_contact_episode_times_out():
    register = E.EnvConfig(world=__import__("grainpick.world",
                                            fromlist=["WorldConfig"]).WorldConfig(
        mode="tabletop", object_x=0.45, gripper_start_x=0.05))
    env = E.RetrievalEnv(register)
    # park the object far away laterally after reset so nothing is ever felt
    obs = env.reset(3, "square")
    if obs is not None:
        pol = B.make_baseline("a2g")
        pol.start_episode()
        env.state.obj.pose[:2] = [0.45, 0.45]
        env.state.obj.sync()
        env.window = __import__("grainpick.sensing",
                                fromlist=["ObservationWindow"]).ObservationWindow()
        env.last_samples = (ABSENT, ABSENT)
        steps = 0
        while True:
            res = env.step(pol.act(None, env))
            steps += 1
            if res.done:
                break
        assert steps == 100
        assert not res.info["grasp_attempted"]


def test_make_baseline_names():
    assert B.make_baseline("a2g").required == 1
    assert B.make_baseline("a2g-push").required == 5
    with pytest.raises(ValueError):
        B.make_baseline("nope")
