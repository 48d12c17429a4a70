"""Line-delimited episode logs and bit-exact replay.

A log starts with one header line (config snapshot values, seed, object,
mode) followed by one JSON record per policy step. Replaying re-simulates
the episode from the logged seed and actions and verifies every recorded
field, so a log is also a determinism certificate.
"""

from __future__ import annotations

import json
from pathlib import Path

from .env import Action, RetrievalEnv
from .runconfig import RunConfig

FORMAT = "grainpick-episode-v1"


class ReplayMismatch(RuntimeError):
    def __init__(self, line: int, message: str):
        super().__init__(f"log line {line}: {message}")
        self.line = line


def _sample_json(sample):
    return {"present": bool(sample.present),
            "loc": [float(x) for x in sample.location],
            "force": [float(x) for x in sample.force]}


class EpisodeLogWriter:
    def __init__(self, path, run_cfg: RunConfig, seed: int, object_id: str):
        self.path = Path(path)
        header = {"format": FORMAT, "seed": int(seed), "object": object_id,
                  "config": {k: v for k, v in sorted(run_cfg.values.items())}}
        self._lines = [json.dumps(header, sort_keys=True)]

    def record(self, env: RetrievalEnv, action: Action, result) -> None:
        left, right = env.last_samples
        rec = {
            "i": len(self._lines),
            "pose": [float(x) for x in env.state.gripper.pose],
            "opening": float(env.state.gripper.opening),
            "object_pose": [float(x) for x in env.state.obj.pose],
            "action": [action.dx_i, action.dy_i, action.dth_i, action.t_i],
            "left": _sample_json(left),
            "right": _sample_json(right),
            "reward": float(result.reward),
            "d": float(result.info["d"]),
            "done": bool(result.done),
            "grasp_attempted": bool(result.info["grasp_attempted"]),
            "grasp_success": bool(result.info["grasp_success"]),
            "clamped": bool(result.info["boundary_clamped"]),
        }
        self._lines.append(json.dumps(rec, sort_keys=True))

    def close(self) -> None:
        self.path.write_text("\n".join(self._lines) + "\n")


def read_log(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ReplayMismatch(1, "empty log")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ReplayMismatch(1, f"bad header: {e}") from None
    if header.get("format") != FORMAT:
        raise ReplayMismatch(1, f"unexpected format {header.get('format')!r}")
    records = []
    for n, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            records.append((n, json.loads(line)))
        except json.JSONDecodeError as e:
            raise ReplayMismatch(n, f"bad record: {e}") from None
    return header, records


def replay_states(path):
    """Re-simulate a logged episode, yielding (state, contacts) per frame.

    The first frame is the initial post-approach state; every later frame
    follows one logged action. Raises ReplayMismatch (with the offending line
    number) if the re-simulation diverges from the recorded values.
    """
    header, records = read_log(path)
    cfg = RunConfig(header["config"])
    env = RetrievalEnv(cfg.env_config())
    obs = env.reset(int(header["seed"]), header["object"])
    if obs is None:
        raise ReplayMismatch(1, "episode re-simulated as skipped")
    from .world import detect_contacts
    yield env.state, detect_contacts(env.state)
    for n, rec in records:
        action = Action.from_indices(rec["action"])
        result = env.step(action)
        pose = [float(x) for x in env.state.gripper.pose]
        if pose != rec["pose"]:
            raise ReplayMismatch(n, f"pose {pose} != logged {rec['pose']}")
        if float(result.reward) != rec["reward"]:
            raise ReplayMismatch(
                n, f"reward {result.reward!r} != logged {rec['reward']!r}")
        if bool(result.done) != rec["done"]:
            raise ReplayMismatch(n, "done flag diverged")
        yield env.state, detect_contacts(env.state)
