"""Episode rollouts and trajectory metrics.

The headline metric is the cumulative pairwise action distance: the summed
travel of the (x, y) position of the agent's sub-goals over an episode. A
policy that keeps pointing at one spot scores 0; one that jitters scores
high. Episode length (in sim steps), success and collision rates round out
the evaluation report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs import (
    EnvConfig,
    FrameSkip,
    PathPlanningEnv,
    RewardBreakdown,
    TRANSITION_LOG_HEADER,
)
from .kinematics import Pose2D


def cpad(positions) -> float:
    """Cumulative pairwise action distance over (x, y) positions in meters.

    Empty and single-point sequences score 0.
    """
    pts = np.asarray(positions, dtype=float)
    if pts.size == 0:
        return 0.0
    pts = pts.reshape(-1, 2)
    if pts.shape[0] < 2:
        return 0.0
    deltas = np.diff(pts, axis=0)
    return float(np.sum(np.hypot(deltas[:, 0], deltas[:, 1])))


@dataclass
class StatsSummary:
    median: float
    q1: float
    q3: float
    max: float
    min: float

    def to_dict(self) -> dict:
        return {"median": self.median, "q1": self.q1, "q3": self.q3,
                "max": self.max, "min": self.min}


def summarize(values) -> StatsSummary:
    """Median and quartiles by linear interpolation, plus exact extremes."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("summarize requires at least one value")
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return StatsSummary(median=float(med), q1=float(q1), q3=float(q3),
                        max=float(arr.max()), min=float(arr.min()))


@dataclass
class EpisodeRecord:
    """Everything needed to score and replot one evaluation episode."""

    actions: np.ndarray  # (decisions, 6), normalized components
    robot_path: list[Pose2D]  # start pose plus one pose per sim step
    length_steps: int  # sim steps
    succeeded: bool
    collided: bool
    truncated: bool
    seed: int
    target: Pose2D
    breakdowns: list[RewardBreakdown] = field(default_factory=list)
    decision_steps: list[int] = field(default_factory=list)

    @property
    def decisions(self) -> int:
        return len(self.actions)

    def action_positions(self, cfg: EnvConfig) -> np.ndarray:
        """Denormalized (x, y) positions of the sub-goal actions, meters."""
        if len(self.actions) == 0:
            return np.zeros((0, 2))
        return np.asarray(self.actions)[:, :2] * cfg.norm_max_pos

    def cpad(self, cfg: EnvConfig) -> float:
        return cpad(self.action_positions(cfg))

    @property
    def total_reward(self) -> float:
        return sum(b.total for b in self.breakdowns)


def scripted_target_policy(obs) -> np.ndarray:
    """Built-in policy that always emits the target pose with zero velocity.

    Reads the target slots of the observation, so it works in every env and
    over the wire protocol too.
    """
    obs = np.asarray(obs, dtype=float)
    return np.array([obs[0], obs[1], 0.0, 0.0, obs[3], obs[2]])


def run_episode(env, policy, seed: int | None = None) -> EpisodeRecord:
    """Roll one episode with a deterministic policy, recording decisions,
    the full pose trace, and per-decision reward breakdowns."""
    obs = env.reset(seed=seed)
    base: PathPlanningEnv = env.unwrapped
    actions = []
    breakdowns = []
    decision_steps = []
    truncated = False
    while True:
        action = np.asarray(policy(obs), dtype=float)
        result = env.step(action)
        obs = result.observation
        actions.append(np.array(base.last_action, dtype=float))
        breakdowns.append(result.breakdown)
        decision_steps.append(base.steps)
        if result.terminated or result.truncated:
            truncated = result.truncated
            break
    return EpisodeRecord(
        actions=np.asarray(actions),
        robot_path=list(base.path_trace),
        length_steps=base.steps,
        succeeded=base.last_succeeded,
        collided=base.last_collided,
        truncated=truncated,
        seed=seed if seed is not None else -1,
        target=base.target,
        breakdowns=breakdowns,
        decision_steps=decision_steps,
    )


def run_episodes(env, policy, n: int, seed: int = 0) -> list[EpisodeRecord]:
    """n seeded episodes (seed + index each) with a deterministic policy."""
    if n < 1:
        raise ValueError("need at least one episode")
    return [run_episode(env, policy, seed=seed + i) for i in range(n)]


def aggregate_report(records: list[EpisodeRecord], cfg: EnvConfig,
                     env_name: str, setup: str) -> dict:
    """Aggregate JSON-ready report over a batch of episodes."""
    lengths = [r.length_steps for r in records]
    cpads = [r.cpad(cfg) for r in records]
    n = len(records)
    return {
        "env": env_name,
        "setup": setup,
        "n": n,
        "episode_length": summarize(lengths).to_dict(),
        "cpad": summarize(cpads).to_dict(),
        "collision_rate": sum(r.collided for r in records) / n,
        "success_rate": sum(r.succeeded for r in records) / n,
    }


# -- trajectory export -------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def export_trajectory(record: EpisodeRecord, path, cfg: EnvConfig) -> tuple[Path, Path]:
    """Write a per-decision CSV log and an SVG picture of the episode.

    ``path`` may carry a .csv/.svg suffix or none; both files are written
    next to each other with the same stem. Returns (csv_path, svg_path).
    """
    if len(record.robot_path) == 0 or len(record.actions) == 0:
        raise ValueError("cannot export an empty episode record")
    base = Path(path)
    if base.suffix in (".csv", ".svg"):
        base = base.with_suffix("")
    csv_path = base.with_suffix(".csv")
    svg_path = base.with_suffix(".svg")

    lines = [TRANSITION_LOG_HEADER]
    last = len(record.actions) - 1
    for i, action in enumerate(record.actions):
        step = record.decision_steps[i]
        pose = record.robot_path[step]
        b = record.breakdowns[i]
        terminated = int(i == last and (record.succeeded or record.collided))
        truncated = int(i == last and record.truncated)
        fields = [str(step)]
        fields += [_fmt(v) for v in action]
        fields += [_fmt(pose.x), _fmt(pose.y), _fmt(pose.theta)]
        fields += [_fmt(b.total), _fmt(b.r_d), _fmt(b.r_theta),
                   _fmt(b.r_t), _fmt(b.r_obst), _fmt(b.r_hit)]
        fields += [str(terminated), str(truncated)]
        lines.append(",".join(fields))
    csv_path.write_text("\n".join(lines) + "\n")

    svg_path.write_text(trajectory_svg(record, cfg))
    return csv_path, svg_path


def read_trajectory_csv(path) -> dict:
    """Read back a trajectory CSV into arrays keyed by column group."""
    text = Path(path).read_text().strip().splitlines()
    header = text[0].strip()
    if header != TRANSITION_LOG_HEADER:
        raise ValueError(f"unexpected trajectory CSV header: {header!r}")
    rows = [line.split(",") for line in text[1:]]
    data = np.array([[float(v) for v in row] for row in rows])
    return {
        "step": data[:, 0].astype(int),
        "actions": data[:, 1:7],
        "robot_pose": data[:, 7:10],
        "reward": data[:, 10],
        "breakdown": data[:, 11:16],
        "terminated": data[:, 16].astype(int),
        "truncated": data[:, 17].astype(int),
    }


def trajectory_svg(record: EpisodeRecord, cfg: EnvConfig,
                   scale: float = 80.0) -> str:
    """Render the field, target, robot path and action markers as SVG.

    Each sub-goal action becomes one circle of class "action-marker", so the
    markers in the file count the agent's decisions exactly.
    """
    hl, hw = cfg.field_half_length, cfg.field_half_width
    pad = 0.3  # meters of margin around the field

    def sx(x: float) -> float:
        return (x + hl + pad) * scale

    def sy(y: float) -> float:
        return (hw + pad - y) * scale  # flip: SVG y grows downward

    width = (2 * hl + 2 * pad) * scale
    height = (2 * hw + 2 * pad) * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect class="field" x="{sx(-hl):.1f}" y="{sy(hw):.1f}" '
        f'width="{2 * hl * scale:.1f}" height="{2 * hw * scale:.1f}" '
        f'fill="#0a5c2e" stroke="#ffffff" stroke-width="2"/>',
    ]
    pts = " ".join(f"{sx(p.x):.2f},{sy(p.y):.2f}" for p in record.robot_path)
    parts.append(f'<polyline class="robot-path" points="{pts}" fill="none" '
                 f'stroke="#ff4040" stroke-width="2"/>')
    t = record.target
    parts.append(f'<circle class="target" cx="{sx(t.x):.2f}" '
                 f'cy="{sy(t.y):.2f}" r="{0.09 * scale:.1f}" '
                 f'fill="#ff9d00" stroke="none"/>')
    for x, y in record.action_positions(cfg):
        parts.append(f'<circle class="action-marker" cx="{sx(x):.2f}" '
                     f'cy="{sy(y):.2f}" r="{0.04 * scale:.1f}" '
                     f'fill="#d62728"/>')
    start = record.robot_path[0]
    parts.append(f'<circle class="robot-start" cx="{sx(start.x):.2f}" '
                 f'cy="{sy(start.y):.2f}" r="{0.09 * scale:.1f}" '
                 f'fill="#1f77b4"/>')
    parts.append("</svg>")
    return "\n".join(parts)
