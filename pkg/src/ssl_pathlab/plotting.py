"""Matplotlib figures for training logs, evaluation reports and episodes.

All functions render straight to files (Agg backend); nothing opens a
window.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .envs import EnvConfig  # noqa: E402
from .evaluation import EpisodeRecord, read_trajectory_csv  # noqa: E402


def _read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    out = {}
    for key in rows[0]:
        out[key] = np.array([float(r[key]) for r in rows])
    return out


def plot_metrics(metrics_csv, out_path) -> Path:
    """Training curves: per-episode return and length against env steps."""
    data = _read_csv(metrics_csv)
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
    steps = data["env_steps"]

    def smooth(y, k=21):
        if len(y) < k:
            return y
        kernel = np.ones(k) / k
        return np.convolve(y, kernel, mode="same")

    axes[0, 0].plot(steps, data["ep_return"], alpha=0.3, color="tab:blue")
    axes[0, 0].plot(steps, smooth(data["ep_return"]), color="tab:blue")
    axes[0, 0].set_ylabel("episode return")
    axes[0, 1].plot(steps, data["ep_len"], alpha=0.3, color="tab:orange")
    axes[0, 1].plot(steps, smooth(data["ep_len"]), color="tab:orange")
    axes[0, 1].set_ylabel("episode length (steps)")
    axes[1, 0].plot(steps, data["critic_loss"], color="tab:green")
    axes[1, 0].set_ylabel("critic loss")
    axes[1, 0].set_yscale("symlog")
    axes[1, 1].plot(steps, data["alpha"], color="tab:red")
    axes[1, 1].set_ylabel("alpha")
    for ax in axes[1]:
        ax.set_xlabel("env steps")
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_eval_summary(lengths, cpads, out_path, title: str = "") -> Path:
    """Histograms of episode length and per-episode action travel."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.hist(lengths, bins=40, color="tab:blue")
    ax1.set_xlabel("episode length (steps)")
    ax1.set_ylabel("episodes")
    ax2.hist(cpads, bins=40, color="tab:orange")
    ax2.set_xlabel("action travel per episode (m)")
    ax2.set_ylabel("episodes")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_trajectory_record(record: EpisodeRecord, cfg: EnvConfig,
                           out_path) -> Path:
    """Field-level picture of one episode: path, target, action points."""
    fig, ax = plt.subplots(figsize=(9, 6))
    _draw_field(ax, cfg)
    xs = [p.x for p in record.robot_path]
    ys = [p.y for p in record.robot_path]
    ax.plot(xs, ys, color="red", lw=1.5, label="robot path")
    pos = record.action_positions(cfg)
    if len(pos):
        ax.scatter(pos[:, 0], pos[:, 1], s=14, color="darkred", zorder=3,
                   label="actions")
    ax.scatter([record.target.x], [record.target.y], s=120, color="orange",
               zorder=4, label="target")
    ax.scatter([xs[0]], [ys[0]], s=80, color="tab:blue", zorder=4,
               label="start")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_trajectory_csv(csv_path, cfg: EnvConfig, out_path) -> Path:
    """Same picture as plot_trajectory_record, from an exported CSV."""
    data = read_trajectory_csv(csv_path)
    fig, ax = plt.subplots(figsize=(9, 6))
    _draw_field(ax, cfg)
    pose = data["robot_pose"]
    ax.plot(pose[:, 0], pose[:, 1], color="red", lw=1.5, label="robot path")
    pos = data["actions"][:, :2] * cfg.norm_max_pos
    ax.scatter(pos[:, 0], pos[:, 1], s=14, color="darkred", zorder=3,
               label="actions")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def _draw_field(ax, cfg: EnvConfig) -> None:
    hl, hw = cfg.field_half_length, cfg.field_half_width
    ax.add_patch(plt.Rectangle((-hl, -hw), 2 * hl, 2 * hw,
                               facecolor="#e8f5e9", edgecolor="black"))
    ax.set_xlim(-hl - 0.4, hl + 0.4)
    ax.set_ylim(-hw - 0.4, hw + 0.4)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
