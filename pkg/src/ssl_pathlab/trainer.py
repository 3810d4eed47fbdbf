"""Training loop: env steps in, replay and gradient updates out.

The budget is counted in env steps. With frame skip every agent decision
accounts for one full skip of budget, so a run makes at most
total_env_steps / skip decisions; without it, one decision per step.
Everything is driven by generators derived from the run seed, so a repeated
run produces byte-identical logs.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agent import ReplayBuffer, SACAgent
from .config import FRAME_SKIP, RunConfig, write_resolved_config
from .envs import FrameSkip, make_env
from .evaluation import aggregate_report, run_episodes

METRICS_HEADER = ("episode,env_steps,decisions,updates,ep_return,ep_len,"
                  "actor_loss,critic_loss,caps_temporal,caps_spatial,"
                  "alpha,entropy")
EVALS_HEADER = ("env_steps,episodes,success_rate,collision_rate,"
                "median_len,median_cpad")


def build_env(run_cfg: RunConfig):
    env = make_env(run_cfg.env, cfg=replace(run_cfg.env_config))
    if run_cfg.uses_frame_skip:
        env = FrameSkip(env, FRAME_SKIP)
    return env


def spatial_sigma_vector(obs_dim: int, sac_cfg) -> np.ndarray:
    """Per-dimension noise scales for the spatial smoothness term.

    Robot-state slots (indices 6..12) get sigma_spatial_robot so the policy
    mean learns to ignore where the robot happens to be; the goal slots (and
    obstacle slots, which avoidance must stay responsive to) keep the small
    sigma_spatial.
    """
    sigma = np.full(obs_dim, sac_cfg.sigma_spatial, dtype=np.float32)
    sigma[6:13] = sac_cfg.sigma_spatial_robot
    return sigma


def _fmt(value: float) -> str:
    return repr(float(value))


def train(run_cfg: RunConfig, log=None) -> dict:
    """Run one training job and write logs, checkpoint, and final report."""
    out = Path(run_cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(run_cfg, out / "config.json")

    ss = np.random.SeedSequence(run_cfg.seed)
    env_seed, agent_seed, warmup_seed, eval_seed = [
        int(s.generate_state(1)[0]) for s in ss.spawn(4)]

    env = build_env(run_cfg)
    skip = FRAME_SKIP if run_cfg.uses_frame_skip else 1
    sac_cfg = replace(run_cfg.sac, seed=agent_seed,
                      caps_enabled=run_cfg.uses_caps)
    agent = SACAgent(env.observation_dim, env.action_dim, sac_cfg,
                     spatial_sigma=spatial_sigma_vector(
                         env.observation_dim, sac_cfg))
    buffer = ReplayBuffer(env.observation_dim, env.action_dim,
                          sac_cfg.buffer_capacity)
    warmup_rng = np.random.default_rng(warmup_seed)

    decision_budget = run_cfg.total_env_steps // skip
    warmup_decisions = -(-sac_cfg.warmup_steps // skip)  # ceil div
    decisions_per_update = max(1, sac_cfg.update_interval // skip)
    eval_every_decisions = (run_cfg.eval_every // skip
                            if run_cfg.eval_every > 0
                            and run_cfg.eval_episodes > 0 else 0)

    metrics_path = out / "metrics.csv"
    evals_path = out / "evals.csv"
    metrics_fh = open(metrics_path, "w")
    metrics_fh.write(METRICS_HEADER + "\n")
    evals_fh = open(evals_path, "w")
    evals_fh.write(EVALS_HEADER + "\n")

    obs = env.reset(seed=env_seed)
    env_steps = 0
    decisions = 0
    episodes = 0
    snapshots = 0
    ep_return = 0.0
    losses = {"actor_loss": 0.0, "critic_loss": 0.0, "caps_temporal": 0.0,
              "caps_spatial": 0.0, "alpha": agent.alpha, "entropy": 0.0}

    eps = sac_cfg.exploration_epsilon
    eps_t = sac_cfg.exploration_target
    noise_t = sac_cfg.exploration_target_noise
    for decision in range(decision_budget):
        # behavior policy: uniform actions during warmup; afterwards a mix
        # of uniform actions (global critic coverage), target-guided actions
        # (reward data near the cone apex and bonus region), and the policy
        draw = warmup_rng.uniform()
        if decision < warmup_decisions or draw < eps:
            action = warmup_rng.uniform(-1.0, 1.0, env.action_dim)
        elif draw < eps + eps_t:
            action = np.clip(
                np.array([obs[0], obs[1], 0.0, 0.0, obs[3], obs[2]])
                + noise_t * warmup_rng.standard_normal(env.action_dim),
                -1.0, 1.0)
        else:
            action = agent.select_action(obs, deterministic=False)
        before = env.steps
        result = env.step(action)
        env_steps += env.steps - before
        decisions += 1
        ep_return += result.reward
        # the critic trains on scaled rewards; logs stay in env units
        buffer.add(obs, action, sac_cfg.reward_scale * result.reward,
                   result.observation, result.terminated)
        obs = result.observation

        ready = (decision + 1 >= warmup_decisions
                 and len(buffer) >= sac_cfg.batch_size)
        if ready and (decision + 1) % decisions_per_update == 0:
            losses = agent.update(buffer)

        if result.terminated or result.truncated:
            episodes += 1
            ep_len = env.steps  # the step counter resets with each episode
            row = [str(episodes), str(env_steps), str(decisions),
                   str(agent.updates), _fmt(ep_return), str(ep_len),
                   _fmt(losses["actor_loss"]), _fmt(losses["critic_loss"]),
                   _fmt(losses["caps_temporal"]),
                   _fmt(losses["caps_spatial"]),
                   _fmt(losses["alpha"]), _fmt(losses["entropy"])]
            metrics_fh.write(",".join(row) + "\n")
            ep_return = 0.0

            if (eval_every_decisions
                    and decisions // eval_every_decisions > snapshots):
                snapshots += 1
                _eval_snapshot(run_cfg, agent, env_steps, episodes,
                               eval_seed + snapshots * 1_000_000, evals_fh)
            if log is not None and episodes % 50 == 0:
                log(f"episode {episodes}: env_steps={env_steps} "
                    f"decisions={decisions} updates={agent.updates}")
            obs = env.reset()

    metrics_fh.close()
    evals_fh.close()

    ckpt_path = out / "checkpoint.npz"
    agent.save(ckpt_path)

    report = None
    if run_cfg.final_eval_episodes > 0:
        eval_env = build_env(run_cfg)
        policy = lambda o: agent.select_action(o, deterministic=True)
        records = run_episodes(eval_env, policy,
                               n=run_cfg.final_eval_episodes,
                               seed=eval_seed)
        report = aggregate_report(records, run_cfg.env_config,
                                  run_cfg.env, run_cfg.setup)
        (out / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n")

    return {
        "output_dir": str(out),
        "checkpoint": str(ckpt_path),
        "metrics": str(metrics_path),
        "evals": str(evals_path),
        "env_steps": env_steps,
        "decisions": decisions,
        "updates": agent.updates,
        "episodes": episodes,
        "report": report,
    }


def _eval_snapshot(run_cfg: RunConfig, agent: SACAgent, env_steps: int,
                   episodes: int, seed: int, fh) -> None:
    env = build_env(run_cfg)
    policy = lambda o: agent.select_action(o, deterministic=True)
    records = run_episodes(env, policy, n=run_cfg.eval_episodes, seed=seed)
    n = len(records)
    success = sum(r.succeeded for r in records) / n
    collision = sum(r.collided for r in records) / n
    median_len = float(np.median([r.length_steps for r in records]))
    median_cpad = float(np.median([r.cpad(run_cfg.env_config)
                                   for r in records]))
    row = [str(env_steps), str(episodes), _fmt(success), _fmt(collision),
           _fmt(median_len), _fmt(median_cpad)]
    fh.write(",".join(row) + "\n")
    fh.flush()
