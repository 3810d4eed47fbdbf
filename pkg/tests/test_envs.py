import math

import numpy as np
import pytest

from ssl_pathlab.envs import (
    BaselineEnv,
    EnvConfig,
    EnvStateError,
    FrameSkip,
    ObstacleEnv,
    ObstacleState,
    ProposedEnv,
    RewardBreakdown,
    denormalize_action,
    make_env,
    obstacle_step,
    reward_goal_terms,
    reward_obstacle_terms,
)
from ssl_pathlab.kinematics import Pose2D, RobotState, Velocity2D, angle_diff

CFG = EnvConfig()


def reference_goal_terms(ref_pose, target, cfg):
    """Straight-from-the-definition reward reference used as an oracle."""
    d = math.dist((ref_pose.x, ref_pose.y), (target.x, target.y))
    delta = abs(angle_diff(ref_pose.theta, target.theta))
    r_d = 10.0 if d <= cfg.d_threshold else -d
    r_theta = 1.0 if delta <= cfg.theta_threshold else -delta / math.pi
    r_t = 1000.0 if (d <= cfg.d_threshold
                     and delta <= cfg.theta_threshold) else 0.0
    return r_d, r_theta, r_t


class TestRewardGoalTerms:
    def test_within_both_thresholds(self):
        b = reward_goal_terms(Pose2D(1, 1, 0.5), Pose2D(1, 1, 0.5), CFG)
        assert (b.r_d, b.r_theta, b.r_t) == (10.0, 1.0, 1000.0)
        assert b.total == 1011.0

    def test_both_thresholds_exceeded(self):
        b = reward_goal_terms(Pose2D(0, 0, math.pi / 2), Pose2D(2.3, 0, 0),
                              CFG)
        assert b.r_d == pytest.approx(-2.3)
        assert b.r_theta == pytest.approx(-0.5)
        assert b.r_t == 0.0
        assert b.total == pytest.approx(-2.8)

    def test_mixed_threshold_branch(self):
        ref = Pose2D(0.02, 0.0, math.pi / 4)
        target = Pose2D(0.0, 0.0, 0.0)
        b = reward_goal_terms(ref, target, CFG)
        expected = reference_goal_terms(ref, target, CFG)
        assert (b.r_d, b.r_theta, b.r_t) == pytest.approx(expected)
        assert b.r_d == 10.0 and b.r_t == 0.0
        assert b.r_theta == pytest.approx(-0.25)

    def test_random_poses_match_reference(self):
        rng = np.random.default_rng(3)
        for _ in range(2000):
            ref = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-4, 4))
            target = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-4, 4))
            b = reward_goal_terms(ref, target, CFG)
            assert (b.r_d, b.r_theta, b.r_t) == pytest.approx(
                reference_goal_terms(ref, target, CFG), abs=1e-12)
            assert b.total == pytest.approx(
                b.r_d + b.r_theta + b.r_t + b.r_obst + b.r_hit, abs=1e-12)


class TestRewardObstacleTerms:
    def test_peak_penalty_at_zero_distance(self):
        obst = ObstacleState(Pose2D(1.0, 1.0, 0.0))
        robot = RobotState(Pose2D(-4, -2, 0))
        r_obst, r_hit = reward_obstacle_terms(Pose2D(1.0, 1.0, 0), obst,
                                              robot, CFG)
        assert r_obst == pytest.approx(-CFG.gaussian_weight)
        assert r_hit == 0.0

    def test_tail_decay(self):
        obst = ObstacleState(Pose2D(10.0, 0.0, 0.0))
        robot = RobotState(Pose2D(-4, -2, 0))
        r_obst, _ = reward_obstacle_terms(Pose2D(0, 0, 0), obst, robot, CFG)
        assert abs(r_obst) < 1e-10 * CFG.gaussian_weight

    def test_unit_distance_value(self):
        obst = ObstacleState(Pose2D(1.0, 0.0, 0.0))
        robot = RobotState(Pose2D(-4, -2, 0))
        r_obst, _ = reward_obstacle_terms(Pose2D(0, 0, 0), obst, robot, CFG)
        assert r_obst == pytest.approx(-math.exp(-0.5), abs=1e-12)

    def test_hit_detection_uses_robot_distance(self):
        obst = ObstacleState(Pose2D(0.0, 0.0, 0.0))
        close = RobotState(Pose2D(0.1, 0.0, 0.0))
        far = RobotState(Pose2D(0.5, 0.0, 0.0))
        _, r_hit = reward_obstacle_terms(Pose2D(3, 3, 0), obst, close, CFG)
        assert r_hit == -1000.0
        _, r_hit = reward_obstacle_terms(Pose2D(3, 3, 0), obst, far, CFG)
        assert r_hit == 0.0


class TestReset:
    @pytest.mark.parametrize("name", ["baseline", "proposed", "obstacle"])
    def test_same_seed_same_observation(self, name):
        env = make_env(name)
        a = env.reset(seed=123)
        b = env.reset(seed=123)
        assert np.array_equal(a, b)
        env2 = make_env(name)
        c = env2.reset(seed=123)
        assert np.array_equal(a, c)

    def test_observation_dims(self):
        assert make_env("baseline").reset(seed=0).shape == (13,)
        assert make_env("proposed").reset(seed=0).shape == (13,)
        assert make_env("obstacle").reset(seed=0).shape == (18,)

    def test_normalization_and_separation_over_many_resets(self):
        env = make_env("obstacle")
        cfg = env.cfg
        for seed in range(1000):
            obs = env.reset(seed=seed)
            assert np.all(obs >= -1.0) and np.all(obs <= 1.0)
            r, t, o = env.robot.pose, env.target, env.obstacle.pose
            assert r.distance_to(t) >= 0.5
            assert o.distance_to(t) >= 0.5
            assert o.distance_to(r) >= 0.5
            for pose, margin in ((r, cfg.robot_radius),
                                 (o, cfg.obstacle_radius)):
                assert abs(pose.x) <= cfg.field_half_length - margin
                assert abs(pose.y) <= cfg.field_half_width - margin
            assert env.robot.vel.speed() == 0.0
            assert env.obstacle.vel.speed() == 0.0

    def test_unknown_env_name(self):
        with pytest.raises(ValueError, match="unknown env"):
            make_env("nope")


class TestStep:
    def test_step_before_reset_errors(self):
        env = make_env("proposed")
        with pytest.raises(EnvStateError):
            env.step(np.zeros(6))

    def test_step_after_done_errors(self):
        env = make_env("proposed")
        env.reset(seed=4)
        # force success: teleport the robot onto the target
        env.robot = RobotState(
            Pose2D(env.target.x, env.target.y, env.target.theta),
            Velocity2D())
        action = np.array([env.target.x / env.cfg.norm_max_pos,
                           env.target.y / env.cfg.norm_max_pos,
                           0.0, 0.0,
                           math.sin(env.target.theta),
                           math.cos(env.target.theta)])
        result = env.step(action)
        assert result.terminated
        assert result.breakdown.r_t == 1000.0
        with pytest.raises(EnvStateError):
            env.step(action)

    def test_nonfinite_action_rejected(self):
        env = make_env("proposed")
        env.reset(seed=4)
        with pytest.raises(ValueError):
            env.step([np.nan, 0, 0, 0, 0, 1])

    def test_proposed_zeroes_velocity_components(self):
        env = make_env("proposed")
        env.reset(seed=5)
        env.step([0.1, 0.1, 0.7, 0.7, 0.0, 1.0])
        assert env.last_action[2] == 0.0 and env.last_action[3] == 0.0
        env_b = make_env("baseline")
        env_b.reset(seed=5)
        env_b.step([0.1, 0.1, 0.7, 0.7, 0.0, 1.0])
        assert env_b.last_action[2] == pytest.approx(0.7)

    def test_action_clipped_into_unit_box(self):
        env = make_env("baseline")
        env.reset(seed=6)
        env.step([2.0, -3.0, 0.5, 0.5, 4.0, -9.0])
        assert np.all(env.last_action <= 1.0)
        assert np.all(env.last_action >= -1.0)

    def test_obstacle_hit_terminates_with_penalty(self):
        env = make_env("obstacle")
        env.reset(seed=7)
        # drop the robot right next to the obstacle so any step collides
        env.robot = RobotState(
            Pose2D(env.obstacle.pose.x + 0.05, env.obstacle.pose.y, 0.0),
            Velocity2D())
        result = env.step(np.zeros(6))
        assert result.terminated
        assert result.breakdown.r_hit == -1000.0
        assert env.last_collided and not env.last_succeeded

    def test_truncation_at_horizon(self):
        cfg = EnvConfig(max_steps=3)
        env = ProposedEnv(cfg)
        env.reset(seed=8)
        action = np.array([1.0, 1.0, 0, 0, 0.0, 1.0])  # far corner subgoal
        r1 = env.step(action)
        r2 = env.step(action)
        r3 = env.step(action)
        assert not r1.truncated and not r2.truncated
        assert r3.truncated and not r3.terminated

    def test_breakdown_total_is_sum_of_parts(self):
        env = make_env("obstacle")
        obs = env.reset(seed=9)
        rng = np.random.default_rng(9)
        for _ in range(300):
            res = env.step(rng.uniform(-1, 1, 6))
            b = res.breakdown
            assert b.total == pytest.approx(
                b.r_d + b.r_theta + b.r_t + b.r_obst + b.r_hit, abs=1e-12)
            assert res.reward == b.total
            if res.terminated or res.truncated:
                env.reset()

    def test_baseline_success_iff_r_t(self):
        # in the baseline env the success bonus and termination coincide
        env = make_env("baseline")
        env.reset(seed=10)
        rng = np.random.default_rng(10)
        for _ in range(500):
            res = env.step(rng.uniform(-1, 1, 6))
            assert (res.breakdown.r_t == 1000.0) == env.last_succeeded
            if res.terminated or res.truncated:
                env.reset()

    def test_fixed_seed_trace_is_bit_identical(self):
        rng = np.random.default_rng(11)
        actions = rng.uniform(-1, 1, (50, 6))
        traces = []
        for _ in range(2):
            env = make_env("obstacle")
            obs = env.reset(seed=77)
            trace = [obs]
            for a in actions:
                res = env.step(a)
                trace.append(res.observation)
                trace.append(np.array([res.reward]))
            traces.append(np.concatenate(trace))
        assert np.array_equal(traces[0], traces[1])


class TestNormalization:
    def test_zero_state_observation(self):
        env = make_env("baseline")
        env.reset(seed=1)
        env.robot = RobotState(Pose2D(0, 0, 0), Velocity2D())
        env.target = Pose2D(0, 0, 0)
        obs = env._observe()
        expected = np.zeros(13)
        expected[2] = 1.0  # target cos
        expected[8] = 1.0  # robot cos
        assert np.array_equal(obs, expected)

    def test_denormalize_round_trip(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            a = rng.uniform(-1, 1, 6)
            pose, vel = denormalize_action(a, CFG)
            assert pose.x / CFG.norm_max_pos == pytest.approx(a[0], abs=1e-12)
            assert pose.y / CFG.norm_max_pos == pytest.approx(a[1], abs=1e-12)
            assert vel.vx / CFG.norm_max_vel == pytest.approx(a[2], abs=1e-12)
            assert vel.vy / CFG.norm_max_vel == pytest.approx(a[3], abs=1e-12)

    def test_denormalize_example(self):
        pose, vel = denormalize_action([0.5, -0.5, 0, 0, 0, 1], CFG)
        assert (pose.x, pose.y, pose.theta) == (2.25, -2.25, 0.0)
        assert (vel.vx, vel.vy) == (0.0, 0.0)

    def test_heading_scale_invariance_and_zero_vector(self):
        pose_a, _ = denormalize_action([0, 0, 0, 0, 0.3, 0.4], CFG)
        pose_b, _ = denormalize_action([0, 0, 0, 0, 0.6, 0.8], CFG)
        assert pose_a.theta == pose_b.theta
        pose_z, _ = denormalize_action([0, 0, 0, 0, 0.0, 0.0], CFG)
        assert pose_z.theta == 0.0

    @pytest.mark.parametrize("name", ["baseline", "proposed", "obstacle"])
    def test_random_rollouts_stay_normalized(self, name):
        env = make_env(name)
        rng = np.random.default_rng(13)
        env.reset(seed=13)
        for _ in range(3000):
            res = env.step(rng.uniform(-1, 1, 6))
            assert np.all(res.observation >= -1.0)
            assert np.all(res.observation <= 1.0)
            if res.terminated or res.truncated:
                env.reset()


class TestObstacleStep:
    def test_zero_speed_max_keeps_position(self):
        cfg = EnvConfig(obstacle_speed_max=0.0)
        rng = np.random.default_rng(14)
        state = ObstacleState(Pose2D(1.0, 1.0, 0.3))
        out = obstacle_step(state, rng, cfg)
        assert (out.pose.x, out.pose.y) == (1.0, 1.0)

    def test_speed_range_and_bounds_long_run(self):
        cfg = EnvConfig()
        rng = np.random.default_rng(15)
        state = ObstacleState(Pose2D(4.3, 2.8, 0.4))  # near a corner
        x_max = cfg.field_half_length - cfg.obstacle_radius
        y_max = cfg.field_half_width - cfg.obstacle_radius
        for _ in range(100_000):
            state = obstacle_step(state, rng, cfg)
            assert state.vel.speed() <= cfg.obstacle_speed_max + 1e-12
            assert abs(state.pose.x) <= x_max
            assert abs(state.pose.y) <= y_max


class _TerminatingStub:
    """Stub env that terminates on a chosen inner step, for wrapper tests."""

    observation_dim = 3
    action_dim = 6

    def __init__(self, stop_at, rewards):
        self.stop_at = stop_at
        self.rewards = rewards
        self.steps = 0

    @property
    def unwrapped(self):
        return self

    def reset(self, seed=None):
        self.steps = 0
        return np.zeros(3)

    def step(self, action):
        from ssl_pathlab.envs import StepResult
        self.steps += 1
        r = self.rewards[self.steps - 1]
        return StepResult(np.full(3, float(self.steps)), r,
                          self.steps >= self.stop_at, False,
                          RewardBreakdown(r_d=r))


class TestFrameSkip:
    def test_skip_one_equals_plain_step(self):
        rng = np.random.default_rng(16)
        actions = rng.uniform(-1, 1, (30, 6))
        plain = make_env("proposed")
        wrapped = FrameSkip(make_env("proposed"), skip=1)
        o1 = plain.reset(seed=44)
        o2 = wrapped.reset(seed=44)
        assert np.array_equal(o1, o2)
        for a in actions:
            r1 = plain.step(a)
            r2 = wrapped.step(a)
            assert np.array_equal(r1.observation, r2.observation)
            assert r1.reward == r2.reward
            assert r1.terminated == r2.terminated

    def test_at_most_75_decisions_per_episode(self):
        env = FrameSkip(make_env("proposed"), skip=16)
        rng = np.random.default_rng(17)
        for seed in range(5):
            env.reset(seed=seed)
            decisions = 0
            while True:
                res = env.step(rng.uniform(-1, 1, 6))
                decisions += 1
                if res.terminated or res.truncated:
                    break
            assert decisions <= 75
            if res.truncated:
                assert decisions == 75
                assert env.steps == 1200

    def test_early_termination_stops_inner_loop(self):
        stub = _TerminatingStub(stop_at=3, rewards=[1.0, 2.0, 3.0])
        env = FrameSkip(stub, skip=16)
        env.reset()
        res = env.step(np.zeros(6))
        assert stub.steps == 3  # exactly 3 inner steps executed
        assert res.terminated
        assert res.reward == 6.0  # summed inner rewards
        assert res.breakdown.r_d == 6.0

    def test_reward_is_sum_of_inner_breakdowns(self):
        env = FrameSkip(make_env("obstacle"), skip=16)
        env.reset(seed=18)
        inner = make_env("obstacle")
        inner.reset(seed=18)
        a = np.array([0.2, -0.4, 0, 0, 0.5, 0.5])
        res = env.step(a)
        total = 0.0
        for _ in range(16):
            total += inner.step(a).reward
        assert res.reward == pytest.approx(total, abs=1e-9)

    def test_invalid_skip(self):
        with pytest.raises(ValueError):
            FrameSkip(make_env("proposed"), skip=0)
