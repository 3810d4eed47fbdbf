"""Goal-conditioned path-planning environments for an omnidirectional robot.

Three environments share one episode lifecycle:

* ``BaselineEnv``  - rewards measured from the robot pose; the action's
  velocity components feed forward into the motion controller.
* ``ProposedEnv``  - action velocity components are forced to zero and the
  reward reference becomes the sub-goal emitted by the agent.
* ``ObstacleEnv``  - ``ProposedEnv`` plus one randomly moving obstacle, a
  Gaussian proximity penalty on the action, and a -1000 crash penalty.

Observations are normalized to [-1, 1]; actions are 6-vectors
``(x, y, vx, vy, sin_theta, cos_theta)``, all components in [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .kinematics import (
    ControllerGains,
    MotionLimits,
    Pose2D,
    RobotState,
    Velocity2D,
    angle_diff,
    go_to_point,
    integrate,
    wrap_angle,
)

# Minimum spawn separation between robot, target and obstacle (m).
SPAWN_SEPARATION = 0.5

# Columns of the transition/episode CSV log.
TRANSITION_LOG_HEADER = (
    "step,ax,ay,avx,avy,asin,acos,rx,ry,rtheta,reward,"
    "r_d,r_theta,r_t,r_obst,r_hit,terminated,truncated"
)


class EnvStateError(RuntimeError):
    """Raised when step() is called on an unready or finished episode."""


@dataclass
class EnvConfig:
    field_half_length: float = 4.5  # m
    field_half_width: float = 3.0  # m
    dt: float = 0.025  # s
    max_steps: int = 1200
    d_threshold: float = 0.05  # m
    theta_threshold: float = math.pi / 18.0  # 10 degrees
    norm_max_pos: float = 4.5  # m
    norm_max_vel: float = 2.5  # m/s
    norm_max_omega: float = 10.0  # rad/s
    obstacle_speed_max: float = 1.0  # m/s
    obstacle_radius: float = 0.09  # m
    robot_radius: float = 0.09  # m
    gaussian_sigma: float = 1.0
    gaussian_weight: float = 1.0

    def __post_init__(self):
        positive = (
            "field_half_length", "field_half_width", "dt", "d_threshold",
            "theta_threshold", "norm_max_pos", "norm_max_vel",
            "norm_max_omega", "obstacle_radius", "robot_radius",
            "gaussian_sigma",
        )
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.obstacle_speed_max < 0.0:
            raise ValueError("obstacle_speed_max must be non-negative")


@dataclass
class SubGoalAction:
    """The 6-tuple emitted by the policy, all components in [-1, 1]."""

    x: float
    y: float
    vx: float
    vy: float
    sin_theta: float
    cos_theta: float

    @classmethod
    def from_array(cls, a) -> "SubGoalAction":
        a = np.asarray(a, dtype=float).reshape(6)
        return cls(*a.tolist())

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy,
                         self.sin_theta, self.cos_theta], dtype=float)


@dataclass
class ObstacleState:
    pose: Pose2D = field(default_factory=Pose2D)  # theta = motion heading
    vel: Velocity2D = field(default_factory=Velocity2D)


@dataclass
class RewardBreakdown:
    r_d: float = 0.0
    r_theta: float = 0.0
    r_t: float = 0.0
    r_obst: float = 0.0
    r_hit: float = 0.0

    @property
    def total(self) -> float:
        return self.r_d + self.r_theta + self.r_t + self.r_obst + self.r_hit

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d

    def add(self, other: "RewardBreakdown") -> None:
        self.r_d += other.r_d
        self.r_theta += other.r_theta
        self.r_t += other.r_t
        self.r_obst += other.r_obst
        self.r_hit += other.r_hit


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool  # goal reached or collision
    truncated: bool  # horizon hit
    breakdown: RewardBreakdown


def reward_goal_terms(ref_pose: Pose2D, target: Pose2D,
                      cfg: EnvConfig) -> RewardBreakdown:
    """Distance, heading and success-bonus terms measured from ref_pose.

    The reference is the robot pose in the baseline environment and the
    denormalized action sub-goal in the proposed/obstacle environments.
    """
    d = ref_pose.distance_to(target)
    delta = abs(angle_diff(ref_pose.theta, target.theta))
    r_d = -d if d > cfg.d_threshold else 10.0
    r_theta = -delta / math.pi if delta > cfg.theta_threshold else 1.0
    within = d <= cfg.d_threshold and delta <= cfg.theta_threshold
    r_t = 1000.0 if within else 0.0
    return RewardBreakdown(r_d=r_d, r_theta=r_theta, r_t=r_t)


def reward_obstacle_terms(action_pos: Pose2D, obstacle: ObstacleState,
                          robot: RobotState,
                          cfg: EnvConfig) -> tuple[float, float]:
    """Gaussian proximity penalty on the action and the crash penalty."""
    o = action_pos.distance_to(obstacle.pose)
    r_obst = -cfg.gaussian_weight * math.exp(
        -(o * o) / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma))
    hit = robot.pose.distance_to(obstacle.pose) < (
        cfg.robot_radius + cfg.obstacle_radius)
    r_hit = -1000.0 if hit else 0.0
    return r_obst, r_hit


def denormalize_action(action, cfg: EnvConfig) -> tuple[Pose2D, Velocity2D]:
    """Map a normalized action 6-vector to a sub-goal pose and feedforward.

    Positions scale by norm_max_pos and velocities by norm_max_vel; the
    heading is atan2(sin, cos), which makes the (sin, cos) pair unit-norm
    invariant. A zero (sin, cos) pair maps to heading 0.
    """
    a = np.asarray(action, dtype=float).reshape(6)
    x = a[0] * cfg.norm_max_pos
    y = a[1] * cfg.norm_max_pos
    vx = a[2] * cfg.norm_max_vel
    vy = a[3] * cfg.norm_max_vel
    s, c = a[4], a[5]
    theta = 0.0 if (s == 0.0 and c == 0.0) else math.atan2(s, c)
    return Pose2D(x, y, theta), Velocity2D(vx, vy, 0.0)


def obstacle_step(obstacle: ObstacleState, rng: np.random.Generator,
                  cfg: EnvConfig) -> ObstacleState:
    """Advance the obstacle one step of its bounded random walk.

    Speed resamples uniformly in [0, obstacle_speed_max] each step, heading
    perturbs by at most pi/8, and the walk reflects off the field walls.
    """
    speed = rng.uniform(0.0, cfg.obstacle_speed_max)
    heading = wrap_angle(obstacle.pose.theta +
                         rng.uniform(-math.pi / 8.0, math.pi / 8.0))
    vx = speed * math.cos(heading)
    vy = speed * math.sin(heading)
    x = obstacle.pose.x + vx * cfg.dt
    y = obstacle.pose.y + vy * cfg.dt

    x_max = cfg.field_half_length - cfg.obstacle_radius
    y_max = cfg.field_half_width - cfg.obstacle_radius
    if x > x_max:
        x = 2.0 * x_max - x
        vx = -vx
    elif x < -x_max:
        x = -2.0 * x_max - x
        vx = -vx
    if y > y_max:
        y = 2.0 * y_max - y
        vy = -vy
    elif y < -y_max:
        y = -2.0 * y_max - y
        vy = -vy
    if speed > 0.0:
        heading = math.atan2(vy, vx)
    return ObstacleState(pose=Pose2D(x, y, heading),
                         vel=Velocity2D(vx, vy, 0.0))


class PathPlanningEnv:
    """Common episode machinery for the three environments.

    One instance is single-threaded mutable state; independent instances can
    run on different threads.
    """

    #: reward reference: "robot" or "action"
    reward_reference = "robot"
    #: whether the action's velocity components are forced to zero
    zero_velocity_action = False
    #: whether a moving obstacle is present
    has_obstacle = False

    action_dim = 6

    def __init__(self, cfg: EnvConfig | None = None,
                 limits: MotionLimits | None = None,
                 gains: ControllerGains | None = None):
        self.cfg = cfg if cfg is not None else EnvConfig()
        self.limits = limits if limits is not None else MotionLimits()
        self.gains = gains if gains is not None else ControllerGains()
        if self.cfg.norm_max_pos < self.cfg.field_half_length:
            raise ValueError("norm_max_pos must cover field_half_length")
        if self.cfg.norm_max_vel < self.limits.max_linear_speed:
            raise ValueError("norm_max_vel must cover max_linear_speed")
        if self.cfg.norm_max_omega < self.limits.max_angular_speed:
            raise ValueError("norm_max_omega must cover max_angular_speed")
        self._rng = np.random.default_rng()
        self._ready = False
        self._done = False
        self.robot = RobotState()
        self.target = Pose2D()
        self.obstacle: ObstacleState | None = None
        self.steps = 0
        self.path_trace: list[Pose2D] = []
        self.last_action = np.zeros(self.action_dim)
        self.last_collided = False
        self.last_succeeded = False

    @property
    def unwrapped(self) -> "PathPlanningEnv":
        return self

    @property
    def observation_dim(self) -> int:
        return 18 if self.has_obstacle else 13

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Start a new episode; a fixed seed reproduces it exactly."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        rng = self._rng
        cfg = self.cfg

        robot_pose = self._sample_pose(rng, cfg.robot_radius)
        while True:
            target_pose = self._sample_pose(rng, cfg.robot_radius)
            if robot_pose.distance_to(target_pose) >= SPAWN_SEPARATION:
                break
        self.robot = RobotState(pose=robot_pose, vel=Velocity2D())
        self.target = target_pose

        if self.has_obstacle:
            while True:
                obst_pose = self._sample_pose(rng, cfg.obstacle_radius)
                if (obst_pose.distance_to(robot_pose) >= SPAWN_SEPARATION
                        and obst_pose.distance_to(target_pose)
                        >= SPAWN_SEPARATION):
                    break
            self.obstacle = ObstacleState(pose=obst_pose, vel=Velocity2D())
        else:
            self.obstacle = None

        self.steps = 0
        self._ready = True
        self._done = False
        self.path_trace = [Pose2D(robot_pose.x, robot_pose.y,
                                  robot_pose.theta)]
        self.last_collided = False
        self.last_succeeded = False
        return self._observe()

    def step(self, action) -> StepResult:
        """Run one control step: constrain and denormalize the action, track
        it with the goToPoint controller, advance the world, and score it."""
        if not self._ready:
            raise EnvStateError("reset() must be called before step()")
        if self._done:
            raise EnvStateError("episode is over; call reset() first")
        a = np.asarray(action, dtype=float).reshape(self.action_dim)
        if not np.all(np.isfinite(a)):
            raise ValueError("action components must be finite")
        a = np.clip(a, -1.0, 1.0)
        if self.zero_velocity_action:
            a[2] = 0.0
            a[3] = 0.0
        self.last_action = a

        cfg = self.cfg
        subgoal, feedforward = denormalize_action(a, cfg)
        command = go_to_point(self.robot, subgoal, feedforward,
                              self.limits, self.gains)
        robot = integrate(self.robot, command, cfg.dt, self.limits)
        robot.pose.x = self._clamp(robot.pose.x,
                                   cfg.field_half_length - cfg.robot_radius)
        robot.pose.y = self._clamp(robot.pose.y,
                                   cfg.field_half_width - cfg.robot_radius)
        self.robot = robot

        if self.has_obstacle:
            self.obstacle = obstacle_step(self.obstacle, self._rng, cfg)

        self.steps += 1
        self.path_trace.append(Pose2D(robot.pose.x, robot.pose.y,
                                      robot.pose.theta))

        ref_pose = robot.pose if self.reward_reference == "robot" else subgoal
        breakdown = reward_goal_terms(ref_pose, self.target, cfg)
        collided = False
        if self.has_obstacle:
            r_obst, r_hit = reward_obstacle_terms(
                subgoal, self.obstacle, robot, cfg)
            breakdown.r_obst = r_obst
            breakdown.r_hit = r_hit
            collided = r_hit < 0.0

        succeeded = (not collided) and self._robot_at_target()
        terminated = collided or succeeded
        truncated = (not terminated) and self.steps >= cfg.max_steps
        self._done = terminated or truncated
        self.last_collided = collided
        self.last_succeeded = succeeded

        return StepResult(
            observation=self._observe(),
            reward=breakdown.total,
            terminated=terminated,
            truncated=truncated,
            breakdown=breakdown,
        )

    # -- helpers -----------------------------------------------------------

    def _robot_at_target(self) -> bool:
        d = self.robot.pose.distance_to(self.target)
        delta = abs(angle_diff(self.robot.pose.theta, self.target.theta))
        return d <= self.cfg.d_threshold and delta <= self.cfg.theta_threshold

    def _sample_pose(self, rng: np.random.Generator, margin: float) -> Pose2D:
        cfg = self.cfg
        x = rng.uniform(-(cfg.field_half_length - margin),
                        cfg.field_half_length - margin)
        y = rng.uniform(-(cfg.field_half_width - margin),
                        cfg.field_half_width - margin)
        theta = wrap_angle(rng.uniform(-math.pi, math.pi))
        return Pose2D(x, y, theta)

    @staticmethod
    def _clamp(value: float, bound: float) -> float:
        return max(-bound, min(bound, value))

    def _observe(self) -> np.ndarray:
        cfg = self.cfg
        t = self.target
        r = self.robot
        obs = [
            t.x / cfg.norm_max_pos,
            t.y / cfg.norm_max_pos,
            math.cos(t.theta),
            math.sin(t.theta),
            0.0,  # target vx: the goal is a static pose
            0.0,  # target vy
            r.pose.x / cfg.norm_max_pos,
            r.pose.y / cfg.norm_max_pos,
            math.cos(r.pose.theta),
            math.sin(r.pose.theta),
            r.vel.vx / cfg.norm_max_vel,
            r.vel.vy / cfg.norm_max_vel,
            r.vel.omega / cfg.norm_max_omega,
        ]
        if self.has_obstacle:
            o = self.obstacle
            obs.extend([
                o.pose.x / cfg.norm_max_pos,
                o.pose.y / cfg.norm_max_pos,
                o.vel.vx / cfg.norm_max_vel,
                o.vel.vy / cfg.norm_max_vel,
                o.vel.omega / cfg.norm_max_omega,
            ])
        return np.asarray(obs, dtype=np.float64)


class BaselineEnv(PathPlanningEnv):
    """Robot-referenced rewards; action velocities feed the controller."""

    reward_reference = "robot"
    zero_velocity_action = False
    has_obstacle = False


class ProposedEnv(PathPlanningEnv):
    """Action-referenced rewards; action velocity components forced to 0."""

    reward_reference = "action"
    zero_velocity_action = True
    has_obstacle = False


class ObstacleEnv(ProposedEnv):
    """ProposedEnv plus one moving obstacle with proximity/crash penalties."""

    has_obstacle = True


ENV_NAMES = ("baseline", "proposed", "obstacle")

_ENV_CLASSES = {
    "baseline": BaselineEnv,
    "proposed": ProposedEnv,
    "obstacle": ObstacleEnv,
}


def make_env(name: str, cfg: EnvConfig | None = None,
             limits: MotionLimits | None = None,
             gains: ControllerGains | None = None) -> PathPlanningEnv:
    try:
        cls = _ENV_CLASSES[name]
    except KeyError:
        raise ValueError(
            f"unknown env {name!r}; expected one of {ENV_NAMES}") from None
    return cls(cfg=cfg, limits=limits, gains=gains)


class FrameSkip:
    """Repeat each agent action for ``skip`` inner steps.

    Rewards (and their breakdowns) sum over the inner steps; termination or
    truncation stops the inner loop immediately and propagates.
    """

    def __init__(self, env: PathPlanningEnv, skip: int = 16):
        if skip < 1:
            raise ValueError("skip must be at least 1")
        self.env = env
        self.skip = skip

    @property
    def cfg(self) -> EnvConfig:
        return self.env.cfg

    @property
    def observation_dim(self) -> int:
        return self.env.observation_dim

    @property
    def action_dim(self) -> int:
        return self.env.action_dim

    @property
    def steps(self) -> int:
        return self.env.steps

    @property
    def unwrapped(self) -> PathPlanningEnv:
        return self.env

    def reset(self, seed: int | None = None) -> np.ndarray:
        return self.env.reset(seed=seed)

    def step(self, action) -> StepResult:
        total = RewardBreakdown()
        result = None
        for _ in range(self.skip):
            result = self.env.step(action)
            total.add(result.breakdown)
            if result.terminated or result.truncated:
                break
        return StepResult(
            observation=result.observation,
            reward=total.total,
            terminated=result.terminated,
            truncated=result.truncated,
            breakdown=total,
        )
