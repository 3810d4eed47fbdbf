"""Point-kinematics for an omnidirectional robot and the goToPoint controller.

Everything here is a pure function over small value types, so it is safe to
call from any number of threads. Units are SI: meters, seconds, radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = theta % TWO_PI  # [0, 2*pi)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


def angle_diff(a: float, b: float) -> float:
    """Shortest signed difference a - b, wrapped into (-pi, pi]."""
    return wrap_angle(a - b)


@dataclass
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0  # heading, kept in (-pi, pi]

    def __post_init__(self):
        self.theta = wrap_angle(self.theta)

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass
class Velocity2D:
    """Global-frame linear velocity (m/s) and angular velocity (rad/s)."""

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass
class RobotState:
    pose: Pose2D = field(default_factory=Pose2D)
    vel: Velocity2D = field(default_factory=Velocity2D)


@dataclass
class MotionLimits:
    max_linear_speed: float = 2.5  # m/s
    max_angular_speed: float = 10.0  # rad/s
    max_linear_accel: float = 10.0  # m/s^2
    max_angular_accel: float = 50.0  # rad/s^2

    def __post_init__(self):
        for name in ("max_linear_speed", "max_angular_speed",
                     "max_linear_accel", "max_angular_accel"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class ControllerGains:
    kp_pos: float = 5.0  # 1/s
    kp_theta: float = 5.0  # 1/s

    def __post_init__(self):
        if self.kp_pos <= 0.0 or self.kp_theta <= 0.0:
            raise ValueError("controller gains must be strictly positive")


def _clamp_norm(vx: float, vy: float, limit: float) -> tuple[float, float]:
    """Scale a vector down to the given norm, preserving direction."""
    norm = math.hypot(vx, vy)
    if norm > limit:
        scale = limit / norm
        return vx * scale, vy * scale
    return vx, vy


def go_to_point(state: RobotState, subgoal: Pose2D, subgoal_vel: Velocity2D,
                limits: MotionLimits, gains: ControllerGains) -> Velocity2D:
    """Proportional controller with velocity feedforward.

    Commands a global-frame velocity toward the sub-goal pose: linear part
    kp_pos * position error plus the sub-goal's velocity, saturated to
    max_linear_speed; angular part kp_theta * heading error, saturated to
    max_angular_speed.
    """
    vx = gains.kp_pos * (subgoal.x - state.pose.x) + subgoal_vel.vx
    vy = gains.kp_pos * (subgoal.y - state.pose.y) + subgoal_vel.vy
    vx, vy = _clamp_norm(vx, vy, limits.max_linear_speed)
    omega = gains.kp_theta * angle_diff(subgoal.theta, state.pose.theta)
    omega = max(-limits.max_angular_speed, min(limits.max_angular_speed, omega))
    return Velocity2D(vx, vy, omega)


def integrate(state: RobotState, command: Velocity2D, dt: float,
              limits: MotionLimits) -> RobotState:
    """One semi-implicit Euler step toward a commanded velocity.

    The velocity moves toward the command under per-step acceleration clamps,
    is saturated to the speed limits, and the new velocity advances the pose.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")

    dvx = command.vx - state.vel.vx
    dvy = command.vy - state.vel.vy
    dvx, dvy = _clamp_norm(dvx, dvy, limits.max_linear_accel * dt)
    vx = state.vel.vx + dvx
    vy = state.vel.vy + dvy
    vx, vy = _clamp_norm(vx, vy, limits.max_linear_speed)

    domega_max = limits.max_angular_accel * dt
    domega = command.omega - state.vel.omega
    domega = max(-domega_max, min(domega_max, domega))
    omega = state.vel.omega + domega
    omega = max(-limits.max_angular_speed,
                min(limits.max_angular_speed, omega))

    pose = Pose2D(
        x=state.pose.x + vx * dt,
        y=state.pose.y + vy * dt,
        theta=wrap_angle(state.pose.theta + omega * dt),
    )
    return RobotState(pose=pose, vel=Velocity2D(vx, vy, omega))
