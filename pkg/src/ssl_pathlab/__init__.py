"""Path-planning RL lab for omnidirectional SSL robots."""

from .agent import (
    Adam,
    CheckpointError,
    MLP,
    ReplayBuffer,
    SACAgent,
    SACConfig,
    caps_losses,
)
from .envs import (
    BaselineEnv,
    EnvConfig,
    EnvStateError,
    FrameSkip,
    ObstacleEnv,
    ObstacleState,
    ProposedEnv,
    RewardBreakdown,
    StepResult,
    SubGoalAction,
    denormalize_action,
    make_env,
    obstacle_step,
    reward_goal_terms,
    reward_obstacle_terms,
)
from .evaluation import (
    EpisodeRecord,
    StatsSummary,
    cpad,
    export_trajectory,
    run_episode,
    run_episodes,
    scripted_target_policy,
    summarize,
)
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

__version__ = "0.1.0"
