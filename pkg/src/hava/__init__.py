"""Hybrid value alignment for reinforcement learning: mandatory rule-based
norms and tentative data-driven norms combined through a reputation-weighted
reward."""

from .alignment import (
    ActionSet,
    AlignedEnv,
    AlignmentOutcome,
    AlignmentValue,
    alignment_score,
    hava_step,
    min_distance,
    project_action,
    recovery_steps,
    reputation_increment,
    transform_reward,
    update_reputation,
    worst_alignment,
)
from .mdp import (
    TaskEnv,
    Trajectory,
    TrajectoryStep,
    discounted_return,
    read_trajectory_csv,
    rollout,
    write_trajectory_csv,
)
from .stats import KsResult, align_test, ks_2samp, violation_stats

__version__ = "0.1.0"

__all__ = [
    "ActionSet", "AlignedEnv", "AlignmentOutcome", "AlignmentValue",
    "alignment_score", "hava_step", "min_distance", "project_action",
    "recovery_steps", "reputation_increment", "transform_reward",
    "update_reputation", "worst_alignment",
    "TaskEnv", "Trajectory", "TrajectoryStep", "discounted_return",
    "read_trajectory_csv", "rollout", "write_trajectory_csv",
    "KsResult", "align_test", "ks_2samp", "violation_stats",
    "__version__",
]
