"""Tracking environment for external policy optimisation."""

from .config import (
    CurriculumConfig,
    EnvConfig,
    ObservationNoise,
    Randomization,
    RewardWeights,
    load_ppo_config,
)
from .curriculum import Curriculum, curriculum_update
from .environment import (
    BatchEnv,
    CrawlEnv,
    EnvTransition,
    EpisodeDone,
    ResetSample,
    Targets,
    clamp_action,
    sample_ball,
    sample_reset,
)
from .observation import build_observation, observation_layout, observation_size
from .rollout import hold_policy, plan_targets, tracker_policy, tracking_rollout
from .reward import RewardBreakdown, RewardInputs, compute_reward

__all__ = [
    "BatchEnv", "CrawlEnv", "Curriculum", "CurriculumConfig", "EnvConfig", "EnvTransition", "EpisodeDone",
    "ObservationNoise", "Randomization", "ResetSample", "RewardBreakdown", "RewardInputs", "RewardWeights",
    "Targets", "build_observation", "clamp_action", "compute_reward", "curriculum_update", "load_ppo_config",
    "hold_policy", "observation_layout", "observation_size", "plan_targets", "sample_ball", "sample_reset",
    "tracker_policy", "tracking_rollout",
]
