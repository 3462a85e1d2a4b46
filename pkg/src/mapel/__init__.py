"""Pursuit-evasion grid game with situation-report Q-learning."""

from .env import (
    Action,
    Cell,
    GameConfig,
    GameState,
    GameStatus,
    RewardSpec,
    legal_actions,
    new_game,
    outcome_rewards,
    step,
)
from .sensing import Observation, line_of_sight, observe, visibility_mask
from .comms import P2PSR, RSR, Topology, build_topology, gather, report_flag

__all__ = [
    "Action",
    "Cell",
    "GameConfig",
    "GameState",
    "GameStatus",
    "RewardSpec",
    "legal_actions",
    "new_game",
    "outcome_rewards",
    "step",
    "Observation",
    "line_of_sight",
    "observe",
    "visibility_mask",
    "P2PSR",
    "RSR",
    "Topology",
    "build_topology",
    "gather",
    "report_flag",
]
