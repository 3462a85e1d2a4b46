"""Experience replay for both learners.

Episodes are stored once, compactly (uint8 planes), and the two buffers
differ in what an "entry" is: the sequence buffer holds whole episodes
and hands out truncated-backprop windows; the transition buffer counts
individual steps and hands out frame-history minibatches.  Both evict
oldest-first and sample uniformly with replacement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


def stack_frames(frames: list[np.ndarray], history: int) -> np.ndarray:
    """Stack the last ``history`` frames along channels, newest last.

    Missing leading frames (episode start) are zero-padded so the output
    channel count is constant.
    """
    if not frames:
        raise ValueError("need at least one frame")
    C, M, N = frames[0].shape
    out = np.zeros((history * C, M, N), dtype=frames[0].dtype)
    recent = frames[-history:]
    for k, frame in enumerate(recent):
        slot = history - len(recent) + k
        out[slot * C : (slot + 1) * C] = frame
    return out


@dataclass
class AgentEpisode:
    """One team's record of one episode.

    Shapes: obs (n_agents, T+1, 5, M, N) uint8, reports (n_agents, T+1, R)
    uint8, actions (n_agents, T) int8, rewards (n_agents, T) float32.  The
    final observation exists only for bootstrapping.
    """

    obs: np.ndarray
    reports: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.obs.shape[0]

    @property
    def length(self) -> int:
        return self.actions.shape[1]


class SequenceReplay:
    """Episode buffer for the recurrent learner; capacity in episodes."""

    def __init__(self, capacity_episodes: int):
        self.capacity = capacity_episodes
        self.episodes: deque[AgentEpisode] = deque()
        self.total_steps = 0

    def __len__(self) -> int:
        return len(self.episodes)

    def add(self, episode: AgentEpisode) -> None:
        self.episodes.append(episode)
        self.total_steps += episode.length * episode.n_agents
        while len(self.episodes) > self.capacity:
            old = self.episodes.popleft()
            self.total_steps -= old.length * old.n_agents

    def sample_windows(self, rng: np.random.Generator, batch: int, window: int):
        """Batch of per-agent subsequences up to ``window`` steps long.

        Episodes are drawn uniformly with replacement, then an agent and a
        start offset uniformly within each.  Short tails are zero-padded
        and masked.
        """
        if not self.episodes:
            raise ValueError("empty replay buffer")
        eps = list(self.episodes)
        picks = []
        max_len = 1
        for _ in range(batch):
            ep = eps[int(rng.integers(len(eps)))]
            agent = int(rng.integers(ep.n_agents))
            t0 = int(rng.integers(ep.length))
            L = min(window, ep.length - t0)
            picks.append((ep, agent, t0, L))
            max_len = max(max_len, L)

        _, _, five, M, N = eps[0].obs.shape
        R = eps[0].reports.shape[2]
        obs = np.zeros((batch, max_len + 1, five, M, N), dtype=np.uint8)
        reports = np.zeros((batch, max_len + 1, R), dtype=np.uint8)
        actions = np.zeros((batch, max_len), dtype=np.int64)
        rewards = np.zeros((batch, max_len), dtype=np.float32)
        dones = np.zeros((batch, max_len), dtype=np.float32)
        mask = np.zeros((batch, max_len), dtype=np.float32)
        for b, (ep, a, t0, L) in enumerate(picks):
            obs[b, : L + 1] = ep.obs[a, t0 : t0 + L + 1]
            reports[b, : L + 1] = ep.reports[a, t0 : t0 + L + 1]
            actions[b, :L] = ep.actions[a, t0 : t0 + L]
            rewards[b, :L] = ep.rewards[a, t0 : t0 + L]
            mask[b, :L] = 1.0
            if t0 + L == ep.length:
                dones[b, L - 1] = 1.0
        return {
            "obs": obs,
            "reports": reports,
            "actions": actions,
            "rewards": rewards,
            "dones": dones,
            "mask": mask,
        }


@dataclass
class TeamEpisode:
    """Stacked-team record for the joint learner.

    Shapes: obs (T+1, 5 * n_agents, M, N) uint8, joint_actions (T,) int64,
    rewards (T,) float32 holding the per-agent share.
    """

    obs: np.ndarray
    joint_actions: np.ndarray
    rewards: np.ndarray

    @property
    def length(self) -> int:
        return self.joint_actions.shape[0]


class TransitionReplay:
    """Step-indexed buffer for the joint learner; capacity in transitions."""

    def __init__(self, capacity_transitions: int, history: int = 5):
        self.capacity = capacity_transitions
        self.history = history
        self.episodes: deque[TeamEpisode] = deque()
        self.total_steps = 0

    def __len__(self) -> int:
        return self.total_steps

    def add(self, episode: TeamEpisode) -> None:
        self.episodes.append(episode)
        self.total_steps += episode.length
        while self.total_steps > self.capacity and len(self.episodes) > 1:
            old = self.episodes.popleft()
            self.total_steps -= old.length

    def _stack_history(self, ep: TeamEpisode, t: int) -> np.ndarray:
        """Frames t-history+1 .. t as stacked channels, zero-padded."""
        frames = [ep.obs[s] for s in range(max(0, t - self.history + 1), t + 1)]
        return stack_frames(frames, self.history)

    def sample(self, rng: np.random.Generator, batch: int):
        if self.total_steps == 0:
            raise ValueError("empty replay buffer")
        eps = list(self.episodes)
        lengths = np.array([e.length for e in eps])
        bounds = np.cumsum(lengths)
        flat = rng.integers(self.total_steps, size=batch)
        obs, next_obs, actions, rewards, dones = [], [], [], [], []
        for f in flat:
            e = int(np.searchsorted(bounds, f, side="right"))
            t = int(f - (bounds[e - 1] if e else 0))
            ep = eps[e]
            obs.append(self._stack_history(ep, t))
            next_obs.append(self._stack_history(ep, t + 1))
            actions.append(ep.joint_actions[t])
            rewards.append(ep.rewards[t])
            dones.append(1.0 if t == ep.length - 1 else 0.0)
        return {
            "obs": np.stack(obs),
            "next_obs": np.stack(next_obs),
            "actions": np.asarray(actions, dtype=np.int64),
            "rewards": np.asarray(rewards, dtype=np.float32),
            "dones": np.asarray(dones, dtype=np.float32),
        }
