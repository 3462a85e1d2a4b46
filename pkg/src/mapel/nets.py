"""Q-function networks and action-selection primitives.

Two learners share one convolutional encoder design (3x3 kernels, stride
2, two stages).  The recurrent net scores one agent's actions from its
own observation, the gathered report vector, and a GRU hidden state
carried across the episode.  The joint net scores the whole team's action
tuple from a channel-stacked history of every teammate's observation.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .env import GameError


class ShapeMismatch(GameError):
    pass


def conv_out_side(side: int) -> int:
    """Spatial size after the two stride-2 convolutions with padding 1."""
    return ((side + 1) // 2 + 1) // 2


def encoder_dim(rows: int, cols: int, channels: tuple[int, int]) -> int:
    return channels[1] * conv_out_side(rows) * conv_out_side(cols)


class ConvEncoder(nn.Module):
    def __init__(self, in_channels: int, rows: int, cols: int,
                 channels: tuple[int, int] = (16, 32)):
        super().__init__()
        self.in_channels = in_channels
        self.rows = rows
        self.cols = cols
        self.conv1 = nn.Conv2d(in_channels, channels[0], 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(channels[0], channels[1], 3, stride=2, padding=1)
        self.out_dim = encoder_dim(rows, cols, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1:] != (self.in_channels, self.rows, self.cols):
            raise ShapeMismatch(
                f"expected (*, {self.in_channels}, {self.rows}, {self.cols}), "
                f"got {tuple(x.shape)}"
            )
        h = torch.relu(self.conv1(x))
        h = torch.relu(self.conv2(h))
        return h.flatten(1)


class RecurrentQNet(nn.Module):
    """Per-agent action values with a GRU memory over the episode."""

    def __init__(self, rows: int, cols: int, n_actions: int, report_len: int,
                 channels: tuple[int, int] = (16, 32), hidden_size: int = 128):
        super().__init__()
        self.encoder = ConvEncoder(5, rows, cols, channels)
        self.report_len = report_len
        self.hidden_size = hidden_size
        self.n_actions = n_actions
        self.gru = nn.GRUCell(self.encoder.out_dim + report_len, hidden_size)
        self.head = nn.Linear(hidden_size, n_actions)

    def initial_hidden(self, batch: int = 1, **kw) -> torch.Tensor:
        p = next(self.parameters())
        return torch.zeros(batch, self.hidden_size, dtype=p.dtype, device=p.device)

    def forward(
        self, obs: torch.Tensor, report: torch.Tensor, hidden: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if report.shape != (obs.shape[0], self.report_len):
            raise ShapeMismatch(
                f"report shape {tuple(report.shape)} does not match "
                f"(batch, {self.report_len})"
            )
        if hidden.shape != (obs.shape[0], self.hidden_size):
            raise ShapeMismatch(f"hidden shape {tuple(hidden.shape)}")
        emb = self.encoder(obs)
        h = self.gru(torch.cat([emb, report], dim=1), hidden)
        return self.head(h), h


class JointQNet(nn.Module):
    """Team action values over the product action space.

    Input channels stack every agent's five planes for each of the last
    ``history`` steps (zero-padded at episode start).
    """

    def __init__(self, rows: int, cols: int, n_agents: int, n_actions: int,
                 history: int = 5, channels: tuple[int, int] = (16, 32)):
        super().__init__()
        self.n_agents = n_agents
        self.n_actions = n_actions
        self.history = history
        self.encoder = ConvEncoder(5 * n_agents * history, rows, cols, channels)
        self.head = nn.Linear(self.encoder.out_dim, n_actions**n_agents)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.head(self.encoder(obs))


def encode_joint_action(actions, n_actions: int) -> int:
    """Mixed-radix pack; agent 0 is the most significant digit."""
    idx = 0
    for a in actions:
        a = int(a)
        if not 0 <= a < n_actions:
            raise ShapeMismatch(f"action {a} outside radix {n_actions}")
        idx = idx * n_actions + a
    return idx


def decode_joint_action(index: int, n_agents: int, n_actions: int) -> tuple[int, ...]:
    if not 0 <= index < n_actions**n_agents:
        raise ShapeMismatch(f"joint index {index} out of range")
    out = []
    for _ in range(n_agents):
        out.append(index % n_actions)
        index //= n_actions
    return tuple(reversed(out))


def select_action(q, epsilon: float, rng: np.random.Generator | None = None) -> int:
    """Epsilon-greedy pick over one row of action values.

    Greedy ties go to the lowest index.  With epsilon = 0 the rng is never
    consumed, so greedy evaluation does not advance random streams.
    """
    q = np.asarray(
        q.detach().cpu().numpy() if isinstance(q, torch.Tensor) else q
    ).reshape(-1)
    if q.size == 0:
        raise ShapeMismatch("empty action-value vector")
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("epsilon > 0 requires an rng")
        if rng.random() < epsilon:
            return int(rng.integers(q.size))
    return int(np.argmax(q))


def td_target(reward, done, gamma: float, max_next_q):
    """Bellman regression target: the bare reward at terminals."""
    reward = np.asarray(reward, dtype=np.float64)
    done = np.asarray(done, dtype=bool)
    max_next_q = np.asarray(max_next_q, dtype=np.float64)
    out = np.where(done, reward, reward + gamma * max_next_q)
    return float(out) if out.ndim == 0 else out
