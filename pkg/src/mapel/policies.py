"""Team policies: one object drives all agents of one side.

Each policy is reset per episode with a seeded generator, then asked once
per step for the actions of its live agents.  Captured evaders never act.
The report dict passed to ``act`` holds the situation-report vector each
agent gathered this step (empty for methods without communication).
"""

from __future__ import annotations

from collections import deque

import numpy as np
import torch

from . import comms, naive
from .env import Action, GameConfig, GameState
from .nets import JointQNet, RecurrentQNet, decode_joint_action, select_action
from .replay import stack_frames
from .sensing import Observation

METHODS = ("naive", "ma-dqn", "mapel-p2psr", "mapel-rsr")


def team_agent_ids(team: str, n: int) -> list[str]:
    prefix = "p" if team == "pursuer" else "e"
    return [f"{prefix}{i}" for i in range(n)]


class NaiveTeamPolicy:
    method = "naive"

    def __init__(self, team: str, n_agents: int):
        self.team = team
        self.n_agents = n_agents
        self.topology = None
        self._rngs: list[np.random.Generator] = []

    def reset(self, state: GameState, rng: np.random.Generator) -> None:
        self._rngs = rng.spawn(self.n_agents)

    def act(self, state, obs, reports, epsilon=0.0):
        actions: dict[str, Action] = {}
        for idx, agent in enumerate(team_agent_ids(self.team, self.n_agents)):
            if state.is_captured(agent):
                continue
            view = naive.naive_view(state, agent, obs[agent], self._rngs[idx])
            actions[agent] = naive.naive_decide(view, self.team)
        return actions


class RecurrentTeamPolicy:
    """Shared-weight per-agent recurrent learner with situation reports."""

    def __init__(self, team: str, n_agents: int, net: RecurrentQNet,
                 topology_kind: str, actions: tuple[Action, ...]):
        self.team = team
        self.n_agents = n_agents
        self.net = net
        self.kind = topology_kind
        self.method = f"mapel-{topology_kind}"
        self.actions = actions
        self.topology: comms.Topology | None = None
        self.hidden: torch.Tensor | None = None
        self._rngs: list[np.random.Generator] = []

    def reset(self, state: GameState, rng: np.random.Generator) -> None:
        self.topology = comms.build_topology(self.kind, self.n_agents, rng)
        self.hidden = self.net.initial_hidden(self.n_agents)
        self._rngs = rng.spawn(self.n_agents)

    def act(self, state, obs, reports, epsilon=0.0):
        ids = team_agent_ids(self.team, self.n_agents)
        planes = np.stack([obs[a].planes for a in ids])
        dtype = next(self.net.parameters()).dtype
        obs_t = torch.as_tensor(planes).to(dtype)
        rep_t = torch.as_tensor(
            np.stack([reports[a] for a in ids]).astype(np.float32)
        ).to(dtype)
        with torch.no_grad():
            q, self.hidden = self.net(obs_t, rep_t, self.hidden)
        q = q.numpy()
        actions: dict[str, Action] = {}
        for idx, agent in enumerate(ids):
            if state.is_captured(agent):
                continue
            pick = select_action(q[idx], epsilon, self._rngs[idx])
            actions[agent] = self.actions[pick]
        return actions


class JointTeamPolicy:
    """Single joint Q-function over the team's product action space."""

    method = "ma-dqn"

    def __init__(self, team: str, n_agents: int, net: JointQNet,
                 actions: tuple[Action, ...]):
        self.team = team
        self.n_agents = n_agents
        self.net = net
        self.actions = actions
        self.topology = None
        self.history: deque[np.ndarray] = deque(maxlen=net.history)
        self._rng: np.random.Generator | None = None

    def reset(self, state: GameState, rng: np.random.Generator) -> None:
        self.history.clear()
        self._rng = rng

    def act(self, state, obs, reports, epsilon=0.0):
        ids = team_agent_ids(self.team, self.n_agents)
        frame = np.concatenate([obs[a].planes for a in ids], axis=0)
        self.history.append(frame)
        stacked = stack_frames(list(self.history), self.net.history)
        dtype = next(self.net.parameters()).dtype
        x = torch.as_tensor(stacked[None]).to(dtype)
        with torch.no_grad():
            q = self.net(x)[0]
        pick = select_action(q, epsilon, self._rng)
        per_agent = decode_joint_action(pick, self.n_agents, len(self.actions))
        out: dict[str, Action] = {}
        for idx, agent in enumerate(ids):
            if not state.is_captured(agent):
                out[agent] = self.actions[per_agent[idx]]
        return out


def report_length_for(method: str, n_agents: int) -> int:
    if method == "mapel-p2psr":
        return n_agents - 1
    if method == "mapel-rsr":
        return 2
    return 0


def build_team_policy(
    method: str,
    team: str,
    n_agents: int,
    game: GameConfig,
    conv_channels: tuple[int, int] = (16, 32),
    hidden_size: int = 128,
    history: int = 5,
    net: torch.nn.Module | None = None,
):
    """Construct a policy (and its net, unless one is supplied)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    actions = game.action_set()
    if method == "naive":
        return NaiveTeamPolicy(team, n_agents)
    if method == "ma-dqn":
        if net is None:
            net = JointQNet(game.rows, game.cols, n_agents,
                            len(actions), history=history,
                            channels=tuple(conv_channels))
        return JointTeamPolicy(team, n_agents, net, actions)
    kind = comms.P2PSR if method == "mapel-p2psr" else comms.RSR
    if net is None:
        net = RecurrentQNet(game.rows, game.cols, len(actions),
                            report_length_for(method, n_agents),
                            channels=tuple(conv_channels),
                            hidden_size=hidden_size)
    return RecurrentTeamPolicy(team, n_agents, net, kind, actions)
