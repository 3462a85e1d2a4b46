"""Grid-world pursuit-evasion game: state, transition function, rewards.

The world is an M x N grid of Empty / Obstacle / Target cells.  Pursuers
spawn in the left edge band, evaders in the right edge band, and a block
of target cells sits near the middle.  All agents move simultaneously,
one cell per step.  An evader sharing (or swapping) a cell with a pursuer
is captured and frozen for the rest of the episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np


class Cell(IntEnum):
    EMPTY = 0
    OBSTACLE = 1
    TARGET = 2


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


# (row, col) deltas; row 0 is the top row.
ACTION_DELTAS = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.STAY: (0, 0),
}

MOVE_ACTIONS = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)


class GameStatus(Enum):
    ONGOING = "ongoing"
    EVADERS_WIN_TARGET = "evaders_win_target"
    PURSUERS_WIN_TARGET = "pursuers_win_target"
    PURSUERS_WIN_CAPTURE_ALL = "pursuers_win_capture_all"
    DRAW = "draw"


TERMINAL_STATUSES = frozenset(
    {
        GameStatus.EVADERS_WIN_TARGET,
        GameStatus.PURSUERS_WIN_TARGET,
        GameStatus.PURSUERS_WIN_CAPTURE_ALL,
        GameStatus.DRAW,
    }
)


class GameError(Exception):
    """Base class for game rule violations."""


class ConfigError(GameError):
    pass


class PlacementInfeasible(GameError):
    """No valid layout found; the obstacle config is too dense."""


class UnknownAgent(GameError):
    pass


class EpisodeFinished(GameError):
    pass


class ActionArityMismatch(GameError):
    pass


class NonTerminalStatus(GameError):
    pass


@dataclass(frozen=True)
class GameConfig:
    """Static parameters of one game instance.

    ``rows`` x ``cols`` is the grid size.  The sensing rectangle is
    ``sense_length`` rows by ``sense_width`` cols, both odd so it can be
    centered on the agent.  ``target_length`` cells form the target block.
    """

    rows: int = 32
    cols: int = 32
    n_pursuers: int = 2
    n_evaders: int = 2
    sense_length: int = 9
    sense_width: int = 9
    speed: int = 1
    target_length: int = 4
    obstacle_count: int = 6
    obstacle_size_range: tuple[int, int] = (2, 5)
    max_steps: int = 512
    connectivity: str = "four-plus-stay"
    seed: int = 0

    def __post_init__(self):
        if self.rows < 4 or self.cols < 4:
            raise ConfigError(f"grid must be at least 4x4, got {self.rows}x{self.cols}")
        if self.n_pursuers < 1:
            raise ConfigError("need at least one pursuer")
        # n_evaders == 0 is allowed to support degenerate single-team
        # navigation scenarios; the capture-all win then never triggers.
        if self.n_evaders < 0:
            raise ConfigError("n_evaders must be >= 0")
        for name in ("sense_length", "sense_width"):
            v = getattr(self, name)
            if v < 1 or v % 2 == 0:
                raise ConfigError(f"{name} must be odd and >= 1, got {v}")
        if self.speed != 1:
            raise ConfigError("agent speed is fixed at 1 cell per step")
        if self.target_length < 1:
            raise ConfigError("target_length must be >= 1")
        lo, hi = self.obstacle_size_range
        if not (1 <= lo <= hi):
            raise ConfigError(f"bad obstacle_size_range {self.obstacle_size_range}")
        if self.obstacle_count < 0:
            raise ConfigError("obstacle_count must be >= 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.connectivity not in ("four", "four-plus-stay"):
            raise ConfigError(f"unknown connectivity {self.connectivity!r}")

    @property
    def n_actions(self) -> int:
        return 4 if self.connectivity == "four" else 5

    def action_set(self) -> tuple[Action, ...]:
        if self.connectivity == "four":
            return MOVE_ACTIONS
        return MOVE_ACTIONS + (Action.STAY,)


@dataclass(frozen=True)
class RewardSpec:
    """Team-total terminal rewards; each outcome sums to zero across teams."""

    evader_win: float = 0.5
    pursuer_lose_target: float = -0.5
    pursuer_win_target: float = 0.5
    evader_lose_target: float = -0.5
    pursuer_capture_all: float = 1.0
    evader_all_captured: float = -1.0

    def __post_init__(self):
        pairs = [
            (self.evader_win, self.pursuer_lose_target),
            (self.pursuer_win_target, self.evader_lose_target),
            (self.pursuer_capture_all, self.evader_all_captured),
        ]
        for a, b in pairs:
            if a + b != 0.0:
                raise ConfigError(f"reward pair ({a}, {b}) is not zero-sum")


DEFAULT_REWARDS = RewardSpec()


@dataclass(frozen=True)
class GameState:
    """Full world truth at one time step.

    ``grid`` is shared (read-only) between successive states of an episode;
    only agent positions, capture flags, step counter and status change.
    """

    grid: np.ndarray  # int8, shape (rows, cols), values from Cell
    pursuer_positions: tuple[tuple[int, int], ...]
    evader_positions: tuple[tuple[int, int], ...]
    evader_captured: tuple[bool, ...]
    step: int
    status: GameStatus

    @property
    def rows(self) -> int:
        return self.grid.shape[0]

    @property
    def cols(self) -> int:
        return self.grid.shape[1]

    @property
    def n_pursuers(self) -> int:
        return len(self.pursuer_positions)

    @property
    def n_evaders(self) -> int:
        return len(self.evader_positions)

    def agent_ids(self) -> list[str]:
        return [f"p{i}" for i in range(self.n_pursuers)] + [
            f"e{i}" for i in range(self.n_evaders)
        ]

    def live_agents(self) -> list[str]:
        """Agents that act this step: all pursuers plus uncaptured evaders."""
        out = [f"p{i}" for i in range(self.n_pursuers)]
        out += [
            f"e{i}" for i in range(self.n_evaders) if not self.evader_captured[i]
        ]
        return out

    def position_of(self, agent: str) -> tuple[int, int]:
        team, idx = parse_agent_id(agent)
        if team == "p":
            if idx >= self.n_pursuers:
                raise UnknownAgent(agent)
            return self.pursuer_positions[idx]
        if idx >= self.n_evaders:
            raise UnknownAgent(agent)
        return self.evader_positions[idx]

    def is_captured(self, agent: str) -> bool:
        team, idx = parse_agent_id(agent)
        if team == "p":
            if idx >= self.n_pursuers:
                raise UnknownAgent(agent)
            return False
        if idx >= self.n_evaders:
            raise UnknownAgent(agent)
        return self.evader_captured[idx]

    def target_cells(self) -> list[tuple[int, int]]:
        rs, cs = np.nonzero(self.grid == Cell.TARGET)
        return [(int(r), int(c)) for r, c in zip(rs, cs)]


def parse_agent_id(agent: str) -> tuple[str, int]:
    if len(agent) < 2 or agent[0] not in ("p", "e") or not agent[1:].isdigit():
        raise UnknownAgent(agent)
    return agent[0], int(agent[1:])


def _target_footprint(t_s: int) -> list[tuple[int, int]]:
    """First t_s row-major cells of the ceil(sqrt(t_s))-sided square."""
    side = math.isqrt(t_s)
    if side * side < t_s:
        side += 1
    cells = [(i // side, i % side) for i in range(t_s)]
    return cells


_LAYOUT_ATTEMPTS = 64
_RECT_ATTEMPTS = 50


def new_game(config: GameConfig, seed: int | None = None) -> GameState:
    """Build a fresh game layout from a seed.

    Obstacles are uniformly placed axis-aligned rectangles; the layout is
    rejection-sampled until every spawn cell has an obstacle-free path to
    every target cell (checked by flood fill).  The same (config, seed)
    always yields a bit-identical state.
    """
    if seed is None:
        seed = config.seed
    rng = np.random.Generator(np.random.PCG64(seed))
    M, N = config.rows, config.cols

    footprint = _target_footprint(config.target_length)
    fr = max(r for r, _ in footprint) + 1
    fc = max(c for _, c in footprint) + 1
    if fr > M or fc > N:
        raise PlacementInfeasible("target block does not fit the grid")
    # Centroid offset of the footprint relative to its top-left corner.
    cen_r = sum(r for r, _ in footprint) / len(footprint)
    cen_c = sum(c for _, c in footprint) / len(footprint)

    for _ in range(_LAYOUT_ATTEMPTS):
        grid = np.zeros((M, N), dtype=np.int8)

        # Target: centroid constrained to an M/4 x N/4 box around the middle.
        r_lo = max(0, math.ceil(M / 2 - M / 8 - cen_r))
        r_hi = min(M - fr, math.floor(M / 2 + M / 8 - cen_r))
        c_lo = max(0, math.ceil(N / 2 - N / 8 - cen_c))
        c_hi = min(N - fc, math.floor(N / 2 + N / 8 - cen_c))
        if r_lo > r_hi or c_lo > c_hi:
            raise PlacementInfeasible("no room for the target near the middle")
        tr = int(rng.integers(r_lo, r_hi + 1))
        tc = int(rng.integers(c_lo, c_hi + 1))
        target = [(tr + r, tc + c) for r, c in footprint]
        for r, c in target:
            grid[r, c] = Cell.TARGET

        # Obstacles: random rectangles, re-drawn if they overlap the target.
        ok = True
        for _ in range(config.obstacle_count):
            placed = False
            for _ in range(_RECT_ATTEMPTS):
                h = int(rng.integers(config.obstacle_size_range[0], config.obstacle_size_range[1] + 1))
                w = int(rng.integers(config.obstacle_size_range[0], config.obstacle_size_range[1] + 1))
                if h > M or w > N:
                    continue
                r0 = int(rng.integers(0, M - h + 1))
                c0 = int(rng.integers(0, N - w + 1))
                patch = grid[r0 : r0 + h, c0 : c0 + w]
                if (patch == Cell.TARGET).any():
                    continue
                patch[...] = Cell.OBSTACLE
                placed = True
                break
            if not placed:
                ok = False
                break
        if not ok:
            continue

        # Spawns: distinct empty cells in the two edge bands.
        left_band = np.argwhere(grid[:, :2] == Cell.EMPTY)
        right_band = np.argwhere(grid[:, N - 2 :] == Cell.EMPTY)
        right_band[:, 1] += N - 2
        if len(left_band) < config.n_pursuers or len(right_band) < config.n_evaders:
            continue
        pi = rng.choice(len(left_band), size=config.n_pursuers, replace=False)
        pursuers = tuple((int(r), int(c)) for r, c in left_band[pi])
        if config.n_evaders > 0:
            ei = rng.choice(len(right_band), size=config.n_evaders, replace=False)
            evaders = tuple((int(r), int(c)) for r, c in right_band[ei])
        else:
            evaders = ()

        # Reachability: flood from the (4-connected) target block; every
        # spawn must be reached through non-obstacle cells.
        reach = _flood(grid != Cell.OBSTACLE, target)
        if all(reach[r, c] for r, c in pursuers) and all(
            reach[r, c] for r, c in evaders
        ):
            grid.setflags(write=False)
            return GameState(
                grid=grid,
                pursuer_positions=pursuers,
                evader_positions=evaders,
                evader_captured=tuple(False for _ in range(config.n_evaders)),
                step=0,
                status=GameStatus.ONGOING,
            )

    raise PlacementInfeasible(
        f"no feasible layout in {_LAYOUT_ATTEMPTS} attempts for {config}"
    )


def _flood(passable: np.ndarray, sources: list[tuple[int, int]]) -> np.ndarray:
    """Cells reachable from sources by 4-adjacent moves over passable cells."""
    reach = np.zeros_like(passable, dtype=bool)
    for r, c in sources:
        reach[r, c] = passable[r, c]
    frontier = reach.copy()
    while frontier.any():
        grown = np.zeros_like(reach)
        grown[1:, :] |= frontier[:-1, :]
        grown[:-1, :] |= frontier[1:, :]
        grown[:, 1:] |= frontier[:, :-1]
        grown[:, :-1] |= frontier[:, 1:]
        frontier = grown & passable & ~reach
        reach |= frontier
    return reach


def in_bounds(state_or_grid, r: int, c: int) -> bool:
    grid = state_or_grid.grid if isinstance(state_or_grid, GameState) else state_or_grid
    return 0 <= r < grid.shape[0] and 0 <= c < grid.shape[1]


def legal_actions(state: GameState, agent: str) -> set[Action]:
    """Actions whose destination is in bounds and not an obstacle.

    Stay is always available to a live agent; a captured evader can only
    stay.  Cells occupied by other agents are legal destinations.
    """
    if state.status is not GameStatus.ONGOING:
        raise EpisodeFinished("legal_actions on a finished episode")
    if state.is_captured(agent):
        return {Action.STAY}
    r, c = state.position_of(agent)
    out = {Action.STAY}
    for a in MOVE_ACTIONS:
        dr, dc = ACTION_DELTAS[a]
        nr, nc = r + dr, c + dc
        if in_bounds(state, nr, nc) and state.grid[nr, nc] != Cell.OBSTACLE:
            out.add(a)
    return out


def _resolve_move(grid: np.ndarray, pos: tuple[int, int], action: Action) -> tuple[int, int]:
    dr, dc = ACTION_DELTAS[action]
    nr, nc = pos[0] + dr, pos[1] + dc
    if not in_bounds(grid, nr, nc) or grid[nr, nc] == Cell.OBSTACLE:
        return pos  # illegal moves resolve to Stay
    return (nr, nc)


def step(
    state: GameState,
    joint_actions: dict[str, Action],
    max_steps: int,
    rewards: RewardSpec = DEFAULT_REWARDS,
) -> tuple[GameState, dict[str, float], GameStatus]:
    """Apply one synchronous move for every live agent.

    Resolution order: move everyone, then captures (co-location or swap),
    then win checks with evader target arrival before pursuer arrival,
    then capture-all, then the step-limit draw.
    """
    if state.status is not GameStatus.ONGOING:
        raise EpisodeFinished("step on a finished episode")
    live = state.live_agents()
    if set(joint_actions) != set(live):
        raise ActionArityMismatch(
            f"expected actions for {sorted(live)}, got {sorted(joint_actions)}"
        )

    old_p = list(state.pursuer_positions)
    old_e = list(state.evader_positions)
    new_p = [
        _resolve_move(state.grid, old_p[i], joint_actions[f"p{i}"])
        for i in range(state.n_pursuers)
    ]
    new_e = []
    for j in range(state.n_evaders):
        if state.evader_captured[j]:
            new_e.append(old_e[j])
        else:
            new_e.append(_resolve_move(state.grid, old_e[j], joint_actions[f"e{j}"]))

    captured = list(state.evader_captured)
    for j in range(state.n_evaders):
        if captured[j]:
            continue
        for i in range(state.n_pursuers):
            if new_e[j] == new_p[i] or (new_e[j] == old_p[i] and new_p[i] == old_e[j]):
                captured[j] = True
                break

    is_target = state.grid == Cell.TARGET
    next_step = state.step + 1
    if any(
        not captured[j] and is_target[new_e[j]] for j in range(state.n_evaders)
    ):
        status = GameStatus.EVADERS_WIN_TARGET
    elif any(is_target[p] for p in new_p):
        status = GameStatus.PURSUERS_WIN_TARGET
    elif state.n_evaders > 0 and all(captured):
        status = GameStatus.PURSUERS_WIN_CAPTURE_ALL
    elif next_step >= max_steps:
        status = GameStatus.DRAW
    else:
        status = GameStatus.ONGOING

    new_state = GameState(
        grid=state.grid,
        pursuer_positions=tuple(new_p),
        evader_positions=tuple(new_e),
        evader_captured=tuple(captured),
        step=next_step,
        status=status,
    )
    if status is GameStatus.ONGOING:
        reward = {a: 0.0 for a in state.agent_ids()}
    else:
        reward = outcome_rewards(status, rewards, state.n_pursuers, state.n_evaders)
    return new_state, reward, status


def outcome_rewards(
    status: GameStatus, spec: RewardSpec, n_pursuers: int, n_evaders: int
) -> dict[str, float]:
    """Split each team's terminal total equally among its agents."""
    if status not in TERMINAL_STATUSES:
        raise NonTerminalStatus(str(status))
    if status is GameStatus.EVADERS_WIN_TARGET:
        p_total = spec.pursuer_lose_target
        e_total = spec.evader_win
    elif status is GameStatus.PURSUERS_WIN_TARGET:
        p_total = spec.pursuer_win_target
        e_total = spec.evader_lose_target
    elif status is GameStatus.PURSUERS_WIN_CAPTURE_ALL:
        p_total = spec.pursuer_capture_all
        e_total = spec.evader_all_captured
    else:  # Draw: timeout has no winner
        p_total = 0.0
        e_total = 0.0
    out: dict[str, float] = {}
    for i in range(n_pursuers):
        out[f"p{i}"] = p_total / n_pursuers
    for j in range(n_evaders):
        out[f"e{j}"] = e_total / n_evaders
    return out
