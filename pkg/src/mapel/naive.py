"""Greedy baseline agents.

A naive agent heads for the target in a straight line, detouring around
obstacles; once it can see a goal (the target, or for pursuers any
opponent) it follows the shortest grid path to the closest one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .env import Action, Cell, GameState
from .sensing import Observation

_NEIGHBOR_ORDER = (
    (Action.UP, (-1, 0)),
    (Action.DOWN, (1, 0)),
    (Action.LEFT, (0, -1)),
    (Action.RIGHT, (0, 1)),
)


def bfs_shortest_path(
    grid: np.ndarray,
    start: tuple[int, int],
    goals: set[tuple[int, int]],
) -> list[tuple[int, int]] | None:
    """Minimum-length 4-adjacent path over non-obstacle cells to any goal.

    Returns the cell sequence including both endpoints, or None when no
    goal is reachable.  Ties are broken by the fixed neighbor expansion
    order Up, Down, Left, Right, so the result is deterministic.
    """
    M, N = grid.shape
    if grid[start] == Cell.OBSTACLE:
        return None
    goals = {g for g in goals if grid[g] != Cell.OBSTACLE}
    if not goals:
        return None
    if start in goals:
        return [start]
    parent = {start: None}
    queue = deque([start])
    found = None
    while queue:
        cur = queue.popleft()
        r, c = cur
        for _, (dr, dc) in _NEIGHBOR_ORDER:
            nxt = (r + dr, c + dc)
            if not (0 <= nxt[0] < M and 0 <= nxt[1] < N):
                continue
            if nxt in parent or grid[nxt] == Cell.OBSTACLE:
                continue
            parent[nxt] = cur
            if nxt in goals:
                found = nxt
                queue.clear()
                break
            queue.append(nxt)
    if found is None:
        return None
    path = [found]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def _seg_distance(p: tuple[float, float], a: tuple[int, int], b: tuple[int, int]) -> float:
    """Euclidean distance from point p to the closed segment a-b."""
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    if dx == 0 and dy == 0:
        return float(np.hypot(px - ax, py - ay))
    t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    t = min(1.0, max(0.0, t))
    return float(np.hypot(px - (ax + t * dx), py - (ay + t * dy)))


def line_step(
    start: tuple[int, int],
    goal: tuple[int, int],
    grid: np.ndarray,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """One step of straight-line motion toward goal.

    Prefers the free adjacent cell closest to the start->goal segment that
    also gets closer to the goal; if that cell is blocked, picks uniformly
    among the free adjacent cells nearest the line that do not move away
    from the goal.  Falls back to staying put.
    """
    if start == goal:
        return start
    M, N = grid.shape
    sr, sc = start
    dr, dc = goal[0] - sr, goal[1] - sc
    goal_dist = float(np.hypot(dr, dc))

    reducing = []  # adjacent cells strictly closer to the goal
    legal = []  # free cells not moving against the line direction
    for _, (ar, ac) in _NEIGHBOR_ORDER:
        cell = (sr + ar, sc + ac)
        free = 0 <= cell[0] < M and 0 <= cell[1] < N and grid[cell] != Cell.OBSTACLE
        perp = _seg_distance(cell, start, goal)
        if np.hypot(cell[0] - goal[0], cell[1] - goal[1]) < goal_dist:
            reducing.append((perp, cell, free))
        if free and ar * dr + ac * dc >= 0:
            legal.append((perp, cell))

    if reducing:
        ideal = min(p for p, _, _ in reducing)
        frees = [cell for p, cell, free in reducing if free and p <= ideal + 1e-9]
        if frees:
            return frees[int(rng.integers(len(frees)))] if len(frees) > 1 else frees[0]
    if not legal:
        return start
    low = min(p for p, _ in legal)
    ties = [cell for p, cell in legal if p <= low + 1e-9]
    return ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]


@dataclass
class NaiveView:
    """Everything a naive agent may legally use for one decision."""

    grid: np.ndarray
    observation: Observation
    teammate_positions: list[tuple[int, int]]
    target_cells: list[tuple[int, int]]
    rng: np.random.Generator


def naive_view(
    state: GameState,
    agent: str,
    observation: Observation,
    rng: np.random.Generator,
) -> NaiveView:
    mates = [
        (int(r), int(c)) for r, c in np.argwhere(observation.planes[2])
    ]
    return NaiveView(
        grid=state.grid,
        observation=observation,
        teammate_positions=mates,
        target_cells=state.target_cells(),
        rng=rng,
    )


def naive_decide(view: NaiveView, role: str) -> Action:
    """Pick this step's action for a pursuer or evader.

    Goals the agent can currently see are chased by BFS (nearest first);
    with nothing in sight it advances toward the target in a straight
    line.  Boxed-in agents stay.
    """
    planes = view.observation.planes
    own = tuple(int(v) for v in np.argwhere(planes[1])[0])
    target_visible = bool((planes[0] & planes[3]).any())

    goals: set[tuple[int, int]] = set()
    if role == "pursuer":
        goals.update((int(r), int(c)) for r, c in np.argwhere(planes[4]))
    if target_visible:
        goals.update(view.target_cells)

    if goals:
        path = bfs_shortest_path(view.grid, own, goals)
        if path is not None:
            if len(path) == 1:
                return Action.STAY
            return _action_toward(own, path[1])

    if not view.target_cells:
        return Action.STAY
    goal = min(
        view.target_cells,
        key=lambda t: ((t[0] - own[0]) ** 2 + (t[1] - own[1]) ** 2, t),
    )
    nxt = line_step(own, goal, view.grid, view.rng)
    return _action_toward(own, nxt)


def _action_toward(src: tuple[int, int], dst: tuple[int, int]) -> Action:
    delta = (dst[0] - src[0], dst[1] - src[1])
    for action, d in _NEIGHBOR_ORDER:
        if d == delta:
            return action
    return Action.STAY
