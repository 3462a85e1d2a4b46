"""Line-of-sight visibility and per-agent observation planes.

Visibility uses supercover rasterization: a cell blocks a ray if the
closed segment between the two cell centers touches it anywhere,
including corner contacts.  This makes visibility symmetric and lets a
geometric sampling oracle check it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import Cell, GameError, GameState, parse_agent_id, UnknownAgent


class OutOfBounds(GameError):
    pass


def supercover_cells(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """All cells touched by the segment between the centers of a and b.

    Integer DDA: boundary crossings of the two axes are compared exactly
    via cross-multiplication; a tie means the segment passes through a
    lattice corner, in which case both lateral cells are included before
    stepping diagonally.
    """
    (ar, ac), (br, bc) = a, b
    dr, dc = br - ar, bc - ac
    sr = 1 if dr > 0 else -1
    sc = 1 if dc > 0 else -1
    nr, nc = abs(dr), abs(dc)
    r, c = ar, ac
    cells = [(r, c)]
    ir = ic = 0
    while ir < nr or ic < nc:
        tr = (1 + 2 * ir) * nc  # scaled time of next row crossing (cross-mult)
        tc = (1 + 2 * ic) * nr
        if tr == tc:
            cells.append((r + sr, c))
            cells.append((r, c + sc))
            r += sr
            c += sc
            ir += 1
            ic += 1
        elif (1 + 2 * ir) * nc < (1 + 2 * ic) * nr:
            r += sr
            ir += 1
        else:
            c += sc
            ic += 1
        cells.append((r, c))
    return cells


def line_of_sight(grid: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True iff no obstacle touches the a->b segment.

    The starting cell never blocks; the end cell blocks when it is itself
    an obstacle, so obstacle cells are never visible.
    """
    M, N = grid.shape
    for r, c in (a, b):
        if not (0 <= r < M and 0 <= c < N):
            raise OutOfBounds(f"cell ({r}, {c}) outside {M}x{N} grid")
    for cell in supercover_cells(a, b):
        if cell != a and grid[cell] == Cell.OBSTACLE:
            return False
    return True


@dataclass(frozen=True)
class VisibilityMask:
    mask: np.ndarray  # bool, shape (rows, cols)
    owner: str


# Precomputed relative supercover paths for every offset inside an
# l x w sensing rectangle, padded into one int array so a whole mask is a
# couple of numpy gathers.  Keyed by (sense_length, sense_width).
_RAY_TABLES: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _ray_table(l: int, w: int):
    key = (l, w)
    tab = _RAY_TABLES.get(key)
    if tab is not None:
        return tab
    hl, hw = l // 2, w // 2
    offsets = [(dr, dc) for dr in range(-hl, hl + 1) for dc in range(-hw, hw + 1)]
    paths = [supercover_cells((0, 0), off)[1:] for off in offsets]
    maxlen = max((len(p) for p in paths), default=1)
    # Pad with (0, 0): the origin is the agent's own cell, never an obstacle.
    rel = np.zeros((len(offsets), max(maxlen, 1), 2), dtype=np.int64)
    for i, p in enumerate(paths):
        if p:
            rel[i, : len(p)] = p
    tab = (np.array(offsets, dtype=np.int64), rel[..., 0], rel[..., 1])
    _RAY_TABLES[key] = tab
    return tab


def visibility_mask(
    state: GameState, agent: str, sense_length: int, sense_width: int
) -> VisibilityMask:
    """Line-of-sight-filtered l x w rectangle centered on the agent."""
    pos = state.position_of(agent)
    mask = _mask_array(state.grid, pos, sense_length, sense_width)
    return VisibilityMask(mask=mask, owner=agent)


def _mask_array(
    grid: np.ndarray, pos: tuple[int, int], l: int, w: int
) -> np.ndarray:
    M, N = grid.shape
    offsets, path_r, path_c = _ray_table(l, w)
    er = offsets[:, 0] + pos[0]
    ec = offsets[:, 1] + pos[1]
    inb = (er >= 0) & (er < M) & (ec >= 0) & (ec < N)
    # Rays to in-bounds endpoints stay inside the endpoints' bounding box,
    # so absolute path indices are valid wherever inb holds.
    obstacle = grid == Cell.OBSTACLE
    ar = np.clip(path_r + pos[0], 0, M - 1)
    ac = np.clip(path_c + pos[1], 0, N - 1)
    blocked = obstacle[ar, ac].any(axis=1)
    visible = inb & ~blocked
    mask = np.zeros((M, N), dtype=bool)
    mask[er[visible], ec[visible]] = True
    return mask


@dataclass(frozen=True)
class Observation:
    """Five binary feature planes plus the identity of their owner.

    planes[0] visibility mask, [1] own position, [2] teammate positions,
    [3] target footprint (globally known), [4] opponents inside the mask.
    """

    planes: np.ndarray  # uint8, shape (5, rows, cols)
    owner: str
    team: str  # "pursuer" or "evader"


def observe(
    state: GameState, agent: str, sense_length: int, sense_width: int
) -> Observation:
    kind, idx = parse_agent_id(agent)
    if kind == "p":
        if idx >= state.n_pursuers:
            raise UnknownAgent(agent)
        own = state.pursuer_positions
        other = state.evader_positions
        team = "pursuer"
    else:
        if idx >= state.n_evaders:
            raise UnknownAgent(agent)
        own = state.evader_positions
        other = state.pursuer_positions
        team = "evader"

    M, N = state.grid.shape
    mask = _mask_array(state.grid, own[idx], sense_length, sense_width)
    planes = np.zeros((5, M, N), dtype=np.uint8)
    planes[0] = mask
    planes[1][own[idx]] = 1
    for k, p in enumerate(own):
        if k != idx:
            planes[2][p] = 1
    planes[3] = state.grid == Cell.TARGET
    for p in other:
        if mask[p]:
            planes[4][p] = 1
    return Observation(planes=planes, owner=agent, team=team)
