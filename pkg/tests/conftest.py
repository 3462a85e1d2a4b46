import numpy as np
import pytest

from mapel.env import Cell, GameState, GameStatus


def make_grid(rows, cols, obstacles=(), targets=()):
    grid = np.zeros((rows, cols), dtype=np.int8)
    for r, c in obstacles:
        grid[r, c] = Cell.OBSTACLE
    for r, c in targets:
        grid[r, c] = Cell.TARGET
    grid.setflags(write=False)
    return grid


def make_state(grid, pursuers, evaders, captured=None, step=0,
               status=GameStatus.ONGOING):
    """Hand-built state for unit tests; bypasses the layout sampler."""
    if captured is None:
        captured = tuple(False for _ in evaders)
    return GameState(
        grid=grid,
        pursuer_positions=tuple(pursuers),
        evader_positions=tuple(evaders),
        evader_captured=tuple(captured),
        step=step,
        status=status,
    )


@pytest.fixture
def open_grid_8():
    return make_grid(8, 8)
