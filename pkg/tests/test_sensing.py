import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mapel.env import Cell
from mapel.sensing import (
    Observation,
    OutOfBounds,
    line_of_sight,
    observe,
    supercover_cells,
    visibility_mask,
)

from conftest import make_grid, make_state


# --------------------------------------------------------------- oracle
#
# Independent geometric reference: sample the segment densely (1/16 of a
# cell between samples) and mark every cell whose closed unit square the
# sample point touches.  The 1e-9 slack absorbs float rounding at exact
# half-integer boundary contacts; true contact distances on small grids
# are rationals no closer to 0.5 than ~1/124, so the slack cannot
# over-mark.

def sampled_touched_cells(a, b):
    (ar, ac), (br, bc) = a, b
    n = 16 * max(abs(br - ar), abs(bc - ac))
    cells = set()
    tol = 1e-9
    for j in range(n + 1):
        t = j / n if n else 0.0
        x = ar + t * (br - ar)
        y = ac + t * (bc - ac)
        r_lo = math.ceil(x - 0.5 - tol)
        r_hi = math.floor(x + 0.5 + tol)
        c_lo = math.ceil(y - 0.5 - tol)
        c_hi = math.floor(y + 0.5 + tol)
        for r in range(r_lo, r_hi + 1):
            for c in range(c_lo, c_hi + 1):
                cells.add((r, c))
    return cells


def oracle_line_of_sight(grid, a, b):
    for cell in sampled_touched_cells(a, b):
        if cell != a and grid[cell] == Cell.OBSTACLE:
            return False
    return True


# -------------------------------------------------------- line_of_sight

def test_los_clear_row():
    grid = make_grid(8, 8)
    assert line_of_sight(grid, (3, 1), (3, 6))


def test_los_blocked_by_obstacle_between():
    grid = make_grid(8, 8, obstacles=[(3, 4)])
    assert not line_of_sight(grid, (3, 1), (3, 6))


def test_los_identity():
    grid = make_grid(8, 8, obstacles=[(3, 4)])
    assert line_of_sight(grid, (2, 2), (2, 2))


def test_los_obstacle_endpoint_blocks_itself():
    grid = make_grid(8, 8, obstacles=[(3, 4)])
    assert not line_of_sight(grid, (3, 3), (3, 4))


def test_los_out_of_bounds():
    grid = make_grid(8, 8)
    with pytest.raises(OutOfBounds):
        line_of_sight(grid, (0, 0), (0, 8))


def test_los_diagonal_corner_squeeze_blocked():
    # Obstacles meeting only at a corner block the diagonal ray through it.
    grid = make_grid(8, 8, obstacles=[(0, 1), (1, 0)])
    assert not line_of_sight(grid, (0, 0), (2, 2))


def test_supercover_matches_oracle_cells():
    rng = np.random.Generator(np.random.PCG64(5))
    for _ in range(500):
        a = (int(rng.integers(0, 12)), int(rng.integers(0, 12)))
        b = (int(rng.integers(0, 12)), int(rng.integers(0, 12)))
        assert set(supercover_cells(a, b)) == sampled_touched_cells(a, b)


def test_los_matches_oracle_on_random_grids():
    rng = np.random.Generator(np.random.PCG64(17))
    for _ in range(300):
        grid = (rng.random((10, 10)) < 0.25).astype(np.int8)
        a = (int(rng.integers(0, 10)), int(rng.integers(0, 10)))
        b = (int(rng.integers(0, 10)), int(rng.integers(0, 10)))
        grid[a] = Cell.EMPTY
        assert line_of_sight(grid, a, b) == oracle_line_of_sight(grid, a, b)


@settings(max_examples=100, deadline=None)
@given(
    ar=st.integers(0, 9), ac=st.integers(0, 9),
    br=st.integers(0, 9), bc=st.integers(0, 9),
    seed=st.integers(0, 10**6),
)
def test_los_symmetry(ar, ac, br, bc, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    grid = (rng.random((10, 10)) < 0.3).astype(np.int8)
    grid[ar, ac] = Cell.EMPTY
    grid[br, bc] = Cell.EMPTY
    assert line_of_sight(grid, (ar, ac), (br, bc)) == line_of_sight(
        grid, (br, bc), (ar, ac)
    )


# ------------------------------------------------------ visibility_mask

def test_mask_full_rectangle_in_open_field():
    s = make_state(make_grid(16, 16), [(8, 8)], [(0, 15)])
    vm = visibility_mask(s, "p0", 5, 5)
    assert vm.mask.sum() == 25
    assert vm.owner == "p0"


def test_mask_wall_blocks_everything_behind():
    obstacles = [(r, 9) for r in range(16)]  # solid wall east of the agent
    s = make_state(make_grid(16, 16, obstacles=obstacles), [(8, 8)], [(0, 15)])
    vm = visibility_mask(s, "p0", 9, 9)
    assert not vm.mask[:, 10:].any()
    assert vm.mask[8, 8]


def test_mask_clipped_at_corner():
    s = make_state(make_grid(16, 16), [(0, 0)], [(15, 15)])
    vm = visibility_mask(s, "p0", 5, 5)
    assert vm.mask.sum() == 9  # 3x3 in-bounds part of the 5x5 rectangle
    assert vm.mask[:3, :3].all()


def test_mask_matches_per_cell_line_of_sight():
    rng = np.random.Generator(np.random.PCG64(2))
    for _ in range(40):
        grid = (rng.random((12, 12)) < 0.2).astype(np.int8)
        pos = (int(rng.integers(0, 12)), int(rng.integers(0, 12)))
        grid[pos] = Cell.EMPTY
        s = make_state(grid, [pos], [(0, 0) if pos != (0, 0) else (11, 11)])
        if s.evader_positions[0] == pos:
            continue
        vm = visibility_mask(s, "p0", 7, 5)
        for r in range(12):
            for c in range(12):
                expect = (
                    abs(r - pos[0]) <= 3
                    and abs(c - pos[1]) <= 2
                    and line_of_sight(grid, pos, (r, c))
                )
                assert vm.mask[r, c] == expect


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_mask_monotone_under_added_obstacle(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    grid = (rng.random((10, 10)) < 0.15).astype(np.int8)
    pos = (int(rng.integers(0, 10)), int(rng.integers(0, 10)))
    grid[pos] = Cell.EMPTY
    s = make_state(grid, [pos], [(0, 0)] if pos != (0, 0) else [(9, 9)])
    before = visibility_mask(s, "p0", 9, 9).mask
    empties = np.argwhere(grid == Cell.EMPTY)
    cand = tuple(empties[int(rng.integers(len(empties)))])
    if cand == pos:
        return
    grid2 = grid.copy()
    grid2[cand] = Cell.OBSTACLE
    s2 = make_state(grid2, [pos], s.evader_positions)
    after = visibility_mask(s2, "p0", 9, 9).mask
    assert not (after & ~before).any()


# ---------------------------------------------------------------- observe

def test_observe_self_plane_one_hot():
    s = make_state(make_grid(12, 12, targets=[(6, 6)]), [(2, 3), (9, 9)], [(0, 11)])
    obs = observe(s, "p0", 9, 9)
    assert obs.planes[1].sum() == 1
    assert obs.planes[1][2, 3] == 1
    assert obs.team == "pursuer"


def test_observe_opponent_outside_mask_hidden():
    s = make_state(make_grid(32, 32, targets=[(16, 16)]), [(2, 2)], [(30, 30)])
    obs = observe(s, "p0", 9, 9)
    assert not obs.planes[4].any()


def test_observe_opponent_inside_mask_shown():
    s = make_state(make_grid(32, 32, targets=[(16, 16)]), [(2, 2)], [(4, 4)])
    obs = observe(s, "p0", 9, 9)
    assert obs.planes[4][4, 4] == 1
    assert obs.planes[4].sum() == 1


def test_observe_teammates_global_3v3():
    s = make_state(
        make_grid(32, 32, targets=[(16, 16)]),
        [(0, 0), (1, 0), (2, 0)],
        [(5, 31), (20, 31), (31, 31)],
    )
    obs = observe(s, "e0", 9, 9)
    assert obs.planes[2].sum() == 2  # both teammates, regardless of visibility
    assert obs.planes[2][20, 31] == 1 and obs.planes[2][31, 31] == 1


def test_observe_plane_counts_and_containment():
    rng = np.random.Generator(np.random.PCG64(11))
    for seed in range(20):
        from mapel.env import GameConfig, new_game

        cfg = GameConfig(rows=16, cols=16, n_pursuers=3, n_evaders=3,
                         target_length=2, obstacle_count=3,
                         obstacle_size_range=(1, 2), seed=seed)
        s = new_game(cfg, seed)
        for agent in s.agent_ids():
            obs = observe(s, agent, cfg.sense_length, cfg.sense_width)
            assert obs.planes[1].sum() == 1
            assert obs.planes[2].sum() == 2
            assert obs.planes[3].sum() == cfg.target_length
            assert not (obs.planes[4] & ~obs.planes[0]).any()


def test_observe_captured_evader_still_sensed():
    s = make_state(
        make_grid(12, 12, targets=[(6, 6)]),
        [(2, 2)],
        [(3, 3)],
        captured=[True],
    )
    obs = observe(s, "p0", 9, 9)
    assert obs.planes[4][3, 3] == 1
