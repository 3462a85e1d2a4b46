"""Record rendering: character grids or raster frames.

Text glyphs: '#' obstacle, 'T' target, 'P' pursuer, 'E' live evader,
'x' captured evader, '.' empty.  Images follow the usual color scheme:
pursuers green, evaders blue, target red.
"""

from __future__ import annotations

import numpy as np

from .env import Cell
from .records import CorruptRecord, EpisodeRecord

GLYPHS = {"empty": ".", "obstacle": "#", "target": "T",
          "pursuer": "P", "evader": "E", "captured": "x"}

COLORS = {
    "empty": (255, 255, 255),
    "obstacle": (40, 40, 40),
    "target": (220, 40, 40),
    "pursuer": (40, 170, 60),
    "evader": (50, 90, 230),
    "captured": (150, 170, 220),
}


def _frames_data(record: EpisodeRecord):
    """Yield (pursuers, evaders, captured) for the initial and each step."""
    state = record.initial_state()
    yield state.grid, list(state.pursuer_positions), list(state.evader_positions), list(
        state.evader_captured
    )
    for entry in record.steps:
        if len(entry.pursuers) != state.n_pursuers or len(entry.evaders) != state.n_evaders:
            raise CorruptRecord(f"step {entry.step} has wrong agent counts")
        for r, c in entry.pursuers + entry.evaders:
            if not (0 <= r < state.rows and 0 <= c < state.cols):
                raise CorruptRecord(f"step {entry.step} position out of bounds")
        yield state.grid, entry.pursuers, entry.evaders, entry.captured


def render_text(record: EpisodeRecord) -> list[str]:
    """One character grid per frame: the spawn state plus every step."""
    frames = []
    for grid, pursuers, evaders, captured in _frames_data(record):
        rows = []
        for r in range(grid.shape[0]):
            row = []
            for c in range(grid.shape[1]):
                if grid[r, c] == Cell.OBSTACLE:
                    row.append(GLYPHS["obstacle"])
                elif grid[r, c] == Cell.TARGET:
                    row.append(GLYPHS["target"])
                else:
                    row.append(GLYPHS["empty"])
            rows.append(row)
        for j, (r, c) in enumerate(evaders):
            rows[r][c] = GLYPHS["captured"] if captured[j] else GLYPHS["evader"]
        for r, c in pursuers:
            rows[r][c] = GLYPHS["pursuer"]
        frames.append("\n".join("".join(row) for row in rows))
    return frames


def render_images(record: EpisodeRecord, cell_px: int = 12) -> list[np.ndarray]:
    """One (rows*px, cols*px, 3) uint8 raster per frame."""
    frames = []
    for grid, pursuers, evaders, captured in _frames_data(record):
        M, N = grid.shape
        img = np.empty((M, N, 3), dtype=np.uint8)
        img[:] = COLORS["empty"]
        img[grid == Cell.OBSTACLE] = COLORS["obstacle"]
        img[grid == Cell.TARGET] = COLORS["target"]
        for j, (r, c) in enumerate(evaders):
            img[r, c] = COLORS["captured"] if captured[j] else COLORS["evader"]
        for r, c in pursuers:
            img[r, c] = COLORS["pursuer"]
        frames.append(np.kron(img, np.ones((cell_px, cell_px, 1), dtype=np.uint8)))
    return frames


def render(record: EpisodeRecord, fmt: str):
    if fmt == "text":
        return render_text(record)
    if fmt == "image-frames":
        return render_images(record)
    raise ValueError(f"unknown render format {fmt!r}")
