from pathlib import Path

import numpy as np
import pytest

import hazardgrid as hg

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"


@pytest.fixture
def open_map_5x5():
    text = "I....\n.....\n.....\n.....\n....A\n"
    return hg.parse_map(text)


@pytest.fixture
def seeded_map_3x3():
    return hg.parse_map("I..\n.H.\n..A\n")


def random_open_map(rng: np.random.Generator, width: int, height: int, wall_frac: float = 0.2):
    """Random map with I and A guaranteed free; may be disconnected."""
    occupancy = rng.random((height, width)) < wall_frac
    free = [(int(c), int(r)) for r in range(height) for c in range(width) if not occupancy[r, c]]
    while len(free) < 2:
        occupancy = rng.random((height, width)) < wall_frac
        free = [
            (int(c), int(r)) for r in range(height) for c in range(width) if not occupancy[r, c]
        ]
    idx = rng.choice(len(free), size=2, replace=False)
    start, target = free[int(idx[0])], free[int(idx[1])]
    return hg.GridMap(
        width=width,
        height=height,
        occupancy=occupancy,
        start=start,
        targets={"A": frozenset({target})},
    )
