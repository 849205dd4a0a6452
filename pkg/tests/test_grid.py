import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hazardgrid as hg
from hazardgrid.errors import InputError
from hazardgrid.grid import (
    CONTROLS,
    destination,
    shifted,
    transition_distribution,
)

from conftest import SCENARIO_DIR


class TestParseMap:
    def test_minimal_1x1(self):
        gmap = hg.parse_map("I")
        assert (gmap.width, gmap.height) == (1, 1)
        assert gmap.start == (0, 0)
        assert not gmap.occupancy.any()

    def test_2x2_with_obstacle_and_goal(self):
        gmap = hg.parse_map("I#\n.F")
        assert gmap.occupancy[0, 1]
        assert gmap.start == (0, 0)
        assert gmap.goal == frozenset({(1, 1)})

    def test_comments_ignored(self):
        gmap = hg.parse_map("; layout v1\nI.\n.A\n")
        assert gmap.start == (0, 0)
        assert gmap.targets["A"] == frozenset({(1, 1)})

    def test_corridor20_roundtrip(self):
        # 20x20 layout with one target region and three hazard seeds.
        text = (SCENARIO_DIR / "maps" / "corridor20.txt").read_text()
        gmap = hg.parse_map(text)
        assert (gmap.width, gmap.height) == (20, 20)
        assert set(gmap.targets) == {"A"}
        assert len(gmap.hazard_seeds) == 3
        again = hg.parse_map(hg.serialize_map(gmap))
        assert np.array_equal(again.occupancy, gmap.occupancy)
        assert again.start == gmap.start
        assert again.targets == gmap.targets
        assert again.goal == gmap.goal
        assert again.hazard_seeds == gmap.hazard_seeds

    @pytest.mark.parametrize(
        "text",
        ["I.\n...\n", "IX", "..\n..\n", "I.\nI.\n", ""],
        ids=["ragged", "unknown-char", "no-start", "two-starts", "empty"],
    )
    def test_rejects_malformed(self, text):
        with pytest.raises(InputError):
            hg.parse_map(text)

    def test_start_on_obstacle_rejected(self):
        occupancy = np.ones((1, 1), dtype=bool)
        with pytest.raises(InputError):
            hg.GridMap(width=1, height=1, occupancy=occupancy, start=(0, 0))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_parse_serialize_roundtrip_random(data):
    width = data.draw(st.integers(1, 6))
    height = data.draw(st.integers(1, 6))
    chars = data.draw(
        st.lists(
            st.sampled_from(".#AFHB"), min_size=width * height, max_size=width * height
        )
    )
    start_at = data.draw(st.integers(0, width * height - 1))
    chars[start_at] = "I"
    rows = ["".join(chars[r * width : (r + 1) * width]) for r in range(height)]
    text = "\n".join(rows) + "\n"
    gmap = hg.parse_map(text)
    assert hg.serialize_map(gmap) == text


class TestNeighbors:
    def test_interior_cell(self, open_map_5x5):
        assert set(hg.neighbors(open_map_5x5, (2, 2))) == {(2, 1), (2, 3), (3, 2), (1, 2)}

    def test_corner_cell(self, open_map_5x5):
        assert set(hg.neighbors(open_map_5x5, (0, 0))) == {(0, 1), (1, 0)}

    def test_walled_in_cell(self):
        gmap = hg.parse_map("###\n#I#\n###")
        assert hg.neighbors(gmap, (1, 1)) == []

    def test_rejects_obstacle(self):
        gmap = hg.parse_map("I#\n..")
        with pytest.raises(ValueError):
            hg.neighbors(gmap, (1, 0))


class TestValidControls:
    def test_open_interior(self, open_map_5x5):
        assert hg.valid_controls(open_map_5x5, (2, 2)) == ("N", "S", "E", "W", "0")

    def test_fully_walled(self):
        gmap = hg.parse_map("###\n#I#\n###")
        assert hg.valid_controls(gmap, (1, 1)) == ("0",)

    def test_wall_to_the_north(self):
        gmap = hg.parse_map("###\n.I.\n...")
        assert hg.valid_controls(gmap, (1, 1)) == ("S", "E", "W", "0")


def test_manhattan():
    assert hg.manhattan((0, 0), (0, 0)) == 0
    assert hg.manhattan((1, 2), (4, 2)) == 3
    assert hg.manhattan((0, 0), (3, 4)) == 7


class TestMotion:
    def test_deterministic_move(self, open_map_5x5):
        rng = np.random.default_rng(0)
        assert hg.motion_step(hg.MotionModel(), open_map_5x5, (3, 3), "E", rng) == (4, 3)

    def test_stay_always_stays(self, open_map_5x5):
        rng = np.random.default_rng(0)
        model = hg.MotionModel(slip=0.9)
        assert hg.motion_step(model, open_map_5x5, (2, 2), "0", rng) == (2, 2)

    def test_invalid_control_raises(self, open_map_5x5):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            hg.motion_step(hg.MotionModel(), open_map_5x5, (0, 0), "N", rng)

    def test_slip_frequency_within_3_sigma(self, open_map_5x5):
        # Binomial oracle: stay frequency ~ slip over 1e5 draws.
        slip = 0.2
        n = 100_000
        rng = np.random.default_rng(1234)
        model = hg.MotionModel(slip=slip)
        stays = sum(
            hg.motion_step(model, open_map_5x5, (2, 2), "N", rng) == (2, 2)
            for _ in range(n)
        )
        sigma = (slip * (1 - slip) / n) ** 0.5
        assert abs(stays / n - slip) <= 3 * sigma

    def test_distribution_sums_to_one_on_support(self, open_map_5x5):
        rng = np.random.default_rng(7)
        for _ in range(50):
            x = (int(rng.integers(0, 5)), int(rng.integers(0, 5)))
            for u in hg.valid_controls(open_map_5x5, x):
                dist = transition_distribution(
                    hg.MotionModel(slip=float(rng.random())), open_map_5x5, x, u
                )
                assert abs(sum(p for _, p in dist) - 1.0) < 1e-15
                support = {c for c, _ in dist}
                allowed = set(hg.neighbors(open_map_5x5, x)) | {x}
                assert support <= allowed


def test_shifted_matches_naive():
    rng = np.random.default_rng(3)
    a = rng.random((4, 5))
    for dc, dr in [(0, -1), (0, 1), (1, 0), (-1, 0), (1, 1), (-1, -1), (0, 0)]:
        out = shifted(a, dc, dr, fill=-1.0)
        for r in range(4):
            for c in range(5):
                rr, cc = r + dr, c + dc
                expect = a[rr, cc] if 0 <= rr < 4 and 0 <= cc < 5 else -1.0
                assert out[r, c] == expect


def test_shortest_path_simple():
    gmap = hg.parse_map("I.#\n..#\n..A")
    path = hg.shortest_path(gmap, (0, 0), {(2, 2)})
    assert path is not None
    assert path[0] == (0, 0) and path[-1] == (2, 2)
    assert len(path) == 5  # 4 moves
    for a, b in zip(path, path[1:]):
        assert hg.manhattan(a, b) == 1
    assert hg.shortest_path(gmap, (0, 0), {(2, 0)}) is None


def test_shortest_path_respects_blocked():
    gmap = hg.parse_map("I..\n...\n..A")
    blocked = {(1, 0), (1, 1)}
    path = hg.shortest_path(gmap, (0, 0), {(2, 2)}, blocked=blocked)
    assert path is not None
    assert not (set(path) & blocked)


def test_destination_offsets():
    assert destination((3, 3), "N") == (3, 2)
    assert destination((3, 3), "S") == (3, 4)
    assert destination((3, 3), "E") == (4, 3)
    assert destination((3, 3), "W") == (2, 3)
    assert [destination((0, 0), u) for u in CONTROLS[:4]] == [(0, -1), (0, 1), (1, 0), (-1, 0)]
