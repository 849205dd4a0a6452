import itertools
import math

import numpy as np
import pytest

import hazardgrid as hg
from hazardgrid import hazard
from hazardgrid.errors import ResourceLimitError

SQRT2 = math.sqrt(2.0)


def empty_state(gmap):
    return np.zeros((gmap.height, gmap.width), dtype=bool)


class TestNeighborCounts:
    def test_empty_hazard(self, open_map_5x5):
        assert hg.neighbor_counts(open_map_5x5, empty_state(open_map_5x5), (2, 2)) == (0, 0)

    def test_all_eight_contaminated(self, open_map_5x5):
        y = empty_state(open_map_5x5)
        for dc in (-1, 0, 1):
            for dr in (-1, 0, 1):
                if dc or dr:
                    y[2 + dr, 2 + dc] = True
        assert hg.neighbor_counts(open_map_5x5, y, (2, 2)) == (4, 4)

    def test_single_diagonal(self, open_map_5x5):
        y = empty_state(open_map_5x5)
        y[1, 1] = True
        assert hg.neighbor_counts(open_map_5x5, y, (2, 2)) == (0, 1)

    def test_off_grid_counts_as_clean(self, open_map_5x5):
        y = empty_state(open_map_5x5)
        assert hg.neighbor_counts(open_map_5x5, y, (0, 0)) == (0, 0)

    def test_obstacle_rejected(self):
        gmap = hg.parse_map("I#\n..")
        with pytest.raises(ValueError):
            hg.neighbor_counts(gmap, empty_state(gmap), (1, 0))


class TestPSafe:
    def test_no_contaminated_neighbors(self, open_map_5x5):
        model = hg.FireModel.uniform(open_map_5x5, 0.7)
        assert hg.p_safe(model, open_map_5x5, empty_state(open_map_5x5), (2, 2)) == 1.0

    def test_one_direct_neighbor(self, open_map_5x5):
        model = hg.FireModel.uniform(open_map_5x5, 0.2)
        y = empty_state(open_map_5x5)
        y[2, 1] = True
        assert hg.p_safe(model, open_map_5x5, y, (2, 2)) == pytest.approx(0.8, abs=1e-15)

    def test_direct_plus_diagonal(self, open_map_5x5):
        model = hg.FireModel.uniform(open_map_5x5, 0.2)
        y = empty_state(open_map_5x5)
        y[2, 1] = True
        y[1, 1] = True
        expected = 0.8 * (1.0 - 0.2 / SQRT2)  # = 0.6868629150101524
        assert hg.p_safe(model, open_map_5x5, y, (2, 2)) == pytest.approx(
            0.6868629150101524, abs=1e-15
        )
        assert expected == pytest.approx(0.6868629150101524, abs=1e-15)

    def test_contaminated_cell_rejected(self, open_map_5x5):
        model = hg.FireModel.uniform(open_map_5x5, 0.2)
        y = empty_state(open_map_5x5)
        y[2, 2] = True
        with pytest.raises(ValueError):
            hg.p_safe(model, open_map_5x5, y, (2, 2))


class TestStep:
    def test_zero_rate_is_frozen(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.0)
        y = hg.initial_state(seeded_map_3x3)
        out = hg.step(model, seeded_map_3x3, y, np.random.default_rng(0))
        assert np.array_equal(out, y)

    def test_fully_contaminated_absorbing(self):
        gmap = hg.parse_map("I.\n..")
        model = hg.FireModel.uniform(gmap, 0.9)
        y = np.ones((2, 2), dtype=bool)
        out = hg.step(model, gmap, y, np.random.default_rng(0))
        assert np.array_equal(out, y)

    def test_never_contaminates_obstacles(self):
        gmap = hg.parse_map("IH\n.#")
        model = hg.FireModel.uniform(gmap, 1.0)
        y = hg.initial_state(gmap)
        for seed in range(20):
            out = hg.step(model, gmap, y, np.random.default_rng(seed))
            assert not out[1, 1]

    def test_marginals_match_analytic_within_3_sigma(self):
        # 2x2, one seed, p_f = 0.5: per-cell one-step contamination frequency
        # against 1 - p_n computed per cell.
        gmap = hg.parse_map("H.\n.I")
        model = hg.FireModel.uniform(gmap, 0.5)
        y0 = hg.initial_state(gmap)
        n = 100_000
        episodes = hg.sample_episodes(model, gmap, y0, 1, n, master_seed=77)
        after = episodes[:, 1]
        for cell in [(1, 0), (0, 1), (1, 1)]:
            p_expect = 1.0 - hg.p_safe(model, gmap, y0, cell)
            freq = after[:, cell[1], cell[0]].mean()
            sigma = math.sqrt(p_expect * (1 - p_expect) / n)
            assert abs(freq - p_expect) <= 3 * sigma, cell

    def test_dimension_mismatch(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.5)
        with pytest.raises(ValueError):
            hg.step(model, seeded_map_3x3, np.zeros((2, 2), dtype=bool), np.random.default_rng(0))


class TestTransitionProb:
    def test_absorbing_identity(self):
        gmap = hg.parse_map("I.\n..")
        model = hg.FireModel.uniform(gmap, 0.3)
        y = np.ones((2, 2), dtype=bool)
        assert hg.transition_prob(model, gmap, y, y) == 1.0

    def test_clearing_is_impossible(self):
        gmap = hg.parse_map("I.\n..")
        model = hg.FireModel.uniform(gmap, 0.3)
        y = np.zeros((2, 2), dtype=bool)
        y[0, 0] = True
        assert hg.transition_prob(model, gmap, np.zeros((2, 2), dtype=bool), y) == 0.0

    def test_rows_normalize_by_enumeration(self):
        # Oracle: enumerate all 16 successor states of every 2x2 state.
        gmap = hg.parse_map("I.\n..")
        model = hg.FireModel.uniform(gmap, 0.37)
        cells = [(0, 0), (1, 0), (0, 1), (1, 1)]
        for bits in itertools.product([False, True], repeat=4):
            y = np.zeros((2, 2), dtype=bool)
            for (c, r), b in zip(cells, bits):
                y[r, c] = b
            total = 0.0
            for bits2 in itertools.product([False, True], repeat=4):
                y2 = np.zeros((2, 2), dtype=bool)
                for (c, r), b in zip(cells, bits2):
                    y2[r, c] = b
                total += hg.transition_prob(model, gmap, y2, y)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_matches_enumeration_matrix(self):
        # Cross-validation: the sparse enumeration kernel is built from
        # per-cell factors independently of transition_prob's array path.
        gmap = hg.parse_map("I.#\n.H.")
        model = hg.FireModel.uniform(gmap, 0.4)
        enum = hg.HazardEnumeration(gmap)
        matrix = enum.transition_matrix(model).toarray()
        rng = np.random.default_rng(5)
        for _ in range(60):
            a = int(rng.integers(enum.n_states))
            b = int(rng.integers(enum.n_states))
            direct = hg.transition_prob(model, gmap, enum.matrix_of(b), enum.matrix_of(a))
            assert direct == pytest.approx(matrix[a, b], abs=1e-14)

    def test_rows_normalize_2x2_and_2x3_within_1e9(self):
        for text in ("I.\n..", "I..\n..."):
            gmap = hg.parse_map(text)
            model = hg.FireModel.uniform(gmap, 0.31)
            enum = hg.HazardEnumeration(gmap)
            rows = np.asarray(enum.transition_matrix(model).sum(axis=1)).ravel()
            assert np.all(np.abs(rows - 1.0) <= 1e-9)


class TestEpisodes:
    def test_horizon_zero(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.5)
        y0 = hg.initial_state(seeded_map_3x3)
        ep = hg.sample_episode(model, seeded_map_3x3, y0, 0, np.random.default_rng(0))
        assert ep.shape == (1, 3, 3)
        assert np.array_equal(ep[0], y0)

    def test_zero_rate_all_equal(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.0)
        y0 = hg.initial_state(seeded_map_3x3)
        ep = hg.sample_episode(model, seeded_map_3x3, y0, 6, np.random.default_rng(0))
        assert np.all(ep == y0[None])

    def test_certain_spread_bounds(self):
        # Deterministic-spread oracle: with p_f = 1, direct spread is certain,
        # so the Manhattan disc is always covered; a cell can catch fire only
        # from its 8-neighborhood, so the Chebyshev disc always contains it.
        gmap = hg.parse_map("I....\n.....\n..H..\n.....\n.....")
        model = hg.FireModel.uniform(gmap, 1.0)
        y0 = hg.initial_state(gmap)
        seed_cell = (2, 2)
        for trial in range(10):
            ep = hg.sample_episode(model, gmap, y0, 4, np.random.default_rng(trial))
            for t in range(5):
                for r in range(5):
                    for c in range(5):
                        manhattan = abs(c - seed_cell[0]) + abs(r - seed_cell[1])
                        chebyshev = max(abs(c - seed_cell[0]), abs(r - seed_cell[1]))
                        if manhattan <= t:
                            assert ep[t, r, c]
                        if chebyshev > t:
                            assert not ep[t, r, c]

    def test_monotone_growth(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.4)
        y0 = hg.initial_state(seeded_map_3x3)
        eps = hg.sample_episodes(model, seeded_map_3x3, y0, 8, 500, master_seed=3)
        assert np.all(eps[:, :-1] <= eps[:, 1:])

    def test_batched_equals_sequential(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.35)
        y0 = hg.initial_state(seeded_map_3x3)
        batched = hg.sample_episodes(model, seeded_map_3x3, y0, 5, 40, master_seed=11)
        for e in range(40):
            single = hg.sample_episode(
                model, seeded_map_3x3, y0, 5, hazard.episode_rng(11, e)
            )
            assert np.array_equal(batched[e], single)

    def test_prefix_property(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.35)
        y0 = hg.initial_state(seeded_map_3x3)
        small = hg.sample_episodes(model, seeded_map_3x3, y0, 5, 60, master_seed=11)
        large = hg.sample_episodes(model, seeded_map_3x3, y0, 5, 120, master_seed=11)
        assert np.array_equal(large[:60], small)

    def test_chunking_invisible(self, seeded_map_3x3):
        model = hg.FireModel.uniform(seeded_map_3x3, 0.35)
        y0 = hg.initial_state(seeded_map_3x3)
        whole = hg.sample_episodes(model, seeded_map_3x3, y0, 5, 30, master_seed=4)
        tiny_chunks = np.concatenate(
            [
                states
                for _, states in hazard.iter_episode_chunks(
                    model, seeded_map_3x3, y0, 5, 30, 4, max_chunk_bytes=1
                )
            ]
        )
        assert np.array_equal(whole, tiny_chunks)


def test_enumeration_limit():
    gmap = hg.parse_map("I....\n.....\n.....\n....A")
    with pytest.raises(ResourceLimitError):
        hg.HazardEnumeration(gmap)


def test_enumeration_roundtrip(seeded_map_3x3):
    enum = hg.HazardEnumeration(seeded_map_3x3)
    rng = np.random.default_rng(0)
    for _ in range(20):
        mask = int(rng.integers(enum.n_states))
        assert enum.mask_of(enum.matrix_of(mask)) == mask
