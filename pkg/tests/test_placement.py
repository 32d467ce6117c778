from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamrelay.placement import (load_csv, make_grid, make_random, min_density, random_amplitude,
                                 required_count, save_csv, window_counts)


def test_grid_single_node():
    g = make_grid(1, 1)
    assert g.size == 1 and g.positions.tolist() == [[0.0, 0.0]]


def test_grid_large_count():
    assert make_grid(186, 1705).size == 317_130


def test_grid_two_by_two():
    assert sorted(map(tuple, make_grid(2, 2).positions.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_grid_rejects_empty():
    with pytest.raises(ValueError):
        make_grid(0, 5)


def test_random_is_reproducible_and_bounded():
    a = make_random(4, 11, 3.0)
    b = make_random(4, 11, 3.0)
    assert np.array_equal(a.positions, b.positions)
    assert np.all((a.positions >= 0) & (a.positions <= 2))


def test_random_seeds_differ():
    a = make_random(100_000, 1, 3.0).positions
    b = make_random(100_000, 2, 3.0).positions
    assert not np.array_equal(np.sort(a, axis=0), np.sort(b, axis=0))


def test_random_range_uses_natural_log():
    assert random_amplitude(100_000, 3.0) == pytest.approx(3 * math.sqrt(math.log(1e5)), rel=1e-15)
    assert make_random(100_000, 0, 3.0).tx_range == pytest.approx(10.17921, abs=1e-5)


def _brute_windows(pts, side, lo, hi):
    step = side / 4
    n = int(math.floor((hi - lo) / step + 1e-9)) - 3
    out = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            x0, y0 = lo + i * step, lo + j * step
            out[i, j] = np.sum((pts[:, 0] >= x0) & (pts[:, 0] < x0 + side) & (pts[:, 1] >= y0) & (pts[:, 1] < y0 + side))
    return out


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(2.0, 6.0))
def test_window_counts_match_brute_force(seed, side):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 20, (300, 2))
    counts, _, _ = window_counts(pts, 0.0, 20.0, 0.0, 20.0, side)
    ref = _brute_windows(pts, side, 0.0, 20.0)
    assert counts.shape == ref.shape
    assert np.array_equal(counts, ref)


def test_density_whole_region():
    nodes = make_random(400, 5, 3.0)
    rep = min_density(nodes, nodes.side)
    assert rep.min_count == 400 - int(np.sum(np.any(nodes.positions >= nodes.side, axis=1)))


def test_density_tiny_window_can_fail():
    nodes = make_random(200, 1, 3.0)
    rep = min_density(nodes, 0.3)
    assert rep.required == required_count(200)
    assert not rep.passed


def test_density_rejects_grid():
    with pytest.raises(ValueError, match="random model"):
        min_density(make_grid(3, 3), 1.0)


def test_density_passes_at_range_window():
    nodes = make_random(100_000, 0, 3.0)
    rep = min_density(nodes, 3.0 * math.sqrt(math.log(1e5)))
    assert rep.passed and rep.windows > 0


def test_csv_round_trip(tmp_path):
    nodes = make_random(50, 9, 3.0)
    path = tmp_path / "nodes.csv"
    save_csv(nodes, path)
    back = load_csv(path, k=3.0)
    assert np.array_equal(back.positions, nodes.positions)
    assert back.tx_amplitude == nodes.tx_amplitude


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        load_csv(path)
