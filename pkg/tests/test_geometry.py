import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symctl import Box, InvalidInputError, enumerate_lattice, mu_hat, nearest_lattice_point
from symctl.geometry import Lattice, read_lattice_csv, write_lattice_csv


def brute_axis(lo, hi, mu):
    """Keys k with lo <= 2 mu k <= hi, by scanning a generous integer window."""
    step = 2 * mu
    span = int(max(abs(lo), abs(hi)) / step) + 3
    return [k for k in range(-span, span + 1) if lo - 1e-12 <= step * k <= hi + 1e-12]


def brute_nearest(a, lattice):
    pts = lattice.points()
    keys = lattice.keys()
    d = np.max(np.abs(pts - a), axis=1)
    best = d.min()
    ties = keys[d <= best + 1e-12 * max(1.0, np.abs(a).max())]
    return ties[np.lexsort(ties.T[::-1])[0]]


def test_mu_hat_examples():
    assert mu_hat(Box.from_bounds([[0, 1], [0, 2]])) == 1.0
    assert mu_hat(Box.from_bounds([[-1, 1], [-0.5, 0.5]])) == 1.0
    assert mu_hat(Box.from_bounds([[0, 3]])) == 3.0


def test_degenerate_box_rejected():
    with pytest.raises(InvalidInputError):
        Box.from_bounds([[0, 0], [0, 1]])
    with pytest.raises(InvalidInputError):
        Box.from_bounds([[1, 0]])


def test_pendulum_lattice_counts():
    X = Box.from_bounds([[-math.pi / 4, math.pi / 4], [-0.5, 0.5]])
    assert enumerate_lattice(X, math.pi / 2000).size == 159_819
    U = Box.from_bounds([[-1.5, 1.5]])
    assert enumerate_lattice(U, 0.001).size == 1_501


def test_single_point_lattice():
    lat = enumerate_lattice(Box.from_bounds([[-1, 1]]), 1.0)
    assert lat.size == 1
    assert lat.points().tolist() == [[0.0]]


@settings(max_examples=200, deadline=None)
@given(
    lo=st.floats(-5, 4),
    width=st.floats(0.05, 3),
    mu=st.floats(0.01, 0.5),
)
def test_axis_count_matches_scan(lo, width, mu):
    hi = lo + width
    lat = enumerate_lattice(Box.from_bounds([[lo, hi]]), mu)
    assert lat.keys()[:, 0].tolist() == brute_axis(lo, hi, mu)


def test_keys_lexicographic_and_deterministic():
    box = Box.from_bounds([[-1, 1], [-0.3, 0.7], [0, 0.5]])
    a = enumerate_lattice(box, 0.1).keys()
    b = enumerate_lattice(box, 0.1).keys()
    assert np.array_equal(a, b)
    order = np.lexsort(a.T[::-1])
    assert np.array_equal(order, np.arange(len(a)))
    assert len(a) == np.prod([len(brute_axis(l, h, 0.1)) for l, h in box.bounds()])


def test_index_key_round_trip():
    lat = enumerate_lattice(Box.from_bounds([[-1, 1], [-0.5, 0.5]]), 0.1)
    idx = np.arange(lat.size)
    assert np.array_equal(lat.index_of(lat.key_of(idx)), idx)


def test_nearest_examples():
    lat = enumerate_lattice(Box.from_bounds([[-1, 1]]), 0.001)
    assert nearest_lattice_point([0.0009], lat).tolist() == [0.0]
    # 0.001 sits exactly between keys 0 and 1; lexicographic tie gives 0
    assert nearest_lattice_point([0.001], lat).tolist() == [0.0]
    with pytest.raises(InvalidInputError):
        nearest_lattice_point([1.5], lat)


@settings(max_examples=300, deadline=None)
@given(
    data=st.data(),
    mu=st.floats(0.05, 0.4),
)
def test_nearest_matches_brute_force(data, mu):
    box = Box.from_bounds([[-1, 1.3], [-0.7, 0.9]])
    lat = Lattice(box, mu)
    a = np.array([data.draw(st.floats(-1, 1.3)), data.draw(st.floats(-0.7, 0.9))])
    assert np.array_equal(lat.nearest_key(a), brute_nearest(a, lat))


def test_nearest_ties_on_grid_midpoints():
    lat = Lattice(Box.from_bounds([[-1, 1], [-1, 1]]), 0.25)
    for a in ([0.25, 0.25], [-0.25, 0.75], [0.75, -0.75], [0.25, 0.0]):
        a = np.array(a)
        assert np.array_equal(lat.nearest_key(a), brute_nearest(a, lat))


def test_covering_inside_hull():
    rng = np.random.default_rng(1)
    for _ in range(10_000 // 100):
        lo = rng.uniform(-2, 0, 2)
        hi = lo + rng.uniform(0.2, 2, 2)
        box = Box(lo, hi)
        mu = rng.uniform(0.01, 1.0) * mu_hat(box) / 2
        lat = Lattice(box, mu)
        hull_lo, hull_hi = lat.spacing * lat.kmin, lat.spacing * lat.kmax
        a = rng.uniform(hull_lo, hull_hi, size=(100, 2))
        near = lat.spacing * lat.nearest_keys(a)
        assert np.all(np.max(np.abs(near - a), axis=1) <= mu * (1 + 1e-12))
        # anywhere in the box the gap to the hull is below 2 mu
        b = rng.uniform(lo, hi, size=(100, 2))
        near = lat.spacing * lat.nearest_keys(b)
        assert np.all(np.max(np.abs(near - b), axis=1) < 2 * mu * (1 + 1e-12))


def test_covering_fails_at_unaligned_edge():
    lat = Lattice(Box.from_bounds([[0, 1]]), 0.3)
    assert lat.points()[:, 0].tolist() == [0.0, 0.6]
    gap = abs(1.0 - nearest_lattice_point([1.0], lat)[0])
    assert gap == pytest.approx(0.4)
    assert gap > lat.mu


def test_csv_round_trip():
    lat = enumerate_lattice(Box.from_bounds([[-math.pi / 4, math.pi / 4], [-0.5, 0.5]]), 0.05)
    text = write_lattice_csv(lat)
    back, keys = read_lattice_csv(text)
    assert back == lat
    assert np.array_equal(keys, lat.keys())
    buf = io.StringIO()
    write_lattice_csv(lat, buf)
    assert buf.getvalue() == text


def test_invalid_mu():
    with pytest.raises(InvalidInputError):
        Lattice(Box.from_bounds([[0, 1]]), 0.0)
    with pytest.raises(InvalidInputError):
        Lattice(Box.from_bounds([[0, 1]]), float("nan"))
