import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbbmoea.geometry import Box, BoxArray, DegenerateBoxError, IdCounter, bisect, midpoint, split_coordinate, widths

from conftest import BATCH, EXAMPLES, seeds


def test_midpoint_examples():
    np.testing.assert_array_equal(midpoint(Box(0, [0, 0], [2, 1])), [1, 0.5])
    np.testing.assert_array_equal(midpoint(Box(0, [3, 3], [3, 3])), [3, 3])
    np.testing.assert_array_equal(midpoint(Box(0, [-2, -2, -2], [2, 2, 2])), [0, 0, 0])


def test_width_examples():
    assert widths(Box(0, [0, 0], [1, 1])) == (2, 1, math.sqrt(2))
    assert widths(Box(0, [0], [2])) == (2, 2, 2)
    w = widths(Box(0, [0, 0], [1, 3]))
    assert (w.w1, w.winf) == (4, 3) and w.w2 == pytest.approx(math.sqrt(10))


def test_bisect_examples():
    ids = IdCounter(1)
    a, b = bisect(Box(0, [0, 0], [2, 1]), ids)
    assert a == Box(1, [0, 0], [1, 1]) and b == Box(2, [1, 0], [2, 1])
    a, b = bisect(Box(0, [0, 0], [1, 1]), ids)
    assert a.hi[0] == 0.5 and b.lo[0] == 0.5 and a.hi[1] == 1
    a, b = bisect(Box(0, [0, 0], [1, 1], flag=True), ids)
    assert a.flag and b.flag
    assert len({a.id, b.id, 1, 2}) == 4


def test_degenerate_box_rejected():
    with pytest.raises(DegenerateBoxError, match="degenerate box"):
        bisect(Box(0, [1, 1], [1, 1]), IdCounter())
    with pytest.raises(ValueError):
        Box(0, [1], [0])


def test_split_coordinate_tie_takes_lowest_index():
    assert split_coordinate(np.array([1.0, 2.0, 2.0])) == 1


def test_box_json_roundtrip():
    b = Box(7, [0, -1.5], [1, 2], True)
    assert Box.from_json(b.to_json()) == b


def test_box_array_bisect_all_matches_single_bisection():
    arr = BoxArray.from_boxes([Box(0, [0, 0], [2, 2], True), Box(1, [2, 0], [4, 2], False)])
    kids = arr.bisect_all(IdCounter(10))
    assert list(kids.ids) == [10, 11, 12, 13]
    ref = []
    ids = IdCounter(10)
    for b in arr.boxes():
        ref.extend(bisect(b, ids))
    assert kids.boxes() == ref
    assert kids.widths_consistent()
    np.testing.assert_array_equal(kids.locate(np.array([[0.5, 0.5], [3.5, 1.5], [9, 9]])), [0, 3, -1])


def test_id_counter_take():
    c = IdCounter(5)
    np.testing.assert_array_equal(c.take(3), [5, 6, 7])
    assert c() == 8


@settings(max_examples=EXAMPLES, deadline=None)
@given(st.integers(1, 5), seeds)
def test_bisection_volume_and_cycling(n, seed):
    """Children tile the parent, and a hypercube cycles through coordinates."""
    rng = np.random.default_rng(seed)
    ids = IdCounter(1)
    for _ in range(BATCH):
        lo = rng.uniform(-10, 10, n)
        box = Box(0, lo, lo + rng.uniform(0.01, 10, n))
        a, b = bisect(box, ids)
        assert a.volume() + b.volume() == pytest.approx(box.volume(), rel=1e-12)
        assert np.all(a.lo == box.lo) and np.all(b.hi == box.hi)
        j = split_coordinate(box.width)
        assert a.hi[j] == b.lo[j] and np.count_nonzero(a.hi != b.hi) == 1

        cube = Box(0, lo, lo + rng.uniform(0.01, 10))
        counts = np.zeros(n, dtype=int)
        for side in rng.integers(0, 2, n):
            counts[split_coordinate(cube.width)] += 1
            cube = bisect(cube, ids)[side]
        assert np.all(counts == 1)
