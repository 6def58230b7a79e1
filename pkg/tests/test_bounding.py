import numpy as np
import pytest

from pbbmoea import expr as E
from pbbmoea.bounding import (
    DEBudget,
    LowerBoundSet,
    coincident_coordinates,
    ideal_point,
    improve_lower_bound,
    lipschitz_lower_bound,
    lipschitz_lower_bounds,
    verify_partial_lower_bound,
    verify_partial_lower_bounds,
)
from pbbmoea.geometry import Box
from pbbmoea.minimoea import MiniMoeaConfig, run_mini_moea
from pbbmoea.problems import ProblemDefinition, builtin

x1, x2 = E.var(0), E.var(1)


def three_objective_example():
    """F = (x1 x2, x1 (1 - x2), 1 - x1) on [0,1]^2; the front lies in f1 + f2 + f3 = 1."""
    return ProblemDefinition("ex3", 2, [x1 * x2, x1 * (1 - x2), 1 - x1], [], [0, 0], [1, 1])


def grid_in(box, k=50):
    axes = [np.linspace(box.lo[i], box.hi[i], k) for i in range(len(box.lo))]
    return np.stack([a.reshape(-1) for a in np.meshgrid(*axes, indexing="ij")], axis=1)


def covers(points, F):
    """Every row of F is weakly dominated by some row of points."""
    return np.all(np.any(np.all(points[None] <= F[:, None] + 1e-12, axis=2), axis=1))


def test_lipschitz_lower_bound_examples():
    lin = builtin("linear")
    lb = lipschitz_lower_bound(lin, Box(0, [0], [1]))
    assert not lb.improved
    np.testing.assert_array_equal(lb.points, [[0, 0]])
    p = ProblemDefinition("sum", 2, [x1 + x2, x1 - x2], [], [0, 0], [1, 1])
    assert lipschitz_lower_bound(p, Box(0, [0, 0], [1, 1])).points[0, 0] == 0
    t51 = builtin("t51")
    a = np.array([0.3, 1.7])
    np.testing.assert_array_equal(lipschitz_lower_bound(t51, Box(0, a, a)).points[0], t51.evaluate(a))


def test_lower_bound_set_shape_rules():
    with pytest.raises(ValueError):
        LowerBoundSet(0, [[0, 0], [1, 1]], False)
    lb = LowerBoundSet(3, [[0, 0.5]])
    assert lb.to_json() == {"box_id": 3, "improved": False, "points": [[0.0, 0.5]]}


def test_ideal_point_examples():
    np.testing.assert_array_equal(ideal_point([[1, 2], [2, 1]]), [1, 1])
    np.testing.assert_array_equal(ideal_point([[3, 4]]), [3, 4])
    np.testing.assert_array_equal(ideal_point([[0, 5], [5, 0], [2, 2]]), [0, 0])
    with pytest.raises(ValueError):
        ideal_point(np.empty((0, 2)))


@pytest.mark.parametrize("seed", range(5))
def test_verify_linear_pair(seed):
    lin = builtin("linear")
    box = lin.domain()
    # x <= 0.4 and x >= 0.6 cannot both hold
    assert verify_partial_lower_bound(lin, box, [0.4, 0.4], seed).accepted
    # any x in [0.3, 0.7] is a witness
    v = verify_partial_lower_bound(lin, box, [0.7, 0.7], seed)
    assert not v.accepted
    assert 0.3 <= v.witness[0] <= 0.7
    np.testing.assert_array_equal(v.witness_image, lin.evaluate(v.witness))


def test_verify_zero_width_box():
    t51 = builtin("t51")
    a = np.array([0.5, 0.5])
    v = verify_partial_lower_bound(t51, Box(0, a, a), t51.evaluate(a) + 1, 0)
    assert not v.accepted
    # equality is not domination
    assert verify_partial_lower_bound(t51, Box(0, a, a), t51.evaluate(a), 0).accepted


def test_verify_batch_matches_single():
    t51 = builtin("t51")
    lo = np.array([[0, 0], [1, 0], [0.5, 1]])
    hi = lo + 0.5
    Z = np.array([[0.4, 2.5], [1.4, 0.2], [0.6, 2.0]])
    rngs = [np.random.default_rng(s) for s in range(3)]
    batch = verify_partial_lower_bounds(t51, lo, hi, Z, rngs)
    for i in range(3):
        single = verify_partial_lower_bound(t51, Box(0, lo[i], hi[i]), Z[i], np.random.default_rng(i))
        assert single.accepted == batch.accepted[i]
        np.testing.assert_array_equal(single.witness, batch.witness[i])


def test_improve_examples():
    l = LowerBoundSet(1, [[0, 0]])
    got = improve_lower_bound(l, [0.3, 0.4], True)
    assert got.improved and got.box_id == 1
    np.testing.assert_array_equal(got.points, [[0.3, 0], [0, 0.4]])
    # coincident coordinate: the exchange would keep l itself
    l3 = LowerBoundSet(1, [[0, 0, 0]])
    np.testing.assert_array_equal(coincident_coordinates([0, 0.2, 0.2], [0, 0, 0]), [0])
    assert improve_lower_bound(l3, [0, 0.2, 0.2], True) is l3
    assert improve_lower_bound(l, [0.3, 0.4], False) is l
    # an improved set is not improved again
    assert improve_lower_bound(got, [0.5, 0.5], True) is got


def test_three_objective_example_is_partial_bound():
    p = three_objective_example()
    for seed in range(5):
        assert verify_partial_lower_bound(p, p.domain(), [0, 0.2, 0.2], seed).accepted
    l = LowerBoundSet(0, [[0, 0, 0]])
    v = verify_partial_lower_bound(p, p.domain(), [0, 0.2, 0.2], 0)
    assert improve_lower_bound(l, [0, 0.2, 0.2], v) is l


@pytest.mark.parametrize("name", ["t51", "t55", "t56", "linear"])
def test_lower_bound_soundness_on_random_boxes(name):
    p = builtin(name)
    rng = np.random.default_rng(11)
    for _ in range(40):
        a, b = rng.uniform(p.lo, p.hi, (2, p.n))
        box = Box(0, np.minimum(a, b), np.maximum(a, b))
        l = lipschitz_lower_bound(p, box).points[0]
        F = p.evaluate(grid_in(box, 50 if p.n == 2 else 500))
        assert np.all(l <= F + 1e-12)


@pytest.mark.parametrize("name", ["t51", "t55"])
def test_improved_set_soundness(name):
    """Whenever verification accepts, the exchanged set still covers every grid image."""
    p = builtin(name)
    rng = np.random.default_rng(5)
    applied = 0
    for trial in range(60):
        lo = rng.uniform(p.lo, p.hi - (p.hi - p.lo) / 4)
        box = Box(trial, lo, lo + (p.hi - p.lo) / 4)
        res = run_mini_moea(p, box, MiniMoeaConfig(), trial)
        l = lipschitz_lower_bound(p, box)
        v = verify_partial_lower_bound(p, box, res.ideal, trial, DEBudget())
        imp = improve_lower_bound(l, res.ideal, v)
        if not imp.improved:
            continue
        applied += 1
        assert len(imp.points) == p.m
        # point i differs from l only in coordinate i, and did not move down
        # (up to rounding in l, which is computed rather than attained)
        for i, row in enumerate(imp.points):
            diff = np.flatnonzero(row != l.points[0])
            assert list(diff) == [i] and row[i] >= l.points[0][i] - 1e-12
        assert covers(imp.points, p.evaluate(grid_in(box)))
    assert applied > 0


def test_lower_bound_shrinks_around_pareto_point():
    p = builtin("t51")
    xs = np.array([0.5, 0.0])
    fs = p.evaluate(xs)
    d = []
    for j in range(6):
        w = 0.5 / 2**j
        lb = lipschitz_lower_bounds(p, np.array([[xs[0] - w, 0]]), np.array([[xs[0] + w, 2 * w]]))[0]
        d.append(np.linalg.norm(lb - fs))
    ratios = np.array(d[1:]) / np.array(d[:-1])
    assert np.all(ratios < 1)
