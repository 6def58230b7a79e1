import numpy as np
import pytest

from pbbmoea import expr as E
from pbbmoea.dominance import ObjectiveVector, nondominated_filter
from pbbmoea.geometry import Box
from pbbmoea.minimoea import (
    MiniMoeaConfig,
    filter_infeasible,
    fitness_penalized,
    run_mini_moea,
    run_mini_moea_batch,
)
from pbbmoea.problems import ProblemDefinition, builtin, grid_oracle

x1, x2 = E.var(0), E.var(1)
VARIANTS = ["moead", "nsga2"]


def identity():
    return ProblemDefinition("id", 2, [x1, x2], [], [0, 0], [1, 1])


def one_constraint(g):
    return ProblemDefinition("c", 2, [x1, x2], [g], [0, 0], [1, 1])


def test_config_validation():
    assert MiniMoeaConfig("NSGA-II").variant == "nsga2"
    with pytest.raises(ValueError):
        MiniMoeaConfig("spea2")
    with pytest.raises(ValueError):
        MiniMoeaConfig(population=1)
    with pytest.raises(ValueError):
        MiniMoeaConfig(rho=-1)
    with pytest.raises(ValueError):
        MiniMoeaConfig(weights=[[0.5, 0.5]])
    with pytest.raises(ValueError):
        MiniMoeaConfig(population=2, weights=[[0.7, 0.7], [0, 1]])
    W = MiniMoeaConfig().weight_vectors(2)
    assert W.shape == (10, 2) and np.all(W >= 0)
    np.testing.assert_allclose(W.sum(axis=1), 1)
    W3 = MiniMoeaConfig().weight_vectors(3)
    assert len(W3) == 10
    np.testing.assert_allclose(W3.sum(axis=1), 1)


def test_fitness_penalized_examples():
    p = identity()
    assert fitness_penalized([3, 9], [1, 0], [1, 1], p) == 2
    assert fitness_penalized([0.25, 0.5], [0.5, 0.5], [0, 0], p) == 0.25
    c = one_constraint(x1 - 0.75)  # g = -0.5 at x1 = 0.25
    assert fitness_penalized([0.25, 0.5], [1, 0], [0.25, 0], c) == 0.5
    assert fitness_penalized([0.25, 0.5], [1, 0], [0.25, 0], c, rho=3) == 1.5


def test_filter_infeasible_examples():
    p = identity()
    pts = [ObjectiveVector([0.1, 0.2])]
    assert filter_infeasible(pts, p) == pts
    c = one_constraint(x1 - 0.5)
    inside = ObjectiveVector([0.5, 0.3], 0, [0.5, 0.3])
    outside = ObjectiveVector([0.499, 0.3], 0, [0.499, 0.3])
    assert filter_infeasible([inside, outside], c) == [inside]
    assert filter_infeasible([outside], c, tol=1e-2) == [outside]
    with pytest.raises(ValueError):
        filter_infeasible([ObjectiveVector([0.5, 0.3])], c)


@pytest.mark.parametrize("variant", VARIANTS)
def test_zero_width_box(variant):
    p = builtin("t51")
    a = np.array([0.7, 0.2])
    res = run_mini_moea(p, Box(4, a, a), MiniMoeaConfig(variant), 0)
    np.testing.assert_array_equal(res.values, [p.evaluate(a)])
    np.testing.assert_array_equal(res.preimages, [a])
    assert res.box_id == 4 and res.upper_bounds[0].origin_box == 4


@pytest.mark.parametrize("variant", VARIANTS)
def test_identity_contract(variant):
    p = identity()
    box = Box(0, [0.25, 0.5], [0.5, 1.0])
    res = run_mini_moea(p, box, MiniMoeaConfig(variant), 3)
    assert np.all((res.preimages >= box.lo) & (res.preimages <= box.hi))
    np.testing.assert_array_equal(res.values, res.preimages)
    assert len(nondominated_filter(res.values)) == len(res.values)
    np.testing.assert_array_equal(res.ideal, res.values.min(axis=0))
    # the corner (0.25, 0.5) dominates everything; the run should get close to it
    assert np.all(res.ideal - box.lo < 0.05)


@pytest.mark.parametrize("variant", VARIANTS)
def test_harvest_modes(variant):
    p = builtin("t51")
    box = p.domain()
    every = run_mini_moea(p, box, MiniMoeaConfig(variant), 1)
    final = run_mini_moea(p, box, MiniMoeaConfig(variant, harvest="final"), 1)
    assert every.evaluations_used == final.evaluations_used
    assert len(final.values) <= MiniMoeaConfig().population
    # the final population was evaluated, so nothing in it beats the full harvest
    for f in final.values:
        assert np.any(np.all(every.values <= f, axis=1))


@pytest.mark.parametrize("variant", VARIANTS)
def test_determinism_and_batch_independence(variant):
    p = builtin("t55")
    cfg = MiniMoeaConfig(variant)
    lo = np.array([[-3, -3], [0, 0], [-1, 1]], dtype=float)
    hi = lo + 1.5
    ids = [5, 6, 7]
    batch = run_mini_moea_batch(p, lo, hi, ids, cfg, [np.random.default_rng([9, i]) for i in ids])
    again = run_mini_moea_batch(p, lo[1:], hi[1:], ids[1:], cfg, [np.random.default_rng([9, i]) for i in ids[1:]])
    for a, b in zip(batch[1:], again):
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.preimages, b.preimages)


@pytest.mark.parametrize("variant", VARIANTS)
def test_constrained_results_are_feasible(variant):
    p = builtin("t56")
    for i, lo in enumerate([[0, 0], [0.5, 0.5], [0.75, 0.0], [2.5, 2.5]]):
        lo = np.asarray(lo, dtype=float)
        res = run_mini_moea(p, Box(i, lo, lo + 0.4), MiniMoeaConfig(variant), i)
        if len(res.values):
            assert np.all(p.constraint_values(res.preimages) >= 0)
        else:
            assert res.no_feasible and res.ideal is None
    # a box far outside the feasible disc yields no upper bounds
    res = run_mini_moea(p, Box(0, [2.5, 2.5], [3, 3]), MiniMoeaConfig(variant), 0)
    assert res.no_feasible


@pytest.mark.parametrize("variant", VARIANTS)
def test_t51_upper_bounds_near_grid_front(variant):
    p = builtin("t51")
    oracle = grid_oracle(p, 201)
    res = run_mini_moea(p, p.domain(), MiniMoeaConfig(variant), 2)
    # no grid front point dominates a returned bound by more than the grid resolution
    step = oracle.cell_diameter * np.sqrt(3)
    for f in res.values:
        below = np.all(oracle.front <= f - step, axis=1)
        assert not below.any()
