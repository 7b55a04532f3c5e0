import numpy as np
import pytest
from scipy import stats

from dfassoc.errors import (DegenerateInputError, OracleSizeError, ShapeError,
                            UnsupportedError)
from dfassoc.grids import GridSpec, ReferenceGrid, make_halton, make_lattice_1d
from dfassoc.oracles import IndependentNormal, IndependentUniform, ProductMarginal
from dfassoc.ranks import (assignment_cost, brute_force_ranks, compute_ranks,
                           population_rank_oracle)


def test_single_point():
    r = compute_ranks([[0.3]], make_lattice_1d(1))
    assert r.perm.tolist() == [0] and r.ranks.tolist() == [[1.0]]
    assert brute_force_ranks([[0.3]], make_lattice_1d(1)).perm.tolist() == [0]


def test_univariate_classical_ranks():
    r = compute_ranks([0.9, -2.3, 0.4], make_lattice_1d(3))
    assert np.allclose(r.ranks[:, 0], [1.0, 1 / 3, 2 / 3])
    r2 = compute_ranks([0.9, -2.3, 0.4], make_lattice_1d(3), method="lsa")
    assert r2.perm.tolist() == r.perm.tolist()


def test_two_point_brute_force():
    grid = ReferenceGrid(GridSpec("iid", 2, 2, 0), np.array([[0.0, 0.0], [1.0, 1.0]]))
    r = brute_force_ranks([[0.9, 0.9], [0.1, 0.1]], grid)
    assert r.perm.tolist() == [1, 0]


def test_n6_matches_exhaustive():
    x = np.random.default_rng(6).standard_normal((6, 2))
    grid = make_halton(6, 2)
    fast, slow = compute_ranks(x, grid), brute_force_ranks(x, grid)
    assert fast.perm.tolist() == slow.perm.tolist()
    assert fast.cost == pytest.approx(slow.cost, rel=1e-12)


def test_cost_is_recomputed_cost():
    x = np.random.default_rng(1).random((40, 3))
    grid = make_halton(40, 3)
    r = compute_ranks(x, grid)
    assert abs(r.cost - assignment_cost(x, grid, r.perm)) <= 1e-9 * 40
    assert sorted(r.perm.tolist()) == list(range(40))


def test_permutation_equivariance():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 2))
    grid = make_halton(30, 2)
    p = rng.permutation(30)
    assert np.array_equal(compute_ranks(x[p], grid).perm, compute_ranks(x, grid).perm[p])


def test_errors():
    grid = make_halton(4, 2)
    with pytest.raises(ShapeError):
        compute_ranks(np.zeros((3, 2)), grid)
    with pytest.raises(ShapeError):
        compute_ranks(np.zeros((4, 3)), grid)
    with pytest.raises(DegenerateInputError):
        compute_ranks([[0, 0], [0, 0], [1, 1], [2, 2]], grid)
    with pytest.raises(OracleSizeError):
        brute_force_ranks(np.random.default_rng(0).random((11, 1)), make_lattice_1d(11))


def test_population_rank_oracle():
    x = np.array([[0.2, 0.7]])
    assert np.array_equal(population_rank_oracle(ProductMarginal("uniform", 2), x), x)
    assert population_rank_oracle(ProductMarginal("normal"), 0.0) == 0.5
    r = population_rank_oracle(IndependentNormal(2, 2), np.array([0.0, 1.96]), side="y")
    assert np.allclose(r, [0.5, 0.975], atol=1e-4)
    with pytest.raises(UnsupportedError):
        population_rank_oracle(object(), 0.0)


def _rank_error(n, seed):
    x = np.random.default_rng(seed).standard_normal((n, 2))
    r = compute_ranks(x, make_halton(n, 2))
    return np.mean(np.linalg.norm(r.ranks - stats.norm.cdf(x), axis=1))


def test_empirical_ranks_approach_population_ranks():
    e50, e200, e2000 = (np.mean([_rank_error(n, s) for s in range(3)]) for n in (50, 200, 2000))
    assert e2000 < e200 < e50
    assert e2000 < 0.1


def test_rank_of_first_row_is_uniform_over_grid():
    n, reps = 5, 4000
    grid = make_halton(n, 2)
    model = IndependentUniform(2, 1)
    counts = np.zeros(n)
    rng = np.random.default_rng(3)
    for _ in range(reps):
        counts[compute_ranks(model.marginal_x.sample(rng, n), grid).perm[0]] += 1
    se = np.sqrt(reps * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - reps / n) <= 3.5 * se)
