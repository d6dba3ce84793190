import itertools

import numpy as np
import pytest

from kacsim import assignment


def brute_force_cost(u, v):
    n = u.shape[0]
    cost = assignment.pairing_cost(u, v)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, cost[np.arange(n), perm].sum())
    return best


def test_matches_brute_force():
    rng = np.random.default_rng(41)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(2, 5))
        u = rng.standard_normal((n, d))
        v = rng.standard_normal((n, d))
        perm, total = assignment.solve_assignment(assignment.pairing_cost(u, v))
        assert sorted(perm) == list(range(n))
        np.testing.assert_allclose(total, brute_force_cost(u, v), atol=1e-10)


def test_sym_distance_axis_swap():
    """Two antipodal pairs on different axes sit at distance sqrt(2): the
    best matching pairs e1 with e2 and -e1 with -e2 (or the flip), each at
    squared cost 2."""
    u = np.array([[1.0, 0.0], [-1.0, 0.0]])
    v = np.array([[0.0, 1.0], [0.0, -1.0]])
    np.testing.assert_allclose(assignment.sym_distance(u, v), np.sqrt(2.0),
                               atol=1e-12)


def test_sym_distance_permutation_invariance():
    rng = np.random.default_rng(42)
    u = rng.standard_normal((12, 3))
    perm = rng.permutation(12)
    assert assignment.sym_distance(u, u[perm]) < 1e-12
    v = rng.standard_normal((12, 3))
    d0 = assignment.sym_distance(u, v)
    np.testing.assert_allclose(assignment.sym_distance(u, v[perm]), d0,
                               atol=1e-12)


def test_sym_distance_metric_axioms():
    rng = np.random.default_rng(43)
    for _ in range(200):
        u = rng.standard_normal((8, 3))
        v = rng.standard_normal((8, 3))
        w = rng.standard_normal((8, 3))
        duv = assignment.sym_distance(u, v)
        assert abs(duv - assignment.sym_distance(v, u)) < 1e-12
        assert duv <= (assignment.sym_distance(u, w)
                       + assignment.sym_distance(w, v) + 1e-10)
        # matching can only improve on the identity pairing
        assert duv <= np.sqrt(np.mean(np.sum((u - v) ** 2, axis=1))) + 1e-12


def test_optimal_pairing_identity_for_equal_inputs():
    rng = np.random.default_rng(44)
    u = rng.standard_normal((20, 3))
    perm = assignment.optimal_pairing(u, u)
    cost = assignment.pairing_cost(u, u)
    assert cost[np.arange(20), perm].sum() < 1e-12


def test_pairing_cost_nonnegative():
    rng = np.random.default_rng(45)
    u = rng.standard_normal((50, 4))
    v = rng.standard_normal((50, 4))
    c = assignment.pairing_cost(u, v)
    assert np.all(c >= 0.0)
    np.testing.assert_allclose(c[3, 7], np.sum((u[3] - v[7]) ** 2),
                               atol=1e-10)


def test_shape_and_size_guards():
    with pytest.raises(ValueError):
        assignment.sym_distance(np.zeros((3, 2)), np.zeros((4, 2)))
    big = assignment.MAX_ASSIGNMENT_SIZE + 1
    with pytest.raises(assignment.SizeLimit):
        assignment.solve_assignment(np.zeros((big, big)))
    with pytest.raises(ValueError):
        assignment.solve_assignment(np.array([[np.nan, 1.0], [1.0, 0.0]]))
