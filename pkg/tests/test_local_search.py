import math

import numpy as np
import pytest

from tspmdf.constructors import farthest_insertion, nearest_insertion
from tspmdf.core import Tour, TourError, TspInstance, tour_length
from tspmdf.local_search import two_opt, two_opt_run


def best_exchange_gain(points, perm):
    """Exhaustive scan over all 2-exchanges; returns the largest length decrease."""
    n = len(perm)
    d = lambda a, b: math.dist(points[a], points[b])  # noqa: E731
    best = 0.0
    for i in range(n - 1):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            a, b, c, e = perm[i], perm[i + 1], perm[j], perm[(j + 1) % n]
            best = max(best, d(a, b) + d(c, e) - d(a, c) - d(b, e))
    return best


def test_square_uncrossed(square):
    out = two_opt(square, Tour([0, 2, 1, 3]))
    assert tour_length(square, out) == 4.0


def test_optimal_tour_unchanged(square):
    t = Tour([0, 1, 2, 3])
    out, passes, converged = two_opt_run(square, t)
    assert out == t and passes == 1 and converged


def test_zero_passes_returns_input(square):
    t = Tour([0, 2, 1, 3])
    out, passes, converged = two_opt_run(square, t, max_passes=0)
    assert out == t and passes == 0 and not converged


def test_pass_limit_is_respected():
    inst = TspInstance(np.random.default_rng(0).random((60, 2)))
    t = Tour(np.random.default_rng(1).permutation(60))
    out, passes, converged = two_opt_run(inst, t, max_passes=3)
    assert passes == 3 and not converged
    assert tour_length(inst, out) < tour_length(inst, t)


def test_each_pass_strictly_improves():
    inst = TspInstance(np.random.default_rng(2).random((40, 2)))
    t = Tour(np.random.default_rng(3).permutation(40))
    prev = tour_length(inst, t)
    for k in range(1, 15):
        cur = tour_length(inst, two_opt(inst, t, max_passes=k))
        assert cur < prev - 1e-12 or cur == prev
        prev = cur


def test_postconditions_on_random_instances():
    rng = np.random.default_rng(77)
    for _ in range(40):
        n = int(rng.integers(4, 60))
        inst = TspInstance(rng.random((n, 2)))
        start = Tour(rng.permutation(n))
        out, _, converged = two_opt_run(inst, start)
        assert converged
        assert sorted(out.perm.tolist()) == list(range(n))
        assert tour_length(inst, out) <= tour_length(inst, start)
        assert best_exchange_gain(inst.nodes.tolist(), out.perm.tolist()) <= 1e-9


def test_improves_insertion_tours():
    inst = TspInstance(np.random.default_rng(5).random((100, 2)))
    for fn in (nearest_insertion, farthest_insertion):
        t = fn(inst)
        assert tour_length(inst, two_opt(inst, t)) <= tour_length(inst, t)


def test_validation(square):
    with pytest.raises(TourError):
        two_opt(square, Tour([0, 1, 2]))
    with pytest.raises(ValueError):
        two_opt(square, Tour([0, 1, 2, 3]), max_passes=-1)
