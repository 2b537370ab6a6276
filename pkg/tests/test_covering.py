import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thicklab.covering import (
    EpsilonLadder,
    auto_ladder,
    box_dim_auto,
    box_dim_estimate,
    difference_set,
    exact_min_cover,
    farthest_point_traversal,
    fit_log_log,
    greedy_net,
    packing_number,
)
from thicklab.errors import BudgetError, PreconditionError
from thicklab.lp_examples import OrthogonalSequenceSpec, make_orthogonal_sequence
from thicklab.pointcloud import PointCloud
from thicklab.sequence_space import INF


def line(vals, p=2.0):
    return PointCloud.from_dense(np.asarray(vals, dtype=float)[:, None], p)


def dense_dist(arr, p):
    diff = np.abs(arr[:, None, :] - arr[None, :, :])
    return diff.max(-1) if p == INF else (diff**p).sum(-1) ** (1 / p)


def oracle_cover(D, eps):
    n = len(D)
    for k in range(1, n + 1):
        for c in itertools.combinations(range(n), k):
            if np.all(D[list(c)].min(axis=0) <= eps):
                return k
    return n


def oracle_packing(D, eps):
    n = len(D)
    for k in range(n, 0, -1):
        for c in itertools.combinations(range(n), k):
            sub = D[np.ix_(c, c)]
            if k == 1 or np.all(sub[~np.eye(k, dtype=bool)] >= eps):
                return k
    return 0


def test_difference_set_examples():
    assert len(difference_set(line([0.3]))) == 1
    Z = difference_set(PointCloud.from_dense(np.array([[1.0, 0.2], [0.3, -1.1], [2.0, 5.0]]), 2))
    assert len(Z) == 7
    A = make_orthogonal_sequence(OrthogonalSequenceSpec(d=1, count=2, p=2))
    Z = difference_set(A)
    assert len(Z) == 3
    assert Z[0].is_zero()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**31))
def test_difference_set_symmetric_with_zero(n, seed):
    rng = np.random.default_rng(seed)
    X = PointCloud.from_dense(rng.integers(-2, 3, (n, 3)).astype(float), 1.0)
    Z = difference_set(X)
    keys = {v.key() for v in Z}
    assert any(v.is_zero() for v in Z)
    assert all((-v).key() in keys for v in Z)
    assert len(keys) == len(Z)


def test_greedy_examples():
    X = line([0, 0.4, 1])
    assert greedy_net(X, 0.5) == [X.ids[0], X.ids[2]]
    assert len(greedy_net(line([7.0]), 0.01)) == 1
    assert len(greedy_net(line([0, 1, 2]), 0.6)) == 3
    with pytest.raises(PreconditionError):
        greedy_net(line([0, 1]), 0)


def test_exact_and_packing_examples():
    assert exact_min_cover(line([0, 0.4, 1]), 0.5) == 2
    assert exact_min_cover(line([0, 1, 2]), 1) == 1
    assert exact_min_cover(line([0, 1, 2]), 10) == 1
    assert packing_number(line([0, 1, 2]), 1) == 3
    assert packing_number(line([0, 1, 2]), 1.2) == 2
    assert packing_number(line([5.0]), 1) == 1
    with pytest.raises(BudgetError):
        exact_min_cover(line(np.arange(30)), 1)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.sampled_from([1.0, 2.0, INF]), st.integers(0, 2**31),
       st.floats(0.05, 2.0))
def test_sandwich_against_bruteforce(n, dim, p, seed, eps):
    rng = np.random.default_rng(seed)
    arr = rng.standard_normal((n, dim))
    X = PointCloud.from_dense(arr, p)
    D = dense_dist(arr, p)
    N = oracle_cover(D, eps)
    M = oracle_packing(D, eps)
    assert exact_min_cover(X, eps) == N
    assert packing_number(X, eps) == M
    g = len(greedy_net(X, eps))
    assert N <= g <= M
    assert oracle_packing(D, 2 * eps + 1e-9) <= N


def test_greedy_count_monotone(rng):
    X = PointCloud.from_dense(rng.standard_normal((60, 3)), 2)
    t = farthest_point_traversal(X)
    counts = [t.count(e) for e in np.geomspace(4, 0.01, 30)]
    assert counts == sorted(counts)
    assert counts == [len(greedy_net(X, e)) for e in np.geomspace(4, 0.01, 30)]


def test_traversal_budget():
    X = line(np.arange(50) / 50)
    t = farthest_point_traversal(X, max_centers=5)
    assert not t.complete
    with pytest.raises(BudgetError):
        t.count(1e-4)


def test_fit_log_log_degenerate_and_exact():
    est = fit_log_log([0.5, 0.25, 0.125, 0.0625], [3, 3, 3, 3])
    assert est.degenerate and est.slope == 0.0 and math.isnan(est.r_squared)
    eps = 2.0 ** -np.arange(1, 8)
    est = fit_log_log(eps, 5 * eps**-1.5)
    assert est.slope == pytest.approx(1.5)
    assert est.bracket[0] <= est.slope <= est.bracket[1]


def test_box_dim_examples():
    A = make_orthogonal_sequence(OrthogonalSequenceSpec(d=0.5, count=4096, p=2))
    est = box_dim_estimate(A, EpsilonLadder(2, 11))
    assert 0.42 <= est.slope <= 0.58
    X = line(np.arange(64) / 64)
    est = box_dim_estimate(X, EpsilonLadder(1, 6))
    assert est.slope == pytest.approx(1, abs=0.1)
    X = line([0, 1, 2.5])
    est = box_dim_estimate(X, EpsilonLadder(8, 14))
    assert est.slope == 0.0
    with pytest.raises(PreconditionError):
        box_dim_estimate(X, EpsilonLadder(1, 3))


def test_auto_ladder_single_point():
    X = line([1.0])
    ladder, est = box_dim_auto(X)
    assert len(ladder) >= 4
    assert est.slope == 0.0
    assert auto_ladder(X) == ladder


def test_lipschitz_image_and_difference_on_corpus(dimension_corpus):
    for X in dimension_corpus:
        ladder, est = box_dim_auto(X)
        # coordinate projection onto the first used column is 1-Lipschitz in every l_p
        proj = PointCloud.from_dense(X.to_dense()[:, :1], X.p)
        img = box_dim_estimate(proj, ladder)
        assert img.slope <= est.slope + 0.1
        Z = difference_set(X)
        dz = box_dim_estimate(Z, ladder)
        assert dz.slope <= 2 * est.slope + 0.2
