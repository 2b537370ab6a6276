import math

import numpy as np
import pytest

from thicklab.lp_examples import OrthogonalSequenceSpec, make_orthogonal_sequence
from thicklab.pointcloud import PointCloud

P_VALUES = (1.0, 1.5, 2.0, 4.0, math.inf)


def random_cloud(rng, n, dim, p, scale=1.0, sparse_frac=0.0):
    arr = rng.standard_normal((n, dim)) * scale
    if sparse_frac:
        arr[rng.random(arr.shape) < sparse_frac] = 0.0
    return PointCloud.from_dense(arr, p)


def make_corpus(count=50, seed=2024):
    """Small clouds of mixed shape: random gaussians, curves, grids and coordinate sequences."""
    rng = np.random.default_rng(seed)
    out = []
    ps = (1.0, 2.0, math.inf, 3.0)
    for i in range(count):
        p = ps[i % len(ps)]
        kind = i % 5
        if kind == 0:
            X = random_cloud(rng, int(rng.integers(4, 16)), int(rng.integers(1, 5)), p)
        elif kind == 1:
            t = np.sort(rng.random(int(rng.integers(6, 20))))
            X = PointCloud.from_dense(np.column_stack([np.cos(3 * t), np.sin(3 * t), t]), p)
        elif kind == 2:
            g = np.arange(int(rng.integers(3, 6))) / 4.0
            pts = np.array([(a, b) for a in g for b in g])
            X = PointCloud.from_dense(pts, p)
        elif kind == 3:
            d = float(rng.choice([0.5, 1.0, 2.0]))
            X = make_orthogonal_sequence(OrthogonalSequenceSpec(d=d, count=int(rng.integers(4, 24)), p=p))
        else:
            X = random_cloud(rng, int(rng.integers(5, 14)), 6, p, scale=0.5, sparse_frac=0.5)
        out.append(X)
    return out


@pytest.fixture(scope="session")
def corpus():
    return make_corpus()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cantor_points(level):
    pts = np.zeros(1)
    for k in range(1, level + 1):
        pts = np.concatenate([pts, pts + 2 * 3.0**-k])
    return pts


def make_dimension_corpus(seed=7):
    """Larger structured clouds on which finite-scale slope comparisons are meaningful."""
    rng = np.random.default_rng(seed)
    out = []
    for d, p in ((0.5, 2.0), (1.0, math.inf), (1.0, 1.0), (0.5, 3.0)):
        out.append(make_orthogonal_sequence(OrthogonalSequenceSpec(d=d, count=400, p=p)))
    out.append(PointCloud.from_dense(rng.random((200, 2)), 2.0))
    out.append(PointCloud.from_dense(rng.random((200, 2)), math.inf))
    t = np.sort(rng.random(200)) * 2 * np.pi
    out.append(PointCloud.from_dense(np.column_stack([np.cos(t), np.sin(t), t / 6]), 2.0))
    out.append(PointCloud.from_dense(cantor_points(8)[:, None], 1.0))
    # chaos-game Sierpinski triangle
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.8660254]])
    z, pts = np.zeros(2), []
    for _ in range(270):
        z = (z + V[rng.integers(3)]) / 2
        pts.append(z.copy())
    out.append(PointCloud.from_dense(np.array(pts[20:]), 2.0))
    out.append(PointCloud.from_dense(rng.standard_normal((200, 3)), 1.0))
    return out


@pytest.fixture(scope="session")
def dimension_corpus():
    return make_dimension_corpus()
