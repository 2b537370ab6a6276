import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thicklab import io
from thicklab.errors import InputError, PreconditionError
from thicklab.pointcloud import PointCloud
from thicklab.sequence_space import INF, SparseVector, lp_distance


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 6), st.sampled_from([1.0, 1.5, 2.0, 3.0, INF]),
       st.floats(0, 0.8), st.integers(0, 2**31))
def test_metric_matches_direct(n, dim, p, frac, seed):
    rng = np.random.default_rng(seed)
    arr = rng.standard_normal((n, dim))
    arr[rng.random(arr.shape) < frac] = 0.0
    X = PointCloud.from_dense(arr, p)
    D = X.metric.pairwise()
    for i in range(n):
        for j in range(n):
            assert D[i, j] == pytest.approx(lp_distance(X[i], X[j], p), rel=1e-12, abs=1e-14)
    q = SparseVector.from_dense(rng.standard_normal(dim + 2))
    d = X.metric.to_sparse(q)
    for i in range(n):
        assert d[i] == pytest.approx(lp_distance(q, X[i], p), rel=1e-12, abs=1e-14)


def test_cloud_basics():
    X = PointCloud.from_dense(np.array([[3.0, 4.0], [0.0, 0.0]]), 2, ids=["a", "b"])
    assert X.index_of("b") == 1
    assert np.allclose(X.norms(), [5, 0])
    assert X.diameter() == pytest.approx(5)
    assert X.with_p(1).norms()[0] == pytest.approx(7)
    assert len(X.subset([0])) == 1
    with pytest.raises(PreconditionError):
        X.index_of("zz")
    with pytest.raises(InputError):
        PointCloud.from_dense(np.zeros((2, 1)), 2, ids=["a", "a"])


def test_jsonl_roundtrip(rng, tmp_path):
    X = PointCloud.from_dense(rng.standard_normal((5, 3)), 3.0)
    path = tmp_path / "x.jsonl"
    io.write_jsonl(X, path)
    Y = io.read_jsonl(path, 3.0)
    assert Y.ids == X.ids
    assert all(a == b for a, b in zip(X, Y))


@pytest.mark.parametrize(
    "line",
    [
        '{"id": "a", "coords": [[1, 2.0]]',
        '{"id": 3, "coords": [[1, 2.0]]}',
        '{"id": "a", "coords": [[0, 2.0]]}',
        '{"id": "a", "coords": [[1.5, 2.0]]}',
        '{"id": "a", "coords": [[1, 2.0], [1, 3.0]]}',
        '{"id": "a", "coords": [[1, NaN]]}',
        '{"id": "a"}',
    ],
)
def test_jsonl_errors_carry_line_number(line):
    with pytest.raises(InputError, match="line 2"):
        io.parse_jsonl(['{"id": "ok", "coords": []}', line], 2)


def test_jsonl_empty():
    with pytest.raises(InputError):
        io.parse_jsonl(["", "  "], 2)


def test_distance_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,c\n0,1,2\n1,0,1\n2,1,0\n")
    ids, D = io.read_distance_csv(path)
    assert ids == ["a", "b", "c"] and D[0, 2] == 2
    path.write_text("a,b\na,0,1\nb,1,0\n")
    ids, D = io.read_distance_csv(path)
    assert D.shape == (2, 2)
    path.write_text("a,b\n0,1\n")
    with pytest.raises(InputError):
        io.read_distance_csv(path)


def test_fmt_and_csv():
    assert io.fmt(True) == "true"
    assert io.fmt(np.int64(3)) == "3"
    assert io.fmt(0.1) == "0.1"
    assert io.fmt(math.inf) == "inf"
    assert io.fmt(math.nan) == "nan"
    assert io.csv_text(["a", "b"], [{"a": 1, "b": 0.5}, {"a": 2}]) == "a,b\n1,0.5\n2,\n"
