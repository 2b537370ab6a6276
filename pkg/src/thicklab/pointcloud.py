"""Point clouds stored row-compressed, and a distance engine over them."""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .errors import InputError, PreconditionError
from .sequence_space import INF, SparseVector, check_exponent


class PointCloud:
    """Finite labelled set of finite-support vectors in l_p.

    Rows are kept as CSR arrays (``indptr``, ``indices``, ``data``) so that large
    clouds such as difference sets never materialize per-point Python objects.
    """

    def __init__(self, ids, indptr, indices, data, p):
        self.ids = [str(i) for i in ids]
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        self.p = check_exponent(p)
        if not self.ids:
            raise InputError("point cloud is empty")
        if len(set(self.ids)) != len(self.ids):
            raise InputError("point ids are not unique")
        if self.indptr.size != len(self.ids) + 1:
            raise InputError("indptr length does not match the number of ids")
        self._metric = None
        self._index = None

    @classmethod
    def from_vectors(cls, ids, vectors, p):
        vectors = list(vectors)
        lengths = np.array([v.nnz for v in vectors], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(lengths)])
        if vectors:
            indices = np.concatenate([v.indices for v in vectors])
            data = np.concatenate([v.values for v in vectors])
        else:
            indices, data = np.zeros(0, np.int64), np.zeros(0)
        return cls(ids, indptr, indices, data, p)

    @classmethod
    def from_dense(cls, array, p, ids=None):
        array = np.atleast_2d(np.asarray(array, dtype=np.float64))
        if ids is None:
            ids = [f"x{i:05d}" for i in range(array.shape[0])]
        return cls.from_vectors(ids, [SparseVector.from_dense(r) for r in array], p)

    @classmethod
    def from_csr(cls, ids, mat, columns, p):
        """Build from a scipy CSR matrix whose column j is coordinate ``columns[j]``."""
        mat = sparse.csr_matrix(mat)
        mat.eliminate_zeros()
        mat.sort_indices()
        return cls(ids, mat.indptr, np.asarray(columns, dtype=np.int64)[mat.indices], mat.data, p)

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, i) -> SparseVector:
        a, b = self.indptr[i], self.indptr[i + 1]
        return SparseVector(self.indices[a:b], self.data[a:b])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def vectors(self):
        return list(self)

    def index_of(self, pid) -> int:
        if self._index is None:
            self._index = {k: i for i, k in enumerate(self.ids)}
        try:
            return self._index[str(pid)]
        except KeyError:
            raise PreconditionError(f"unknown point id {pid!r}") from None

    def columns(self) -> np.ndarray:
        return np.unique(self.indices)

    def to_csr(self, columns=None):
        """CSR matrix over ``columns`` (defaults to the union of supports)."""
        if columns is None:
            columns = self.columns()
        columns = np.asarray(columns, dtype=np.int64)
        pos = np.searchsorted(columns, self.indices)
        if self.indices.size and (
            pos.max(initial=0) >= columns.size or np.any(columns[pos] != self.indices)
        ):
            raise PreconditionError("cloud support not contained in the column set")
        return sparse.csr_matrix(
            (self.data, pos, self.indptr), shape=(len(self), columns.size)
        )

    def to_dense(self, columns=None) -> np.ndarray:
        return self.to_csr(columns).toarray()

    def subset(self, rows) -> "PointCloud":
        rows = np.asarray(rows, dtype=np.int64)
        return PointCloud.from_vectors([self.ids[r] for r in rows], [self[r] for r in rows], self.p)

    def with_p(self, p) -> "PointCloud":
        return PointCloud(self.ids, self.indptr, self.indices, self.data, p)

    def norms(self) -> np.ndarray:
        rows = np.repeat(np.arange(len(self)), np.diff(self.indptr))
        a = np.abs(self.data)
        if self.p == INF:
            out = np.zeros(len(self))
            np.maximum.at(out, rows, a)
            return out
        if self.p == 1:
            return np.bincount(rows, weights=a, minlength=len(self))
        return np.bincount(rows, weights=a**self.p, minlength=len(self)) ** (1.0 / self.p)

    @property
    def metric(self) -> "Metric":
        if self._metric is None:
            self._metric = Metric(self)
        return self._metric

    def diameter(self) -> float:
        return float(max(self.metric.from_point(i).max() for i in range(len(self))))


class Metric:
    """Distances from arbitrary finite-support vectors to every row of a cloud.

    Rows that share no coordinate with the query are handled in closed form
    from precomputed row norms; the few rows that do are evaluated exactly
    from padded per-row arrays, so no cancellation occurs.
    """

    def __init__(self, cloud: PointCloud):
        self.p = cloud.p
        self.n = len(cloud)
        self.columns, compact = np.unique(cloud.indices, return_inverse=True)
        compact = compact.astype(np.int64).ravel()
        counts = np.diff(cloud.indptr)
        width = int(counts.max(initial=0))
        self.width = max(width, 1)
        rows = np.repeat(np.arange(self.n), counts)
        slot = np.arange(cloud.indices.size) - np.repeat(cloud.indptr[:-1], counts)
        self.pad_cols = np.full((self.n, self.width), -1, dtype=np.int64)
        self.pad_vals = np.zeros((self.n, self.width))
        self.pad_cols[rows, slot] = compact
        self.pad_vals[rows, slot] = cloud.data
        csc = sparse.csc_matrix(
            (np.ones(compact.size), (rows, compact)), shape=(self.n, self.columns.size)
        )
        self.col_ptr = csc.indptr
        self.col_rows = csc.indices
        a = np.abs(cloud.data)
        if self.p == INF:
            self.row_stat = np.abs(self.pad_vals).max(axis=1)
        else:
            self.row_stat = np.bincount(rows, weights=a**self.p, minlength=self.n)
        self._cloud = cloud

    def to_vector(self, idx, vals) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        p = self.p
        pos = np.searchsorted(self.columns, idx)
        inmap = (pos < self.columns.size) & (
            self.columns[np.minimum(pos, max(self.columns.size - 1, 0))] == idx
        ) if self.columns.size else np.zeros(idx.size, bool)
        s_cols = pos[inmap]
        s_vals = vals[inmap]
        extra = np.abs(vals[~inmap])
        xa = np.abs(vals)
        if p == INF:
            out = np.maximum(self.row_stat, xa.max(initial=0.0))
        else:
            out = self.row_stat + np.sum(xa**p)
        if s_cols.size:
            touched = np.unique(
                np.concatenate([self.col_rows[self.col_ptr[c] : self.col_ptr[c + 1]] for c in s_cols])
            )
            if touched.size:
                sub_c = self.pad_cols[touched]
                sub_v = self.pad_vals[touched]
                where = np.searchsorted(s_cols, sub_c)
                where_c = np.minimum(where, s_cols.size - 1)
                ins = (sub_c >= 0) & (s_cols[where_c] == sub_c)
                outside = np.where(ins, 0.0, np.abs(sub_v))
                inside = np.zeros((touched.size, s_cols.size))
                r, c = np.nonzero(ins)
                inside[r, where_c[r, c]] = sub_v[r, c]
                diff = np.abs(inside - s_vals)
                if p == INF:
                    t = np.maximum(outside.max(axis=1), diff.max(axis=1))
                    if extra.size:
                        t = np.maximum(t, extra.max())
                else:
                    t = np.sum(outside**p, axis=1) + np.sum(diff**p, axis=1) + np.sum(extra**p)
                out[touched] = t
        if p == INF:
            return out
        if p == 1:
            return out
        return np.maximum(out, 0.0) ** (1.0 / p)

    def to_sparse(self, v: SparseVector) -> np.ndarray:
        return self.to_vector(v.indices, v.values)

    def from_point(self, i: int) -> np.ndarray:
        cloud = self._cloud
        a, b = cloud.indptr[i], cloud.indptr[i + 1]
        d = self.to_vector(cloud.indices[a:b], cloud.data[a:b])
        d[i] = 0.0
        return d

    def pairwise(self) -> np.ndarray:
        return np.vstack([self.from_point(i) for i in range(self.n)])
