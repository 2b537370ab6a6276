"""Finite-support vectors in l_p (and c_0), their norms and norming functionals."""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError, PreconditionError

INF = math.inf


def check_exponent(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise PreconditionError(f"exponent p must lie in [1, inf], got {p}")
    return p


def conjugate(p: float) -> float:
    """Dual exponent q with 1/p + 1/q = 1."""
    p = check_exponent(p)
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1.0)


class SparseVector:
    """A point of l_p with finite support.

    Indices are positive integers in strictly increasing order; zero values are
    never stored. Instances are treated as immutable.
    """

    __slots__ = ("indices", "values", "_key")

    def __init__(self, indices=(), values=()):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = np.asarray(values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise InputError("indices and values differ in length")
        if not np.all(np.isfinite(val)):
            raise InputError("non-finite coordinate value")
        if idx.size and idx.min() < 1:
            raise InputError("coordinate indices must be positive integers")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            order = np.argsort(idx, kind="stable")
            idx, val = idx[order], val[order]
            if np.any(np.diff(idx) == 0):
                raise InputError("duplicate coordinate index")
        keep = val != 0.0
        if not keep.all():
            idx, val = idx[keep], val[keep]
        idx.setflags(write=False)
        val.setflags(write=False)
        self.indices = idx
        self.values = val
        self._key = None

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        if not pairs:
            return cls()
        idx, val = zip(*pairs)
        return cls(idx, val)

    @classmethod
    def from_dense(cls, arr, start: int = 1):
        arr = np.asarray(arr, dtype=np.float64).ravel()
        nz = np.flatnonzero(arr)
        return cls(nz + start, arr[nz])

    @classmethod
    def unit(cls, i: int, scale: float = 1.0):
        return cls([i], [scale])

    def to_pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(v)) for i, v in zip(self.indices, self.values)]

    def to_dense(self, columns) -> np.ndarray:
        """Values on the given sorted index array (zeros elsewhere)."""
        columns = np.asarray(columns, dtype=np.int64)
        out = np.zeros(columns.size)
        pos = np.searchsorted(columns, self.indices)
        ok = (pos < columns.size) & (columns[np.minimum(pos, columns.size - 1)] == self.indices)
        if not ok.all():
            raise PreconditionError("vector support not contained in the column set")
        out[pos] = self.values
        return out

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def is_zero(self) -> bool:
        return self.indices.size == 0

    def key(self):
        if self._key is None:
            self._key = (self.indices.tobytes(), self.values.tobytes())
        return self._key

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __len__(self):
        return self.nnz

    def __repr__(self):
        name = type(self).__name__
        return f"{name}({self.to_pairs()})"

    def _combine(self, other, sign):
        idx = np.union1d(self.indices, other.indices)
        out = np.zeros(idx.size)
        out[np.searchsorted(idx, self.indices)] += self.values
        out[np.searchsorted(idx, other.indices)] += sign * other.values
        return type(self)(idx, out)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return type(self)(self.indices, -self.values)

    def __mul__(self, scalar):
        return type(self)(self.indices, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return type(self)(self.indices, self.values / float(scalar))


class Functional(SparseVector):
    """Element of the dual l_q, stored with the same finite-support layout."""

    __slots__ = ()


def _norm_of_values(values: np.ndarray, p: float) -> float:
    if values.size == 0:
        return 0.0
    a = np.abs(values)
    if p == INF:
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.linalg.norm(a))
    m = a.max()
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def lp_norm(v: SparseVector, p: float) -> float:
    return _norm_of_values(v.values, check_exponent(p))


def dual_norm(f: SparseVector, p: float) -> float:
    """Norm of ``f`` as a functional on l_p, i.e. its l_q norm."""
    return _norm_of_values(f.values, conjugate(p))


def lp_distance(x: SparseVector, y: SparseVector, p: float) -> float:
    return lp_norm(x - y, p)


def norming_functional(v: SparseVector, p: float) -> Functional:
    """Unit-norm functional f in l_q with f(v) = ||v||_p.

    For p = inf the functional is a signed coordinate functional at the first
    (smallest-index) coordinate of maximal magnitude.
    """
    p = check_exponent(p)
    if v.is_zero():
        raise PreconditionError("no norming functional for the zero vector")
    vals = v.values
    if p == INF:
        j = int(np.argmax(np.abs(vals)))
        return Functional([v.indices[j]], [np.sign(vals[j])])
    if p == 1:
        return Functional(v.indices, np.sign(vals))
    a = np.abs(vals)
    u = a / a.max()
    w = u ** (p - 1.0)
    w /= np.sum(u**p) ** ((p - 1.0) / p)
    return Functional(v.indices, np.sign(vals) * w)


def apply_functional(f: SparseVector, v: SparseVector) -> float:
    _, i, j = np.intersect1d(f.indices, v.indices, assume_unique=True, return_indices=True)
    if i.size == 0:
        return 0.0
    return float(np.dot(f.values[i], v.values[j]))


METRIC_TOL = 1e-9


def validate_metric(D) -> np.ndarray:
    """Check symmetry, zero diagonal and the triangle inequality.

    Violations up to METRIC_TOL are repaired by symmetrizing and taking the
    shortest-path closure; larger ones raise.
    """
    D = np.array(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InputError("distance matrix must be square")
    n = D.shape[0]
    if n == 0:
        raise InputError("empty distance matrix")
    if not np.all(np.isfinite(D)) or np.any(D < -METRIC_TOL):
        raise InputError("distances must be finite and nonnegative")
    if np.abs(np.diag(D)).max() > METRIC_TOL:
        raise InputError("distance matrix has a nonzero diagonal")
    asym = np.abs(D - D.T)
    if asym.max() > METRIC_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise InputError(f"distance matrix not symmetric at ({i}, {j})")
    for k in range(n):
        excess = D - (D[:, k : k + 1] + D[k : k + 1, :])
        if excess.max() > METRIC_TOL:
            i, j = np.unravel_index(np.argmax(excess), excess.shape)
            raise InputError(
                f"triangle inequality violated: d({i},{j}) > d({i},{k}) + d({k},{j})"
            )
    D = np.maximum(np.minimum(D, D.T), 0.0)
    np.fill_diagonal(D, 0.0)
    for k in range(n):
        D = np.minimum(D, D[:, k : k + 1] + D[k : k + 1, :])
    # rounding can leave fl|D_ik - D_jk| one ulp above D_ij; lift D_ij until the
    # sup distance between rows reproduces D exactly
    for _ in range(20):
        M = np.zeros_like(D)
        for k in range(n):
            np.maximum(M, np.abs(D[:, k : k + 1] - D[:, k][None, :]), out=M)
        if np.array_equal(M, D):
            break
        if np.abs(M - D).max() > METRIC_TOL:
            raise InputError("distance matrix is not a metric within tolerance")
        D = M
    return D


def kuratowski_embed(D, ids=None):
    """Isometric image of a finite metric space in c_0: point i -> row i of D."""
    from .pointcloud import PointCloud

    D = validate_metric(D)
    n = D.shape[0]
    if ids is None:
        ids = [str(i) for i in range(n)]
    vectors = [SparseVector(np.arange(1, n + 1), D[i]) for i in range(n)]
    return PointCloud.from_vectors(ids, vectors, INF)
