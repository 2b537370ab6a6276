"""Linear maps out of l_p given by rows of finite-support functionals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import InputError, PreconditionError
from .pointcloud import PointCloud
from .sequence_space import Functional, SparseVector


def functional_matrix(functionals, weights=None):
    """Stack functionals into a CSR matrix over the union of their supports.

    Returns (matrix, columns).
    """
    functionals = list(functionals)
    if weights is None:
        weights = np.ones(len(functionals))
    idx = [f.indices for f in functionals]
    cols = np.unique(np.concatenate(idx + [np.zeros(0, np.int64)]))
    lengths = np.array([f.nnz for f in functionals], dtype=np.int64)
    if not functionals:
        return sparse.csr_matrix((0, 0)), cols
    data = np.concatenate([w * f.values for w, f in zip(weights, functionals)])
    ind = np.searchsorted(cols, np.concatenate(idx))
    M = sparse.csr_matrix(
        (data, ind, np.concatenate([[0], np.cumsum(lengths)])), shape=(len(functionals), cols.size)
    )
    return M, cols


def apply_rows(M, cols, X: PointCloud) -> np.ndarray:
    """Dense N x m array of the rows of M applied to every point of X."""
    if M.shape[0] == 0:
        return np.zeros((len(X), 0))
    allcols = np.union1d(cols, X.columns())
    pos = np.searchsorted(allcols, cols)
    Mw = sparse.csr_matrix((M.data, pos[M.indices], M.indptr), shape=(M.shape[0], allcols.size))
    return np.asarray((X.to_csr(allcols) @ Mw.T).todense())


@dataclass
class Block:
    n: int
    weight: float
    functionals: list
    op_bound: float = math.nan

    @property
    def size(self) -> int:
        return len(self.functionals)


@dataclass
class BlockMap:
    """x -> concatenation over blocks of weight * (f_1(x), ..., f_m(x))."""

    blocks: list
    tail_bound: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = [b.weight for b in self.blocks]
        if any(x <= 0 for x in w):
            raise PreconditionError("block weights must be positive")
        self._cache = None

    @property
    def out_dim(self) -> int:
        return sum(b.size for b in self.blocks)

    def _matrix(self):
        if self._cache is None:
            funcs, weights = [], []
            for b in self.blocks:
                funcs.extend(b.functionals)
                weights.extend([b.weight] * b.size)
            self._cache = functional_matrix(funcs, weights)
        return self._cache

    def evaluate(self, X: PointCloud) -> np.ndarray:
        M, cols = self._matrix()
        return apply_rows(M, cols, X)

    def apply(self, v: SparseVector) -> np.ndarray:
        return self.evaluate(PointCloud.from_vectors(["v"], [v], 2.0))[0]

    def dense(self):
        """(out_dim x D array, columns)."""
        M, cols = self._matrix()
        return M.toarray(), cols

    def lipschitz_bound(self) -> float:
        """Sum of weight * operator bound over the kept blocks."""
        return float(sum(b.weight * b.op_bound for b in self.blocks))

    def to_json(self) -> str:
        return json.dumps(
            {
                "tail_bound": self.tail_bound,
                "meta": self.meta,
                "blocks": [
                    {
                        "n": b.n,
                        "weight": b.weight,
                        "op_bound": b.op_bound,
                        "functionals": [f.to_pairs() for f in b.functionals],
                    }
                    for b in self.blocks
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "BlockMap":
        try:
            obj = json.loads(text)
            blocks = [
                Block(
                    int(b["n"]), float(b["weight"]),
                    [Functional.from_pairs(f) for f in b["functionals"]], float(b["op_bound"]),
                )
                for b in obj["blocks"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed block map: {exc}") from None
        return cls(blocks, float(obj.get("tail_bound", 0.0)), obj.get("meta", {}))


@dataclass
class SampledMap:
    """Linear map into R^k with rows given as a dense k x D array over ``columns``.

    ``coefficients`` keeps the per-block ball samples when the map comes from
    the random ensemble.
    """

    matrix: np.ndarray
    columns: np.ndarray
    seed: object = None
    coefficients: list | None = None

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        self.columns = np.asarray(self.columns, dtype=np.int64)
        if self.matrix.shape[1] != self.columns.size:
            raise PreconditionError("matrix width does not match the column list")

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    def rows(self) -> list:
        return [Functional(self.columns, r) for r in self.matrix]

    def evaluate(self, X: PointCloud) -> np.ndarray:
        M = sparse.csr_matrix(self.matrix)
        return apply_rows(M, self.columns, X)

    def apply(self, v: SparseVector) -> np.ndarray:
        return self.matrix @ v.to_dense(self.columns) if v.nnz else np.zeros(self.k)

    @classmethod
    def identity(cls, dim: int) -> "SampledMap":
        return cls(np.eye(dim), np.arange(1, dim + 1))

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "columns": self.columns.tolist(),
                "rows": [r.tolist() for r in self.matrix],
                "coefficients": None
                if self.coefficients is None
                else [[c.tolist() for c in row] for row in self.coefficients],
            },
            sort_keys=True,
        )
