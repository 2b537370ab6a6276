"""Auerbach bases of finite-dimensional subspaces of l_p and norm-one dual extensions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import min_norm_affine, vec_norm
from .errors import BudgetError, PreconditionError, VerificationError
from .sequence_space import Functional, SparseVector, conjugate
from .thickness import Subspace

DIM_LIMIT = 32
ACCEPT = 1e-6
FAIL = 1e-3
SWEEPS = 200
RESTARTS = 3


@dataclass
class AuerbachSystem:
    basis: list
    duals: list
    residual: float
    p: float
    dual_norms: np.ndarray
    volume: float = float("nan")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def norm_report(self) -> dict:
        q = conjugate(self.p)
        return {
            "basis_norms": [vec_norm(e.values, self.p) for e in self.basis],
            "dual_norms": [vec_norm(f.values, q) for f in self.duals],
            "residual": self.residual,
        }


class _Coords:
    """Orthonormal coordinates c -> Q c on the union of supports of V."""

    def __init__(self, V: Subspace):
        self.p = V.p
        self.columns = V.columns()
        B = V.matrix(self.columns)
        self.Q, _ = np.linalg.qr(B)
        self.k = B.shape[1]

    def norm(self, c):
        return vec_norm(self.Q @ c, self.p)

    def normalize(self, c):
        return c / self.norm(c)

    def best_direction(self, g):
        """argmax of |g . c| over the unit ball of V, as coefficients."""
        c = min_norm_affine(self.Q, g[None, :], [1.0], self.p)
        return self.normalize(c)


def _greedy_volume(pool: np.ndarray, k: int) -> np.ndarray:
    """Columns of pool picked one by one to maximize the spanned volume."""
    R = pool.copy()
    picked = []
    for _ in range(k):
        norms = np.linalg.norm(R, axis=0)
        norms[picked] = -1.0
        j = int(np.argmax(norms))
        picked.append(j)
        u = R[:, j] / norms[j]
        R = R - np.outer(u, u @ R)
    return pool[:, picked]


def _ascent(coords: _Coords, C: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Coordinate ascent on |det C|: each column is replaced by the maximizer of
    its cofactor functional over the unit ball of V."""
    k = C.shape[1]
    for _ in range(SWEEPS):
        improved = False
        for i in range(k):
            det = np.linalg.det(C)
            g = np.linalg.inv(C)[i] * det  # cofactors of column i
            cand = coords.best_direction(g)
            new = abs(g @ cand)
            if new > abs(det) * (1 + tol):
                C[:, i] = cand
                improved = True
        if not improved:
            break
    return C


def _extend(E: np.ndarray, i: int, p: float) -> np.ndarray:
    """min ||f||_q over f with f(e_j) = delta_ij."""
    q = conjugate(p)
    D, k = E.shape
    target = np.zeros(k)
    target[i] = 1.0
    return min_norm_affine(np.eye(D), E.T, target, q)


def auerbach_basis(V: Subspace, seed: int = 0, restarts: int = RESTARTS, closed_form: bool = True) -> AuerbachSystem:
    k = V.dim
    if k == 0:
        raise PreconditionError("subspace has dimension 0")
    if k > DIM_LIMIT:
        raise BudgetError(f"Auerbach search limited to dimension {DIM_LIMIT}, got {k}")
    coords = _Coords(V)
    cols = coords.columns
    if V.p == 2 and closed_form:
        C = np.eye(k)
    else:
        rng = np.random.default_rng(seed)
        B = coords.Q.T @ V.matrix(cols)
        base = np.hstack([B, np.eye(k)])
        best, best_det = None, -1.0
        for r in range(restarts + 1):
            extra = rng.standard_normal((k, 4 * k)) if r else np.zeros((k, 0))
            pool = np.hstack([base, extra])
            pool = np.column_stack([coords.normalize(pool[:, j]) for j in range(pool.shape[1])])
            C = _ascent(coords, _greedy_volume(pool, k))
            det = abs(np.linalg.det(C))
            if det > best_det:
                best, best_det = C, det
        C = best
    E = coords.Q @ C
    q = conjugate(V.p)
    if V.p == 2 and closed_form:
        F = E.copy()
    else:
        F = np.column_stack([_extend(E, i, V.p) for i in range(k)])
    norms = np.array([vec_norm(F[:, i], q) for i in range(k)])
    if norms.max() > 1 + FAIL:
        raise VerificationError(f"Auerbach extension failed: dual norm {norms.max():.6g}")
    residual = float(np.abs(F.T @ E - np.eye(k)).max())
    basis = [SparseVector(cols, E[:, i]) for i in range(k)]
    duals = [Functional(cols, F[:, i]) for i in range(k)]
    return AuerbachSystem(basis, duals, residual, V.p, norms, float(abs(np.linalg.det(C))))


def coordinate_volume(system: AuerbachSystem, V: Subspace) -> float:
    """|det| of the basis in orthonormal coordinates of V (scale-free across bases)."""
    coords = _Coords(V)
    E = np.column_stack([e.to_dense(coords.columns) for e in system.basis])
    return float(abs(np.linalg.det(coords.Q.T @ E)))
