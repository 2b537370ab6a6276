"""Linear maps into Hilbert space with Hoelder inverses on a point cloud, built from
covers of X - X or from approximating subspaces with Auerbach duals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .auerbach import auerbach_basis
from .covering import Traversal, box_dim_auto, difference_set, farthest_point_traversal
from .errors import BudgetError, PreconditionError, VerificationError
from .linear_maps import Block, BlockMap, SampledMap, apply_rows, functional_matrix
from .pointcloud import PointCloud
from .sequence_space import Functional, norming_functional
from .thickness import SVDProfile, best_upper_subspace

COLLAPSE = 1e-14
DIM_BUDGET = 32


def _zero_functional(X: PointCloud) -> Functional:
    cols = X.columns()
    return Functional.unit(int(cols[0]) if cols.size else 1)


def _separation_check(block_values, norms, threshold, floor, what):
    """Every row with norm >= threshold must have block l_2 norm >= floor."""
    need = norms >= threshold
    if not need.any():
        return
    got = np.sqrt(np.sum(block_values[need] ** 2, axis=1))
    if np.any(got < floor):
        worst = float(got.min())
        raise VerificationError(f"{what}: separation {worst:.6g} below {floor:.6g}")


def build_phi_n(X: PointCloud, n: int, d: float | None = None, Z: PointCloud | None = None,
                traversal: Traversal | None = None) -> Block:
    """Norming functionals of a 2^-(n+2) cover of X - X.

    |phi_n(z)| >= 2^-(n+1) whenever ||z|| >= 2^-n, checked over all of X - X.
    """
    if n < 1:
        raise PreconditionError("n must be at least 1")
    Z = Z if Z is not None else difference_set(X)
    radius = 2.0 ** -(n + 2)
    if traversal is None or (not traversal.complete and traversal.final_radius >= radius):
        traversal = farthest_point_traversal(Z, stop=radius)
    m = traversal.count(radius)
    if traversal.coverage(m) > radius:
        raise VerificationError("cover of X - X is incomplete")
    funcs = []
    for i in traversal.order[:m]:
        z = Z[i]
        funcs.append(_zero_functional(X) if z.is_zero() else norming_functional(z, X.p))
    block = Block(n, 1.0, funcs, math.sqrt(len(funcs)))
    M, cols = functional_matrix(funcs)
    vals = apply_rows(M, cols, Z)
    _separation_check(vals, Z.norms(), 2.0**-n, 2.0 ** -(n + 1), f"cover block n={n}")
    return block


def build_phi_n_thickness(X: PointCloud, n: int, tau: float, Z: PointCloud | None = None,
                          budget: int = DIM_BUDGET, profile=None) -> Block:
    """Auerbach duals of a subspace within 2^-(beta n + 2) of X, beta = 1/(1 - tau).

    |phi_n(z)| >= 2^-(beta n + 1) whenever ||z|| >= 2^-n, checked over all of X - X.
    """
    if not 0 < tau < 1:
        raise PreconditionError("tau must lie in (0, 1)")
    beta = 1.0 / (1.0 - tau)
    acc = 2.0 ** (-beta * n - 2)
    V = best_upper_subspace(X, acc, profile=profile)
    if V.dim > budget:
        raise BudgetError(
            f"subspace within {acc:.3g} of X needs dimension {V.dim} > budget {budget}"
        )
    Z = Z if Z is not None else difference_set(X)
    if V.dim == 0:
        funcs = [_zero_functional(X)]
        bound = 1.0
    else:
        system = auerbach_basis(V)
        funcs = system.duals
        bound = math.sqrt(len(funcs)) * float(max(system.dual_norms.max(), 1.0))
    block = Block(n, 1.0, funcs, bound)
    M, cols = functional_matrix(funcs)
    _separation_check(
        apply_rows(M, cols, Z), Z.norms(), 2.0**-n, 2.0 ** -(beta * n + 1), f"thickness block n={n}"
    )
    return block


def build_hilbert_embedding(X: PointCloud, alpha: float, mode: str = "cover", n_max: int = 8,
                            d: float | None = None, tau: float | None = None) -> BlockMap:
    """Truncated weighted direct sum of the phi_n blocks, n = 1..n_max."""
    if n_max < 4:
        raise PreconditionError("n_max must be at least 4")
    Z = difference_set(X)
    R = float(Z.norms().max())
    if mode == "cover":
        if d is None:
            d = max(box_dim_auto(X)[1].slope, 0.0)
        if not alpha > 1 + d:
            raise PreconditionError(f"cover mode needs alpha > 1 + d, got alpha={alpha} and d={d:.4g}")
        trav = farthest_point_traversal(Z, stop=2.0 ** -(n_max + 2))
        blocks = []
        for n in range(1, n_max + 1):
            b = build_phi_n(X, n, d, Z, trav)
            b.weight = 2.0 ** ((1 - alpha) * n)
            blocks.append(b)
        r = 2.0 ** (1 - alpha)
        tail = math.sqrt(len(Z)) * r ** (n_max + 1) / (1 - r)
        low_far = 2.0 ** (1 - alpha) / 4
        meta = {"mode": mode, "alpha": alpha, "d": d}
    elif mode == "thickness":
        if tau is None or not 0 < tau < 1:
            raise PreconditionError("thickness mode needs tau in (0, 1)")
        if not alpha > (1 + tau) / (1 - tau):
            raise PreconditionError(
                f"thickness mode needs alpha > (1+tau)/(1-tau) = {(1 + tau) / (1 - tau):.4g}, got {alpha}"
            )
        beta = 1.0 / (1.0 - tau)
        profile = None
        if X.p == 2:
            try:
                profile = SVDProfile(X)
            except BudgetError:
                profile = None
        blocks = []
        for n in range(1, n_max + 1):
            b = build_phi_n_thickness(X, n, tau, Z, profile=profile)
            b.weight = 2.0 ** ((beta - alpha) * n)
            blocks.append(b)
        r = 2.0 ** (beta - alpha)
        rank = min(len(X), X.columns().size)
        tail = math.sqrt(rank) * r ** (n_max + 1) / (1 - r)
        low_far = 2.0 ** (-1 - alpha)
        meta = {"mode": mode, "alpha": alpha, "tau": tau, "beta": beta}
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    meta.update(
        {
            "n_max": n_max,
            "radius": R,
            "lower_constant": min(2.0 ** (-1 - alpha), low_far / max(R, 1.0) ** alpha),
            "lower_valid_from": 2.0**-n_max,
        }
    )
    phi = BlockMap(blocks, tail, meta)
    meta["upper_constant"] = phi.lipschitz_bound()
    return phi


def two_sided_check(phi: BlockMap, X: PointCloud):
    """Pairs violating c ||z||^alpha <= |Phi z| (for ||z|| >= 2^-n_max) or |Phi z| <= C ||z||."""
    meta = phi.meta
    alpha = meta["alpha"]
    dx = pdist_metric(X)
    dy = pdist(phi.evaluate(X)) if len(X) > 1 else np.zeros(0)
    low = meta["lower_constant"] * dx**alpha
    lower_ok = (dx < meta["lower_valid_from"]) | (dy >= low * (1 - 1e-12))
    upper_ok = dy <= meta["upper_constant"] * dx * (1 + 1e-12) + 1e-15
    return int(np.sum(~lower_ok)), int(np.sum(~upper_ok))


def pdist_metric(X: PointCloud) -> np.ndarray:
    """Condensed pairwise distances in the norm of X."""
    n = len(X)
    if n < 2:
        return np.zeros(0)
    return np.concatenate([X.metric.from_point(i)[i + 1 :] for i in range(n - 1)])


def _pair(X, k):
    n = len(X)
    i = int(n - 2 - math.floor(math.sqrt(-8 * k + 4 * n * (n - 1) - 7) / 2.0 - 0.5))
    j = int(k + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2)
    return X.ids[i], X.ids[j]


@dataclass
class HolderFit:
    theta: float
    constant: float
    worst_pair: tuple
    residual: float
    lipschitz: float
    kappa: float

    def summary(self) -> dict:
        return {
            "theta": self.theta,
            "constant": self.constant,
            "worst_pair": list(self.worst_pair),
            "residual": self.residual,
            "lipschitz": self.lipschitz,
            "kappa": self.kappa,
        }


def images(L, X: PointCloud) -> np.ndarray:
    return L.evaluate(X)


def holder_fit(L, X: PointCloud) -> HolderFit:
    """Largest theta in (0, 1] with ||z||/D <= kappa (|Lz|/D_L)^theta on all pairs.

    D and D_L are the diameters of X and L(X); kappa is the worst ratio
    (||z||/D) / (|Lz|/D_L) over coarse pairs, ||z|| >= D/2. The reported
    constant is the smallest C with ||z|| <= C |Lz|^theta in original units.
    """
    if len(X) < 2:
        return HolderFit(1.0, 0.0, ("", ""), 0.0, 0.0, 1.0)
    dx = pdist_metric(X)
    dy = pdist(images(L, X))
    if np.any(dy < COLLAPSE):
        k = int(np.argmin(dy))
        raise VerificationError(f"map is not injective on X: pair {_pair(X, k)} collapses")
    D, DL = dx.max(), dy.max()
    u, v = dx / D, dy / DL
    coarse = u >= 0.5
    kappa = float(max(1.0, np.max(u[coarse] / v[coarse])))
    lv = -np.log(v)
    ok = lv > 0
    theta = 1.0
    if ok.any():
        bounds = (math.log(kappa) - np.log(u[ok])) / lv[ok]
        theta = float(min(1.0, bounds.min()))
    ratio = dx / dy**theta
    k = int(np.argmax(ratio))
    C = float(ratio[k])
    residual = float(np.min(C * dy**theta - dx))
    return HolderFit(theta, C, _pair(X, k), residual, float(np.max(dy / dx)), kappa)


def compose_embedding(phi: BlockMap, T: SampledMap) -> SampledMap:
    """Rows of T applied to the coordinates of phi (T acts on R^out_dim, coordinates 1..out_dim)."""
    dim = phi.out_dim
    if T.columns.size and (T.columns.min() < 1 or T.columns.max() > dim):
        raise PreconditionError(f"T acts on coordinates outside 1..{dim}")
    P, cols = phi.dense()
    full = np.zeros((T.k, dim))
    full[:, T.columns - 1] = T.matrix
    return SampledMap(full @ P, cols, T.seed)
