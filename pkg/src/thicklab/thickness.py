"""Brackets on the thickness d(X, eps) and constructions of separating functional families."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from .convex import distance_to_span
from .covering import (
    DIFFERENCE_LIMIT,
    EpsilonLadder,
    DimensionEstimate,
    Traversal,
    difference_set,
    farthest_point_traversal,
    fit_log_log,
)
from .errors import BudgetError, PreconditionError, VerificationError
from .pointcloud import PointCloud
from .sequence_space import INF, Functional, SparseVector, conjugate, dual_norm, norming_functional

RANK_TOL = 1e-12
SUBSET_BUDGET = 64
PROJECTION_BUDGET = 4096
SVD_LIMIT = 25_000_000


def _dense(vectors, columns=None):
    if columns is None:
        columns = np.unique(np.concatenate([v.indices for v in vectors] + [np.zeros(0, np.int64)]))
    M = np.zeros((columns.size, len(vectors)))
    for j, v in enumerate(vectors):
        M[:, j] = v.to_dense(columns)
    return M, columns


@dataclass
class Subspace:
    """Span of linearly independent finite-support vectors in l_p."""

    basis: list
    p: float

    def __post_init__(self):
        self.basis = list(self.basis)
        if self.basis:
            M, _ = _dense(self.basis)
            s = np.linalg.svd(M, compute_uv=False)
            if s.min() <= RANK_TOL * max(s.max(), 1.0):
                raise PreconditionError("subspace basis is linearly dependent")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def columns(self, extra=()):
        parts = [v.indices for v in self.basis] + [np.asarray(e, dtype=np.int64) for e in extra]
        return np.unique(np.concatenate(parts + [np.zeros(0, np.int64)]))

    def matrix(self, columns) -> np.ndarray:
        return _dense(self.basis, columns)[0] if self.basis else np.zeros((len(columns), 0))

    @classmethod
    def spanned_by(cls, vectors, p, tol=RANK_TOL) -> "Subspace":
        """Independent subset (pivoted QR order) spanning the same space."""
        vectors = [v for v in vectors if not v.is_zero()]
        if not vectors:
            return cls([], p)
        M, _ = _dense(vectors)
        _, R, piv = linalg.qr(M, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > tol * max(diag.max(initial=0.0), 1.0)))
        keep = sorted(piv[:rank])
        return cls([vectors[i] for i in keep], p)


def subspace_distance_bounds(x: SparseVector, V: Subspace):
    """(upper, lower) bounds on dist_p(x, V); exact for p = 2."""
    cols = V.columns([x.indices])
    return distance_to_span(x.to_dense(cols), V.matrix(cols), V.p)


def dist_to_subspace(x: SparseVector, V: Subspace) -> float:
    return subspace_distance_bounds(x, V)[0]


def thickness_upper_span_centers(X: PointCloud, eps: float, traversal: Traversal | None = None) -> Subspace:
    """Span of a greedy eps-net; every point lies within eps of its nearest center."""
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    if traversal is None or (not traversal.complete and traversal.final_radius >= eps):
        traversal = farthest_point_traversal(X, stop=eps)
    m = traversal.count(eps)
    if traversal.coverage(m) > eps:
        raise VerificationError("greedy net does not cover at the requested radius")
    return Subspace.spanned_by([X[i] for i in traversal.order[:m]], X.p)


class SVDProfile:
    """Singular directions of the point matrix, split over support-connected blocks.

    Blocks of points sharing no coordinates are mutually orthogonal, so the
    global top-k singular subspace is the union of per-block leading directions.
    """

    def __init__(self, X: PointCloud):
        cols = X.columns()
        M = X.to_csr(cols)
        n, D = M.shape
        graph = sparse.bmat([[None, M], [M.T, None]]).tocsr()
        graph.data[:] = 1.0
        ncomp, labels = csgraph.connected_components(graph, directed=False)
        row_lab = labels[:n]
        self.columns = cols
        self.blocks = []
        values, owner = [], []
        for c in np.unique(row_lab):
            rows = np.flatnonzero(row_lab == c)
            bcols = np.flatnonzero(labels[n:] == c)
            if bcols.size == 0:
                self.blocks.append((rows, bcols, np.zeros((rows.size, 0)), np.zeros(0), np.zeros((0, 0))))
                continue
            if rows.size * bcols.size > SVD_LIMIT:
                raise BudgetError("point matrix too large for a dense SVD")
            sub = M[rows][:, bcols].toarray()
            U, s, Vt = np.linalg.svd(sub, full_matrices=False)
            coef = U * s
            self.blocks.append((rows, bcols, coef, s, Vt))
            values.extend(s)
            owner.extend([len(self.blocks) - 1] * s.size)
        order = np.argsort(-np.asarray(values), kind="stable")
        self.sorted_values = np.asarray(values)[order]
        self.sorted_owner = np.asarray(owner, dtype=np.int64)[order]
        self.n = n

    def _per_block(self, k):
        return np.bincount(self.sorted_owner[:k], minlength=len(self.blocks))

    def residuals(self, k: int) -> np.ndarray:
        """Distance of every point to the top-k singular subspace."""
        take = self._per_block(k)
        out = np.zeros(self.n)
        for b, (rows, _, coef, _, _) in enumerate(self.blocks):
            tail = coef[:, take[b]:]
            out[rows] = np.sqrt(np.sum(tail**2, axis=1))
        return out

    def smallest_k(self, eps: float) -> int:
        lo, hi = 0, self.sorted_values.size
        if self.residuals(0).max(initial=0.0) <= eps:
            return 0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.residuals(mid).max(initial=0.0) <= eps:
                hi = mid
            else:
                lo = mid
        return hi

    def subspace(self, k: int) -> Subspace:
        take = self._per_block(k)
        basis = []
        for b, (_, bcols, _, _, Vt) in enumerate(self.blocks):
            for r in range(take[b]):
                basis.append(SparseVector(self.columns[bcols], Vt[r]))
        return Subspace(basis, 2.0)


def thickness_upper_svd(X: PointCloud, eps: float, profile: SVDProfile | None = None) -> int:
    """Smallest k whose top-k singular subspace is within eps of every point (p = 2)."""
    if X.p != 2:
        raise PreconditionError("the SVD upper bound needs p = 2")
    profile = profile or SVDProfile(X)
    return profile.smallest_k(eps)


def independence_margin(vectors, p) -> float:
    """Certified lower bound on min over ||lambda||_1 = 1 of ||sum lambda_i x_i||_p."""
    k = len(vectors)
    if k == 0:
        return math.inf
    M, cols = _dense(vectors)
    if M.shape[0] < k:
        return 0.0
    smin = np.linalg.svd(M, compute_uv=False).min()
    bound = smin / math.sqrt(k)
    if p > 2:
        # ||u||_p >= D^(1/p - 1/2) ||u||_2 on a D-dimensional support
        expo = -0.5 if p == INF else 1.0 / p - 0.5
        bound *= cols.size**expo
    if smin > 0:
        # lambda = L M lambda for the left inverse L, so ||M lambda||_p >= ||lambda||_p / ||L||_{p->p},
        # with ||L||_{p->p} <= ||L||_1^(1/p) ||L||_inf^(1/q) and ||lambda||_p >= k^(-1/q) ||lambda||_1
        L = np.linalg.pinv(M)
        if np.allclose(L @ M, np.eye(k), atol=1e-10):
            ip = 0.0 if p == INF else 1.0 / p
            n1 = np.abs(L).sum(axis=0).max()
            ninf = np.abs(L).sum(axis=1).max()
            interp = n1**ip * ninf ** (1 - ip)
            bound = max(bound, k ** (ip - 1) / interp * (1 - 1e-12))
    return float(bound)


def independence_lower_bound(X: PointCloud, subset, eps: float) -> bool:
    """True certifies d(X, eps) >= len(subset); False only means no certificate."""
    rows = [X.index_of(i) for i in subset]
    if len(set(rows)) != len(rows):
        raise PreconditionError("subset ids must be distinct")
    return independence_margin([X[r] for r in rows], X.p) > eps


def _pairwise_orthogonal(vectors) -> bool:
    if not vectors:
        return True
    allidx = np.concatenate([v.indices for v in vectors])
    if np.unique(allidx).size == allidx.size:
        return True
    M, _ = _dense(vectors)
    G = M.T @ M
    scale = np.sqrt(np.outer(np.diag(G), np.diag(G)))
    off = np.abs(G - np.diag(np.diag(G)))
    return bool(np.all(off <= 1e-12 * np.maximum(scale, 1e-300)))


def hilbert_projection_lower_bound(A: PointCloud, eps: float) -> float:
    """k (1 - eps/||a_k||)^2 for k pairwise-orthogonal points, a_k the shortest."""
    vectors = A.vectors()
    if not _pairwise_orthogonal(vectors):
        raise PreconditionError("points are not pairwise orthogonal")
    shortest = float(A.with_p(2).norms().min())
    if not eps < shortest:
        raise PreconditionError("eps must be smaller than the shortest point norm")
    return len(vectors) * (1.0 - eps / shortest) ** 2


def _projection_profile(X: PointCloud, budget: int):
    """Longest norm-ordered prefix of pairwise orthogonal points (l_2 norms)."""
    norms2 = X.with_p(2).norms()
    order = np.argsort(-norms2, kind="stable")
    used = set()
    prefix = []
    for r in order[:budget]:
        if norms2[r] == 0:
            break
        cols = set(X[r].indices.tolist())
        if used & cols:
            break
        used |= cols
        prefix.append(int(r))
    return prefix, norms2[prefix]


def _projection_count(prefix_norms, eps):
    """max over k of ceil(k (1 - eps/n_k)^2), n_k the k-th largest norm."""
    n = np.asarray(prefix_norms)
    ok = n > eps
    if not ok.any():
        return 0, 0
    k = np.arange(1, n.size + 1)[ok]
    vals = k * (1.0 - eps / n[ok]) ** 2
    j = int(np.argmax(vals))
    return int(math.ceil(vals[j] - 1e-9)), int(k[j])


def thickness_lower_bound(X: PointCloud, eps: float, budget: int = SUBSET_BUDGET,
                          projection=None):
    """Best certified lower bound on d(X, eps) and the ids that witness it."""
    norms = X.norms()
    order = np.argsort(-norms, kind="stable")
    chosen = []
    for r in order[: 4 * budget]:
        if norms[r] <= eps or len(chosen) >= budget:
            break
        trial = chosen + [int(r)]
        if independence_margin([X[i] for i in trial], X.p) > eps:
            chosen = trial
    best, witness = len(chosen), [X.ids[i] for i in chosen]
    if X.p <= 2:
        prefix, pnorms = projection if projection is not None else _projection_profile(X, PROJECTION_BUDGET)
        count, k = _projection_count(pnorms, eps)
        if count > best:
            best, witness = count, [X.ids[i] for i in prefix[:k]]
    return best, witness


@dataclass
class ThicknessBracket:
    epsilon: float
    lower: int
    upper: int
    lower_witness_ids: list = field(default_factory=list)
    upper_subspace: Subspace | None = None

    def report(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "lower": self.lower,
            "upper": self.upper,
            "lower_witness_ids": list(self.lower_witness_ids),
            "upper_dim": self.upper,
        }


def best_upper_subspace(X: PointCloud, eps: float, traversal=None, profile=None) -> Subspace:
    """Smallest-dimensional verified approximating subspace among the constructions."""
    V = thickness_upper_span_centers(X, eps, traversal)
    if X.p == 2:
        try:
            profile = profile or SVDProfile(X)
        except BudgetError:
            return V
        k = profile.smallest_k(eps)
        if k < V.dim:
            V = profile.subspace(k)
    return V


def thickness_bracket(X: PointCloud, eps: float, budget: int = SUBSET_BUDGET,
                      traversal=None, profile=None, projection=None) -> ThicknessBracket:
    V = best_upper_subspace(X, eps, traversal, profile)
    lower, witness = thickness_lower_bound(X, eps, budget, projection)
    if lower > V.dim:
        raise VerificationError(f"lower bound {lower} exceeds verified upper {V.dim} at eps={eps:g}")
    return ThicknessBracket(eps, lower, V.dim, witness, V)


@dataclass
class ThicknessEstimate:
    lower: DimensionEstimate
    upper: DimensionEstimate
    brackets: list

    def summary(self) -> dict:
        return {
            "lower_slope": self.lower.slope,
            "upper_slope": self.upper.slope,
            "lower": self.lower.summary(),
            "upper": self.upper.summary(),
        }


def thickness_dim_estimate(X: PointCloud, ladder: EpsilonLadder, budget: int = SUBSET_BUDGET) -> ThicknessEstimate:
    scales = ladder.scales
    traversal = farthest_point_traversal(X, stop=float(scales.min()))
    profile = None
    if X.p == 2:
        try:
            profile = SVDProfile(X)
        except BudgetError:
            profile = None
    projection = _projection_profile(X, PROJECTION_BUDGET) if X.p <= 2 else None
    brackets = [
        thickness_bracket(X, float(e), budget, traversal, profile, projection) for e in scales
    ]
    lower = _fit_positive(scales, [b.lower for b in brackets])
    upper = _fit_positive(scales, [b.upper for b in brackets])
    return ThicknessEstimate(lower, upper, brackets)


def _fit_positive(scales, counts):
    """Log-log fit over the scales with a nonzero count; d(X, eps) = 0 has no logarithm."""
    counts = np.asarray(counts)
    keep = counts > 0
    if keep.sum() < 2:
        return fit_log_log(scales, np.maximum(counts, 1))
    return fit_log_log(np.asarray(scales)[keep], counts[keep])


# --- separating functional families -------------------------------------------------

COVER_ALPHA = 48 / 100
COORDINATE_ALPHA = 1 / 5


@dataclass
class FunctionalFamily:
    functionals: list
    alpha: float
    p: float
    label: str = ""

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise PreconditionError("alpha must lie in (0, 1]")
        for f in self.functionals:
            if abs(dual_norm(f, self.p) - 1.0) > 1e-10:
                raise PreconditionError("family functionals must have unit dual norm")

    def __len__(self):
        return len(self.functionals)


def evaluate_functionals(functionals, X: PointCloud) -> sparse.csr_matrix:
    """Sparse N x m matrix of f_j(x_i)."""
    m = len(functionals)
    if m == 0:
        return sparse.csr_matrix((len(X), 0))
    fcols = np.concatenate([f.indices for f in functionals])
    cols = np.union1d(X.columns(), fcols)
    F = sparse.csr_matrix(
        (
            np.concatenate([f.values for f in functionals]),
            np.searchsorted(cols, fcols),
            np.concatenate([[0], np.cumsum([f.nnz for f in functionals])]),
        ),
        shape=(m, cols.size),
    )
    return (X.to_csr(cols) @ F.T).tocsr()


def _image_cloud(F: FunctionalFamily, X: PointCloud) -> PointCloud:
    """Rows of family values; l_inf distances give the best listed functional, and
    for p = 2 an orthonormalized family gives the best functional in the span."""
    funcs = F.functionals
    if F.p == 2 and funcs:
        M, cols = _dense(funcs)
        # SVD rather than unpivoted QR: families often contain f and -f side by side
        U, sv, _ = np.linalg.svd(M, full_matrices=False)
        keep = sv > RANK_TOL * max(sv.max(initial=0.0), 1.0)
        funcs = [Functional(cols, U[:, j]) for j in np.flatnonzero(keep)]
    V = evaluate_functionals(funcs, X)
    return PointCloud.from_csr(X.ids, V, np.arange(1, V.shape[1] + 1), 2.0 if F.p == 2 else INF)


def sigma_check(F: FunctionalFamily, X: PointCloud, eps: float, alpha: float | None = None) -> bool:
    """Every pair at distance >= eps is separated by some unit functional at level alpha*eps."""
    alpha = F.alpha if alpha is None else alpha
    level = alpha * eps
    Y = _image_cloud(F, X)
    for i in range(len(X)):
        dx = X.metric.from_point(i)[i + 1 :]
        far = dx >= eps
        if not far.any():
            continue
        dy = Y.metric.from_point(i)[i + 1 :]
        if np.any(dy[far] < level):
            return False
    return True


def sigma_family_from_cover(X: PointCloud, eps: float, Z: PointCloud | None = None,
                            traversal: Traversal | None = None) -> FunctionalFamily:
    """Norming functionals of an eps-net of X - X.

    Any z with ||z|| >= 50 eps is then separated at level 48 eps.
    """
    Z = Z if Z is not None else difference_set(X)
    if traversal is None or (not traversal.complete and traversal.final_radius >= eps):
        traversal = farthest_point_traversal(Z, stop=eps)
    m = traversal.count(eps)
    funcs = [norming_functional(Z[i], X.p) for i in traversal.order[:m] if not Z[i].is_zero()]
    return FunctionalFamily(funcs, COVER_ALPHA, X.p, "cover")


def sigma_family_coordinates(X: PointCloud, eps: float, alpha: float = COORDINATE_ALPHA) -> FunctionalFamily:
    """Coordinate functionals on every coordinate whose spread over X reaches alpha*eps."""
    M = X.to_csr()
    cols = X.columns()
    hi = np.maximum(M.max(axis=0).toarray().ravel(), 0.0)
    lo = np.minimum(M.min(axis=0).toarray().ravel(), 0.0)
    keep = cols[(hi - lo) >= alpha * eps]
    return FunctionalFamily([Functional.unit(int(j)) for j in keep], alpha, X.p, "coordinates")


def sigma_family_signs(X: PointCloud, eps: float, Z: PointCloud | None = None,
                       dense_limit: int = 2_000_000) -> FunctionalFamily | None:
    """l_1 only: the distinct sign patterns of the differences of norm >= eps.

    sign(z) norms z, so every such difference is separated at level eps.
    Returns None when the dense sign matrix would exceed ``dense_limit`` entries.
    """
    if X.p != 1:
        raise PreconditionError("sign family needs p = 1")
    Z = Z if Z is not None else difference_set(X)
    far = Z.norms() >= eps
    cols = Z.columns()
    if int(far.sum()) * cols.size > dense_limit:
        return None
    S = np.sign(Z.to_csr(cols)[np.flatnonzero(far)].toarray())
    if S.shape[0]:
        # f and -f separate the same pairs
        S *= S[np.arange(S.shape[0]), np.argmax(S != 0, axis=1)][:, None]
        S = np.unique(S, axis=0)
    funcs = [Functional(cols[u != 0], u[u != 0]) for u in S]
    return FunctionalFamily(funcs, 1.0, 1.0, "signs")


def sigma_family_projection(X: PointCloud, eps: float, alpha: float, profile: SVDProfile | None = None) -> FunctionalFamily:
    """Hilbert case: an orthonormal basis of a subspace within eps(1-alpha)/2 of X."""
    if X.p != 2:
        raise PreconditionError("projection family needs p = 2")
    profile = profile or SVDProfile(X)
    k = profile.smallest_k(eps * (1 - alpha) / 2)
    V = profile.subspace(k)
    return FunctionalFamily([Functional(v.indices, v.values) for v in V.basis], alpha, 2.0, "projection")


@dataclass
class DualEstimate:
    estimate: DimensionEstimate
    sizes: list
    sources: list

    def summary(self) -> dict:
        return {**self.estimate.summary(), "sources": self.sources}


def dual_thickness_upper_estimate(X: PointCloud, ladder: EpsilonLadder, alpha: float = COVER_ALPHA,
                                  cover_limit: int = 50_000) -> DualEstimate:
    """Per scale, the smallest family passing sigma_check; the fitted slope bounds tau*(X) above."""
    if not 0 < alpha <= 1:
        raise PreconditionError("alpha must lie in (0, 1]")
    scales = ladder.scales
    Z = None
    n = len(X)
    if n * (n - 1) + 1 <= min(cover_limit, DIFFERENCE_LIMIT):
        Z = difference_set(X)
    profile = None
    if X.p == 2:
        try:
            profile = SVDProfile(X)
        except BudgetError:
            profile = None
    zt = None
    sizes, sources, used = [], [], []
    for eps in scales:
        eps = float(eps)
        cheap = [sigma_family_coordinates(X, eps, alpha)]
        if profile is not None:
            cheap.append(sigma_family_projection(X, eps, alpha, profile))
        if X.p == 1 and Z is not None:
            signs = sigma_family_signs(X, eps, Z)
            if signs is not None:
                cheap.append(signs)
        best = None
        for fam in sorted(cheap, key=len):
            if sigma_check(fam, X, eps, alpha):
                best = fam
                break
        if Z is not None:
            # the cover family only matters when it is smaller than the best cheap one
            cap = None if best is None else len(best)
            if cap != 0:
                reuse = zt is not None and (zt.complete or zt.final_radius < eps / 50)
                if not reuse:
                    zt = farthest_point_traversal(Z, stop=eps / 50, max_centers=None if cap is None else cap + 1)
                if zt.complete or zt.final_radius < eps / 50:
                    fam = sigma_family_from_cover(X, eps / 50, Z, zt)
                    if (best is None or len(fam) < len(best)) and sigma_check(fam, X, eps, alpha):
                        best = fam
        if best is not None:
            used.append(eps)
            sizes.append(len(best))
            sources.append(best.label)
    if len(used) < 2:
        raise BudgetError("no separating family passed on enough scales")
    return DualEstimate(fit_log_log(used, sizes), sizes, sources)
