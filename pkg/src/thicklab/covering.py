"""Nets, packings, difference sets and box-counting estimates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import BudgetError, PreconditionError
from .pointcloud import PointCloud

EXACT_LIMIT = 20
DIFFERENCE_LIMIT = 2_000_000


@dataclass(frozen=True)
class EpsilonLadder:
    """Dyadic scales 2**-n for n = n_min, n_min + step, ..., n_max."""

    n_min: float
    n_max: float
    step: float = 1.0

    def __post_init__(self):
        if self.step <= 0 or self.n_max < self.n_min:
            raise PreconditionError("ladder needs n_max >= n_min and a positive step")

    @property
    def exponents(self) -> np.ndarray:
        count = int(math.floor((self.n_max - self.n_min) / self.step + 1e-9)) + 1
        return self.n_min + self.step * np.arange(count)

    @property
    def scales(self) -> np.ndarray:
        return 2.0 ** (-self.exponents)

    def __len__(self):
        return self.exponents.size


@dataclass
class DimensionEstimate:
    slope: float
    intercept: float
    window_slopes: list = field(default_factory=list)
    bracket: tuple = (math.nan, math.nan)
    r_squared: float = math.nan
    counts: list = field(default_factory=list)
    degenerate: bool = False

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "bracket": list(self.bracket),
            "r_squared": None if math.isnan(self.r_squared) else self.r_squared,
            "degenerate": self.degenerate,
        }

    def rows(self) -> list[dict]:
        out = []
        for i, (eps, count) in enumerate(self.counts):
            out.append(
                {
                    "epsilon": eps,
                    "count": count,
                    "log_count": math.log(max(count, 1)),
                    "window_slope": self.window_slopes[i - 1][1] if i else "",
                }
            )
        return out


def fit_log_log(scales, counts) -> DimensionEstimate:
    """Least-squares slope of log count against -log scale, with window slopes.

    The bracket spans the consecutive-window slopes over the finest half of
    the scales together with the global slope.
    """
    scales = np.asarray(scales, dtype=float)
    counts = np.asarray(counts, dtype=float)
    x = -np.log(scales)
    y = np.log(np.maximum(counts, 1.0))
    pairs = [(float(e), int(c)) for e, c in zip(scales, counts)]
    windows = [
        ((float(scales[i]), float(scales[i + 1])), float((y[i + 1] - y[i]) / (x[i + 1] - x[i])))
        for i in range(len(x) - 1)
    ]
    if np.ptp(y) == 0:
        return DimensionEstimate(0.0, float(y[0]), windows, (0.0, 0.0), math.nan, pairs, True)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    fine = [s for _, s in windows[len(windows) // 2 :]] + [float(slope)]
    return DimensionEstimate(
        float(slope), float(intercept), windows, (min(fine), max(fine)), r2, pairs, False
    )


def difference_set(X: PointCloud, limit: int = DIFFERENCE_LIMIT) -> PointCloud:
    """All differences x - y (exactly deduplicated), starting with the zero vector."""
    n = len(X)
    if n * (n - 1) + 1 > limit:
        raise BudgetError(f"difference set of {n} points exceeds the limit of {limit} points")
    cols = X.columns()
    M = X.to_csr(cols)
    I, J = np.nonzero(~np.eye(n, dtype=bool))
    D = (M[I] - M[J]).tocsr()
    D.eliminate_zeros()
    D.sort_indices()
    seen = {(b"", b"")}
    keep = []
    ptr, ind, dat = D.indptr, D.indices, D.data
    for r in range(D.shape[0]):
        key = (ind[ptr[r] : ptr[r + 1]].tobytes(), dat[ptr[r] : ptr[r + 1]].tobytes())
        if key not in seen:
            seen.add(key)
            keep.append(r)
    keep = np.asarray(keep, dtype=np.int64)
    Z = sparse.vstack([sparse.csr_matrix((1, cols.size)), D[keep]]).tocsr()
    ids = ["0"] + [f"{X.ids[I[r]]}-{X.ids[J[r]]}" for r in keep]
    return PointCloud.from_csr(ids, Z, cols, X.p)


@dataclass
class Traversal:
    """Farthest-point order; ``radii[k]`` is the distance of center k to centers 0..k-1."""

    order: np.ndarray
    radii: np.ndarray
    final_radius: float
    nearest: np.ndarray
    complete: bool

    def count(self, eps: float) -> int:
        if not self.complete and eps <= self.final_radius:
            raise BudgetError(f"traversal stopped before reaching scale {eps:g}")
        return int(np.sum(self.radii >= eps))

    def coverage(self, m: int) -> float:
        """Covering radius achieved by the first m centers."""
        return float(self.radii[m]) if m < self.radii.size else self.final_radius


def seed_index(X: PointCloud) -> int:
    return min(range(len(X)), key=lambda i: X.ids[i])


def farthest_point_traversal(X: PointCloud, stop: float = 0.0, max_centers=None) -> Traversal:
    """Greedy farthest-point traversal seeded at the lexicographically smallest id.

    A point becomes a center while its distance to the current centers is at
    least ``stop`` (and positive); ties go to the lowest row.
    """
    metric = X.metric
    first = seed_index(X)
    mind = metric.from_point(first)
    nearest = np.full(len(X), first, dtype=np.int64)
    order = [first]
    radii = [math.inf]
    complete = True
    while True:
        j = int(np.argmax(mind))
        r = float(mind[j])
        if r <= 0.0 or r < stop:
            break
        if max_centers is not None and len(order) >= max_centers:
            complete = False
            break
        order.append(j)
        radii.append(r)
        d = metric.from_point(j)
        closer = d < mind
        nearest[closer] = j
        mind = np.where(closer, d, mind)
    final = float(mind.max())
    return Traversal(np.asarray(order), np.asarray(radii), final, nearest, complete)


def greedy_net(X: PointCloud, eps: float) -> list[str]:
    """Maximal eps-separated set that also covers X with closed eps-balls."""
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    t = farthest_point_traversal(X, stop=eps)
    return [X.ids[i] for i in t.order]


def _ball_masks(X: PointCloud, eps: float) -> list[int]:
    D = X.metric.pairwise()
    return [int(sum(1 << j for j in np.flatnonzero(D[i] <= eps))) for i in range(len(X))]


def exact_min_cover(X: PointCloud, eps: float) -> int:
    """Minimum number of closed eps-balls centred in X that cover X (brute force)."""
    n = len(X)
    if n > EXACT_LIMIT:
        raise BudgetError(f"exact cover limited to {EXACT_LIMIT} points, got {n}")
    masks = _ball_masks(X, eps)
    full = (1 << n) - 1
    for k in range(1, n + 1):
        for combo in itertools.combinations(masks, k):
            acc = 0
            for m in combo:
                acc |= m
            if acc == full:
                return k
    return n


def _max_independent(adj: list[int], candidates: int) -> int:
    if candidates == 0:
        return 0
    v = (candidates & -candidates).bit_length() - 1
    rest = candidates & ~(1 << v)
    take = 1 + _max_independent(adj, rest & ~adj[v])
    if adj[v] & rest == 0:
        return take
    return max(take, _max_independent(adj, rest))


def packing_number(X: PointCloud, eps: float, exact: bool = True) -> int:
    """Maximum size of a subset whose pairwise distances are all >= eps.

    With ``exact=False`` (or above the brute-force limit) the greedy traversal
    count is returned, which is a valid lower bound.
    """
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    n = len(X)
    if not exact or n > EXACT_LIMIT:
        return len(greedy_net(X, eps))
    D = X.metric.pairwise()
    conflict = (D < eps) | (D.T < eps)
    np.fill_diagonal(conflict, False)
    adj = [int(sum(1 << j for j in np.flatnonzero(conflict[i]))) for i in range(n)]
    return _max_independent(adj, (1 << n) - 1)


def _ladder_from(t: Traversal, min_scales: int) -> EpsilonLadder:
    if t.radii.size < 2:
        return EpsilonLadder(0, min_scales - 1)
    n_min = math.floor(-math.log2(t.radii[1])) + 1
    fine = t.radii[-1] if not t.complete else max(t.final_radius, t.radii[-1])
    n_max = max(math.floor(-math.log2(fine)), n_min)
    span = n_max - n_min
    step = 1.0
    while span / step + 1 < min_scales and step > 0.125:
        step /= 2
    if span == 0:
        n_max = n_min + (min_scales - 1) * step
    return EpsilonLadder(n_min, n_max, step)


def _auto_traversal(X, saturation, max_centers):
    target = int(min(max(2, saturation * len(X)), max_centers))
    return farthest_point_traversal(X, max_centers=target)


def auto_ladder(X: PointCloud, saturation: float = 0.125, min_scales: int = 6,
                max_centers: int = 50_000) -> EpsilonLadder:
    """Dyadic ladder from just below the diameter down to where the greedy
    count reaches ``saturation * |X|``."""
    return _ladder_from(_auto_traversal(X, saturation, max_centers), min_scales)


def box_dim_auto(X: PointCloud, saturation: float = 0.125, min_scales: int = 6,
                 max_centers: int = 50_000):
    """auto_ladder and box_dim_estimate sharing one traversal."""
    t = _auto_traversal(X, saturation, max_centers)
    ladder = _ladder_from(t, min_scales)
    scales = ladder.scales
    try:
        counts = [t.count(float(e)) for e in scales]
    except BudgetError:
        return ladder, box_dim_estimate(X, ladder)
    return ladder, fit_log_log(scales, counts)


def box_dim_estimate(X: PointCloud, ladder: EpsilonLadder, max_centers=None) -> DimensionEstimate:
    """Greedy box counts along the ladder and their log-log fit."""
    if len(ladder) < 4:
        raise PreconditionError("box-counting needs at least 4 scales")
    scales = ladder.scales
    t = farthest_point_traversal(X, stop=float(scales.min()), max_centers=max_centers)
    counts = [t.count(float(e)) for e in scales]
    return fit_log_log(scales, counts)
