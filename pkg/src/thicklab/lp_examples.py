"""'Orthogonal' coordinate sequences A = {alpha_n e_n} and their closed-form exponents."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .pointcloud import PointCloud
from .sequence_space import INF, check_exponent, conjugate


@dataclass(frozen=True)
class OrthogonalSequenceSpec:
    """alpha_n = n**(-1/d) (``kind="power"``), exp(-rate*n) (``"exponential"``),
    or an explicit nonincreasing sequence (``kind="custom"``)."""

    d: float = 1.0
    count: int = 4096
    p: float = 2.0
    kind: str = "power"
    rate: float = 1.0
    alphas: tuple | None = None

    def __post_init__(self):
        check_exponent(self.p)
        if self.kind not in ("power", "exponential", "custom"):
            raise PreconditionError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "power" and not self.d > 0:
            raise PreconditionError("decay dimension d must be positive")
        if self.kind == "custom":
            a = np.asarray(self.alphas, dtype=float)
            if a.size < 2 or np.any(a <= 0) or np.any(np.diff(a) > 0):
                raise PreconditionError("custom alphas must be positive and nonincreasing")
        elif self.count < 2:
            raise PreconditionError("need at least two points")

    def coefficients(self) -> np.ndarray:
        if self.kind == "custom":
            return np.asarray(self.alphas, dtype=float)
        n = np.arange(1, self.count + 1, dtype=float)
        if self.kind == "power":
            return n ** (-1.0 / self.d)
        return np.exp(-self.rate * n)


def make_orthogonal_sequence(spec: OrthogonalSequenceSpec) -> PointCloud:
    a = spec.coefficients()
    k = a.size
    width = len(str(k))
    ids = [f"a{i:0{width}d}" for i in range(1, k + 1)]
    return PointCloud(ids, np.arange(k + 1), np.arange(1, k + 1), a, spec.p)


def exact_box_dim(spec: OrthogonalSequenceSpec) -> float:
    """limsup log n / -log alpha_n; for custom sequences the tail maximum is used."""
    if spec.kind == "power":
        return float(spec.d)
    if spec.kind == "exponential":
        return 0.0
    a = spec.coefficients()
    n = np.arange(1, a.size + 1)
    ok = (a < 1) & (n > 1)
    ratios = np.log(n[ok]) / -np.log(a[ok])
    if ratios.size == 0:
        return 0.0
    return float(ratios[ratios.size // 2 :].max())


def thickness_lower_formula(spec: OrthogonalSequenceSpec) -> float:
    """q d / (q + d) with q conjugate to p; equals d when q is infinite."""
    d = exact_box_dim(spec)
    q = conjugate(spec.p)
    if q == INF:
        return d
    if d == 0:
        return 0.0
    return q * d / (q + d)


def expected_difference_dim(spec: OrthogonalSequenceSpec) -> float:
    return 2.0 * exact_box_dim(spec)


def pair_distance(spec: OrthogonalSequenceSpec, n: int, m: int) -> float:
    """||a_n - a_m||_p for 1-based n != m."""
    a = spec.coefficients()
    x, y = a[n - 1], a[m - 1]
    if spec.p == INF:
        return float(max(x, y))
    return float((x**spec.p + y**spec.p) ** (1.0 / spec.p))


def exact_cover_count(spec: OrthogonalSequenceSpec, eps: float) -> int:
    """N(A, eps) in c_0: every a_n with alpha_n > eps needs its own ball and the
    smallest point absorbs the rest."""
    a = spec.coefficients()
    big = int(np.sum(a > eps))
    return big + (1 if big < a.size else 0)

