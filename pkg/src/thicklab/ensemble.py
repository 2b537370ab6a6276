"""Random linear maps L = (L_1..L_k), L_i = sum_n n^-alpha phi_{i,n}, with phi_{i,n}
drawn uniformly from (a coordinate model of) the unit ball of G_n."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .auerbach import auerbach_basis
from .covering import box_dim_auto
from .embeddings import holder_fit, pdist_metric
from .errors import BudgetError, PreconditionError, VerificationError
from .linear_maps import SampledMap, functional_matrix
from .pointcloud import PointCloud
from .sequence_space import INF, Functional, SparseVector, check_exponent, conjugate
from .thickness import SVDProfile, best_upper_subspace

DIM_BUDGET = 32


def sample_unit_ball(dim: int, q: float, rng, size: int | None = None) -> np.ndarray:
    """Uniform samples from the unit ball of l_q^dim.

    Uses |y_i| ~ Gamma(1/q)^(1/q) with random signs and an independent Exp(1)
    variable z: y / (||y||_q^q + z)^(1/q) is uniform on the ball.
    """
    if dim < 1:
        raise PreconditionError("dimension must be at least 1")
    q = check_exponent(q)
    rng = np.random.default_rng(rng)
    shape = (dim,) if size is None else (size, dim)
    if q == INF:
        return rng.uniform(-1.0, 1.0, shape)
    y = rng.gamma(1.0 / q, 1.0, shape) ** (1.0 / q) * rng.choice([-1.0, 1.0], shape)
    z = rng.exponential(1.0, shape[:-1] + (1,))
    r = (np.sum(np.abs(y) ** q, axis=-1, keepdims=True) + z) ** (1.0 / q)
    return y / r


def ball_scale(F: np.ndarray, q: float) -> float:
    """Bound on max ||F c||_q over ||c||_q <= 1 (exact for q in {1, 2, inf})."""
    A = np.abs(F)
    k1 = float(A.sum(axis=0).max())
    kinf = float(A.sum(axis=1).max())
    if q == 1:
        return k1
    if q == INF:
        return kinf
    if q == 2:
        return float(np.linalg.norm(F, 2))
    # Riesz-Thorin between the l_1 and l_inf operator norms
    return k1 ** (1.0 / q) * kinf ** (1.0 - 1.0 / q)


@dataclass
class Level:
    n: int
    functionals: list
    scale: float
    accuracy: float = math.nan

    @property
    def dim(self) -> int:
        return len(self.functionals)


@dataclass
class EnsembleSpec:
    levels: list
    p: float
    alpha: float = 2.0
    k: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.alpha > 1:
            raise PreconditionError("alpha must exceed 1")
        if self.k < 1:
            raise PreconditionError("k must be at least 1")
        self._mats = None

    @property
    def q(self) -> float:
        return conjugate(self.p)

    @property
    def n_max(self) -> int:
        return max((lv.n for lv in self.levels), default=0)

    @property
    def dims(self) -> list:
        return [lv.dim for lv in self.levels]

    def weight(self, n: int) -> float:
        return float(n) ** -self.alpha

    def row_bound(self) -> float:
        return float(sum(self.weight(lv.n) for lv in self.levels))

    def _matrices(self):
        """Per level, the D x d_n matrix of basis functionals over common columns."""
        if self._mats is None:
            allf = [f for lv in self.levels for f in lv.functionals]
            cols = np.unique(np.concatenate([f.indices for f in allf] + [np.zeros(0, np.int64)]))
            mats = []
            for lv in self.levels:
                M = np.zeros((cols.size, lv.dim))
                for j, f in enumerate(lv.functionals):
                    M[np.searchsorted(cols, f.indices), j] = f.values
                mats.append(M)
            self._mats = (cols, mats)
        return self._mats

    def with_k(self, k: int) -> "EnsembleSpec":
        return EnsembleSpec(self.levels, self.p, self.alpha, k, dict(self.meta))


def spec_from_functionals(groups, p, alpha=2.0, k=1) -> EnsembleSpec:
    """Ensemble over given per-level bases of functionals (levels numbered from 1)."""
    q = conjugate(p)
    levels = []
    for n, funcs in enumerate(groups, start=1):
        funcs = list(funcs)
        M, _ = functional_matrix(funcs)
        levels.append(Level(n, funcs, ball_scale(M.toarray().T, q)))
    return EnsembleSpec(levels, p, alpha, k)


def build_subspace_sequence(X: PointCloud, tau: float, theta: float, n_max: int,
                            alpha: float = 2.0, k: int = 1, budget: int = DIM_BUDGET) -> EnsembleSpec:
    """G_n spanned by Auerbach duals of V_n, dist(X, V_n) <= 2^(-theta beta n) / 3."""
    if not 0 < tau < 1:
        raise PreconditionError("tau must lie in (0, 1)")
    if not theta > 0:
        raise PreconditionError("theta must be positive")
    if n_max < 1:
        raise PreconditionError("n_max must be at least 1")
    beta = 1.0 / (1.0 - tau)
    q = conjugate(X.p)
    profile = None
    if X.p == 2:
        try:
            profile = SVDProfile(X)
        except BudgetError:
            profile = None
    levels = []
    cache = {}
    for n in range(1, n_max + 1):
        acc = 2.0 ** (-theta * beta * n) / 3
        V = best_upper_subspace(X, acc, profile=profile)
        if V.dim > budget:
            raise BudgetError(f"level {n}: accuracy {acc:.3g} needs dimension {V.dim} > budget {budget}")
        if V.dim == 0:
            funcs = [Functional.unit(int(X.columns()[0]) if X.columns().size else 1)]
        else:
            key = tuple(v.key() for v in V.basis)
            if key not in cache:
                cache[key] = auerbach_basis(V).duals
            funcs = cache[key]
        M = functional_matrix(funcs)[0].toarray().T
        levels.append(Level(n, list(funcs), ball_scale(M, q), acc))
    return EnsembleSpec(levels, X.p, alpha, k, {"tau": tau, "theta": theta, "beta": beta})


def sample_map(spec: EnsembleSpec, seed) -> SampledMap:
    """Draw every phi_{i,n} uniformly from its ball and sum with weights n^-alpha."""
    rng = np.random.default_rng(seed)
    cols, mats = spec._matrices()
    out = np.zeros((spec.k, cols.size))
    coeffs = []
    for i in range(spec.k):
        row = []
        for lv, M in zip(spec.levels, mats):
            c = sample_unit_ball(lv.dim, spec.q, rng) / lv.scale
            row.append(c)
            out[i] += spec.weight(lv.n) * (M @ c)
        coeffs.append(row)
    seed = int(seed) if np.isscalar(seed) else [int(s) for s in np.atleast_1d(seed)]
    return SampledMap(out, cols, seed, coeffs)


def _level(spec: EnsembleSpec, n: int):
    for j, lv in enumerate(spec.levels):
        if lv.n == n:
            return j, lv
    raise PreconditionError(f"no level {n} in the ensemble")


def check_slab_bound(spec: EnsembleSpec, n: int, x: SparseVector, a: float, eps: float,
                     g_coeffs, trials: int = 100_000, seed=0):
    """Monte-Carlo lambda_n{phi : |a + phi(x)| <= eps} against d_n eps / |g(x)|.

    g is given by coefficients in the unit coefficient ball; it is rescaled into
    the same body as the samples. Returns (empirical, bound, sigma) with sigma
    the binomial standard deviation at the bound.
    """
    j, lv = _level(spec, n)
    cols, mats = spec._matrices()
    fx = mats[j].T @ x.to_dense(cols)
    g = np.asarray(g_coeffs, dtype=float)
    if g.shape != (lv.dim,):
        raise PreconditionError("g coefficients have the wrong length")
    if _qnorm(g, spec.q) > 1 + 1e-12:
        raise PreconditionError("g must lie in the unit ball")
    gx = float(g @ fx) / lv.scale
    if gx == 0:
        raise PreconditionError("g(x) = 0, the bound is vacuous")
    c = sample_unit_ball(lv.dim, spec.q, np.random.default_rng(seed), size=trials) / lv.scale
    hits = np.abs(a + c @ fx) <= eps
    empirical = float(hits.mean())
    bound = lv.dim * eps / abs(gx)
    b = min(bound, 1.0)
    return empirical, bound, math.sqrt(b * (1 - b) / trials)


def _qnorm(c, q):
    c = np.abs(c)
    return float(c.max()) if q == INF else float(np.sum(c**q) ** (1.0 / q))


def _map_seed(seed, trial):
    return [int(seed), int(trial)]


def bad_set_table(spec: EnsembleSpec, X: PointCloud, thetas, ns, trials: int = 100, seed=0) -> np.ndarray:
    """Fractions of maps in Q_n = {L : |Lz| <= 2^-n for some z with ||z|| >= 2^(-theta n)}.

    The same maps are used for every (theta, n), so the table is exactly
    monotone in theta. Returns an array of shape (len(thetas), len(ns)).
    """
    if trials < 1:
        raise PreconditionError("trials must be positive")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ns = np.atleast_1d(np.asarray(ns, dtype=float))
    dx = pdist_metric(X)
    hits = np.zeros((thetas.size, ns.size))
    if dx.size == 0:
        return hits
    for t in range(trials):
        L = sample_map(spec, _map_seed(seed, t))
        dy = pdist(L.evaluate(X))
        for a, th in enumerate(thetas):
            for b, n in enumerate(ns):
                mask = dx >= 2.0 ** (-th * n)
                if mask.any() and dy[mask].min() <= 2.0**-n:
                    hits[a, b] += 1
    return hits / trials


def estimate_bad_set(spec: EnsembleSpec, X: PointCloud, theta: float, n: int, trials: int = 100, seed=0) -> float:
    if trials < 100:
        raise PreconditionError("estimate_bad_set needs at least 100 trials")
    return float(bad_set_table(spec, X, [theta], [n], trials, seed)[0, 0])


def bad_set_bound_shape(n, d, k, theta, tau):
    """n-dependence of the bound C 2^(2nd) (n^2 2^(n beta theta tau) 2^-n 2^(theta beta n))^k."""
    beta = 1.0 / (1.0 - tau)
    n = np.asarray(n, dtype=float)
    return 2.0 ** (2 * n * d) * (n**2 * 2.0 ** (n * beta * theta * tau - n + theta * beta * n)) ** k


def theorem_threshold(k: int, d: float, tau: float) -> float:
    return (1 - tau) * (k - 2 * d) / (k * (1 + tau))


@dataclass
class RateResult:
    fraction: float
    successes: int
    trials: int
    thetas: list
    threshold: float
    d: float
    dims: list
    n_max: int

    def summary(self) -> dict:
        lo, hi = binomial_interval(self.successes, self.trials)
        return {
            "fraction": self.fraction,
            "interval95": [lo, hi],
            "trials": self.trials,
            "threshold": self.threshold,
            "d": self.d,
            "dims": self.dims,
            "n_max": self.n_max,
        }


def binomial_interval(successes: int, trials: int):
    """Normal-approximation 95% interval clipped to [0, 1]."""
    if trials == 0:
        return 0.0, 1.0
    f = successes / trials
    h = 1.96 * math.sqrt(f * (1 - f) / trials)
    return max(0.0, f - h), min(1.0, f + h)


def _auto_levels(X: PointCloud, theta: float, beta: float) -> int:
    dx = pdist_metric(X)
    gap = float(dx[dx > 0].min()) if np.any(dx > 0) else 1.0
    # first n with twice the accuracy 2^(-theta beta n)/3 below the smallest gap,
    # so every difference keeps a component inside the last G_n
    return max(1, int(math.ceil(math.log2(2.0 / (3 * gap)) / (theta * beta))) + 1)


def verify_theorem_rate(X: PointCloud, k: int, theta: float, tau: float, trials: int = 100, seed=0,
                        d: float | None = None, n_max: int | None = None, alpha: float = 2.0) -> RateResult:
    """Fraction of sampled maps whose Hoelder fit on X reaches exponent theta."""
    if d is None:
        d = max(box_dim_auto(X)[1].bracket[1], 0.0) if len(X) > 1 else 0.0
    if not k > 2 * d:
        raise PreconditionError(f"need k > 2 d_B(X): k={k}, d={d:.4g}")
    if not 0 < tau < 1:
        raise PreconditionError("tau must lie in (0, 1)")
    thr = theorem_threshold(k, d, tau)
    if not 0 < theta < thr:
        raise PreconditionError(
            f"need 0 < theta < (1-tau)(k-2d)/(k(1+tau)) = {thr:.4g}, got theta={theta}"
        )
    beta = 1.0 / (1.0 - tau)
    if n_max is None:
        n_max = _auto_levels(X, theta, beta)
    spec = build_subspace_sequence(X, tau, theta, n_max, alpha, k)
    thetas = []
    for t in range(trials):
        L = sample_map(spec, _map_seed(seed, t))
        try:
            thetas.append(holder_fit(L, X).theta)
        except VerificationError:
            thetas.append(0.0)
    ok = int(sum(th >= theta for th in thetas))
    return RateResult(ok / trials if trials else 0.0, ok, trials, thetas, thr, d, spec.dims, n_max)
