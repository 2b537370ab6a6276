"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

Run alone with ``pytest -v -s tests/test_acceptance.py`` or as part of the full
suite; the lines are printed even when output capture is on.
"""

import math
from functools import lru_cache

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from conftest import make_corpus
from oracles import (
    cover_number,
    dense_dist,
    max_volume_oracle,
    minimax_widths,
    packing_number as oracle_packing,
    thickness_oracle,
)
from thicklab.auerbach import _Coords, auerbach_basis, coordinate_volume
from thicklab.cli import RunConfig, run
from thicklab.convex import vec_norm
from thicklab.covering import (
    EpsilonLadder,
    box_dim_auto,
    difference_set,
    exact_min_cover,
    fit_log_log,
    greedy_net,
    packing_number,
)
from thicklab.embeddings import build_hilbert_embedding, build_phi_n, holder_fit
from thicklab.ensemble import (
    build_subspace_sequence,
    check_slab_bound,
    estimate_bad_set,
    sample_unit_ball,
    spec_from_functionals,
    theorem_threshold,
    verify_theorem_rate,
)
from thicklab import io
from thicklab.errors import VerificationError
from thicklab.linear_maps import apply_rows, functional_matrix
from thicklab.lp_examples import (
    OrthogonalSequenceSpec,
    exact_box_dim,
    make_orthogonal_sequence,
    thickness_lower_formula,
)
from thicklab.pointcloud import PointCloud
from thicklab.sequence_space import INF, Functional, SparseVector, conjugate
from thicklab.thickness import (
    Subspace,
    hilbert_projection_lower_bound,
    independence_lower_bound,
    thickness_bracket,
    thickness_dim_estimate,
)

DS = (0.5, 1.0, 2.0)
PS = (1.0, 2.0, INF)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


def seq_spec(d, count, p):
    return OrthogonalSequenceSpec(d=d, count=count, p=p)


@lru_cache(maxsize=None)
def big_sequence(d, p):
    return make_orthogonal_sequence(seq_spec(d, 4096, p))


@lru_cache(maxsize=None)
def auto_box(d, p):
    return box_dim_auto(big_sequence(d, p))


def test_criterion_1_box_dimension(report):
    rows, ok = [], True
    for p in PS:
        for d in DS:
            truth = exact_box_dim(seq_spec(d, 4096, p))
            _, est = auto_box(d, p)
            lo, hi = est.bracket
            good = lo - 0.15 <= truth <= hi + 0.15
            ok &= good
            rows.append(f"p={p:g} d={d:g} [{lo:.3f},{hi:.3f}]")
    assert report(1, ok, "; ".join(rows))


def test_criterion_2_difference_doubling(report):
    rows, ok = [], True
    for p in PS:
        for d in DS:
            Z = difference_set(make_orthogonal_sequence(seq_spec(d, 512, p)))
            _, est = box_dim_auto(Z, max_centers=10_000)
            good = abs(est.slope - 2 * d) <= 0.25
            ok &= good
            rows.append(f"p={p:g} d={d:g} slope={est.slope:.3f}")
    assert report(2, ok, "; ".join(rows))


def schedule_slope(X):
    """Certified lower slope from independence at eps_k = |a_k| k^(-1/q) / 2."""
    q = conjugate(X.p)
    norms = X.norms()
    ks = [2**j for j in range(12)]
    eps = [0.5 * norms[k - 1] * k ** (-1 / q) for k in ks]
    certified = all(independence_lower_bound(X, X.ids[:k], e) for k, e in zip(ks, eps))
    return certified, fit_log_log(eps, ks).slope


def test_criterion_3_thickness(report):
    rows, ok = [], True
    for d in DS:
        X = big_sequence(d, 2.0)
        ladder, _ = auto_box(d, 2.0)
        est = thickness_dim_estimate(X, ladder)
        lo, hi = sorted((est.lower.slope, est.upper.slope))
        good = lo - 0.15 <= d <= hi + 0.15
        ok &= good
        rows.append(f"p=2 d={d:g} [{est.lower.slope:.3f},{est.upper.slope:.3f}]")
    for d in DS:
        X = big_sequence(d, INF)
        floor = thickness_lower_formula(seq_spec(d, 4096, INF)) - 0.15
        certified, slope = schedule_slope(X)
        ladder, _ = auto_box(d, INF)
        est = thickness_dim_estimate(X, ladder)
        good = certified and slope >= floor and est.lower.slope >= floor
        ok &= good
        rows.append(f"p=inf d={d:g} schedule={slope:.3f} lower={est.lower.slope:.3f} floor={floor:.3f}")
    A5 = make_orthogonal_sequence(seq_spec(1.0, 5, 2.0))
    h = hilbert_projection_lower_bound(A5, A5.norms()[-1] / 4)
    good = h == pytest.approx(2.8125, abs=1e-12)
    ok &= good
    rows.append(f"projection={h:.4f}")
    assert report(3, ok, "; ".join(rows))


def test_criterion_4_oracle_equivalence(report):
    bad_bracket = bad_sandwich = 0
    rng = np.random.default_rng(4)
    for _ in range(150):
        n, dim = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        P = rng.standard_normal((n, dim)) * rng.uniform(0.2, 2.0, dim)
        X = PointCloud.from_dense(P, 2)
        widths = minimax_widths(P)
        for e in EpsilonLadder(-2, 5, 0.5).scales:
            b = thickness_bracket(X, float(e))
            if not b.lower <= thickness_oracle(widths, float(e)) <= b.upper:
                bad_bracket += 1
    for _ in range(1000):
        n, dim = int(rng.integers(1, 8)), int(rng.integers(1, 4))
        p = float(rng.choice([1.0, 2.0, INF]))
        P = rng.standard_normal((n, dim))
        X = PointCloud.from_dense(P, p)
        D = dense_dist(P, p)
        eps = float(rng.uniform(0.05, 2.0))
        N, M, g = exact_min_cover(X, eps), packing_number(X, eps), len(greedy_net(X, eps))
        delta = 1e-9
        ok = (
            N == cover_number(D, eps)
            and M == oracle_packing(D, eps)
            and N <= g <= M
            and packing_number(X, 2 * eps + delta) <= N
        )
        bad_sandwich += not ok
    ok = bad_bracket == 0 and bad_sandwich == 0
    assert report(4, ok, f"bracket misses {bad_bracket} over 150 instances; sandwich misses {bad_sandwich} over 1000")


def unit_vectors(rng, cols, p, count):
    vs = []
    for _ in range(count):
        v = rng.standard_normal(cols.size)
        vs.append(SparseVector(cols, v / vec_norm(v, p)))
    return PointCloud.from_vectors([str(i) for i in range(count)], vs, p)


def block_l2(block, Y):
    M, cols = functional_matrix(block.functionals)
    return np.sqrt(np.sum(apply_rows(M, cols, Y) ** 2, axis=1))


def two_sided_violations(phi, X):
    """Independent recomputation of both sides from dense coordinates."""
    meta = phi.meta
    dx = pdist(X.to_dense(), "chebyshev") if X.p == INF else pdist(X.to_dense(), "minkowski", p=X.p)
    dy = pdist(phi.evaluate(X))
    low = meta["lower_constant"] * dx ** meta["alpha"]
    lower_bad = (dx >= meta["lower_valid_from"]) & (dy < low * (1 - 1e-9))
    upper_bad = dy > meta["upper_constant"] * dx * (1 + 1e-9) + 1e-15
    return int(lower_bad.sum()), int(upper_bad.sum())


def test_criterion_5_embeddings(report):
    rng = np.random.default_rng(5)
    corpus = make_corpus()
    sep_bad = norm_bad = pair_bad = 0
    for X in corpus:
        Z = difference_set(X)
        norms = Z.norms()
        U = unit_vectors(rng, X.columns(), X.p, 1000)
        for n in range(1, 5):
            b = build_phi_n(X, n, Z=Z)
            sep_bad += int(np.sum(block_l2(b, Z)[norms >= 2.0**-n] < 2.0 ** -(n + 1)))
            norm_bad += int(np.sum(block_l2(b, U) > math.sqrt(b.size) * (1 + 1e-12)))
        d = max(box_dim_auto(X)[1].slope, 0.0) if len(X) > 1 else 0.0
        phi = build_hilbert_embedding(X, 1.5 + d, n_max=6, d=d)
        pair_bad += sum(two_sided_violations(phi, X))
    thetas = []
    for p in PS:
        X = make_orthogonal_sequence(seq_spec(0.5, 32, p))
        phi = build_hilbert_embedding(X, 2.0, n_max=10, d=0.5)
        pair_bad += sum(two_sided_violations(phi, X))
        thetas.append(holder_fit(phi, X).theta)
    T = make_orthogonal_sequence(seq_spec(0.25, 100, 2.0))
    pair_bad += sum(two_sided_violations(build_hilbert_embedding(T, 5.0, "thickness", n_max=5, tau=0.6), T))
    ok = sep_bad == 0 and norm_bad == 0 and pair_bad == 0 and min(thetas) >= 1 / 2 - 0.05
    detail = (f"separation misses {sep_bad}; norm misses {norm_bad}; two-sided misses {pair_bad}; "
              f"theta on A = {', '.join(f'{t:.3f}' for t in thetas)}")
    assert report(5, ok, detail)


def test_criterion_6_auerbach(report):
    rng = np.random.default_rng(6)
    ps = (1.0, 1.5, 2.0, 4.0, INF)
    worst_res = worst_dual = worst_basis = 0.0
    worst_vol = 0.0
    for i in range(200):
        p = ps[i % 5]
        k = int(rng.integers(1, 7))
        D = k + int(rng.integers(0, 5))
        V = Subspace([SparseVector.from_dense(rng.standard_normal(D)) for _ in range(k)], p)
        S = auerbach_basis(V, seed=i)
        cols = V.columns()
        E = np.column_stack([e.to_dense(cols) for e in S.basis])
        F = np.column_stack([f.to_dense(cols) for f in S.duals])
        q = conjugate(p)
        worst_res = max(worst_res, float(np.abs(F.T @ E - np.eye(k)).max()))
        worst_basis = max(worst_basis, max(abs(vec_norm(E[:, j], p) - 1) for j in range(k)))
        worst_dual = max(worst_dual, max(vec_norm(F[:, j], q) for j in range(k)) - 1)
        if k <= 3:
            oracle = max_volume_oracle(_Coords(V).Q, p, starts=10, seed=i)
            worst_vol = max(worst_vol, abs(coordinate_volume(S, V) / oracle - 1))
    ok = worst_res <= 1e-6 and worst_basis <= 1e-9 and worst_dual <= 1e-6 and worst_vol <= 0.05
    detail = (f"residual {worst_res:.2e}; basis norm error {worst_basis:.2e}; "
              f"dual norm excess {worst_dual:.2e}; volume gap to oracle {worst_vol:.3%}")
    assert report(6, ok, detail)


def test_criterion_7_ensemble(report):
    rng = np.random.default_rng(7)
    worst = -math.inf
    configs = 0
    for p in (1.0, 1.5, 2.0, 4.0, INF):
        for c in range(4):
            dim = int(rng.integers(1, 6))
            spec = spec_from_functionals([[Functional.unit(j) for j in range(1, dim + 1)]], p)
            x = SparseVector.from_dense(rng.standard_normal(dim))
            g = sample_unit_ball(dim, spec.q, rng)
            a = float(rng.uniform(-0.5, 0.5)) if c % 2 else 0.0
            eps = float(rng.choice([0.01, 0.05, 0.2]))
            emp, bound, sigma = check_slab_bound(spec, 1, x, a, eps, g, 100_000, [7, configs])
            worst = max(worst, emp - bound - 3 * sigma)
            configs += 1
    slab_ok = worst <= 0

    # exponents estimated at K = 4096, then the theorem checked on a small A
    ladder, box = auto_box(0.5, 2.0)
    d_hat = box.bracket[1]
    tau_hat = thickness_dim_estimate(big_sequence(0.5, 2.0), ladder).upper.slope
    k = 5
    theta = theorem_threshold(k, d_hat, tau_hat) / 2
    X = make_orthogonal_sequence(seq_spec(0.5, 32, 2.0))
    res = verify_theorem_rate(X, k, theta, tau_hat, trials=100, seed=0, d=d_hat)
    spec = build_subspace_sequence(X, tau_hat, theta, max(res.n_max, 10), k=k)
    ns = list(range(5, spec.n_max + 1))
    fractions = [estimate_bad_set(spec, X, theta, n, trials=100) for n in ns]
    mono = all(b <= a for a, b in zip(fractions, fractions[1:]))
    ok = slab_ok and tau_hat < 1 and res.fraction >= 0.95 and mono
    detail = (f"slab worst excess {worst:.4f} over {configs} configs; d={d_hat:.3f} tau={tau_hat:.3f} "
              f"theta={theta:.4f} fraction={res.fraction:.2f}; bad sets n>=5 {fractions}")
    assert report(7, ok, detail)


def test_criterion_8_reproducibility(report, tmp_path):
    X = make_orthogonal_sequence(seq_spec(0.5, 60, 2.0))
    path = tmp_path / "a.jsonl"
    io.write_jsonl(X, path)
    configs = [
        dict(command="dim-box", input=str(path)),
        dict(command="dim-thickness", input=str(path)),
        dict(command="sample-ensemble", input=str(path), trials=10, nmax=4),
        dict(command="slab-check", trials=5000, p=INF),
        dict(command="demo-lp", count=512, diff_count=64),
    ]
    same = []
    for cfg in configs:
        texts = []
        for r in range(2):
            out = tmp_path / f"{cfg['command']}-{r}"
            assert run(RunConfig(out=str(out), seed=42, **cfg)) == 0
            texts.append((out / "data.csv").read_bytes())
        same.append(texts[0] == texts[1])
    ok = all(same)
    assert report(8, ok, f"{sum(same)}/{len(same)} commands byte-identical")
