"""Small l_p norm-minimization problems used by subspace distances and dual extensions."""

from __future__ import annotations

import numpy as np
from scipy import linalg, optimize

from .errors import VerificationError
from .sequence_space import INF, conjugate

TOL = 1e-8
MAX_ITER = 10_000


def vec_norm(v, p):
    v = np.abs(np.asarray(v, dtype=float))
    if v.size == 0:
        return 0.0
    if p == INF:
        return float(v.max())
    if p == 1:
        return float(v.sum())
    m = v.max()
    if m == 0:
        return 0.0
    return float(m * np.sum((v / m) ** p) ** (1.0 / p))


def _affine_param(A, b):
    """c = c0 + N w spans {c : A c = b}."""
    c0 = np.linalg.lstsq(A, b, rcond=None)[0]
    N = linalg.null_space(A) if A.size else np.eye(A.shape[1])
    return c0, N


def _smooth_min(B, c0, N, p):
    """Minimize ||B (c0 + N w)||_p^p over w for 1 < p < inf."""
    y0 = B @ c0
    BN = B @ N
    if BN.shape[1] == 0:
        return c0
    w0 = np.linalg.lstsq(BN, -y0, rcond=None)[0]
    scale = max(vec_norm(y0 + BN @ w0, p), 1e-300)

    def fun(w):
        r = (y0 + BN @ w) / scale
        a = np.abs(r)
        val = np.sum(a**p)
        grad = BN.T @ (p * np.sign(r) * a ** (p - 1)) / scale
        return val, grad

    res = optimize.minimize(
        fun, w0, jac=True, method="L-BFGS-B",
        options={"maxiter": MAX_ITER, "ftol": 1e-15, "gtol": 1e-12},
    )
    return c0 + N @ res.x


def min_norm_affine(B, A, b, p):
    """Minimize ||B c||_p subject to A c = b; returns the minimizing c."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m, k = B.shape
    if p == 2:
        c0, N = _affine_param(A, b)
        if N.shape[1] == 0:
            return c0
        w = np.linalg.lstsq(B @ N, -(B @ c0), rcond=None)[0]
        return c0 + N @ w
    if p == 1:
        # variables (c, t): min sum t with -t <= B c <= t
        cost = np.concatenate([np.zeros(k), np.ones(m)])
        A_ub = np.block([[B, -np.eye(m)], [-B, -np.eye(m)]])
        A_eq = np.hstack([A, np.zeros((A.shape[0], m))])
    elif p == INF:
        cost = np.concatenate([np.zeros(k), [1.0]])
        A_ub = np.block([[B, -np.ones((m, 1))], [-B, -np.ones((m, 1))]])
        A_eq = np.hstack([A, np.zeros((A.shape[0], 1))])
    else:
        c0, N = _affine_param(A, b)
        return _smooth_min(B, c0, N, p)
    res = optimize.linprog(
        cost, A_ub=A_ub, b_ub=np.zeros(A_ub.shape[0]), A_eq=A_eq, b_eq=b,
        bounds=[(None, None)] * k + [(0, None)] * (A_ub.shape[1] - k), method="highs",
    )
    if res.status != 0:
        raise VerificationError(f"linear program failed: {res.message}")
    c = res.x[:k]
    # polish equality residual from the solver
    c0, N = _affine_param(A, b)
    return c0 + N @ (N.T @ (c - c0))


def dual_lower_bound(x, B, f, p):
    """Certified lower bound on min_c ||x - B c||_p from a trial functional f.

    f is projected onto the annihilator of span(B) and renormalized in l_q, so
    any trial vector yields a valid (possibly weak) bound.
    """
    q = conjugate(p)
    f = np.asarray(f, dtype=float)
    if B.shape[1]:
        Q, _ = np.linalg.qr(B)
        f = f - Q @ (Q.T @ f)
    nf = vec_norm(f, q)
    if nf == 0:
        return 0.0
    return max(abs(float(f @ x)) / nf, 0.0)


def _dual_lp(x, B, p):
    """max f.x subject to B^T f = 0, ||f||_q <= 1 for p in {1, inf}."""
    D = x.size
    k = B.shape[1]
    if p == 1:
        res = optimize.linprog(
            -x, A_eq=B.T if k else None, b_eq=np.zeros(k) if k else None,
            bounds=[(-1, 1)] * D, method="highs",
        )
        return res.x if res.status == 0 else np.zeros(D)
    # split f = u - v with u, v >= 0 and sum(u + v) <= 1
    cost = np.concatenate([-x, x])
    res = optimize.linprog(
        cost, A_ub=np.ones((1, 2 * D)), b_ub=[1.0],
        A_eq=np.hstack([B.T, -B.T]) if k else None, b_eq=np.zeros(k) if k else None,
        bounds=[(0, None)] * (2 * D), method="highs",
    )
    return res.x[:D] - res.x[D:] if res.status == 0 else np.zeros(D)


def distance_to_span(x, B, p):
    """(upper, lower) bounds on min_c ||x - B c||_p for dense x and basis columns B."""
    x = np.asarray(x, dtype=float)
    B = np.asarray(B, dtype=float).reshape(x.size, -1)
    k = B.shape[1]
    if k == 0:
        v = vec_norm(x, p)
        return v, v
    M = np.hstack([x[:, None], -B])
    A = np.zeros((1, k + 1))
    A[0, 0] = 1.0
    c = min_norm_affine(M, A, [1.0], p)
    r = x - B @ c[1:]
    upper = vec_norm(r, p)
    if p == 2:
        lower = dual_lower_bound(x, B, r, p)
    elif p in (1, INF):
        lower = dual_lower_bound(x, B, _dual_lp(x, B, p), p)
    else:
        a = np.abs(r)
        m = a.max() if a.size else 0.0
        f = np.sign(r) * (a / m) ** (p - 1) if m > 0 else np.zeros_like(r)
        lower = dual_lower_bound(x, B, f, p)
    return upper, min(lower, upper)
