"""Command-line entry point: every subcommand writes summary.json, data.csv and config.json."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import io
from .covering import EpsilonLadder, box_dim_auto, box_dim_estimate, difference_set
from .embeddings import build_hilbert_embedding, holder_fit, two_sided_check
from .ensemble import (
    bad_set_table,
    build_subspace_sequence,
    check_slab_bound,
    sample_map,
    sample_unit_ball,
    spec_from_functionals,
    theorem_threshold,
    verify_theorem_rate,
)
from .errors import PreconditionError, ThicklabError, VerificationError
from .lp_examples import (
    OrthogonalSequenceSpec,
    exact_box_dim,
    expected_difference_dim,
    make_orthogonal_sequence,
    thickness_lower_formula,
)
from .sequence_space import INF, Functional, SparseVector, check_exponent, dual_norm, kuratowski_embed
from .thickness import COVER_ALPHA, SUBSET_BUDGET, dual_thickness_upper_estimate, thickness_dim_estimate

COMMANDS = (
    "dim-box", "dim-thickness", "dim-dual", "embed-hilbert", "sample-ensemble",
    "verify-holder", "slab-check", "demo-lp", "kuratowski",
)
LADDER = {"dim-box", "dim-thickness", "dim-dual"}
NEEDS_INPUT = {"dim-box", "dim-thickness", "dim-dual", "embed-hilbert", "sample-ensemble", "verify-holder", "kuratowski"}


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    p: float = 2.0
    nmin: float | None = None
    nmax: float | None = None
    alpha: float | None = None
    tau: float | None = None
    theta: float | None = None
    k: int = 5
    trials: int = 100
    seed: int = 0
    out: str = "out"
    budget: int | None = None
    d: float | None = None
    count: int = 4096
    diff_count: int = 512
    dim: int = 3
    eps: float = 0.1

    def validate(self):
        if self.command not in COMMANDS:
            raise PreconditionError(f"unknown command {self.command!r}")
        check_exponent(self.p)
        if self.command in NEEDS_INPUT and not self.input:
            raise PreconditionError(f"{self.command} needs --input")
        if self.command in LADDER and (self.nmin is None) != (self.nmax is None):
            raise PreconditionError("give both --nmin and --nmax or neither")
        if self.nmin is not None and self.nmax is not None and self.nmax < self.nmin:
            raise PreconditionError("--nmax must be at least --nmin")
        if self.k < 1 or self.trials < 1:
            raise PreconditionError("--k and --trials must be positive")
        if self.budget is not None and self.budget < 1:
            raise PreconditionError("--budget must be positive")
        if self.tau is not None and not 0 < self.tau < 1:
            raise PreconditionError("--tau must lie in (0, 1)")
        if self.theta is not None and not self.theta > 0:
            raise PreconditionError("--theta must be positive")
        if (self.d is not None and not self.d > 0) or self.count < 2 or self.diff_count < 2 or self.dim < 1 or not self.eps > 0:
            raise PreconditionError("--d, --count, --diff-count, --dim and --eps must be positive")
        return self

    def to_json(self) -> str:
        obj = asdict(self)
        obj["p"] = "inf" if self.p == INF else self.p
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"

    def capped(self, n: int) -> int:
        return n if self.budget is None else min(n, self.budget)


def _ladder(cfg: RunConfig, X):
    if cfg.nmin is None:
        return box_dim_auto(X)[0]
    span = cfg.nmax - cfg.nmin
    return EpsilonLadder(cfg.nmin, cfg.nmax, 1.0 if span >= 3 or span == 0 else span / 3)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _long_rows(est, quantity):
    return [
        {"epsilon": r["epsilon"], "quantity": quantity, "value": r["count"]} for r in est.rows()
    ]


LONG = ["epsilon", "quantity", "value"]


def cmd_dim_box(cfg):
    X = io.read_jsonl(cfg.input, cfg.p)
    if cfg.nmin is None:
        ladder, est = box_dim_auto(X)
    else:
        ladder = _ladder(cfg, X)
        est = box_dim_estimate(X, ladder)
    summary = {**est.summary(), "ladder": asdict(ladder), "points": len(X)}
    return summary, ["epsilon", "count", "log_count", "window_slope"], est.rows()


def cmd_dim_thickness(cfg):
    X = io.read_jsonl(cfg.input, cfg.p)
    ladder = _ladder(cfg, X)
    est = thickness_dim_estimate(X, ladder, cfg.capped(SUBSET_BUDGET))
    summary = {**est.summary(), "ladder": asdict(ladder), "brackets": [b.report() for b in est.brackets]}
    rows = []
    for b in est.brackets:
        rows.append({"epsilon": b.epsilon, "quantity": "lower", "value": b.lower})
        rows.append({"epsilon": b.epsilon, "quantity": "upper", "value": b.upper})
    return summary, LONG, rows


def cmd_dim_dual(cfg):
    X = io.read_jsonl(cfg.input, cfg.p)
    ladder = _ladder(cfg, X)
    alpha = COVER_ALPHA if cfg.alpha is None else cfg.alpha
    est = dual_thickness_upper_estimate(X, ladder, alpha)
    summary = {**est.summary(), "alpha": alpha, "ladder": asdict(ladder)}
    rows = []
    for (eps, size), src in zip(est.estimate.counts, est.sources):
        rows.append({"epsilon": eps, "quantity": f"family_size:{src}", "value": size})
    return summary, LONG, rows


def cmd_embed_hilbert(cfg):
    X = io.read_jsonl(cfg.input, cfg.p)
    n_max = int(cfg.nmax) if cfg.nmax is not None else 8
    if cfg.tau is not None:
        alpha = cfg.alpha if cfg.alpha is not None else (1 + cfg.tau) / (1 - cfg.tau) + 0.5
        phi = build_hilbert_embedding(X, alpha, "thickness", n_max, tau=cfg.tau)
    else:
        phi = build_hilbert_embedding(X, cfg.alpha if cfg.alpha is not None else 3.0, "cover", n_max)
    low_bad, up_bad = two_sided_check(phi, X)
    try:
        holder = holder_fit(phi, X).summary()
    except VerificationError as exc:
        # pairs closer than 2^-n_max may merge under the truncated map
        holder = {"error": exc.code, "message": str(exc)}
    summary = {
        "meta": phi.meta,
        "tail_bound": phi.tail_bound,
        "block_sizes": [b.size for b in phi.blocks],
        "lower_violations": low_bad,
        "upper_violations": up_bad,
        "holder": holder,
    }
    rows = [
        {"n": b.n, "weight": b.weight, "size": b.size, "op_bound": b.op_bound} for b in phi.blocks
    ]
    return summary, ["n", "weight", "size", "op_bound"], rows, {"map.json": phi.to_json() + "\n"}


def _ensemble_params(cfg, X):
    tau = 0.5 if cfg.tau is None else cfg.tau
    if cfg.d is not None:
        d = cfg.d
    else:
        d = max(box_dim_auto(X)[1].bracket[1], 0.0) if len(X) > 1 else 0.0
    thr = theorem_threshold(cfg.k, d, tau)
    theta = cfg.theta if cfg.theta is not None else thr / 2
    return tau, d, thr, theta


def cmd_sample_ensemble(cfg):
    X = io.read_jsonl(cfg.input, cfg.p)
    tau, d, thr, theta = _ensemble_params(cfg, X)
    n_max = int(cfg.nmax) if cfg.nmax is not None else 8
    spec = build_subspace_sequence(X, tau, theta, n_max, k=cfg.k)
    trials = cfg.capped(cfg.trials)
    rows = []
    for t in range(trials):
        L = sample_map(spec, [cfg.seed, t])
        for i, r in enumerate(L.rows()):
            rows.append({"trial": t, "row": i, "quantity": "dual_norm", "value": dual_norm(r, spec.p)})
    ns = list(range(1, n_max + 1))
    table = bad_set_table(spec, X, [theta], ns, trials, cfg.seed)[0]
    for n, f in zip(ns, table):
        rows.append({"trial": "", "row": "", "quantity": f"bad_fraction:n={n}", "value": f})
    summary = {
        "dims": spec.dims, "tau": tau, "theta": theta, "threshold": thr, "d": d,
        "row_bound": spec.row_bound(), "bad_fractions": table.tolist(),
    }
    return summary, ["trial", "row", "quantity", "value"], rows


def cmd_verify_holder(cfg):
    X = io.read_jsonl(cfg.input, cfg.p)
    tau, d, thr, theta = _ensemble_params(cfg, X)
    res = verify_theorem_rate(
        X, cfg.k, theta, tau, cfg.capped(cfg.trials), cfg.seed, d=d,
        n_max=int(cfg.nmax) if cfg.nmax is not None else None,
    )
    summary = {**res.summary(), "theta": theta, "tau": tau}
    rows = [{"trial": t, "theta_fit": th, "success": th >= theta} for t, th in enumerate(res.thetas)]
    return summary, ["trial", "theta_fit", "success"], rows


def cmd_slab_check(cfg):
    """Seeded battery of slab-bound checks on a coordinate level of dimension --dim."""
    spec = spec_from_functionals([[Functional.unit(j) for j in range(1, cfg.dim + 1)]], cfg.p)
    rng = np.random.default_rng(cfg.seed)
    configs = cfg.capped(20)
    trials = cfg.capped(cfg.trials)
    rows, worst = [], -math.inf
    for c in range(configs):
        x = SparseVector.from_dense(rng.standard_normal(cfg.dim))
        g = sample_unit_ball(cfg.dim, spec.q, rng)
        a = float(rng.uniform(-0.5, 0.5)) if c % 2 else 0.0
        emp, bound, sigma = check_slab_bound(spec, 1, x, a, cfg.eps, g, trials, [cfg.seed, c])
        worst = max(worst, emp - bound - 3 * sigma)
        rows.append({"config": c, "a": a, "empirical": emp, "bound": bound, "sigma": sigma,
                     "pass": emp <= bound + 3 * sigma})
    summary = {"configs": configs, "trials": trials, "all_pass": all(r["pass"] for r in rows),
               "worst_excess": worst}
    return summary, ["config", "a", "empirical", "bound", "sigma", "pass"], rows


def cmd_demo_lp(cfg):
    d = 0.5 if cfg.d is None else cfg.d
    spec = OrthogonalSequenceSpec(d=d, count=cfg.count, p=cfg.p)
    A = make_orthogonal_sequence(spec)
    ladder, box = box_dim_auto(A)
    dspec = OrthogonalSequenceSpec(d=d, count=cfg.diff_count, p=cfg.p)
    _, diff = box_dim_auto(difference_set(make_orthogonal_sequence(dspec)))
    th = thickness_dim_estimate(A, ladder, cfg.capped(SUBSET_BUDGET))
    dual = dual_thickness_upper_estimate(A, ladder)
    truth = {
        "box_dim": exact_box_dim(spec),
        "difference_dim": expected_difference_dim(spec),
        "thickness_lower": thickness_lower_formula(spec),
        "dual_upper": exact_box_dim(spec),
    }
    summary = {
        "truth": truth,
        "box": box.summary(),
        "difference": diff.summary(),
        "thickness": th.summary(),
        "dual": dual.summary(),
        "ladder": asdict(ladder),
        "checks": {
            "box_bracket_contains_d": box.bracket[0] - 0.15 <= truth["box_dim"] <= box.bracket[1] + 0.15,
            "difference_slope_near_2d": abs(diff.slope - truth["difference_dim"]) <= 0.25,
            "thickness_lower_above_formula": th.lower.slope >= truth["thickness_lower"] - 0.15,
            "dual_below_d": dual.estimate.slope <= truth["dual_upper"] + 0.2,
        },
    }
    rows = _long_rows(box, "box_count") + _long_rows(diff, "difference_count")
    rows += _long_rows(th.lower, "thickness_lower") + _long_rows(th.upper, "thickness_upper")
    rows += _long_rows(dual.estimate, "dual_family_size")
    return summary, LONG, rows


def cmd_kuratowski(cfg):
    ids, D = io.read_distance_csv(cfg.input)
    X = kuratowski_embed(D, ids)
    n = len(X)
    rows, worst = [], 0.0
    for i in range(n):
        d = X.metric.from_point(i)
        for j in range(i + 1, n):
            err = abs(d[j] - D[i, j])
            worst = max(worst, err)
            rows.append({"i": ids[i], "j": ids[j], "distance": D[i, j], "embedded": d[j]})
    summary = {"points": n, "max_distortion": worst}
    return summary, ["i", "j", "distance", "embedded"], rows, {"points.jsonl": io.cloud_to_jsonl(X)}


HANDLERS = {
    "dim-box": cmd_dim_box,
    "dim-thickness": cmd_dim_thickness,
    "dim-dual": cmd_dim_dual,
    "embed-hilbert": cmd_embed_hilbert,
    "sample-ensemble": cmd_sample_ensemble,
    "verify-holder": cmd_verify_holder,
    "slab-check": cmd_slab_check,
    "demo-lp": cmd_demo_lp,
    "kuratowski": cmd_kuratowski,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; outputs are written only after it succeeds."""
    try:
        cfg.validate()
        result = HANDLERS[cfg.command](cfg)
    except ThicklabError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc), "command": cfg.command}))
        return exc.exit_status
    except (ArithmeticError, np.linalg.LinAlgError, MemoryError) as exc:
        print(json.dumps({"error": "internal", "message": repr(exc), "command": cfg.command}))
        return ThicklabError.exit_status
    summary, header, rows = result[:3]
    extra = result[3] if len(result) > 3 else {}
    summary = {"command": cfg.command, "config": json.loads(cfg.to_json()), **summary}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "summary.json": json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n",
        "data.csv": io.csv_text(header, rows),
        "config.json": cfg.to_json(),
        **extra,
    }
    for name, text in files.items():
        tmp = out / (name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, out / name)
    print(json.dumps({"status": "ok", "command": cfg.command, "out": str(out)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thicklab", description="Dimension exponents and Hoelder embeddings for l_p point clouds.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input")
        sp.add_argument("--p", type=float, default=2.0, help="ambient exponent; 'inf' for c_0")
        sp.add_argument("--nmin", type=float)
        sp.add_argument("--nmax", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--tau", type=float)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--k", type=int, default=5)
        sp.add_argument("--trials", type=int, default=100)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="out")
        sp.add_argument("--budget", type=int)
        sp.add_argument("--d", type=float, help="decay dimension (demo-lp, default 0.5) or box-dimension estimate")
        sp.add_argument("--count", type=int, default=4096, help="points for demo-lp")
        sp.add_argument("--diff-count", type=int, default=512, help="points for the demo-lp difference set")
        sp.add_argument("--dim", type=int, default=3, help="level dimension for slab-check")
        sp.add_argument("--eps", type=float, default=0.1, help="slab half-width for slab-check")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    seed = args.seed
    if seed is None:
        env = os.environ.get("THICKLAB_SEED")
        try:
            seed = int(env) if env else 0
        except ValueError:
            print(json.dumps({"error": "precondition", "message": f"THICKLAB_SEED={env!r} is not an integer"}))
            return PreconditionError.exit_status
    cfg = RunConfig(
        command=args.command, input=args.input, p=args.p, nmin=args.nmin, nmax=args.nmax,
        alpha=args.alpha, tau=args.tau, theta=args.theta, k=args.k, trials=args.trials,
        seed=seed, out=args.out, budget=args.budget, d=args.d, count=args.count,
        diff_count=args.diff_count, dim=args.dim, eps=args.eps,
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
