"""Command-line harness.

Subcommands: calibrate | train | lazy-region | equivalence | theory-curves
| similarity. Every command is deterministic given --seed. Exit codes:
0 success, 1 usage, 2 I/O or calibration, 3 numeric abort, 4 equivalence
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .accounting import PrivacySpec, calibrate_sigma, gdp_epsilon, gdp_mu, \
    rdp_epsilon
from .bounds import grad_norm_bound_curve, sgd_baseline
from .clipping import Abadi, AutoS, AutoV, clip_and_sum, clip_factor
from .data_io import atomic_write_text
from .errors import (CalibrationError, InvalidArgumentError,
                     NumericAbortError, ParseError)
from .models import ModelSpec, gen_synthetic, per_sample_gradients
from .numeric import RngStream
from .optimizers import ADAPTIVE, KINDS, equivalence_pair_run
from .training import RunConfig, run_training

__all__ = ["main"]

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC, EXIT_EQUIV = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt17(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: str, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt17(c) if isinstance(c, float) else str(c)
                              for c in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_calibrate(args) -> int:
    try:
        spec = PrivacySpec(args.eps, args.delta, args.sample_rate, args.steps)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        sigma = calibrate_sigma(spec, method=args.method)
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.method == "rdp":
        eps_back = rdp_epsilon(sigma, spec.p, spec.steps, spec.delta)
    else:
        eps_back = gdp_epsilon(gdp_mu(sigma, spec.p, spec.steps), spec.delta)
    record = {
        "eps_target": spec.eps, "delta": spec.delta, "sample_rate": spec.p,
        "steps": spec.steps, "method": args.method,
        "sigma": sigma, "eps_round_trip": eps_back,
    }
    doc = json.dumps(record, indent=2, sort_keys=True) + "\n"
    print(f"sigma = {sigma:.6g}")
    atomic_write_text(os.path.join(args.out_dir, "calibrate.json"), doc)
    return EXIT_OK


def cmd_train(args) -> int:
    if args.config is None:
        print("error: train needs --config", file=sys.stderr)
        return EXIT_USAGE
    try:
        with open(args.config) as fh:
            config = RunConfig.from_json(fh.read())
    except FileNotFoundError:
        print(f"error: no such config: {args.config}", file=sys.stderr)
        return EXIT_IO
    except (InvalidArgumentError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out_dir if args.out_dir != "." else config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    try:
        manifest = run_training(config)
    except (ParseError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    manifest_doc = {
        "config": json.loads(manifest.config_json),
        "sigma": manifest.sigma,
        "version": manifest.version,
        "steps_executed": len(manifest.steps),
        "wall_time": manifest.wall_time,
    }
    atomic_write_text(os.path.join(out_dir, "manifest.json"),
                      json.dumps(manifest_doc, indent=2, sort_keys=True) + "\n")
    atomic_write_text(os.path.join(out_dir, "metrics.csv"),
                      manifest.metrics_csv())
    last = manifest.steps[-1]
    acc = "n/a" if last.accuracy is None else f"{last.accuracy:.4f}"
    print(f"done: {len(manifest.steps)} steps, sigma={manifest.sigma:.6g}, "
          f"final loss={last.loss:.6g}, accuracy={acc}")
    return EXIT_OK


def _lazy_rows(setting: str, r: float, gamma: float, grid: int, seed: int):
    if setting == "logistic":
        data = gen_synthetic("logistic_lazy", seed, 10000)
        spec = ModelSpec("logistic1d")
        thetas = np.linspace(-2.0, 2.0, grid)
    else:
        data = gen_synthetic("mean_est", seed, 10000)
        spec = ModelSpec("linear", loss="mse")
        thetas = np.linspace(-2.0, 2.0, grid)
    policies = (Abadi(r), AutoV(r), AutoS(r, gamma))
    rows = []
    for theta in thetas:
        grads = per_sample_gradients(spec, np.array([theta]),
                                     data.features, data.labels)
        standard = float(np.sum(grads))
        clipped = [float(clip_and_sum(p, grads)[0][0]) for p in policies]
        rows.append((float(theta), standard, clipped[0], clipped[1],
                     clipped[2]))
    return rows


def cmd_lazy_region(args) -> int:
    if args.grid < 11:
        print("error: grid resolution must be >= 11", file=sys.stderr)
        return EXIT_USAGE
    gamma = args.gamma if args.gamma is not None else \
        (0.01 if args.setting == "logistic" else 0.1)
    rows = _lazy_rows(args.setting, args.r, gamma, args.grid, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, f"lazy_{args.setting}.csv")
    # gradient columns are batch SUMS of the clipped per-sample gradients
    _write_csv(path, "theta,standard,abadi,auto_v,auto_s", rows)
    print(f"wrote {path} ({len(rows)} rows, R={args.r}, gamma={gamma})")
    return EXIT_OK


def cmd_equivalence(args) -> int:
    if args.kind not in KINDS:
        print(f"error: unknown optimizer kind {args.kind!r}", file=sys.stderr)
        return EXIT_USAGE
    tol = 1e-6 if args.kind in ADAPTIVE else 1e-9
    data = gen_synthetic("gauss2class", args.seed, 100, dims=5)
    spec = ModelSpec("logistic")
    gen = RngStream(args.seed, "equivalence").generator()
    worst, worst_params, lines = 0.0, None, []
    for trial in range(args.trials):
        r = float(np.exp(gen.uniform(np.log(0.1), np.log(2.0))))
        eta = float(np.exp(gen.uniform(np.log(1e-3), np.log(1e-1))))
        lam = float(gen.uniform(0.0, 0.1))
        dev = equivalence_pair_run(
            args.kind, args.steps, args.seed + trial, r, eta, lam, 0.01,
            spec, data, negative_control=args.negative_control)
        if dev > worst:
            worst, worst_params = dev, (r, eta, lam)
        verdict = "ok" if dev <= tol else "exceeds"
        lines.append(f"trial {trial}: R={r:.4g} eta={eta:.4g} "
                     f"lam={lam:.4g} deviation={dev:.3e} {verdict}")
    print("\n".join(lines))
    if args.negative_control:
        if worst > tol:
            print(f"FAIL (expected-negative): worst deviation {worst:.3e} "
                  f"> {tol:g}")
            return EXIT_OK
        print("unexpected PASS for negative control")
        return EXIT_EQUIV
    if worst > tol:
        r, eta, lam = worst_params
        print(f"FAIL: deviation {worst:.3e} > {tol:g} at "
              f"R={r:.6g} eta={eta:.6g} lam={lam:.6g}")
        return EXIT_EQUIV
    print(f"PASS: worst deviation {worst:.3e} <= {tol:g}")
    return EXIT_OK


def _fit_slope(ts, vals):
    lt, lv = np.log(ts), np.log(vals)
    return float(np.polyfit(lt, lv, 1)[0])


def cmd_theory_curves(args) -> int:
    if args.gamma <= 0:
        print("error: the stabilized bound needs gamma > 0", file=sys.stderr)
        return EXIT_USAGE
    if not (0 < args.t_min < args.t_max):
        print("error: need 0 < t-min < t-max", file=sys.stderr)
        return EXIT_USAGE
    ts = np.logspace(math.log10(args.t_min), math.log10(args.t_max),
                     args.points)
    xs = args.coef / np.sqrt(ts)
    auto_s = grad_norm_bound_curve(xs, args.xi, args.gamma, "auto_s")
    auto_v = grad_norm_bound_curve(xs, args.xi, args.gamma, "auto_v")
    sgd = np.array([sgd_baseline(t, args.sgd_coef / 2.0, 1.0, 0.0, 1.0)
                    for t in ts])
    os.makedirs(args.out_dir, exist_ok=True)
    for name, vals in (("auto_s", auto_s), ("auto_v", auto_v),
                       ("sgd_baseline", sgd)):
        _write_csv(os.path.join(args.out_dir, f"curve_{name}.csv"),
                   "steps,bound",
                   [(float(t), float(v)) for t, v in zip(ts, vals)])
    fit = (ts >= 1e8) & (ts <= 1e12)
    summary = {
        "auto_s_slope": _fit_slope(ts[fit], auto_s[fit]) if fit.sum() >= 2
        else None,
        "sgd_slope": _fit_slope(ts, sgd),
        "auto_v_min": float(np.min(auto_v)),
        "xi": args.xi, "gamma": args.gamma, "coef": args.coef,
    }
    atomic_write_text(os.path.join(args.out_dir, "slopes.json"),
                      json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_similarity(args) -> int:
    data = gen_synthetic(args.dataset, args.seed, 200,
                         dims=5 if args.dataset == "gauss2class" else 1)
    spec = ModelSpec("logistic1d" if args.dataset == "logistic_lazy"
                     else "logistic")
    from .models import init_params, param_dim
    rng = RngStream(args.seed)
    d = param_dim(spec, data.features.shape[1])
    w = init_params(spec, data.features.shape[1], rng.child("init"))
    r = args.r
    rows = []
    for t in range(args.steps):
        grads = per_sample_gradients(spec, w, data.features, data.labels)
        total = grads.sum(axis=0)
        norms = np.sqrt(np.sum(grads ** 2, axis=1))
        dot_abadi = float(clip_and_sum(Abadi(r), grads)[0] @ total)
        dot_auto_v = float(clip_and_sum(AutoV(r), grads)[0] @ total)
        frac_pos = float(np.mean(grads @ total > 0))
        rows.append((t, dot_abadi, dot_auto_v, frac_pos))
        # follow plain full-batch descent so the trajectory is well defined
        w = w - args.eta * total / data.n
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "similarity.csv")
    _write_csv(path, "step,dot_abadi,dot_auto_v,frac_positive_alignment",
               rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="autoclip",
                description="differentially private optimization lab")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--config", default=None,
                   help="JSON run config (train subcommand)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="solve for the noise multiplier")
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--sample-rate", type=float, required=True)
    c.add_argument("--steps", type=int, required=True)
    c.add_argument("--method", choices=("rdp", "gdp"), default="rdp")
    c.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("train", help="run a private training loop")
    t.set_defaults(func=cmd_train)

    lz = sub.add_parser("lazy-region",
                        help="scalar clipped-gradient sweep around the optimum")
    lz.add_argument("--setting", choices=("logistic", "mean"),
                    default="logistic")
    lz.add_argument("--r", type=float, default=0.01)
    lz.add_argument("--gamma", type=float, default=None)
    lz.add_argument("--grid", type=int, default=101)
    lz.set_defaults(func=cmd_lazy_region)

    eq = sub.add_parser("equivalence",
                        help="threshold-dependent vs threshold-free twins")
    eq.add_argument("--kind", required=True)
    eq.add_argument("--steps", type=int, default=100)
    eq.add_argument("--trials", type=int, default=5)
    eq.add_argument("--negative-control", action="store_true")
    eq.set_defaults(func=cmd_equivalence)

    tc = sub.add_parser("theory-curves",
                        help="gradient-norm bound curves over step counts")
    tc.add_argument("--xi", type=float, default=25.0)
    tc.add_argument("--gamma", type=float, default=0.01)
    tc.add_argument("--coef", type=float, default=10.0)
    tc.add_argument("--sgd-coef", type=float, default=2.0)
    tc.add_argument("--t-min", type=float, default=1e2)
    tc.add_argument("--t-max", type=float, default=1e12)
    tc.add_argument("--points", type=int, default=81)
    tc.set_defaults(func=cmd_theory_curves)

    sm = sub.add_parser("similarity",
                        help="dot-product alignment of clipped sums")
    sm.add_argument("--dataset", choices=("gauss2class", "logistic_lazy"),
                    default="gauss2class")
    sm.add_argument("--steps", type=int, default=20)
    sm.add_argument("--r", type=float, default=0.1)
    sm.add_argument("--eta", type=float, default=0.5)
    sm.set_defaults(func=cmd_similarity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
