"""Command-line driver: ``python -m pmanifold <subcommand>``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 integrity error.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import io as pio
from . import pipelines
from .attack import AttackConfig, attack_batch
from .dimension import log_grid, pr_of_samples, scaling_curve, two_nn
from .errors import InvalidInputError, PmanifoldError
from .sampler import PgaConfig, sample_pm


def _load_points(path):
    if str(path).endswith(".csv"):
        try:
            with open(path, encoding="utf-8") as fh:
                return pio.sample_set_from_csv(fh.read())
        except OSError as exc:
            raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    return pio.read_sample_set(path)


def _config_from(args, defaults):
    cfg = pio.load_config(args.config) if args.config else {}
    if args.output_dir:
        cfg["output_dir"] = args.output_dir
    return pipelines.merge_config(defaults, cfg)


def _run_toy(args):
    res = pipelines.cmd_toy_pipeline(_config_from(args, pipelines.DEFAULT_TOY_CONFIG))
    print(os.path.join(res["output_dir"], "toy_models.csv"))


def _run_ellipsoid(args):
    cfg = _config_from(args, pipelines.DEFAULT_ELLIPSOID_CONFIG)
    for key in ("ambient_dim", "grid_points", "n_points", "seed"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if args.no_svg:
        cfg["svg"] = False
    rows = pipelines.cmd_ellipsoid_curve(cfg)
    print(pio.csv_text(rows, pio.config_hash(cfg), pipelines.ELLIPSOID_COLUMNS), end="")


def _run_spectral(args):
    cfg = _config_from(args, pipelines.DEFAULT_SPECTRAL_CONFIG)
    if args.input_dir:
        cfg["input_dir"] = args.input_dir
    res = pipelines.cmd_spectral_suite(cfg)
    for r in res["psd"]:
        print(f"{r['set']}\tlabel={r['label']}\talpha={float(r['alpha']):.4f}")


def _run_sample_pm(args):
    model = pio.read_checkpoint(args.checkpoint)
    cfg = PgaConfig(args.step_size, args.threshold, args.max_iters, args.optimizer, args.noise_sigma, 0.0, args.adam_fallback)
    ss, batch = sample_pm(model, args.label, args.n, cfg, seed=args.seed, return_batch=True)
    pio.write_sample_set(args.out, ss)
    chash = pio.config_hash(vars(args))
    if args.log:
        pio.write_csv(args.log, batch.rows(), chash)
    print(f"{ss.n} of {args.n} runs reached p > {args.threshold}; wrote {args.out}")


def _run_dim(args):
    ss = _load_points(args.input)
    label = ss.meta.get("label", "")
    rows = []
    estimators = ["PR", "2NN"] if args.estimator == "both" else [args.estimator]
    grid = log_grid(ss.n, n_min=min(args.n_min, ss.n)) if args.scaling else None
    for est in estimators:
        rep = pr_of_samples(ss, n_grid=grid, seed=args.seed) if est == "PR" else two_nn(ss)
        row = rep.csv_row(label)
        if grid is not None and est == "2NN":
            rep.scaling = scaling_curve(ss, "2NN", grid, seed=args.seed)
        rows.append(row)
        for n, v in rep.scaling:
            rows.append({"estimator": f"{est}_scaling", "label": label, "n": n, "estimate": v, "lower_bound": int(rep.is_lower_bound)})
    text = pio.csv_text(rows, pio.config_hash(vars(args)))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")


def _run_attack(args):
    model = pio.read_checkpoint(args.checkpoint)
    ss = _load_points(args.data)
    if args.label is not None:
        labels = np.full(ss.n, args.label)
    elif "label" in ss.meta:
        labels = np.full(ss.n, int(ss.meta["label"]))
    else:
        raise InvalidInputError("data file carries no class label; pass --label")
    cfg = AttackConfig(args.epsilon, args.steps, args.step_size, args.restarts, False, args.seed)
    res = attack_batch(model, ss.points, labels, cfg, target=None if args.target is None else np.full(ss.n, args.target))
    pio.write_csv(args.out, res.rows(), pio.config_hash(vars(args)))
    robust = float(np.mean(res.clean_correct & ~res.success))
    print(f"clean {res.clean_correct.mean():.4f} robust {robust:.4f} at eps {args.epsilon}")


def _run_convert(args):
    ss = pio.convert(args.src, args.dst)
    print(f"converted {ss.n} x {ss.dim} points to {args.dst}")


def build_parser():
    p = argparse.ArgumentParser(prog="pmanifold", description="Perceptual-manifold geometry toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--output-dir")
        return sp

    sp = with_config(sub.add_parser("toy-pipeline", help="train toy models and measure their manifolds"))
    sp.set_defaults(func=_run_toy)

    sp = with_config(sub.add_parser("ellipsoid", help="distance-to-ellipsoid curve across d"))
    sp.add_argument("--ambient-dim", type=int)
    sp.add_argument("--grid-points", type=int)
    sp.add_argument("--n-points", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-svg", action="store_true")
    sp.set_defaults(func=_run_ellipsoid)

    sp = with_config(sub.add_parser("spectral", help="spectrum, alignment and PSD diagnostics"))
    sp.add_argument("--input-dir")
    sp.set_defaults(func=_run_spectral)

    sp = sub.add_parser("sample-pm", help="sample a class manifold of a saved model")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--label", type=int, required=True)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--step-size", type=float, default=0.01)
    sp.add_argument("--threshold", type=float, default=0.9)
    sp.add_argument("--max-iters", type=int, default=2000)
    sp.add_argument("--optimizer", choices=["plain", "adam"], default="plain")
    sp.add_argument("--noise-sigma", type=float, default=0.0)
    sp.add_argument("--adam-fallback", action="store_true")
    sp.add_argument("--out", required=True)
    sp.add_argument("--log", help="per-run CSV log")
    sp.set_defaults(func=_run_sample_pm)

    sp = sub.add_parser("dim", help="PR and 2NN dimension of a sample set")
    sp.add_argument("--input", required=True, help=".pmss or .csv sample set")
    sp.add_argument("--estimator", choices=["PR", "2NN", "both"], default="both")
    sp.add_argument("--scaling", action="store_true", help="add a scaling curve over a log grid of N")
    sp.add_argument("--n-min", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=_run_dim)

    sp = sub.add_parser("attack", help="L-inf PGD attack on a sample set")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--label", type=int)
    sp.add_argument("--target", type=int)
    sp.add_argument("--epsilon", type=float, default=0.06)
    sp.add_argument("--steps", type=int, default=20)
    sp.add_argument("--step-size", type=float, default=0.0)
    sp.add_argument("--restarts", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_run_attack)

    sp = sub.add_parser("convert", help="convert a sample set between CSV and binary")
    sp.add_argument("src")
    sp.add_argument("dst")
    sp.set_defaults(func=_run_convert)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PmanifoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
