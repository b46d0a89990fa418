"""Reproducible batch experiments: toy models, the ellipsoid distance curve, spectral diagnostics.

Each ``cmd_*`` takes a plain config dict (see the ``DEFAULT_*`` constants),
writes its reports under ``output_dir`` and returns an in-memory summary.
The environment variable ``PMANIFOLD_OUTPUT_DIR`` overrides the output
directory. CSV bodies depend only on the config, so repeated runs produce
identical files; wall-clock information goes to ``metadata.json``.
"""

import copy
import datetime
import json
import logging
import math
import os
import platform

import numpy as np

from . import io as pio
from .attack import AttackConfig, attack_batch, robust_accuracy_sweep
from .dimension import log_grid, pr_of_samples, scaling_curve, two_nn
from .errors import InvalidInputError, PmanifoldError
from .geometry import ellipsoid_d_grid, monte_carlo_expected_sqdist
from .model import TrainConfig, accuracy, init_mlp, resample, synth_dataset, train
from .numerics import RNG_NAME, covariance, fit_line, kahan_mean_std, seeded_rng, sym_eig
from .sampler import PgaConfig, distance_to_pm, sample_pm
from .samples import SampleSet
from .spectral import (
    alignment_sweep,
    pick_k_for_variance,
    power_law_field,
    radial_psd,
    spectrum_density,
)

log = logging.getLogger(__name__)

OUTPUT_ENV = "PMANIFOLD_OUTPUT_DIR"

DEFAULT_TOY_CONFIG = {
    "tag": "toy",
    "seeds": {"data": 0, "heldout": 123, "init": 1, "train": 2, "pga": 5, "natural": 7, "attack": 0, "baseline": 3},
    "geometry": {
        "ambient_dim": 64,
        "n_classes": 3,
        "intrinsic_dim": 4,
        "n_per_class": 5000,
        "noise_sigma": 0.02,
        "half_width": 0.5,
        "center_margin": 0.39,
    },
    "model": {"hidden": [32], "activation": "tanh"},
    "train": {
        "epochs": 30,
        "batch_size": 64,
        "learning_rate": 0.05,
        "optimizer": "sgd",
        "momentum": 0.9,
        "weight_decay": 0.0,
        "adv_steps": 7,
        "adv_warmup_epochs": 10,
    },
    "adv_epsilons": [0.0, 0.03, 0.06],
    "pga": {"step_size": 0.01, "threshold": 0.9, "max_iters": 2000, "adam_fallback": True},
    "n_pm": 600,
    "n_natural": 200,
    "n_test": 300,
    "attack": {"epsilon": 0.06, "steps": 20, "restarts": 2, "sweep": [0.03, 0.06]},
    "variance_fraction": 0.9,
    "baseline_trials": 200,
    "output_dir": "out/toy",
}

DEFAULT_ELLIPSOID_CONFIG = {
    "tag": "ellipsoid",
    "ambient_dim": 3072,
    "grid_points": 12,
    "d_grid": None,
    "radius_range": [6.0, 30.0],
    "n_points": 200,
    "seed": 1,
    "svg": True,
    "output_dir": "out/ellipsoid",
}

DEFAULT_SPECTRAL_CONFIG = {
    "tag": "spectral",
    "input_dir": "out/toy",
    "data": None,  # list of sample-set files; default: data_c*.pmss in input_dir
    "pm": None,  # {model: [files]}; default: pm_<model>_c*.pmss in input_dir
    "variance_fraction": 0.9,
    "n_bins": 40,
    "baseline_trials": 200,
    "control_side": 64,
    "control_images": 64,
    "seeds": {"baseline": 3, "control": 11},
    "output_dir": "out/spectral",
}


class StageError(PmanifoldError):
    """A pipeline stage failed; keeps the original error's exit code."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


def merge_config(defaults, overrides):
    """Recursive dict merge; unknown top-level keys are rejected."""
    out = copy.deepcopy(defaults)
    for k, v in (overrides or {}).items():
        if k not in out:
            raise InvalidInputError(f"unknown config key {k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict):
            for kk in v:
                if out[k] and kk not in out[k] and k not in ("pm",):
                    raise InvalidInputError(f"unknown config key {k}.{kk}")
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def output_dir(config):
    path = os.environ.get(OUTPUT_ENV) or config["output_dir"]
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f"output directory {path} is not writable: {exc.strerror}") from exc
    if not os.access(path, os.W_OK):
        raise InvalidInputError(f"output directory {path} is not writable")
    return path


def _write_metadata(out, config, chash, extra=None):
    meta = {
        "tag": config.get("tag"),
        "config_hash": chash,
        "config": config,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "rng": RNG_NAME,
        **(extra or {}),
    }
    with open(os.path.join(out, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, kind, exc, tb):
        if exc is not None and isinstance(exc, PmanifoldError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _hash(cfg):
    # where results are written is not part of what was computed
    return pio.config_hash({k: v for k, v in cfg.items() if k != "output_dir"})


def model_name(eps):
    return "standard" if eps == 0 else f"at{eps:g}"


def _scaling_grid(n):
    return log_grid(n, n_min=min(50, n), per_decade=4) if n >= 3 else [n]


def cmd_toy_pipeline(config=None):
    """Train the standard and adversarially trained toy models and measure their manifolds.

    Writes ``toy_models.csv`` (one row per model), ``toy_classes.csv`` (one row
    per model and class), ``scaling.csv``, per-model attack and ascent logs,
    checkpoints and manifold sample sets. Returns the model rows.
    """
    cfg = merge_config(DEFAULT_TOY_CONFIG, config)
    chash = _hash(cfg)
    out = output_dir(cfg)
    _write_metadata(out, cfg, chash)
    seeds, geo = cfg["seeds"], cfg["geometry"]
    pga = PgaConfig(**cfg["pga"])
    att = cfg["attack"]
    acfg = AttackConfig(att["epsilon"], att["steps"], 0.0, att["restarts"], False, seeds["attack"])

    with _Stage("data"):
        ds = synth_dataset(
            geo["ambient_dim"], geo["n_classes"], geo["intrinsic_dim"], geo["n_per_class"],
            geo["noise_sigma"], seed=seeds["data"], half_width=geo["half_width"],
            center_margin=geo["center_margin"],
        )
        test = resample(ds, cfg["n_test"], seeds["heldout"])
        data_eigs, data_pr = [], []
        for k, cls in enumerate(ds.classes):
            pio.write_sample_set(os.path.join(out, f"data_c{k}.pmss"), cls)
            data_eigs.append(sym_eig(covariance(cls.points)))
            data_pr.append(pr_of_samples(cls).estimate)
        if ds.shrink_retries:
            log.warning("patch geometry shrunk %d times to fit the cube", ds.shrink_retries)

    K = ds.n_classes
    model_rows, class_rows, scaling_rows = [], [], []
    for eps in cfg["adv_epsilons"]:
        name = model_name(eps)
        with _Stage(f"train:{name}"):
            tc = TrainConfig(**cfg["train"], adv_epsilon=float(eps), seed=seeds["train"])
            dims = (ds.ambient_dim, *cfg["model"]["hidden"], K)
            m = init_mlp(dims, cfg["model"]["activation"], seed=seeds["init"])
            m, history = train(m, ds.x, ds.y, tc)
            pio.write_checkpoint(os.path.join(out, f"model_{name}.pmck"), m)

        with _Stage(f"attack:{name}"):
            clean = accuracy(m, test.x, test.y)
            sweep = robust_accuracy_sweep(m, test.x, test.y, att["sweep"], acfg)
            res = attack_batch(m, test.x, test.y, acfg)
            robust = float(np.mean(res.clean_correct & ~res.success))
            pio.write_csv(os.path.join(out, f"attack_{name}.csv"), res.rows(), chash)

        per_class = []
        for c in range(K):
            with _Stage(f"sample:{name}:c{c}"):
                pm, batch = sample_pm(m, c, cfg["n_pm"], pga, seed=seeds["pga"], return_batch=True)
                pm.meta["model"] = name
                pio.write_sample_set(os.path.join(out, f"pm_{name}_c{c}.pmss"), pm)
                pio.write_csv(os.path.join(out, f"pga_{name}_c{c}.csv"), batch.rows(), chash)
                ok = batch.success
                if ok.sum() < 3:
                    raise InvalidInputError(f"only {int(ok.sum())} ascent runs reached the manifold")
                noise_mean, noise_std = kahan_mean_std(batch.sq_dist[ok])

            with _Stage(f"dimension:{name}:c{c}"):
                grid = _scaling_grid(pm.n)
                pr = pr_of_samples(pm, n_grid=grid, seed=seeds["pga"])
                nn = two_nn(pm)
                nn_curve = scaling_curve(pm, "2NN", grid, seed=seeds["pga"])
                for est, curve in (("PR", pr.scaling), ("2NN", nn_curve)):
                    for n, v in curve:
                        scaling_rows.append({"model": name, "label": c, "estimator": est, "n": n, "estimate": v})

            with _Stage(f"natural:{name}:c{c}"):
                others = np.concatenate([test.classes[j].points for j in range(K) if j != c])
                pick = seeded_rng(seeds["natural"]).permutation(others.shape[0])[: cfg["n_natural"]]
                inits = SampleSet(others[pick], {"source": "data"})
                nat = distance_to_pm(m, c, inits=inits, cfg=pga, seed=seeds["natural"])

            with _Stage(f"alignment:{name}:c{c}"):
                de = data_eigs[c]
                k = pick_k_for_variance(de.eigenvalues, cfg["variance_fraction"])
                pe = sym_eig(covariance(pm.points))
                al = alignment_sweep(de.eigenvectors, pe.eigenvectors, k, [k], cfg["baseline_trials"], seeds["baseline"])[0]

            row = {
                "model": name,
                "label": c,
                "data_pr": data_pr[c],
                "pm_n": pm.n,
                "pm_success_rate": float(ok.mean()),
                "pm_pr": pr.estimate,
                "pm_pr_lower_bound": pr.is_lower_bound,
                "pm_2nn": nn.estimate,
                "dist_noise_mean": noise_mean,
                "dist_noise_std": noise_std,
                "dist_natural_mean": nat.mean,
                "dist_natural_std": nat.std,
                "natural_success_rate": nat.n_success / nat.n_attempts,
                "align_k": k,
                "align_score": al.score,
                "align_baseline": al.baseline,
                "align_baseline_std": al.baseline_std,
            }
            class_rows.append(row)
            per_class.append(row)

        def avg(key):
            return float(np.mean([r[key] for r in per_class]))

        mrow = {
            "model": name,
            "adv_epsilon": float(eps),
            "final_train_loss": history[-1],
            "clean_acc": clean,
            "robust_acc": robust,
            **{f"robust_acc_{e:g}": v for e, v in zip(att["sweep"], sweep)},
            "data_pr": float(np.mean(data_pr)),
            "pm_pr": avg("pm_pr"),
            "pm_pr_ratio": avg("pm_pr") / float(np.mean(data_pr)),
            "pm_2nn": avg("pm_2nn"),
            "pm_success_rate": avg("pm_success_rate"),
            "dist_noise_mean": avg("dist_noise_mean"),
            "dist_natural_mean": avg("dist_natural_mean"),
            "align_score": avg("align_score"),
            "align_baseline": avg("align_baseline"),
            "align_baseline_std": avg("align_baseline_std"),
        }
        model_rows.append(mrow)
        # rewrite after every model so a later failure leaves complete partial reports
        pio.write_csv(os.path.join(out, "toy_models.csv"), model_rows, chash)
        pio.write_csv(os.path.join(out, "toy_classes.csv"), class_rows, chash)
        pio.write_csv(os.path.join(out, "scaling.csv"), scaling_rows, chash)
    return {"models": model_rows, "classes": class_rows, "config_hash": chash, "output_dir": out}


ELLIPSOID_COLUMNS = ["d", "analytic", "mc_boundary_mean", "mc_boundary_sigma", "mc_filled_mean", "n_points", "seed"]


def cmd_ellipsoid_curve(config=None):
    """Expected squared distance from cube points to random ellipsoids across intrinsic dimension.

    ``mc_boundary_sigma`` is the standard error of the boundary mean.
    """
    cfg = merge_config(DEFAULT_ELLIPSOID_CONFIG, config)
    chash = _hash(cfg)
    out = output_dir(cfg)
    _write_metadata(out, cfg, chash)
    D = int(cfg["ambient_dim"])
    grid = cfg["d_grid"] or ellipsoid_d_grid(D, cfg["grid_points"])
    if any(not 1 <= int(d) <= D for d in grid):
        raise InvalidInputError(f"every d must lie in [1, {D}]")
    rows = []
    for d in grid:
        with _Stage(f"ellipsoid:d={d}"):
            r = monte_carlo_expected_sqdist(D, int(d), tuple(cfg["radius_range"]), cfg["n_points"], cfg["seed"])
        rows.append({
            "d": int(d),
            "analytic": r.analytic,
            "mc_boundary_mean": r.boundary.mean_sq_dist,
            "mc_boundary_sigma": r.boundary.sigma_of_mean,
            "mc_filled_mean": r.filled.mean_sq_dist,
            "n_points": r.boundary.n_points,
            "seed": r.seed,
        })
    pio.write_csv(os.path.join(out, "ellipsoid_curve.csv"), rows, chash, ELLIPSOID_COLUMNS)
    if cfg["svg"]:
        ds = [r["d"] for r in rows]
        pio.svg_line_plot(
            [
                ("theory", ds, [r["analytic"] for r in rows], "red"),
                ("MC boundary", ds, [r["mc_boundary_mean"] for r in rows], "black"),
                ("MC filled", ds, [r["mc_filled_mean"] for r in rows], "blue"),
            ],
            os.path.join(out, "ellipsoid_curve.svg"),
            xlabel="intrinsic dimension d",
            ylabel="mean squared distance",
            logx=True,
        )
    return rows


def curve_slope(rows, column="mc_boundary_mean", d_max=1500):
    """Least-squares slope of ``column`` against d over ``d <= d_max``."""
    sel = [r for r in rows if float(r["d"]) <= d_max]
    if len(sel) < 2:
        raise InvalidInputError("need at least two grid points for a slope")
    slope, _ = fit_line([float(r["d"]) for r in sel], [float(r[column]) for r in sel])
    return slope


def _default_inputs(cfg):
    src = cfg["input_dir"]
    try:
        names = sorted(os.listdir(src))
    except OSError as exc:
        raise InvalidInputError(f"input directory {src} is missing") from exc
    data = cfg["data"] or [os.path.join(src, f) for f in names if f.startswith("data_c") and f.endswith(".pmss")]
    pm = cfg["pm"]
    if pm is None:
        pm = {}
        for f in names:
            if f.startswith("pm_") and f.endswith(".pmss"):
                model = f[3:].rsplit("_c", 1)[0]
                pm.setdefault(model, []).append(os.path.join(src, f))
    if not data or not pm:
        raise InvalidInputError(f"no data or manifold sample sets found in {src}")
    for path in [*data, *(p for v in pm.values() for p in v)]:
        if not os.path.exists(path):
            raise InvalidInputError(f"missing input file {path}")
    return data, pm


def _as_images(points):
    side = int(round(math.sqrt(points.shape[1])))
    # below 8 x 8 the 2..N/4 fit band holds fewer than two frequencies
    if side * side != points.shape[1] or side < 8:
        return None
    return points.reshape(points.shape[0], side, side)


def cmd_spectral_suite(config=None):
    """Spectrum densities, alignment sweeps and PSD slopes for data and manifold sample sets.

    Manifold files are paired with data files by class label. Points whose
    dimension is a perfect square are also read as square images for the PSD.
    White-noise and ``1/f^2`` control fields are always included.
    """
    cfg = merge_config(DEFAULT_SPECTRAL_CONFIG, config)
    chash = _hash(cfg)
    out = output_dir(cfg)
    _write_metadata(out, cfg, chash)
    data_files, pm_files = _default_inputs(cfg)
    data = {}
    for f in data_files:
        ss = pio.read_sample_set(f)
        data[int(ss.meta.get("label", len(data)))] = ss

    density_rows, align_rows, psd_rows = [], [], []

    def add_density(tag, label, pts):
        dens = spectrum_density(sym_eig(covariance(pts)).eigenvalues, cfg["n_bins"])
        for r in dens.rows():
            density_rows.append({"set": tag, "label": label, **r})

    def add_psd(tag, label, images):
        if images is None:
            return
        psd = radial_psd(images)
        psd_rows.append({
            "set": tag, "label": label, "alpha": psd.alpha, "slope": psd.slope,
            "band_lo": psd.band[0], "band_hi": psd.band[1], "total_power": psd.total_power,
        })

    data_eigs = {}
    for label, ss in sorted(data.items()):
        with _Stage(f"data:c{label}"):
            data_eigs[label] = sym_eig(covariance(ss.points))
            add_density("data", label, ss.points)
            add_psd("data", label, _as_images(ss.points))

    for model, files in sorted(pm_files.items()):
        for f in sorted(files):
            ss = pio.read_sample_set(f)
            label = int(ss.meta.get("label", -1))
            with _Stage(f"pm:{model}:c{label}"):
                add_density(f"pm_{model}", label, ss.points)
                add_psd(f"pm_{model}", label, _as_images(ss.points))
                if label in data_eigs:
                    de = data_eigs[label]
                    k = pick_k_for_variance(de.eigenvalues, cfg["variance_fraction"])
                    pe = sym_eig(covariance(ss.points))
                    for s in alignment_sweep(de.eigenvectors, pe.eigenvectors, k, None, cfg["baseline_trials"], cfg["seeds"]["baseline"]):
                        align_rows.append({"model": model, "label": label, **s.row()})

    with _Stage("controls"):
        rng = seeded_rng(cfg["seeds"]["control"])
        side, n = cfg["control_side"], cfg["control_images"]
        add_psd("white_noise", -1, rng.standard_normal((n, side, side)))
        add_psd("power_law_2", -1, power_law_field(side, 2.0, rng, n))

    pio.write_csv(os.path.join(out, "spectrum_density.csv"), density_rows, chash)
    pio.write_csv(os.path.join(out, "alignment.csv"), align_rows, chash)
    pio.write_csv(os.path.join(out, "psd.csv"), psd_rows, chash)
    return {"density": density_rows, "alignment": align_rows, "psd": psd_rows}
