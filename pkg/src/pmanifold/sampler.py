"""Sampling a classifier's perceptual manifold by projected gradient ascent.

The perceptual manifold of class ``c`` is ``{x in [0,1]^D : p(c|x) > tau}``.
A sample is obtained by ascending ``log p(c|x)`` from a starting point and
clipping to the cube after every step, stopping at the first iterate whose
confidence exceeds ``tau``.

Run ``i`` of a batch drawn with seed ``s`` uses the stream
``SeedSequence(s, spawn_key=(i,))`` for its initial point and noise, so
results do not depend on how runs are grouped.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyResultError, InvalidInputError, NumericalFailureError
from .model import forward, logp_and_grad
from .numerics import kahan_mean_std, seeded_rng
from .samples import SampleSet, as_points

log = logging.getLogger(__name__)

LOW_YIELD = 0.5
_CHUNK = 2048


@dataclass(frozen=True)
class PgaConfig:
    step_size: float = 0.01
    threshold: float = 0.9
    max_iters: int = 2000
    optimizer: str = "plain"  # "plain" or "adam"
    noise_sigma: float = 0.0
    momentum: float = 0.0
    adam_fallback: bool = False

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise InvalidInputError("threshold must lie in (0, 1)")
        if self.step_size <= 0:
            raise InvalidInputError("step size must be positive")
        if self.max_iters < 0 or self.noise_sigma < 0 or not 0 <= self.momentum < 1:
            raise InvalidInputError("invalid max_iters, noise_sigma or momentum")
        if self.optimizer not in ("plain", "adam"):
            raise InvalidInputError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class PmSampleResult:
    x_final: np.ndarray
    success: bool
    iterations: int
    sq_dist_from_init: float
    final_prob: float


@dataclass
class PgaBatch:
    x_init: np.ndarray
    x_final: np.ndarray
    success: np.ndarray
    iterations: np.ndarray
    final_prob: np.ndarray
    seed: int = 0

    @property
    def sq_dist(self):
        d = self.x_final - self.x_init
        return np.einsum("ij,ij->i", d, d)

    def result(self, i) -> PmSampleResult:
        return PmSampleResult(
            self.x_final[i].copy(),
            bool(self.success[i]),
            int(self.iterations[i]),
            float(self.sq_dist[i]),
            float(self.final_prob[i]),
        )

    def rows(self):
        sq = self.sq_dist
        for i in range(self.success.size):
            yield {
                "seed": self.seed,
                "run": i,
                "iterations": int(self.iterations[i]),
                "success": int(self.success[i]),
                "sq_dist": repr(float(sq[i])),
                "final_prob": repr(float(self.final_prob[i])),
            }


def run_stream(seed, i):
    return seeded_rng(np.random.SeedSequence(int(seed), spawn_key=(int(i),)))


def _ascend(model, c, x0, cfg: PgaConfig, optimizer, streams):
    """Vectorised ascent of independent runs; returns (x, success, iterations, prob)."""
    x = x0.copy()
    n = x.shape[0]
    _, p = forward(model, x)
    prob = p[:, c]
    done = prob > cfg.threshold
    iters = np.zeros(n, dtype=np.int64)
    vel = np.zeros_like(x)
    m2 = np.zeros_like(x)
    for t in range(1, cfg.max_iters + 1):
        live = np.flatnonzero(~done)
        if live.size == 0:
            break
        xl = x[live]
        _, g = logp_and_grad(model, xl, c)
        if not np.all(np.isfinite(g)):
            raise NumericalFailureError("non-finite gradient during ascent", snapshot=xl.copy())
        if optimizer == "adam":
            vel[live] = 0.9 * vel[live] + 0.1 * g
            m2[live] = 0.999 * m2[live] + 0.001 * g * g
            step = (vel[live] / (1 - 0.9**t)) / (np.sqrt(m2[live] / (1 - 0.999**t)) + 1e-8)
        elif cfg.momentum > 0:
            vel[live] = cfg.momentum * vel[live] + g
            step = vel[live]
        else:
            step = g
        xl = xl + cfg.step_size * step
        if cfg.noise_sigma > 0:
            xl += cfg.noise_sigma * np.stack([streams[j].standard_normal(x.shape[1]) for j in live])
        xl = np.clip(xl, 0.0, 1.0)
        x[live] = xl
        iters[live] = t
        _, p = forward(model, xl)
        prob[live] = p[:, c]
        done[live] = p[:, c] > cfg.threshold
    return x, done, iters, prob


def pga_batch(model, c, inits=None, n=None, cfg: PgaConfig = PgaConfig(), seed=0) -> PgaBatch:
    """Independent ascent runs, from ``inits`` or from seeded uniform starts.

    With ``cfg.adam_fallback`` a run that fails with plain ascent is restarted
    from the same initial point with Adam; its iteration count is the sum of
    both attempts.
    """
    if not 0 <= int(c) < model.n_classes:
        raise InvalidInputError(f"class {c} out of range")
    D = model.input_dim
    if inits is None:
        if n is None or n < 1:
            raise InvalidInputError("give inits or a positive run count")
        streams = [run_stream(seed, i) for i in range(n)]
        x0 = np.stack([s.random(D) for s in streams])
    else:
        x0 = as_points(inits).copy()
        if x0.shape[0] == 0:
            raise InvalidInputError("no initial points given")
        if x0.shape[1] != D:
            raise InvalidInputError(f"inits have dimension {x0.shape[1]}, model expects {D}")
        if np.any(x0 < 0) or np.any(x0 > 1):
            raise InvalidInputError("inits must lie in the unit hypercube")
        streams = [run_stream(seed, i) for i in range(x0.shape[0])] if cfg.noise_sigma > 0 else None
    c = int(c)
    parts = []
    for start in range(0, x0.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        st = streams[sl] if streams is not None else None
        x, ok, it, pr = _ascend(model, c, x0[sl], cfg, cfg.optimizer, st)
        if cfg.adam_fallback and cfg.optimizer == "plain" and not ok.all():
            bad = np.flatnonzero(~ok)
            st2 = [st[j] for j in bad] if st is not None else None
            x2, ok2, it2, pr2 = _ascend(model, c, x0[sl][bad], cfg, "adam", st2)
            x[bad], ok[bad], pr[bad] = x2, ok2, pr2
            it[bad] += it2
        parts.append((x, ok, it, pr))
    return PgaBatch(
        x0,
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts]),
        int(seed),
    )


def pga_sample(model, c, cfg: PgaConfig = PgaConfig(), init=None, seed=0) -> PmSampleResult:
    """One ascent run; without ``init`` the start is uniform in the cube."""
    if init is None:
        return pga_batch(model, c, n=1, cfg=cfg, seed=seed).result(0)
    return pga_batch(model, c, inits=np.asarray(init, dtype=np.float64)[None, :], cfg=cfg, seed=seed).result(0)


def sample_pm(model, c, n_samples, cfg: PgaConfig = PgaConfig(), seed=0, return_batch=False):
    """Successful ascent endpoints from ``n_samples`` uniform starts.

    Failed runs are dropped and counted in the metadata; a success rate below
    50 % sets ``meta["low_yield"]`` and logs a warning.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be at least 1")
    batch = pga_batch(model, c, n=n_samples, cfg=cfg, seed=seed)
    ok = batch.success
    rate = float(ok.mean())
    meta = {
        "source": "pm",
        "label": int(c),
        "seed": int(seed),
        "attempts": int(n_samples),
        "successes": int(ok.sum()),
        "low_yield": rate < LOW_YIELD,
    }
    if rate < LOW_YIELD:
        log.warning("class %d: only %d of %d ascent runs reached the threshold", c, ok.sum(), n_samples)
    pts = batch.x_final[ok] if ok.any() else np.empty((0, model.input_dim))
    ss = SampleSet(pts, meta)
    return (ss, batch) if return_batch else ss


@dataclass(frozen=True)
class DistanceStats:
    """Squared L2 distance from start to the reached manifold point.

    Ascent does not find the nearest manifold point, so the mean is an upper
    bound on the mean squared distance to the manifold.
    """

    mean: float
    std: float
    n_success: int
    n_attempts: int
    source: str

    @property
    def sigma_of_mean(self):
        return self.std / math.sqrt(self.n_success)


def distance_to_pm(model, c, inits=None, cfg: PgaConfig = PgaConfig(), seed=0, n=None, source=None):
    """Distance statistics from given starting points, or from ``n`` uniform ones."""
    batch = pga_batch(model, c, inits=inits, n=n, cfg=cfg, seed=seed)
    ok = batch.success
    if not ok.any():
        raise EmptyResultError(f"no ascent run reached the threshold for class {c}")
    mean, std = kahan_mean_std(batch.sq_dist[ok])
    src = source or ("uniform" if inits is None else (inits.meta.get("source", "data") if isinstance(inits, SampleSet) else "data"))
    return DistanceStats(mean, std, int(ok.sum()), int(ok.size), src)
