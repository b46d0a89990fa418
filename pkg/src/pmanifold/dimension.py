"""Linear and nonlinear dimensionality estimators.

``participation_ratio`` counts significant directions of variance,
``(sum lambda)^2 / sum lambda^2`` over covariance eigenvalues. ``two_nn``
estimates intrinsic dimension from the Pareto law obeyed by the ratio of
second to first nearest-neighbour distances; at finite N it is biased low and
is therefore always flagged as a lower bound.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError, InvalidInputError
from .numerics import covariance, eigvals_desc, seeded_rng
from .samples import as_points

PLATEAU_TOL = 0.02
BRUTE_FORCE_MAX_N = 20_000
_CANDIDATES = 8


@dataclass
class DimensionReport:
    estimator: str  # "PR" or "2NN"
    estimate: float
    n_samples: int
    is_lower_bound: bool
    scaling: list = field(default_factory=list)  # [(N, estimate), ...]
    meta: dict = field(default_factory=dict)

    def csv_row(self, label=""):
        return {
            "estimator": self.estimator,
            "label": label,
            "n": self.n_samples,
            "estimate": repr(float(self.estimate)),
            "lower_bound": int(self.is_lower_bound),
        }


def participation_ratio(eigenvalues) -> float:
    lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
    if lam.size == 0:
        raise InvalidInputError("empty spectrum")
    if np.any(lam < 0):
        # round-off can leave tiny negative eigenvalues on PSD matrices
        if np.min(lam) < -1e-10 * max(float(np.sum(np.abs(lam))), 1e-300):
            raise InvalidInputError("participation ratio needs a nonnegative spectrum")
        lam = np.clip(lam, 0.0, None)
    top = float(lam.max())
    if top == 0.0:
        raise DegenerateInputError("all eigenvalues are zero")
    # PR is scale free; normalising keeps tiny spectra from underflowing when squared
    lam = lam / top
    s2 = float(np.sum(lam * lam))
    s = float(np.sum(lam))
    return s * s / s2


def _pr(x):
    return participation_ratio(eigvals_desc(covariance(x)))


def _plateaued(curve):
    if len(curve) < 2:
        return False
    n_last, est_last = curve[-1]
    # compare against the largest grid point at or below half the final N
    prior = [e for n, e in curve[:-1] if n <= n_last // 2]
    if not prior:
        return False
    return abs(est_last - prior[-1]) / abs(est_last) < PLATEAU_TOL


def pr_of_samples(samples, n_grid=None, seed=0) -> DimensionReport:
    """Participation ratio of the sample covariance.

    ``is_lower_bound`` is set unless the estimate moved by less than 2 % over
    the last doubling of N. Without an explicit ``n_grid`` the check uses the
    two-point grid (N/2, N).
    """
    x = as_points(samples)
    n = x.shape[0]
    if n < 2:
        raise InvalidInputError("need at least 2 samples")
    estimate = _pr(x)
    if n_grid is None:
        n_grid = [n // 2, n] if n >= 4 else [n]
    curve = scaling_curve(x, "PR", n_grid, seed=seed)
    if curve[-1][0] == n:
        curve[-1] = (n, estimate)
    return DimensionReport("PR", estimate, n, not _plateaued(curve), curve)


def nn_distances(x, k=2):
    """Exact distances and indices of the ``k`` nearest other points of every row.

    Brute force up to 20,000 points, k-d tree above; both are exact.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n <= k:
        raise InvalidInputError(f"need more than {k} points")
    if n > BRUTE_FORCE_MAX_N:
        tree = cKDTree(x)
        dist, idx = tree.query(x, k=k + 1)
        # drop the query point itself, which may not be first when duplicates exist
        rows = np.arange(n)[:, None]
        keep = idx != rows
        # rows without self among the k+1 results keep their first k entries
        keep[keep.sum(axis=1) > k, -1] = False
        return dist[keep].reshape(n, k), idx[keep].reshape(n, k)

    sq = np.einsum("ij,ij->i", x, x)
    m = min(_CANDIDATES, n - 1)
    out_d = np.empty((n, k))
    out_i = np.empty((n, k), dtype=np.int64)
    chunk = max(1, 4_000_000 // n)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        g = sq[start:stop, None] + sq[None, :] - 2.0 * (x[start:stop] @ x.T)
        g[np.arange(stop - start), np.arange(start, stop)] = np.inf
        cand = np.argpartition(g, m - 1, axis=1)[:, :m] if m < n - 1 else np.argsort(g, axis=1)[:, :m]
        # exact recomputation on the candidates removes Gram-trick cancellation
        diff = x[cand] - x[start:stop, None, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        d[cand == np.arange(start, stop)[:, None]] = np.inf
        order = np.lexsort((cand, d), axis=1)[:, :k]
        out_d[start:stop] = np.take_along_axis(d, order, axis=1)
        out_i[start:stop] = np.take_along_axis(cand, order, axis=1)
    return out_d, out_i


def _two_nn_fit(mu):
    # regression through the origin of -log(1 - i/N) on log mu_(i), i = 1..N-1
    n = mu.size
    order = np.argsort(mu, kind="stable")
    log_mu = np.log(mu[order])[:-1]
    i = np.arange(1, n)
    log_surv = np.log1p(-i / n)
    denom = float(np.dot(log_mu, log_mu))
    if denom == 0.0:
        raise DegenerateInputError("all neighbour-distance ratios equal 1")
    return -float(np.dot(log_mu, log_surv)) / denom


def two_nn(samples, duplicates="drop") -> DimensionReport:
    """Two-nearest-neighbour intrinsic dimension.

    Points whose first neighbour is at distance zero make the ratio undefined.
    ``duplicates="drop"`` removes them and records the count in
    ``meta["dropped"]``; ``duplicates="raise"`` raises instead. No trimming of
    large ratios is applied (``meta["trim_fraction"] = 0``).
    """
    x = as_points(samples)
    n = x.shape[0]
    if n < 3:
        raise InvalidInputError("2NN needs at least 3 points")
    dist, _ = nn_distances(x, k=2)
    r1, r2 = dist[:, 0], dist[:, 1]
    bad = r1 <= 0.0
    if bad.any() and duplicates == "raise":
        raise InvalidInputError(f"{int(bad.sum())} points have a duplicate at distance 0")
    if duplicates not in ("drop", "raise"):
        raise InvalidInputError(f"unknown duplicate policy {duplicates!r}")
    mu = r2[~bad] / r1[~bad]
    if mu.size < 3:
        raise DegenerateInputError("fewer than 3 usable points after dropping duplicates")
    est = _two_nn_fit(mu)
    return DimensionReport(
        "2NN", est, n, True, [(n, est)], {"dropped": int(bad.sum()), "trim_fraction": 0.0}
    )


_ESTIMATORS = {
    "PR": _pr,
    "2NN": lambda x: two_nn(x).estimate,
}


def scaling_curve(samples, estimator, n_grid, seed=0):
    """Estimator on nested prefixes of one seeded shuffle of the samples."""
    x = as_points(samples)
    n = x.shape[0]
    grid = [int(v) for v in n_grid]
    if not grid:
        raise InvalidInputError("empty N grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("N grid must be strictly increasing")
    if grid[-1] > n:
        raise InvalidInputError(f"grid value {grid[-1]} exceeds the {n} available samples")
    key = estimator.upper()
    if key not in _ESTIMATORS:
        raise InvalidInputError(f"unknown estimator {estimator!r}")
    fn = _ESTIMATORS[key]
    perm = seeded_rng(seed).permutation(n)
    shuffled = x[perm]
    return [(m, fn(shuffled[:m])) for m in grid]


def log_grid(n_max, n_min=100, per_decade=4):
    """Roughly log-spaced integer grid ending exactly at ``n_max``."""
    if n_max <= n_min:
        return [n_max]
    pts = np.logspace(np.log10(n_min), np.log10(n_max), max(2, int(per_decade * np.log10(n_max / n_min)) + 1))
    g = sorted(set(int(round(p)) for p in pts) | {int(n_max)})
    return [v for v in g if v <= n_max]
