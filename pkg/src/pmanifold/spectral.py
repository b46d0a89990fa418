"""Diagnostics comparing a manifold sample set with natural data.

* covariance eigen-spectrum densities on log-spaced bins,
* alignment of principal subspaces (mean cosine of principal angles) with a
  Haar-random baseline,
* radially averaged power spectral density of square images and its
  power-law exponent ``P(k) ~ k^-alpha``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .numerics import fft2, fit_slope_loglog, orthonormal_columns, seeded_rng

EIG_FLOOR = 1e-12


@dataclass
class SpectrumDensity:
    edges: np.ndarray  # log10 eigenvalue bin edges
    density: np.ndarray  # per unit log10 eigenvalue
    n_eigenvalues: int
    n_excluded: int = 0

    @property
    def widths(self):
        return np.diff(self.edges)

    def mass(self) -> float:
        return float(np.sum(self.density * self.widths))

    def rows(self):
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        for c, d in zip(centers, self.density):
            yield {"log10_eigenvalue": repr(float(c)), "density": repr(float(d))}


def spectrum_density(eigenvalues, n_bins=40, floor=EIG_FLOOR) -> SpectrumDensity:
    """Normalised histogram of ``log10`` eigenvalues.

    Eigenvalues below ``floor * max`` are excluded and counted. A spectrum
    with a single distinct value is given a unit-wide window centred on it.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
    if lam.size == 0 or np.any(lam < -1e-10 * max(float(np.max(np.abs(lam))), 1e-300)):
        raise InvalidInputError("spectrum must be nonempty and nonnegative")
    top = float(lam.max())
    if top <= 0:
        raise DegenerateInputError("all eigenvalues are zero")
    keep = lam >= floor * top
    logs = np.log10(lam[keep])
    lo, hi = float(logs.min()), float(logs.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(logs, bins=edges)
    density = counts / (logs.size * np.diff(edges))
    return SpectrumDensity(edges, density, int(logs.size), int((~keep).sum()))


def pick_k_for_variance(eigenvalues, fraction=0.9) -> int:
    """Smallest k whose top-k eigenvalues explain ``fraction`` of the total."""
    if not 0 < fraction <= 1:
        raise InvalidInputError("fraction must lie in (0, 1]")
    lam = np.sort(np.clip(np.asarray(eigenvalues, dtype=np.float64).ravel(), 0, None))[::-1]
    total = float(lam.sum())
    if total <= 0:
        raise DegenerateInputError("spectrum has no variance")
    explained = np.cumsum(lam) / total
    # rounding in cumsum must not push an exact hit past the target
    return int(np.searchsorted(explained, fraction - 1e-12) + 1)


def _check_orthonormal(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a D x k matrix")
    if np.max(np.abs(a.T @ a - np.eye(a.shape[1]))) > 1e-8:
        raise InvalidInputError(f"{name} columns are not orthonormal within 1e-8")
    return a


def principal_cosines(u, v):
    """Cosines of the principal angles between span(u) and span(v), descending."""
    u = _check_orthonormal(u, "U")
    v = _check_orthonormal(v, "V")
    if u.shape[0] != v.shape[0]:
        raise InvalidInputError("bases live in different ambient dimensions")
    s = np.linalg.svd(u.T @ v, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def subspace_alignment(u, v) -> float:
    """Mean principal cosine, normalised by the dimension of ``u``.

    With ``k = u.shape[1]`` and ``m = v.shape[1]`` there are ``min(k, m)``
    cosines; their sum is divided by ``k``, so when ``k > m`` the missing
    angles count as orthogonal.
    """
    s = principal_cosines(u, v)
    return float(s.sum() / np.asarray(u).reshape(np.asarray(u).shape[0], -1).shape[1])


@dataclass(frozen=True)
class AlignmentBaseline:
    mean: float
    std: float
    trials: int

    @property
    def sigma_of_mean(self):
        return self.std / math.sqrt(self.trials)


def random_alignment_baseline(ambient_dim, k, m, trials=200, seed=0) -> AlignmentBaseline:
    """Alignment score of independent Haar-random k- and m-dimensional subspaces."""
    if not (1 <= k <= ambient_dim and 1 <= m <= ambient_dim):
        raise InvalidInputError("need 1 <= k, m <= D")
    if trials < 2:
        raise InvalidInputError("need at least 2 trials")
    rng = seeded_rng(seed)
    scores = np.empty(trials)
    for t in range(trials):
        scores[t] = subspace_alignment(orthonormal_columns(rng, ambient_dim, k), orthonormal_columns(rng, ambient_dim, m))
    return AlignmentBaseline(float(scores.mean()), float(scores.std()), trials)


def top_eigenvectors(eigvecs, k):
    return np.asarray(eigvecs)[:, :k]


def alignment_sweep_grid(k, ambient_dim):
    """m = k, 2k, 4k, ... capped by and ending at D."""
    grid, m = [], k
    while m < ambient_dim:
        grid.append(m)
        m *= 2
    grid.append(ambient_dim)
    return grid


@dataclass
class RadialPsd:
    k: np.ndarray  # integer radial frequencies 1..N/2
    power: np.ndarray
    slope: float  # fitted log-log slope, i.e. -alpha
    intercept: float
    band: tuple = (2, 0)
    total_power: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return -self.slope

    def rows(self):
        for k, p in zip(self.k, self.power):
            yield {"k": int(k), "power": repr(float(p))}


def _as_image_stack(images):
    a = np.asarray(images, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim == 4:
        # (n, C, H, W): channels are averaged after the transform
        return a
    if a.ndim != 3:
        raise InvalidInputError(f"expected (n, H, W) or (n, C, H, W) images, got shape {a.shape}")
    return a[:, None]


def radial_power(image_stack):
    """Ring-averaged power per integer frequency 0..N/2, averaged over images and channels."""
    a = _as_image_stack(image_stack)
    n_img, n_ch, h, w = a.shape
    if h != w:
        raise InvalidInputError(f"images must be square, got {h} x {w}")
    if h < 4:
        raise InvalidInputError("images must be at least 4 x 4")
    f = np.fft.fftfreq(h) * h
    kr = np.rint(np.hypot(f[:, None], f[None, :])).astype(np.int64)
    nyq = h // 2
    ring = kr.ravel()
    inside = ring <= nyq
    counts = np.bincount(ring[inside], minlength=nyq + 1)
    acc = np.zeros(nyq + 1)
    total = 0.0
    for img in a:
        for ch in img:
            spec = np.abs(fft2(ch - ch.mean())) ** 2
            total += float(spec.sum())
            acc += np.bincount(ring[inside], weights=spec.ravel()[inside], minlength=nyq + 1)
    n = n_img * n_ch
    return np.arange(nyq + 1), acc / (counts * n), total / n


def radial_psd(images, band=None) -> RadialPsd:
    """Radially averaged PSD with a power-law fit.

    The default fit band is ``2 <= k <= N/4``: it skips DC and k = 1 and the
    top octave below Nyquist.
    """
    k, p, total = radial_power(images)
    k, p = k[1:], p[1:]
    if total <= 0 or not np.any(p > 0):
        raise DegenerateInputError("images carry no power away from DC")
    if np.any(p <= 0):
        raise DegenerateInputError("some radial frequencies carry no power")
    nyq = int(k[-1])
    lo, hi = band if band is not None else (2, max(3, nyq // 2))
    sel = (k >= lo) & (k <= hi)
    slope, intercept = fit_slope_loglog(k[sel], p[sel])
    return RadialPsd(k, p, slope, intercept, (lo, hi), total)


def power_law_field(side, alpha, rng, n=1):
    """Random fields whose power spectrum follows ``|k|^-alpha`` (white noise when alpha = 0)."""
    f = np.fft.fftfreq(side) * side
    kk = np.hypot(f[:, None], f[None, :])
    kk[0, 0] = 1.0
    amp = kk ** (-alpha / 2.0)
    amp[0, 0] = 0.0
    out = np.empty((n, side, side))
    for i in range(n):
        white = np.fft.fft2(rng.standard_normal((side, side)))
        out[i] = np.real(np.fft.ifft2(white * amp))
    return out


@dataclass(frozen=True)
class AlignmentScore:
    k: int  # natural-subspace dimension
    m: int  # model-subspace dimension
    score: float
    baseline: float
    baseline_std: float
    normalisation: str = "sum of cosines / k"

    @property
    def z(self) -> float:
        """Distance of the score from the random baseline in baseline standard deviations."""
        return (self.score - self.baseline) / self.baseline_std if self.baseline_std > 0 else 0.0

    def row(self):
        return {
            "k": self.k,
            "m": self.m,
            "score": self.score,
            "baseline": self.baseline,
            "baseline_std": self.baseline_std,
            "normalisation": self.normalisation,
        }


def alignment_sweep(natural_vecs, model_vecs, k, m_grid=None, trials=200, seed=0):
    """Alignment of the top-k natural directions with the top-m model directions.

    ``natural_vecs`` and ``model_vecs`` are eigenvector matrices with columns
    sorted by decreasing eigenvalue.
    """
    natural_vecs = np.asarray(natural_vecs)
    D = natural_vecs.shape[0]
    u = top_eigenvectors(natural_vecs, k)
    out = []
    for m in m_grid or alignment_sweep_grid(k, D):
        base = random_alignment_baseline(D, k, m, trials, seed)
        score = subspace_alignment(u, top_eigenvectors(model_vecs, m))
        out.append(AlignmentScore(int(k), int(m), score, base.mean, base.std))
    return out
