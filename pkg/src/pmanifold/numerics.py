"""Deterministic numerical kernels shared by the estimators and diagnostics.

Random streams use numpy's PCG64 bit generator. Independent workers get
independent streams through :func:`spawn_seeds`, which delegates to
``numpy.random.SeedSequence.spawn``; the generator name is exported as
:data:`RNG_NAME` so it can be written next to results.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .samples import as_points

RNG_NAME = "numpy.random.PCG64"

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, paired with eigenvalues

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def covariance(samples) -> np.ndarray:
    """Mean-centred covariance with 1/N normalisation.

    >>> covariance([[0.0, 0.0], [2.0, 0.0]])
    array([[1., 0.],
           [0., 0.]])
    """
    x = as_points(samples)
    n = x.shape[0]
    if n < 2:
        raise InvalidInputError(f"covariance needs at least 2 samples, got {n}")
    xc = x - x.mean(axis=0)
    c = (xc.T @ xc) / n
    # exact symmetry; the matmul is symmetric only up to rounding
    return 0.5 * (c + c.T)


def sym_eig(m) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending.

    Backed by LAPACK ``syevd`` through :func:`numpy.linalg.eigh`. Ties keep
    LAPACK's order reversed stably; each eigenvector is signed so its first
    entry of magnitude above 1e-12 is positive.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > _SYM_TOL * scale:
        raise InvalidInputError("matrix is not symmetric within 1e-10")
    w, q = np.linalg.eigh(0.5 * (a + a.T))
    order = np.argsort(-w, kind="stable")
    w = w[order]
    q = q[:, order]
    pivot = np.argmax(np.abs(q) > 1e-12, axis=0)
    signs = np.sign(q[pivot, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    return EigenDecomposition(w, q * signs)


def eigvals_desc(m) -> np.ndarray:
    """Eigenvalues only, descending; cheaper than :func:`sym_eig` for large D."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    return np.linalg.eigvalsh(0.5 * (a + a.T))[::-1].copy()


def fft2(image) -> np.ndarray:
    """Unnormalised forward 2-D DFT of a real grid (any side length)."""
    g = np.asarray(image, dtype=np.float64)
    if g.ndim != 2:
        raise InvalidInputError(f"expected a 2-D grid, got shape {g.shape}")
    if g.size == 0:
        raise InvalidInputError("empty grid")
    return np.fft.fft2(g)


def ifft2(spectrum) -> np.ndarray:
    return np.fft.ifft2(spectrum)


def fit_slope_loglog(xs, ys, through_origin=False):
    """Least-squares line through (log x, log y).

    Returns ``(slope, intercept)``. With ``through_origin`` the model is
    ``log y = slope * log x`` and the intercept is reported as 0.0.
    """
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InvalidInputError("xs and ys differ in length")
    if x.size < 2:
        raise InvalidInputError("need at least 2 points")
    if np.any(x <= 0) or np.any(y <= 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("log-log fit needs finite, strictly positive values")
    lx, ly = np.log(x), np.log(y)
    return fit_line(lx, ly, through_origin=through_origin)


def fit_line(x, y, through_origin=False):
    """Ordinary least squares ``y = slope * x (+ intercept)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if through_origin:
        denom = float(np.dot(x, x))
        if denom == 0.0:
            raise DegenerateInputError("all regressors are zero")
        return float(np.dot(x, y) / denom), 0.0
    xm, ym = x.mean(), y.mean()
    sxx = float(np.dot(x - xm, x - xm))
    if sxx == 0.0:
        raise DegenerateInputError("regressor has zero spread")
    slope = float(np.dot(x - xm, y - ym) / sxx)
    return slope, float(ym - slope * xm)


def seeded_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def spawn_seeds(seed, n):
    """``n`` independent child seed sequences derived from ``seed``."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(
        int(seed) & 0xFFFFFFFFFFFFFFFF
    )
    return root.spawn(n)


def uniform_hypercube(rng: np.random.Generator, n, dim) -> np.ndarray:
    return rng.random((n, dim))


def orthonormal_columns(rng: np.random.Generator, dim, k) -> np.ndarray:
    """Haar-distributed dim x k matrix with orthonormal columns."""
    g = rng.standard_normal((dim, k))
    q, r = np.linalg.qr(g)
    # sign fix makes the distribution exactly Haar
    return q * np.sign(np.diag(r))


def kahan_mean_std(values):
    """Order-independent mean and population std via math.fsum."""
    v = [float(t) for t in values]
    n = len(v)
    mean = math.fsum(v) / n
    var = math.fsum((t - mean) ** 2 for t in v) / n
    return mean, math.sqrt(var)
