"""Ellipsoidal toy model of a class manifold.

A d-dimensional ellipsoid ``{V y + c : sum(y_i^2 / r_i^2) <= 1}`` sits inside
``R^D``. The module measures how far uniform random points of the unit
hypercube are from it, both exactly (Monte Carlo with an exact nearest-point
solver) and through the concentration-of-measure closed form

    E[dist^2] ~ (D - d)/6 + max(0, sqrt(d/6) - R_eff)^2

with ``R_eff`` the root mean square of the principal radii.

Two distances are reported for every point. ``boundary`` is the distance to
the surface ``sum(y_i^2/r_i^2) = 1``, so points whose in-subspace projection
falls inside the ellipsoid still pay the distance to the shell. ``filled`` is
the distance to the solid ellipsoid, which is zero in that same situation and
is the quantity the closed form approximates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .numerics import kahan_mean_std, orthonormal_columns, seeded_rng, spawn_seeds

MAX_ROOT_ITERS = 200
ROOT_TOL = 1e-10


@dataclass(frozen=True)
class EllipsoidSpec:
    center: np.ndarray  # (D,)
    basis: np.ndarray  # (D, d), orthonormal columns
    radii: np.ndarray  # (d,)

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).ravel()
        v = np.asarray(self.basis, dtype=np.float64)
        r = np.asarray(self.radii, dtype=np.float64).ravel()
        if v.ndim == 1:
            v = v[:, None]
        if v.shape != (c.size, r.size):
            raise InvalidInputError(
                f"basis shape {v.shape} incompatible with center ({c.size}) and radii ({r.size})"
            )
        if r.size < 1 or r.size > c.size:
            raise InvalidInputError("need 1 <= d <= D")
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise InvalidInputError("radii must be finite and positive")
        if np.max(np.abs(v.T @ v - np.eye(r.size))) > 1e-8:
            raise InvalidInputError("basis columns are not orthonormal within 1e-8")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "basis", v)
        object.__setattr__(self, "radii", r)

    @property
    def ambient_dim(self) -> int:
        return self.center.size

    @property
    def intrinsic_dim(self) -> int:
        return self.radii.size


@dataclass(frozen=True)
class DistanceEstimate:
    mean_sq_dist: float
    std: float  # population std of the per-point squared distances
    n_points: int

    @property
    def sigma_of_mean(self) -> float:
        return self.std / math.sqrt(self.n_points)


@dataclass(frozen=True)
class MonteCarloResult:
    ambient_dim: int
    intrinsic_dim: int
    boundary: DistanceEstimate
    filled: DistanceEstimate
    analytic: float
    seed: int


def make_ellipsoid(ambient_dim, intrinsic_dim, radius_low=6.0, radius_high=30.0, seed=0):
    """Random ellipsoid: Haar basis, i.i.d. uniform radii, centre uniform in the cube.

    Draw order from one PCG64 stream is basis, radii, centre.
    """
    D, d = int(ambient_dim), int(intrinsic_dim)
    if not 1 <= d <= D:
        raise InvalidInputError(f"need 1 <= d <= D, got d={d}, D={D}")
    if not 0 < radius_low <= radius_high:
        raise InvalidInputError("need 0 < radius_low <= radius_high")
    rng = seeded_rng(seed)
    basis = orthonormal_columns(rng, D, d)
    radii = rng.uniform(radius_low, radius_high, size=d)
    center = rng.random(D)
    return EllipsoidSpec(center, basis, radii)


def effective_radius(radii) -> float:
    r = np.asarray(radii, dtype=np.float64).ravel()
    if r.size == 0:
        raise InvalidInputError("no radii given")
    if np.any(r <= 0):
        raise InvalidInputError("radii must be positive")
    return math.sqrt(float(np.mean(r * r)))


def analytic_expected_sqdist(ambient_dim, intrinsic_dim, radii) -> float:
    D, d = int(ambient_dim), int(intrinsic_dim)
    r = np.asarray(radii, dtype=np.float64).ravel()
    if not 1 <= d <= D or r.size != d:
        raise InvalidInputError("need 1 <= d <= D and exactly d radii")
    excess = max(0.0, math.sqrt(d / 6.0) - effective_radius(r))
    return (D - d) / 6.0 + excess * excess


def _secular(u, y2r2, shift):
    # F(u) = sum (r_i y_i / (r_i^2 - r_min^2 + u))^2 - 1 and its derivative
    den = shift + u
    terms = y2r2 / (den * den)
    return float(terms.sum() - 1.0), float(-2.0 * (terms / den).sum())


def surface_distance(y0, radii):
    """Distance from ``y0`` to the surface ``sum(y_i^2/r_i^2) = 1`` in the frame of the axes.

    Returns ``(distance, inside)``. The nearest point is
    ``y_i = r_i^2 y0_i / (r_i^2 + t)`` where ``t`` is the root of the
    stationarity condition on ``t > -min(r)^2``. The root is sought in
    ``u = t + min(r)^2 > 0`` so the smallest-axis denominator is exact.
    """
    y0 = np.asarray(y0, dtype=np.float64).ravel()
    r = np.asarray(radii, dtype=np.float64).ravel()
    r2 = r * r
    q = float(np.sum((y0 / r) ** 2))
    inside = q < 1.0
    if q == 1.0:
        return 0.0, False
    r2min = float(r2.min())
    shift = r2 - r2min
    in_group = shift <= 1e-14 * r2min
    shift[in_group] = 0.0
    y2r2 = y0 * y0 * r2
    mass_group = float(np.sum(y0[in_group] ** 2))

    if mass_group == 0.0:
        # no weight on the shortest axes: the secular function is finite at u = 0
        rest = ~in_group
        if not rest.any():
            # centre of a sphere: every surface point is equally far
            return math.sqrt(r2min), True
        f0 = float(np.sum(y2r2[rest] / shift[rest] ** 2)) - 1.0
        if f0 <= 0.0:
            # nearest points leave the principal plane along the shortest axes
            y = np.zeros_like(y0)
            y[rest] = r2[rest] * y0[rest] / shift[rest]
            fill = r2min * (1.0 - float(np.sum(y[rest] ** 2 / r2[rest])))
            dist2 = float(np.sum((y[rest] - y0[rest]) ** 2)) + max(fill, 0.0)
            return math.sqrt(dist2), True
        lo = 0.0
    else:
        lo = min(r2min, 0.5 * math.sqrt(r2min * mass_group)) if inside else r2min
    hi = r2min + math.sqrt(float(r2.max()) * float(np.dot(y0, y0))) if not inside else r2min
    if not inside:
        hi = max(hi, lo)

    u = lo if lo > 0.0 else hi * 0.5
    f, df = _secular(u, y2r2, shift)
    if inside and lo > 0.0 and f <= 0.0:
        # tiny-mass guard: lower the bracket until the function is positive
        while f <= 0.0 and u > 1e-300:
            u *= 0.25
            f, df = _secular(u, y2r2, shift)
        lo = u
    a, b = lo, hi
    converged = False
    for _ in range(MAX_ROOT_ITERS):
        if abs(f) <= ROOT_TOL:
            converged = True
            break
        if f > 0.0:
            a = u
        else:
            b = u
        if b - a <= 4.0 * np.finfo(float).eps * max(b, 1e-300):
            converged = True
            break
        step = u - f / df if df != 0.0 else math.nan
        if not (a < step < b):
            # bisect, geometrically when the bracket spans orders of magnitude
            step = math.sqrt(a * b) if a > 0.0 and b > 4.0 * a else 0.5 * (a + b)
        u = step
        f, df = _secular(u, y2r2, shift)
    if not converged and abs(f) > ROOT_TOL:
        raise NumericalFailureError(
            f"nearest-point root search did not converge in {MAX_ROOT_ITERS} iterations",
            residual=f,
        )
    t = u - r2min
    den = shift + u
    delta = y0 * t / den
    return float(np.sqrt(np.dot(delta, delta))), inside


def _split(point, e: EllipsoidSpec):
    p = np.asarray(point, dtype=np.float64).ravel()
    if p.size != e.ambient_dim:
        raise InvalidInputError(f"point has dimension {p.size}, ellipsoid lives in {e.ambient_dim}")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("point has non-finite coordinates")
    z = p - e.center
    y0 = e.basis.T @ z
    perp = z - e.basis @ y0
    return y0, float(np.dot(perp, perp))


def ellipsoid_distances(point, e: EllipsoidSpec):
    """``(boundary_distance, filled_distance)`` for one point."""
    y0, perp2 = _split(point, e)
    par, inside = surface_distance(y0, e.radii)
    boundary = math.sqrt(perp2 + par * par)
    filled = math.sqrt(perp2) if inside else boundary
    return boundary, filled


def boundary_distance(point, e: EllipsoidSpec) -> float:
    """Euclidean distance from ``point`` to the ellipsoid surface."""
    return ellipsoid_distances(point, e)[0]


def filled_distance(point, e: EllipsoidSpec) -> float:
    """Euclidean distance from ``point`` to the solid ellipsoid."""
    return ellipsoid_distances(point, e)[1]


def monte_carlo_expected_sqdist(
    ambient_dim, intrinsic_dim, radius_range=(6.0, 30.0), n_points=200, seed=0
) -> MonteCarloResult:
    """Mean squared distance from uniform cube points to one random ellipsoid.

    The seed is split into an ellipsoid stream and a point stream, so the
    ellipsoid for a given (D, d, seed) does not depend on ``n_points``.
    """
    if n_points < 2:
        raise InvalidInputError("need at least 2 Monte Carlo points")
    ell_seq, pts_seq = spawn_seeds(seed, 2)
    e = make_ellipsoid(ambient_dim, intrinsic_dim, *radius_range, seed=ell_seq)
    pts = seeded_rng(pts_seq).random((n_points, e.ambient_dim))
    b2, f2 = [], []
    for p in pts:
        b, f = ellipsoid_distances(p, e)
        b2.append(b * b)
        f2.append(f * f)
    bm, bs = kahan_mean_std(b2)
    fm, fs = kahan_mean_std(f2)
    return MonteCarloResult(
        ambient_dim=e.ambient_dim,
        intrinsic_dim=e.intrinsic_dim,
        boundary=DistanceEstimate(bm, bs, n_points),
        filled=DistanceEstimate(fm, fs, n_points),
        analytic=analytic_expected_sqdist(e.ambient_dim, e.intrinsic_dim, e.radii),
        seed=int(seed),
    )


def ellipsoid_d_grid(ambient_dim, n=12):
    """Log-spaced intrinsic dimensions from 1 to D inclusive, deduplicated."""
    g = np.unique(np.round(np.logspace(0, math.log10(ambient_dim), n)).astype(int))
    g[0], g[-1] = 1, ambient_dim
    return [int(v) for v in g]
