import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ellipsoid_surface_oracle
from pmanifold.errors import InvalidInputError
from pmanifold.geometry import (
    EllipsoidSpec,
    analytic_expected_sqdist,
    boundary_distance,
    effective_radius,
    ellipsoid_distances,
    ellipsoid_d_grid,
    make_ellipsoid,
    monte_carlo_expected_sqdist,
    surface_distance,
)
from pmanifold.numerics import orthonormal_columns, seeded_rng


def random_instances(n, seed=0, d_max=20, D_max=50):
    rng = seeded_rng(seed)
    out = []
    for _ in range(n):
        D = int(rng.integers(1, D_max + 1))
        d = int(rng.integers(1, min(d_max, D) + 1))
        v = orthonormal_columns(rng, D, d)
        r = rng.uniform(0.5, 5.0, d)
        c = rng.random(D)
        scale = rng.choice([0.3, 1.0, 2.0])
        p = c + v @ (r * rng.standard_normal(d) * scale / math.sqrt(d))
        if rng.random() < 0.5:
            p = p + 0.5 * rng.standard_normal(D)
        out.append((p, EllipsoidSpec(c, v, r)))
    return out


def test_make_ellipsoid_square_basis_orthogonal():
    e = make_ellipsoid(3, 3, seed=4)
    np.testing.assert_allclose(e.basis.T @ e.basis, np.eye(3), atol=1e-12)


def test_make_ellipsoid_deterministic():
    a, b = make_ellipsoid(20, 5, seed=9), make_ellipsoid(20, 5, seed=9)
    assert np.array_equal(a.basis, b.basis) and np.array_equal(a.radii, b.radii)


def test_make_ellipsoid_rejects_d_above_D():
    with pytest.raises(InvalidInputError):
        make_ellipsoid(3, 4)


def test_mean_radius_of_large_draw():
    assert make_ellipsoid(3072, 100, seed=1).radii.mean() == pytest.approx(18, abs=1.5)


def test_effective_radius_values():
    assert effective_radius([2.0, 2.0, 2.0]) == pytest.approx(2.0)
    assert effective_radius([3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    r = seeded_rng(2).uniform(6, 30, 1000)
    assert effective_radius(r) == pytest.approx(math.sqrt(372), abs=0.3)
    with pytest.raises(InvalidInputError):
        effective_radius([])


def test_sphere_distance():
    e = EllipsoidSpec(np.zeros(3), np.eye(3), [2.0, 2.0, 2.0])
    assert boundary_distance([5.0, 0, 0], e) == pytest.approx(3.0)
    assert boundary_distance([0.5, 0, 0], e) == pytest.approx(1.5)


def test_ellipse_on_axis():
    d, inside = surface_distance(np.array([3.0, 0.0]), np.array([2.0, 1.0]))
    assert d == pytest.approx(1.0) and not inside


def test_ellipse_center_goes_to_short_axis():
    assert surface_distance(np.zeros(2), np.array([2.0, 1.0]))[0] == pytest.approx(1.0)


def test_interior_degenerate_case_closed_form():
    # point on the long axis, inside the evolute: nearest point off-axis
    r = np.array([2.0, 1.0])
    y0 = np.array([0.5, 0.0])
    x = r[0] ** 2 * y0[0] / (r[0] ** 2 - r[1] ** 2)
    y = r[1] * math.sqrt(1 - (x / r[0]) ** 2)
    assert surface_distance(y0, r)[0] == pytest.approx(math.hypot(x - y0[0], y), rel=1e-10)


def test_distance_matches_projected_gradient_oracle():
    inst = random_instances(120, seed=11)
    ref = ellipsoid_surface_oracle(
        [p for p, _ in inst], [e.center for _, e in inst], [e.basis for _, e in inst], [e.radii for _, e in inst]
    )
    got = np.array([boundary_distance(p, e) for p, e in inst])
    assert np.max(np.abs(got - ref)) < 1e-5


@given(st.integers(0, 10_000))
def test_surface_points_have_zero_distance(seed):
    rng = seeded_rng(seed)
    d = int(rng.integers(1, 6))
    r = rng.uniform(0.5, 4, d)
    s = rng.standard_normal(d)
    s /= np.linalg.norm(s)
    v = orthonormal_columns(rng, d + 2, d)
    c = rng.random(d + 2)
    e = EllipsoidSpec(c, v, r)
    assert boundary_distance(c + v @ (r * s), e) < 1e-8


@given(st.integers(0, 10_000))
def test_rigid_motion_invariance(seed):
    (p, e), = random_instances(1, seed=seed, d_max=6, D_max=8)
    rng = seeded_rng(seed + 1)
    q = orthonormal_columns(rng, p.size, p.size)
    t = rng.standard_normal(p.size)
    moved = EllipsoidSpec(q @ e.center + t, q @ e.basis, e.radii)
    assert boundary_distance(q @ p + t, moved) == pytest.approx(boundary_distance(p, e), rel=1e-7, abs=1e-9)


@given(st.integers(0, 10_000))
def test_exterior_points_boundary_equals_filled(seed):
    (p, e), = random_instances(1, seed=seed, d_max=6, D_max=8)
    b, f = ellipsoid_distances(p, e)
    y0 = e.basis.T @ (p - e.center)
    if np.sum((y0 / e.radii) ** 2) > 1:
        assert b == f
    else:
        assert f <= b


def test_analytic_full_dim_large_radii_is_zero():
    assert analytic_expected_sqdist(60, 60, np.full(60, 10.0)) == 0.0


def test_analytic_one_dim_tiny_radius():
    assert analytic_expected_sqdist(3072, 1, [1e-6]) == pytest.approx(3071 / 6 + (math.sqrt(1 / 6) - 1e-6) ** 2)
    assert analytic_expected_sqdist(3072, 1, [1e-6]) == pytest.approx(512, abs=0.5)


@pytest.mark.parametrize("seed", range(3))
def test_analytic_d500(seed):
    e = make_ellipsoid(3072, 500, seed=seed)
    assert analytic_expected_sqdist(3072, 500, e.radii) == pytest.approx(430, abs=3)


def test_monte_carlo_low_d_perpendicular_regime():
    r = monte_carlo_expected_sqdist(600, 20, n_points=200, seed=0)
    assert r.filled.mean_sq_dist == pytest.approx((600 - 20) / 6, rel=0.05)
    assert r.boundary.mean_sq_dist >= r.filled.mean_sq_dist


def test_monte_carlo_decreases_with_d():
    means = [monte_carlo_expected_sqdist(300, d, n_points=100, seed=2) for d in (10, 100, 200)]
    for a, b in zip(means, means[1:]):
        slack = 2 * math.hypot(a.filled.sigma_of_mean, b.filled.sigma_of_mean)
        assert b.filled.mean_sq_dist < a.filled.mean_sq_dist + slack


def test_monte_carlo_deterministic():
    a = monte_carlo_expected_sqdist(50, 5, n_points=20, seed=3)
    b = monte_carlo_expected_sqdist(50, 5, n_points=20, seed=3)
    assert a == b


def test_ellipsoid_d_grid_endpoints():
    g = ellipsoid_d_grid(3072)
    assert g[0] == 1 and g[-1] == 3072 and len(g) == 12 and g == sorted(set(g))
