"""How far is a random point from a flat ellipsoid in high dimension?

Uniform points in [0,1]^D are compared with a d-dimensional ellipsoid whose
radii are drawn from U[6, 30]. When d is small almost all of the distance is
perpendicular to the ellipsoid, so the mean squared distance is about (D-d)/6.
Two distances are printed: to the ellipsoid surface and to the filled body.
"""

import sys

from pmanifold.geometry import analytic_expected_sqdist, make_ellipsoid, monte_carlo_expected_sqdist

D = int(sys.argv[1]) if len(sys.argv) > 1 else 768

print(f"D = {D}")
print(f"{'d':>6} {'theory':>10} {'surface':>10} {'filled':>10}")
for d in (1, 4, 16, 64, D // 4, D // 2, D):
    res = monte_carlo_expected_sqdist(D, d, (6.0, 30.0), n_points=100, seed=1)
    print(f"{d:>6} {res.analytic:>10.1f} {res.boundary.mean_sq_dist:>10.1f} {res.filled.mean_sq_dist:>10.1f}")

# a thin ellipsoid is far from a point whose projection lands inside it:
# the point must still travel to the surface within the subspace
e = make_ellipsoid(D, 1, seed=0)
print("\nradius of the 1-d ellipsoid:", round(float(e.radii[0]), 2))
print("theory at d=1 with these radii:", round(analytic_expected_sqdist(D, 1, e.radii), 1))
