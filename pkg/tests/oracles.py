"""Independent reference computations the library is checked against.

Nothing here imports the code under test, apart from plain data containers.
"""

import numpy as np


def naive_dft2(img):
    """Direct O(n^4) 2-D DFT."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    out = np.empty((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            out[u, v] = np.sum(img * np.exp(-2j * np.pi * (u * ys / h + v * xs / w)))
    return out


def ellipsoid_surface_oracle(points, centers, bases, radii, starts=12, iters=6000, seed=0):
    """Distance from each point to an ellipsoid surface by multistart projected gradient.

    The surface is parametrised as ``c + V (r * s)`` with ``s`` on the unit
    sphere; ``f(s) = |p - c - V(r*s)|^2`` is minimised by gradient steps
    followed by renormalisation of ``s``. Instances of different sizes are
    zero-padded into one batch. Returns the smallest distance over starts.
    """
    n = len(points)
    D = max(len(p) for p in points)
    d = max(len(r) for r in radii)
    P = np.zeros((n, D))
    C = np.zeros((n, D))
    V = np.zeros((n, D, d))
    R = np.zeros((n, d))
    for i in range(n):
        Di, di = len(points[i]), len(radii[i])
        P[i, :Di] = points[i]
        C[i, :Di] = centers[i]
        V[i, :Di, :di] = bases[i]
        R[i, :di] = radii[i]
    rng = np.random.default_rng(seed)
    z = P - C
    y0 = np.einsum("nDd,nD->nd", V, z)
    perp2 = np.einsum("nD,nD->n", z, z) - np.einsum("nd,nd->n", y0, y0)
    mask = R > 0
    # starts: the radial projection of y0, the axis tips, and random directions
    S = rng.standard_normal((n, starts, d))
    base = np.where(mask, y0 / np.where(mask, R, 1.0), 0.0)
    S[:, 0] = base + 1e-9 * mask
    S *= mask[:, None, :]
    S /= np.linalg.norm(S, axis=2, keepdims=True)
    rmax2 = (R.max(axis=1) ** 2)[:, None, None]
    eta = 0.45 / rmax2
    Y0 = y0[:, None, :]
    Rb = R[:, None, :]
    for _ in range(iters):
        g = Rb * (Rb * S - Y0)
        S = S - eta * g
        S /= np.linalg.norm(S, axis=2, keepdims=True)
    par2 = np.sum((Rb * S - Y0) ** 2, axis=2).min(axis=1)
    return np.sqrt(np.maximum(perp2, 0.0) + par2)
