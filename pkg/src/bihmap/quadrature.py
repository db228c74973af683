"""Ball and sphere quadrature on uniform grids with partial-volume weights.

Each node owns the cube of side ``h`` centered on it.  Its weight for a ball
is the fraction of that cube inside the ball, estimated from a 3-point
midpoint lattice per axis (``3^m`` subcell points).  Cubes that are
entirely inside or outside the ball are classified exactly from their
nearest and farthest corners, so only the boundary layer is subsampled.
"""

from __future__ import annotations

from math import gamma, pi

import numpy as np

from .grid import GridDomain

SUBCELL = np.array([-1.0, 0.0, 1.0]) / 3.0
_CHUNK = 1 << 14


def sphere_area(m: int) -> float:
    """Area of the unit sphere S^(m-1) in R^m."""
    return 2.0 * pi ** (m / 2) / gamma(m / 2)


def ball_volume(m: int, r: float = 1.0) -> float:
    return sphere_area(m) * r**m / m


def _axis_offsets(domain: GridDomain, center, box):
    c = np.asarray(center, dtype=float)
    return [domain.axis(i)[box[i]] - c[i] for i in range(domain.dim)]


def ball_weights(domain: GridDomain, center, radius: float, box=None) -> tuple[tuple[slice, ...], np.ndarray]:
    """Partial-volume weights of all nodes in ``box`` for the closed ball ``B_radius(center)``.

    Returns ``(box, weights)``; ``box`` defaults to the smallest index box
    covering every cell that meets the ball.
    """
    h = domain.h
    if box is None:
        box = domain.index_box(center, radius + 0.5 * h)
    deltas = _axis_offsets(domain, center, box)
    r2 = radius * radius
    # nearest/farthest squared distance per axis of each cell from the center
    near = [np.maximum(np.abs(dl) - 0.5 * h, 0.0) ** 2 for dl in deltas]
    far = [(np.abs(dl) + 0.5 * h) ** 2 for dl in deltas]
    sub = [(dl[:, None] + h * SUBCELL[None, :]) ** 2 for dl in deltas]
    shape = tuple(len(dl) for dl in deltas)

    def outer_sum(parts):
        acc = parts[0]
        for p in parts[1:]:
            acc = np.add.outer(acc, p)
        return acc

    dmin = outer_sum(near)
    dmax = outer_sum(far)
    w = np.zeros(shape)
    w[dmax <= r2] = 1.0
    partial = np.nonzero((dmin <= r2) & (dmax > r2))
    if partial[0].size:
        w[partial] = _subcell_fraction(sub, partial, r2)
    return box, w


def _subcell_fraction(sub, partial, r2):
    n = partial[0].size
    m = len(sub)
    out = np.empty(n)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        acc = sub[0][partial[0][lo:hi]]
        for i in range(1, m):
            acc = (acc[:, :, None] + sub[i][partial[i][lo:hi]][:, None, :]).reshape(hi - lo, -1)
        out[lo:hi] = np.count_nonzero(acc <= r2, axis=1) / acc.shape[1]
    return out


def _check_ball(domain, center, radius):
    if radius < 2.0 * domain.h * (1 - 1e-12):
        raise ValueError("radius must be at least 2h")
    if not domain.contains_ball(center, radius):
        raise ValueError("ball not contained in domain")


def ball_integral(g: np.ndarray, domain: GridDomain, center, radius: float) -> float:
    """Integral of the scalar grid function ``g`` over ``B_radius(center)``."""
    _check_ball(domain, center, radius)
    box, w = ball_weights(domain, center, radius)
    return float(np.sum(np.asarray(g)[box] * w) * domain.h**domain.dim)


def shell_weights(domain: GridDomain, center, radius: float, box=None):
    """Weights approximating surface measure on ``dB_radius(center)`` by shell differencing."""
    h = domain.h
    if box is None:
        box = domain.index_box(center, radius + h)
    _, w_out = ball_weights(domain, center, radius + 0.5 * h, box)
    _, w_in = ball_weights(domain, center, radius - 0.5 * h, box)
    return box, (w_out - w_in) / h


def shell_integral(g: np.ndarray, domain: GridDomain, center, radius: float) -> float:
    """Integral of ``g`` over the sphere ``dB_radius(center)`` (shell differencing)."""
    _check_ball(domain, center, radius)
    if not domain.contains_ball(center, radius + 0.5 * domain.h):
        raise ValueError("ball not contained in domain")
    box, w = shell_weights(domain, center, radius)
    return float(np.sum(np.asarray(g)[box] * w) * domain.h**domain.dim)
