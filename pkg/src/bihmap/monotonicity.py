"""Monotone density and the two routes to the monotone difference W.

Route (a) differences the density, ``W = Theta(t) - Theta(s)``.  Route (b)
integrates the non-negative annulus integrand

    4 (|grad d_X f|^2 / |y - x|^(m-2) + (m - 2) |d_X f|^2 / |y - x|^m)

over ``B_t(x) minus B_s(x)``, with ``d_X g = sum_i (y_i - x_i) d_i g``.  Both
routes share the same pointwise integrands, computed once per center on a
sub-block of the grid by :class:`DensityEvaluator`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import SphereField
from .quadrature import ball_weights
from .stencils import deriv

DEFAULT_TOL_FRACTION = 0.01  # declared monotonicity tolerance as a fraction of Lambda


@dataclass(frozen=True)
class MonotoneDiff:
    center: tuple
    s: float
    t: float
    w_theta: float
    w_annulus: float
    inner_cutoff: float


@dataclass
class DensityProfile:
    center: tuple
    scales: list
    theta: list
    lambda_bound: float
    tolerance: float
    diffs: list = field(default_factory=list)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(np.asarray(self.theta))

    @property
    def max_violation(self) -> float:
        """Largest negative increment of theta along the ladder, as a non-negative number."""
        inc = self.increments
        return float(max(0.0, -inc.min())) if inc.size else 0.0

    @property
    def monotone(self) -> bool:
        return self.max_violation <= self.tolerance

    @property
    def within_bound(self) -> bool:
        return bool(np.all(np.asarray(self.theta) <= self.lambda_bound + self.tolerance))


class DensityEvaluator:
    """Pointwise density integrands of ``field`` about ``center`` out to ``rmax``.

    Arrays cover the index box of radius ``rmax + h`` plus a two-node halo
    so that every stencil used inside the outer shell is centered.
    """

    def __init__(self, field_: SphereField, center, rmax: float, annulus: bool = True):
        d = field_.domain
        self.field = field_
        self.domain = d
        self.center = np.asarray(center, dtype=float)
        if self.center.shape != (d.dim,):
            raise ValueError("center dimension does not match the field")
        self.rmax = float(rmax)
        h = d.h
        if self.rmax < 4 * h * (1 - 1e-12):
            raise ValueError("radius must be at least 4h")
        if not d.contains_ball(self.center, self.rmax + h):
            raise ValueError("ball B_(r+h)(x) not contained in domain")
        self.box = d.index_box(self.center, self.rmax + h, halo=2)
        m = d.dim
        rel = [d.axis(i)[self.box[i]] - self.center[i] for i in range(m)]
        shape = tuple(len(r) for r in rel)
        self._rel = [r.reshape([-1 if k == i else 1 for k in range(m)]) for i, r in enumerate(rel)]
        rho2 = np.zeros(shape)
        for r in self._rel:
            rho2 = rho2 + r * r
        self.rho2 = rho2
        lap2 = np.zeros(shape)
        grad2 = np.zeros(shape)
        dxf2 = np.zeros(shape)
        gdxf2 = np.zeros(shape) if annulus else None
        block = field_.values[self.box]
        for c in range(field_.ncomp):
            fc = np.ascontiguousarray(block[..., c])
            lap_c = np.zeros(shape)
            dx_c = np.zeros(shape)
            for i in range(m):
                d1 = deriv(fc, i, 1, h)
                grad2 += d1 * d1
                dx_c += self._rel[i] * d1
                lap_c += deriv(fc, i, 2, h)
            lap2 += lap_c * lap_c
            dxf2 += dx_c * dx_c
            if annulus:
                for i in range(m):
                    g = deriv(dx_c, i, 1, h)
                    gdxf2 += g * g
        dxgrad2 = np.zeros(shape)
        for i in range(m):
            dxgrad2 += self._rel[i] * deriv(grad2, i, 1, h)
        self.lap2 = lap2
        self.grad2 = grad2
        self.dxf2 = dxf2
        with np.errstate(divide="ignore", invalid="ignore"):
            self.boundary_integrand = dxgrad2 + 4.0 * grad2 - 4.0 * np.where(rho2 > 0, dxf2 / rho2, 0.0)
            if annulus:
                self.annulus_integrand = np.where(
                    rho2 > 0, gdxf2 / rho2 ** ((m - 2) / 2) + (m - 2) * dxf2 / rho2 ** (m / 2), 0.0
                )
            else:
                self.annulus_integrand = None
        self._wcache = {}

    def _weights(self, radius):
        key = round(radius / self.domain.h, 12)
        w = self._wcache.get(key)
        if w is None:
            _, w = ball_weights(self.domain, self.center, radius, self.box)
            self._wcache[key] = w
        return w

    def _check_radius(self, r):
        h = self.domain.h
        if r < 4 * h * (1 - 1e-12):
            raise ValueError("radius must be at least 4h")
        if r > self.rmax * (1 + 1e-12):
            raise ValueError("radius exceeds the evaluator range")

    def theta(self, r: float) -> float:
        self._check_radius(r)
        d = self.domain
        m, h = d.dim, d.h
        hm = h**m
        bulk = float(np.sum(self.lap2 * self._weights(r)) * hm)
        shell_w = (self._weights(r + 0.5 * h) - self._weights(r - 0.5 * h)) / h
        bdry = float(np.sum(self.boundary_integrand * shell_w) * hm)
        return r ** (4 - m) * bulk + r ** (3 - m) * bdry

    def annulus(self, s: float, t: float) -> tuple[float, float]:
        """``(4 * annulus integral over B_t minus B_max(s, 2h), cutoff)``."""
        if self.annulus_integrand is None:
            raise ValueError("evaluator built without annulus integrands")
        self._check_radius(t)
        d = self.domain
        cut = max(s, 2.0 * d.h)
        w = self._weights(t) - self._weights(cut)
        return 4.0 * float(np.sum(self.annulus_integrand * w) * d.h**d.dim), cut

    def monotone_diff(self, s: float, t: float) -> MonotoneDiff:
        if not s < t:
            raise ValueError("need s < t")
        self._check_radius(s)
        wa, cut = self.annulus(s, t)
        return MonotoneDiff(tuple(self.center), s, t, self.theta(t) - self.theta(s), wa, cut)


def theta(field_: SphereField, x, r: float) -> float:
    """Monotone density of ``field_`` at center ``x`` and radius ``r``."""
    return DensityEvaluator(field_, x, r, annulus=False).theta(r)


def monotone_diff(field_: SphereField, x, s: float, t: float) -> MonotoneDiff:
    if not 0 < s < t:
        raise ValueError("need 0 < s < t")
    return DensityEvaluator(field_, x, t).monotone_diff(s, t)


def density_profile(field_: SphereField, x, scales, lambda_bound: float | None = None,
                    tolerance: float | None = None) -> DensityProfile:
    """Theta over an ascending ladder of radii, with the two-route W of consecutive scales.

    Without ``lambda_bound`` the bound is the largest density on the ladder.
    The tolerance defaults to ``0.01 * lambda_bound``.
    """
    sc = [float(s) for s in scales]
    if not sc:
        raise ValueError("empty scale ladder")
    if any(b <= a for a, b in zip(sc, sc[1:])):
        raise ValueError("scale ladder must be strictly ascending")
    ev = DensityEvaluator(field_, x, sc[-1])
    th = [ev.theta(r) for r in sc]
    lam = max(th) if lambda_bound is None else float(lambda_bound)
    tol = DEFAULT_TOL_FRACTION * abs(lam) if tolerance is None else float(tolerance)
    diffs = []
    for s, t, ts, tt in zip(sc, sc[1:], th, th[1:]):
        wa, cut = ev.annulus(s, t)
        diffs.append(MonotoneDiff(tuple(ev.center), s, t, tt - ts, wa, cut))
    return DensityProfile(tuple(ev.center), sc, th, lam, tol, diffs)


def lambda_bound(field_: SphereField, centers, radius: float) -> float:
    """Largest density over ``centers`` at ``radius``; the H^2_Lambda constant in force."""
    return max(theta(field_, c, radius) for c in centers)
