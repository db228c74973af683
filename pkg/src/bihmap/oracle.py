"""Closed-form test maps with exact jets and exact densities.

Kinds
-----
radial_projection
    ``x / |x|`` from R^m to S^(m-1).
cylindrical_projection
    ``x' / |x'|`` where ``x'`` keeps the first ``m - j`` coordinates; the
    last ``j`` axes are suppressed.  Target S^(m-j-1).
constant
    A fixed unit vector ``c``.
geodesic_wrap
    ``(cos(a x_1), sin(a x_1), 0, ..., 0)`` into S^n.
planted_multi
    Radial projections about several centers glued to a constant by the C^4
    bump ``(1 - |x - c_i|^2/rho^2)^5``.  Values live in S^m: at center ``c_i``
    the tangent map is ``((x - c_i)/|x - c_i|, 0)``, outside all blend balls
    the map is ``e_(m+1)``.
    The unnormalized blend never vanishes, so the only singular points are
    the centers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin

import numpy as np
from scipy import integrate

from . import taylor as ts
from .grid import GridDomain, SphereField
from .quadrature import sphere_area
from .stencils import Jet

KINDS = ("radial_projection", "cylindrical_projection", "constant", "geodesic_wrap", "planted_multi")
SINGULAR_TOL = 1e-14

BUMP_POWER = 5  # (1 - r^2/rho^2)^5 is C^4 across r = rho


class SingularLocusError(ValueError):
    """Evaluation requested on the singular locus of a projection map."""


def bump(r, rho):
    """``(1 - r^2/rho^2)^5`` inside the ball, 0 outside: C^4, smooth inside, 1 only at the center."""
    s = np.clip((np.asarray(r, dtype=float) / rho) ** 2, 0.0, 1.0)
    return (1.0 - s) ** BUMP_POWER


def _bump_derivs(s, order):
    """Derivatives 0..order of ``g(s) = (1 - s)^5`` (0 for s >= 1) at a scalar ``s``."""
    out, c = [], 1.0
    for k in range(order + 1):
        out.append(c * (-1) ** k * (1.0 - s) ** (BUMP_POWER - k) if s < 1.0 else 0.0)
        c *= BUMP_POWER - k
    return out


@dataclass(frozen=True)
class OracleMap:
    kind: str
    dim: int
    target_dim: int | None = None
    axes: int = 1  # suppressed axes j of the cylindrical projection
    value: tuple = ()  # constant value c
    a: float = 1.0  # geodesic wrap frequency
    centers: tuple = ()  # planted_multi centers
    blend_radius: float = 0.15

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        m = self.dim
        if not 2 <= m <= 6:
            raise ValueError(f"unsupported dimension m={m}")
        expected = {
            "radial_projection": m - 1,
            "cylindrical_projection": m - self.axes - 1,
            "planted_multi": m,
        }.get(self.kind)
        if self.kind == "constant":
            c = np.asarray(self.value, dtype=float)
            if c.size == 0:
                n = self.target_dim if self.target_dim is not None else 1
                c = np.eye(n + 1)[0]
            if abs(np.linalg.norm(c) - 1.0) > 1e-12:
                raise ValueError("constant value must be a unit vector")
            object.__setattr__(self, "value", tuple(float(v) for v in c))
            expected = c.size - 1
        if self.kind == "geodesic_wrap" and expected is None:
            expected = self.target_dim if self.target_dim is not None else 1
        if self.kind == "cylindrical_projection" and not 1 <= self.axes <= m - 2:
            raise ValueError("cylindrical_projection needs 1 <= j <= m - 2")
        if self.target_dim is not None and self.target_dim != expected:
            raise ValueError(f"{self.kind} in m={m} requires n={expected}")
        if self.kind == "planted_multi":
            cs = tuple(tuple(float(v) for v in c) for c in self.centers)
            if not cs or any(len(c) != m for c in cs):
                raise ValueError("planted_multi needs at least one center of length m")
            if not self.blend_radius > 0:
                raise ValueError("blend_radius must be positive")
            C = np.array(cs)
            for i in range(len(cs)):
                for k in range(i):
                    if np.linalg.norm(C[i] - C[k]) <= 2 * self.blend_radius:
                        raise ValueError("planted centers closer than twice the blend radius")
            object.__setattr__(self, "centers", cs)
        if expected < 1:
            raise ValueError("target dimension must be >= 1")
        object.__setattr__(self, "target_dim", expected)

    @property
    def ncomp(self) -> int:
        return self.target_dim + 1

    # -- singular loci ---------------------------------------------------

    def singular_distance(self, x) -> np.ndarray:
        """Distance of each point to the singular locus (inf when there is none)."""
        p = np.asarray(x, dtype=float)
        if self.kind == "radial_projection":
            return np.linalg.norm(p, axis=-1)
        if self.kind == "cylindrical_projection":
            return np.linalg.norm(p[..., : self.dim - self.axes], axis=-1)
        if self.kind == "planted_multi":
            C = np.array(self.centers)
            dist = np.linalg.norm(p[..., None, :] - C, axis=-1)
            return dist.min(axis=-1)
        return np.full(p.shape[:-1], np.inf)

    def _check(self, x):
        if np.any(self.singular_distance(x) <= SINGULAR_TOL):
            raise SingularLocusError(f"{self.kind} evaluated on its singular locus")

    # -- values ------------------------------------------------------------

    def evaluate(self, x) -> np.ndarray:
        """Exact values at point(s) ``x`` of shape ``(..., m)``."""
        p = np.asarray(x, dtype=float)
        if p.shape[-1] != self.dim:
            raise ValueError("point dimension does not match the map")
        self._check(p)
        m = self.dim
        if self.kind == "radial_projection":
            return p / np.linalg.norm(p, axis=-1, keepdims=True)
        if self.kind == "cylindrical_projection":
            q = p[..., : m - self.axes]
            return q / np.linalg.norm(q, axis=-1, keepdims=True)
        if self.kind == "constant":
            return np.broadcast_to(np.array(self.value), p.shape[:-1] + (self.ncomp,)).copy()
        if self.kind == "geodesic_wrap":
            out = np.zeros(p.shape[:-1] + (self.ncomp,))
            out[..., 0] = np.cos(self.a * p[..., 0])
            out[..., 1] = np.sin(self.a * p[..., 0])
            return out
        # planted_multi
        v = np.zeros(p.shape[:-1] + (m + 1,))
        total = np.zeros(p.shape[:-1])
        for c in self.centers:
            y = p - np.asarray(c)
            r = np.linalg.norm(y, axis=-1)
            phi = self._bump(r)
            v[..., :m] += phi[..., None] * y / r[..., None]
            total += phi
        v[..., m] = 1.0 - total
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def _bump(self, r):
        return bump(r, self.blend_radius)

    # -- exact jets --------------------------------------------------------

    def series(self, x, order: int = 4) -> ts.Series:
        """Taylor series of the map about ``x`` truncated at ``order``."""
        x = np.asarray(x, dtype=float)
        self._check(x)
        m = self.dim
        X = ts.Series.point(m, order, x)
        if self.kind == "radial_projection":
            return ts.normalized(X)
        if self.kind == "cylindrical_projection":
            return ts.normalized(_slice(X, m - self.axes))
        if self.kind == "constant":
            return ts.Series.const(m, order, np.array(self.value))
        if self.kind == "geodesic_wrap":
            t = X[0] * self.a
            t0 = float(t.value)
            cd = [cos(t0), -sin(t0), -cos(t0), sin(t0), cos(t0)]
            sd = [sin(t0), cos(t0), -sin(t0), -cos(t0), sin(t0)]
            c_ = t.apply(cd[: order + 1])
            s_ = t.apply(sd[: order + 1])
            out = np.zeros(c_.c.shape + (self.ncomp,))
            out[:, 0] = c_.c
            out[:, 1] = s_.c
            return ts.Series(m, order, out)
        # planted_multi
        acc = ts.Series.const(m, order, np.zeros(m + 1))
        total = ts.Series.const(m, order, 0.0)
        rho = self.blend_radius
        for c in self.centers:
            Y = X - np.asarray(c)
            s = Y.dot(Y) * (1.0 / rho**2)
            phi = s.apply(_bump_derivs(float(s.value), order))
            unit = Y * ts.inv_sqrt(Y.dot(Y))
            pad = np.zeros(unit.c.shape[:-1] + (m + 1,))
            pad[..., :m] = unit.c
            acc = acc + ts.Series(m, order, pad) * phi
            total = total + phi
        last = np.zeros(total.c.shape + (m + 1,))
        last[..., m] = 1.0
        acc = acc + ts.Series(m, order, last) * (ts.Series.const(m, order, 1.0) - total)
        return ts.normalized(acc)

    def exact_jet(self, x, order: int = 4) -> Jet:
        if order not in (1, 2, 3, 4):
            raise ValueError("order must be in 1..4")
        S = self.series(x, order)
        return Jet(order, tuple(S.tensor(level) for level in range(1, order + 1)), False)

    # -- rasterization -------------------------------------------------------

    def rasterize(self, domain: GridDomain) -> SphereField:
        if domain.dim != self.dim:
            raise ValueError("domain dimension does not match the map")
        pts = domain.coords()
        if np.any(self.singular_distance(pts) <= SINGULAR_TOL):
            raise SingularLocusError("a grid node lies on the singular locus; offset the grid by h/2")
        return SphereField(domain, self.evaluate(pts))


def _slice(S: ts.Series, k: int) -> ts.Series:
    return ts.Series(S.m, S.degree, S.c[:, :k])


def radial(m: int) -> OracleMap:
    return OracleMap("radial_projection", m)


def cylindrical(m: int, j: int = 1) -> OracleMap:
    return OracleMap("cylindrical_projection", m, axes=j)


def constant(m: int, c) -> OracleMap:
    return OracleMap("constant", m, value=tuple(c))


def geodesic_wrap(m: int, a: float, n: int = 1) -> OracleMap:
    return OracleMap("geodesic_wrap", m, target_dim=n, a=a)


def planted_multi(m: int, centers, blend_radius: float = 0.15) -> OracleMap:
    return OracleMap("planted_multi", m, centers=tuple(map(tuple, centers)), blend_radius=blend_radius)


# -- exact densities -----------------------------------------------------------


def _radial_integral(g, r, m):
    """``int_{B_r} g(|y|) dy`` by adaptive 1-D quadrature."""
    val, _ = integrate.quad(lambda t: g(t) * t ** (m - 1), 0.0, r, epsabs=0.0, epsrel=1e-13, limit=200)
    return sphere_area(m) * val


def exact_theta(omap: OracleMap, center, r: float) -> float:
    """Monotone density by 1-D radial quadrature of closed-form integrands.

    Supported: constant maps anywhere, the radial projection about the
    origin (m >= 5 so the bulk term is finite), and the geodesic wrap
    anywhere (its integrands depend only on ``y - x`` and are polynomial in
    the first coordinate, which is averaged over spheres exactly).
    """
    m = omap.dim
    c = np.asarray(center, dtype=float)
    if not r > 0:
        raise ValueError("radius must be positive")
    om = sphere_area(m)
    if omap.kind == "constant":
        return 0.0
    if omap.kind == "radial_projection":
        if np.linalg.norm(c) != 0.0:
            raise ValueError("exact_theta for radial_projection needs center 0")
        if m <= 4:
            raise ValueError("bulk term diverges for m <= 4")
        bulk = _radial_integral(lambda t: (m - 1) ** 2 / t**4, r, m)
        # on the sphere |y| = r: X.grad|grad f|^2 = -2(m-1)/r^2, |grad f|^2 = (m-1)/r^2, X.f = 0
        bdry = (-2.0 * (m - 1) + 4.0 * (m - 1)) / r**2 * om * r ** (m - 1)
        return r ** (4 - m) * bulk + r ** (3 - m) * bdry
    if omap.kind == "geodesic_wrap":
        a = omap.a
        bulk = _radial_integral(lambda t: a**4, r, m)
        # |X.f|^2 = a^2 y_1^2 with mean r^2/m over the sphere
        bdry = (4.0 * a**2 - 4.0 * a**2 / m) * om * r ** (m - 1)
        return r ** (4 - m) * bulk + r ** (3 - m) * bdry
    raise ValueError(f"exact_theta unsupported for {omap.kind} about this center")


def exact_energy(omap: OracleMap, r: float) -> float:
    """``int_{B_r(0)} |Delta f|^2`` for the radial projection (m >= 5) or the wrap."""
    m = omap.dim
    if omap.kind == "radial_projection" and m >= 5:
        return _radial_integral(lambda t: (m - 1) ** 2 / t**4, r, m)
    if omap.kind == "geodesic_wrap":
        return _radial_integral(lambda t: omap.a**4, r, m)
    if omap.kind == "constant":
        return 0.0
    raise ValueError(f"exact_energy unsupported for {omap.kind}")
