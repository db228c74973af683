"""Regularity scale, its derivative certificate, and the L^p functionals.

At a node y let ``J_l(y) = |nabla^l f(y)|`` (Frobenius norms of centered
finite-difference jets) and let ``rho*(y)`` be the positive root of

    rho J_1 + rho^2 J_2 + rho^3 J_3 + rho^4 J_4 = 1

(infinite when all J vanish).  The left side increases with rho, so a radius
rho is admissible at x exactly when ``rho <= rho*(y)`` for every node y with
``|x - y| < rho``.  The regularity scale is therefore

    r_f(x) = min(cap(x), min_y max(|x - y|, rho*(y))),

evaluated exactly rather than by bisection.  ``cap(x)`` is the distance from
x to the boundary of the interior collar (``collar`` layers of nodes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SphereField
from .stencils import jet_norms

COLLAR_LAYERS = 4
CERT_TOL = 0.05


def solve_scale(J: np.ndarray) -> np.ndarray:
    """Positive root of ``sum_l rho^l J[..., l-1] = 1`` per row; inf where every J is 0 or the root overflows."""
    J = np.asarray(J, dtype=float)
    L = J.shape[-1]
    powers = np.arange(1, L + 1)
    with np.errstate(divide="ignore", over="ignore"):
        bound = np.min(np.where(J > 0, J ** (-1.0 / powers), np.inf), axis=-1)
    rho = bound.copy()
    ok = np.isfinite(rho)
    # scaled root u = rho / bound in (0, 1]: coefficients (J_l^(1/l) bound)^l lie in [0, 1], no overflow
    c = (J[ok] ** (1.0 / powers) * bound[ok, None]) ** powers
    u = np.ones(int(ok.sum()))
    # Newton from the right converges monotonically for an increasing convex polynomial
    for _ in range(100):
        val = np.sum(c * u[:, None] ** powers, axis=-1) - 1.0
        der = np.sum(c * powers * u[:, None] ** (powers - 1), axis=-1)
        step = val / der
        u = u - step
        if np.all(np.abs(step) <= 1e-15 * u):
            break
    rho[ok] = u * bound[ok]
    return rho


@dataclass(frozen=True)
class RegScaleField:
    points: np.ndarray  # (K, m)
    r_f: np.ndarray
    cap: np.ndarray
    floor: float
    tol: float = CERT_TOL

    @property
    def floored(self) -> np.ndarray:
        return self.r_f < self.floor

    def to_csv(self, path):
        with open(path, "w") as fh:
            m = self.points.shape[1]
            fh.write(",".join([f"x{i}" for i in range(m)] + ["r_f", "cap", "floored"]) + "\n")
            for p, r, c, fl in zip(self.points, self.r_f, self.cap, self.floored):
                fh.write(",".join(f"{v:.17g}" for v in p) + f",{r:.17g},{c:.17g},{int(fl)}\n")


class RegScale:
    """Regularity-scale evaluator for one field, caching ``rho*`` at nodes on demand."""

    def __init__(self, field_: SphereField, collar: int = COLLAR_LAYERS):
        if collar < 2:
            raise ValueError("collar must be at least 2 layers (fourth-order stencils)")
        self.field = field_
        self.domain = field_.domain
        self.collar = collar
        self._rho = np.full(self.domain.size, np.nan)
        self._J = {}

    # -- node quantities ---------------------------------------------------

    def jets(self, nodes) -> np.ndarray:
        """``J_l`` at flat node indices, shape ``(K, 4)``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        return jet_norms(self.field, nodes, 4)

    def rho_star(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        todo = nodes[np.isnan(self._rho[nodes])]
        if todo.size:
            todo = np.unique(todo)
            for lo in range(0, todo.size, 1 << 16):
                chunk = todo[lo : lo + (1 << 16)]
                self._rho[chunk] = solve_scale(self.jets(chunk))
        return self._rho[nodes]

    def cap(self, x) -> np.ndarray:
        d = self.domain
        return d.boundary_distance(x) - self.collar * d.h

    def _nodes_within(self, x, radius):
        d = self.domain
        box = d.index_box(x, radius)
        grids = np.meshgrid(*[np.arange(s.start, s.stop) for s in box], indexing="ij")
        idx = np.stack([g.reshape(-1) for g in grids], axis=-1)
        pts = d.node_coords(idx)
        dist = np.linalg.norm(pts - x, axis=-1)
        keep = dist < radius
        lin = np.ravel_multi_index(tuple(idx[keep].T), d.shape)
        return lin, dist[keep]

    # -- regularity scale ----------------------------------------------------

    def reg_scale(self, x) -> float:
        x = np.asarray(x, dtype=float)
        d = self.domain
        cap = float(self.cap(x))
        if cap <= 0:
            raise ValueError("point outside the interior collar")
        # an upper bound from the nearest node shrinks the search ball
        near = np.clip(np.rint((x - d.lower) / d.h).astype(int), 0, d.nodes_per_axis - 1)
        y0 = d.node_coords(near)
        lin0 = np.ravel_multi_index(tuple(near), d.shape)
        bound = min(cap, max(float(np.linalg.norm(x - y0)), float(self.rho_star([lin0])[0])))
        lin, dist = self._nodes_within(x, bound)
        if lin.size == 0:
            return bound
        cand = np.maximum(dist, self.rho_star(lin))
        return float(min(bound, cand.min()))

    def field_at(self, points) -> RegScaleField:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.array([self.reg_scale(p) for p in pts])
        return RegScaleField(pts, r, self.cap(pts), 0.25 * self.domain.h)

    def certify(self, rs: RegScaleField, tol: float = CERT_TOL) -> np.ndarray:
        """Re-verify ``rho^l J_l(y) <= 1 + tol`` for all nodes y in the open ball ``B_rho(x)``."""
        ok = np.ones(len(rs.r_f), dtype=bool)
        for i, (x, r) in enumerate(zip(rs.points, rs.r_f)):
            if r <= 0:
                continue
            lin, _ = self._nodes_within(x, r)
            if lin.size == 0:
                continue
            J = self.jets(lin)
            scaled = J * r ** np.arange(1, 5)
            ok[i] = bool(np.all(scaled <= 1.0 + tol))
        return ok

    # -- bad set -------------------------------------------------------------

    def low_nodes(self, t: float, region=None) -> np.ndarray:
        """Flat indices of nodes with ``rho* <= t`` among ``region`` (default: all interior nodes)."""
        nodes = self._region_nodes(region)
        return nodes[self.rho_star(nodes) <= t]

    def _region_nodes(self, region):
        d = self.domain
        if region is None:
            return np.flatnonzero(d.collar_mask(self.collar))
        region = np.asarray(region)
        if region.dtype == bool:
            return np.flatnonzero(region.reshape(-1))
        return region.astype(np.int64)


@dataclass(frozen=True)
class LpResult:
    value: float
    p: float
    floor: float
    floored: int
    floor_contribution: float
    points: int


def region_nodes(domain, region) -> np.ndarray:
    region = np.asarray(region)
    if region.dtype == bool:
        return np.flatnonzero(region.reshape(-1))
    return region.astype(np.int64)


def lp_reciprocal(field_: SphereField, p: float, region, rs: RegScale | None = None) -> LpResult:
    """``h^m sum_x r_f(x)^(-p)`` over the nodes of ``region``, with r_f floored at h/4."""
    if p < 1:
        raise ValueError("p must be >= 1")
    d = field_.domain
    rs = RegScale(field_) if rs is None else rs
    nodes = region_nodes(d, region)
    pts = d.node_coords(np.stack(np.unravel_index(nodes, d.shape), axis=-1))
    r = np.array([rs.reg_scale(x) for x in pts])
    floor = 0.25 * d.h
    low = r < floor
    rr = np.maximum(r, floor)
    terms = rr ** (-p) * d.h**d.dim
    return LpResult(float(np.sum(terms)), p, floor, int(low.sum()), float(np.sum(terms[low])), int(nodes.size))


def lp_derivative_sum(field_: SphereField, p: float, region) -> float:
    """``h^m sum_x sum_l |nabla^l f(x)|^(p/l)`` over the nodes of ``region``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    d = field_.domain
    nodes = region_nodes(d, region)
    J = jet_norms(field_, nodes, 4)
    return float(np.sum(J ** (p / np.arange(1, 5))) * d.h**d.dim)


def derivative_terms(field_: SphereField, nodes, p: float) -> np.ndarray:
    """Pointwise ``sum_l |nabla^l f|^(p/l)`` at nodes."""
    J = jet_norms(field_, np.asarray(nodes, dtype=np.int64), 4)
    return np.sum(J ** (p / np.arange(1, 5)), axis=-1)


def pointwise_domination(field_: SphereField, nodes, p: float, rs: RegScale | None = None,
                         tol: float = CERT_TOL) -> np.ndarray:
    """Per node: ``sum_l |nabla^l f|^(p/l) <= 4 (1 + tol)^p r_f^(-p)``."""
    d = field_.domain
    rs = RegScale(field_) if rs is None else rs
    nodes = np.asarray(nodes, dtype=np.int64)
    pts = d.node_coords(np.stack(np.unravel_index(nodes, d.shape), axis=-1))
    r = np.array([rs.reg_scale(x) for x in pts])
    lhs = derivative_terms(field_, nodes, p)
    with np.errstate(divide="ignore"):
        rhs = 4.0 * (1.0 + tol) ** p * r ** (-p)
    return lhs <= rhs
