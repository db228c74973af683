"""Discrete extrinsic bienergy, its constrained first variation, and a descent solver.

The discrete energy is ``sum |Delta_h f|^2 h^m`` over every node where the
five-point-type Laplacian is defined (index distance >= 1 from the box
boundary).  Nodes within ``collar_width`` layers of the boundary are frozen.
With a collar of two layers the gradient of the energy at a free node is
exactly ``2 h^m Delta_h^2 f``, so the projected residual reported by
:func:`el_residual` is the true constrained gradient up to that factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from . import _kernels
from .grid import GridDomain, SphereField, normalize


class DescentAbort(FloatingPointError):
    """Raised when the energy or the search direction stops being finite."""


@dataclass(frozen=True)
class MinimizeConfig:
    max_iters: int = 5000
    step0: float | None = None  # None means h^4
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    el_tolerance: float = 1e-5
    collar_width: int = 2
    seed: int = 0
    method: str = "cg"  # "cg" (projected Polak-Ribiere) or "sd" (plain projected gradient)
    time_limit: float | None = None  # seconds; None for no limit

    def __post_init__(self):
        if self.collar_width < 2:
            raise ValueError("collar_width must be >= 2")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not 0 < self.armijo_c < 1 or not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_c and armijo_shrink must lie in (0, 1)")
        if not self.el_tolerance > 0:
            raise ValueError("el_tolerance must be positive")
        if self.step0 is not None and not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if self.method not in ("cg", "sd"):
            raise ValueError("method must be 'cg' or 'sd'")


@dataclass
class ConvergenceTrace:
    iteration: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    step: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    def record(self, it, e, s, r):
        self.iteration.append(int(it))
        self.energy.append(float(e))
        self.step.append(float(s))
        self.residual.append(float(r))

    def rows(self):
        return list(zip(self.iteration, self.energy, self.step, self.residual))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iteration,energy,step,residual\n")
            for it, e, s, r in self.rows():
                fh.write(f"{it},{e:.17g},{s:.17g},{r:.17g}\n")


def strides_of(domain: GridDomain) -> np.ndarray:
    n = domain.nodes_per_axis
    return np.array([n ** (domain.dim - 1 - i) for i in range(domain.dim)], dtype=np.int64)


def layer_nodes(domain: GridDomain, width: int) -> np.ndarray:
    """Flat indices of nodes at index distance >= ``width`` from the boundary."""
    return np.flatnonzero(domain.collar_mask(width))


def laplacian_field(field_: SphereField) -> tuple[np.ndarray, np.ndarray]:
    """``(Delta_h f, nodes)``: flat Laplacian, zero on the outer layer, and the nodes where it is defined."""
    d = field_.domain
    u = field_.flat()
    nodes = layer_nodes(d, 1)
    L = np.zeros_like(u)
    _kernels.laplacian_at(u, nodes, strides_of(d), 1.0 / d.h**2, L)
    return L, nodes


def energy(field_: SphereField, region=None) -> float:
    """Discrete bienergy ``sum |Delta_h f|^2 h^m``.

    ``region`` is an optional boolean mask of grid shape restricting the sum;
    nodes of the outer layer never contribute.
    """
    d = field_.domain
    L, nodes = laplacian_field(field_)
    sq = np.einsum("ij,ij->i", L, L)
    if region is not None:
        mask = np.asarray(region, dtype=bool).reshape(-1)
        sq = np.where(mask, sq, 0.0)
    return float(np.sum(sq[nodes]) * d.h**d.dim)


def el_residual(field_: SphereField, collar_width: int = 2) -> np.ndarray:
    """Norm of ``P_f(Delta_h^2 f)`` per node, zero within ``collar_width`` of the boundary."""
    if collar_width < 2:
        raise ValueError("collar_width must be >= 2")
    d = field_.domain
    u = field_.flat()
    L, _ = laplacian_field(field_)
    free = layer_nodes(d, collar_width)
    G = np.empty((free.size, u.shape[1]))
    _kernels.tangential_bilaplacian(u, L, free, strides_of(d), 1.0 / d.h**2, G)
    out = np.zeros(d.size)
    out[free] = np.linalg.norm(G, axis=1)
    return out.reshape(d.shape)


def with_collar(interior: SphereField, boundary: SphereField, collar_width: int = 2) -> SphereField:
    """``interior`` with its outer ``collar_width`` layers replaced by ``boundary``."""
    if interior.domain != boundary.domain:
        raise ValueError("fields live on different domains")
    keep = interior.domain.collar_mask(collar_width)
    v = np.where(keep[..., None], interior.values, boundary.values)
    return SphereField(interior.domain, v)


def random_start(boundary: SphereField, seed: int, amplitude: float | None = None,
                 collar_width: int = 2) -> SphereField:
    """Random initial field matching ``boundary`` on the collar.

    With ``amplitude`` None the interior is i.i.d. uniform on the sphere;
    otherwise it is ``normalize(boundary + amplitude * gaussian)``.
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(boundary.values.shape)
    if amplitude is None:
        inner = normalize(noise)
    else:
        inner = normalize(boundary.values + amplitude * noise)
    return with_collar(SphereField(boundary.domain, inner), boundary, collar_width)


def minimize(initial: SphereField, boundary: SphereField, cfg: MinimizeConfig = MinimizeConfig(),
             callback=None) -> tuple[SphereField, ConvergenceTrace]:
    """Projected descent on the discrete bienergy with the collar frozen to ``boundary``.

    Each trial point is ``normalize(f + s d)`` on the free nodes, where ``d``
    is tangent to ``f``.  The increment is formed in closed form and the
    energy change is evaluated as ``sum (2 L f + L delta) . L delta``, which
    keeps Armijo tests meaningful far below the roundoff level of the energy
    itself.  The recorded energy is the initial energy plus the accepted
    changes, so the trace is exactly non-increasing.
    """
    d = initial.domain
    if boundary.domain != d:
        raise ValueError("initial and boundary fields live on different domains")
    if initial.ncomp != boundary.ncomp:
        raise ValueError("initial and boundary fields have different target dimensions")
    collar = ~d.collar_mask(cfg.collar_width)
    if not np.array_equal(initial.values[collar], boundary.values[collar]):
        raise ValueError("initial field does not match boundary data on the collar")

    h = d.h
    hm = h**d.dim
    inv_h2 = 1.0 / h**2
    strides = strides_of(d)
    in1 = layer_nodes(d, 1)
    free = layer_nodes(d, cfg.collar_width)
    step = cfg.step0 if cfg.step0 is not None else h**4

    u = initial.flat().copy()
    spare = u.copy()
    Lu = np.zeros_like(u)
    _kernels.laplacian_at(u, in1, strides, inv_h2, Lu)
    delta = np.zeros_like(u)
    Ld = np.zeros_like(u)
    contrib = np.empty(in1.size)
    G = np.empty((free.size, u.shape[1]))

    E = float(np.einsum("ij,ij->", Lu[in1], Lu[in1]) * hm)
    if not np.isfinite(E):
        raise DescentAbort("non-finite initial energy")
    trace = ConvergenceTrace()
    t0 = perf_counter()
    G_prev = D_prev = None

    for it in range(cfg.max_iters + 1):
        _kernels.tangential_bilaplacian(u, Lu, free, strides, inv_h2, G)
        res = float(np.sqrt(np.max(np.einsum("ij,ij->i", G, G)))) if free.size else 0.0
        if not np.isfinite(res):
            raise DescentAbort(f"non-finite residual at iteration {it}")
        trace.record(it, E, step if it else 0.0, res)
        if callback is not None:
            callback(it, E, res)
        if res <= cfg.el_tolerance:
            trace.converged, trace.reason = True, "residual"
            break
        if it == cfg.max_iters:
            trace.reason = "max_iters"
            break
        if cfg.time_limit is not None and perf_counter() - t0 > cfg.time_limit:
            trace.reason = "time_limit"
            break

        # search direction, tangent at u
        if cfg.method == "cg" and G_prev is not None:
            uf = u[free]
            Dp = D_prev - np.einsum("ij,ij->i", D_prev, uf)[:, None] * uf
            Gp = G_prev - np.einsum("ij,ij->i", G_prev, uf)[:, None] * uf
            beta = max(0.0, float(np.vdot(G, G - Gp) / np.vdot(Gp, Gp)))
            D = beta * Dp - G
            if np.vdot(D, G) >= 0.0:
                D = -G
        else:
            D = -G
        slope = 2.0 * hm * float(np.vdot(D, G))

        s = 2.0 * step if it else step
        accepted = False
        while True:
            _kernels.retract_increment(u, D, s, free, delta)
            _kernels.laplacian_at(delta, in1, strides, inv_h2, Ld)
            _kernels.energy_change(Lu, Ld, in1, contrib)
            dE = float(np.sum(contrib) * hm)
            if not np.isfinite(dE):
                raise DescentAbort(f"non-finite energy in line search at iteration {it}")
            if dE <= cfg.armijo_c * s * slope and dE <= 0.0:
                accepted = True
                break
            s *= cfg.armijo_shrink
            if s * np.sqrt(np.max(np.einsum("ij,ij->i", D, D))) < 1e-17:
                break
        if not accepted:
            if D_prev is not None and cfg.method == "cg":
                # retry once from steepest descent before giving up
                G_prev = D_prev = None
                step = max(step, cfg.step0 if cfg.step0 is not None else h**4)
                continue
            trace.reason = "line_search"
            break

        # double-buffered update: the retraction keeps |u| = 1 up to roundoff
        spare[:] = u
        spare[free] += delta[free]
        u, spare = spare, u
        _kernels.laplacian_at(u, in1, strides, inv_h2, Lu)
        E += dE
        step = s
        G_prev, D_prev = G.copy(), D

    return SphereField(d, u.reshape(d.shape + (u.shape[1],))), trace
