"""Blow-ups, best k-homogeneous approximants, and the L^2 homogeneity deficit.

A k-homogeneous map about 0 with invariant plane V is a function of the
direction of the component of z orthogonal to V.  Write z = t w + v with
w a unit vector of V^perp, t > 0 and v in V.  Lebesgue measure splits as
``t^(m-k-1) dt dw dv``, so the L^2-best sphere-valued approximant is
``h(w) = normalize(integral over the fiber of f, weight t^(m-k-1))``.

The evaluation lattice is built fiber by fiber: directions w on S(V^perp)
(scrambled Sobol points mapped to the sphere), and on each fiber the
points ``rho (cos(phi) w + sin(phi) sigma)`` with sigma a unit vector in V,
midpoint radii rho and midpoint angles phi.  Weights are
``rho^(m-1) cos(phi)^(m-k-1) sin(phi)^(k-1)`` normalized to sum one, so
lattice means approximate averages over B_1.  For k = 0 the fibers are rays
and the lattice is the plain polar design.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import norm, qmc

from .grid import SphereField, sample

DIRECTIONS = 512
RADII = 32
ANGLES = 8
SIGMAS = 8
SEARCH_BUDGET = 12
MOMENT_DIRECTIONS = 64
MOMENT_RADII = 8


@lru_cache(maxsize=None)
def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` low-discrepancy unit vectors in R^dim (scrambled Sobol, inverse-normal map)."""
    if dim == 1:
        base = np.array([[1.0], [-1.0]])
        return np.resize(base, (count, 1)) if count != 2 else base
    u = qmc.Sobol(dim, scramble=True, seed=seed).random(count)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    out = g / np.linalg.norm(g, axis=1, keepdims=True)
    out.setflags(write=False)
    return out


def _midpoints(n):
    return (np.arange(n) + 0.5) / n


@dataclass(frozen=True)
class LatticeSpec:
    """Sizes of the evaluation lattice."""

    directions: int = DIRECTIONS
    radii: int = RADII
    angles: int = ANGLES
    sigmas: int = SIGMAS
    seed: int = 0

    @classmethod
    def coarse(cls, seed: int = 0):
        return cls(directions=64, radii=8, angles=4, sigmas=4, seed=seed)


@lru_cache(maxsize=64)
def _fiber_template(m: int, k: int, spec: LatticeSpec):
    """Lattice in the frame where V = span(e_1..e_k): coordinates ``(n_dir, n_fib, m)`` and weights."""
    rho = _midpoints(spec.radii)
    if k == 0:
        W = sphere_points(m, spec.directions, spec.seed)
        pts = rho[None, :, None] * W[:, None, :]
        w = np.broadcast_to(rho ** (m - 1), pts.shape[:2]).copy()
    elif k == m:
        dirs = sphere_points(m, spec.directions, spec.seed)
        pts = (rho[None, :, None] * dirs[:, None, :]).reshape(1, -1, m)
        w = np.broadcast_to(rho ** (m - 1), (spec.directions, spec.radii)).reshape(1, -1).copy()
    else:
        W = sphere_points(m - k, spec.directions if m - k > 1 else 2, spec.seed)
        S = sphere_points(k, spec.sigmas if k > 1 else 2, spec.seed + 1)
        phi = 0.5 * np.pi * _midpoints(spec.angles)
        # fiber offsets: (rho, phi, sigma) -> t = rho cos phi along w, v = rho sin phi sigma in V
        t = (rho[:, None] * np.cos(phi)[None, :]).reshape(-1)
        s = (rho[:, None] * np.sin(phi)[None, :]).reshape(-1)
        wt = (rho[:, None] ** (m - 1) * np.cos(phi)[None, :] ** (m - k - 1)
              * np.sin(phi)[None, :] ** (k - 1)).reshape(-1)
        nd, ns, nf = W.shape[0], S.shape[0], t.size
        pts = np.zeros((nd, nf, ns, m))
        pts[..., k:] = t[None, :, None, None] * W[:, None, None, :]
        pts[..., :k] = s[None, :, None, None] * S[None, None, :, :]
        pts = pts.reshape(nd, nf * ns, m)
        w = np.broadcast_to(np.repeat(wt, ns), (nd, nf * ns)).copy()
    w = w / w.sum()
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def lattice(m: int, k: int, basis: np.ndarray, spec: LatticeSpec = LatticeSpec()):
    """Lattice points in B_1 adapted to the plane spanned by the first k columns of ``basis``.

    ``basis`` is an orthonormal ``m x m`` matrix; returns ``(points, weights)``
    with shapes ``(n_fibers, n_per_fiber, m)`` and ``(n_fibers, n_per_fiber)``.
    """
    pts, w = _fiber_template(m, k, spec)
    return pts @ np.asarray(basis).T, w


def rescale(field_: SphereField, x, r: float, points: np.ndarray) -> np.ndarray:
    """``f(x + r z)`` at lattice points ``z`` (shape ``(..., m)``), renormalized."""
    d = field_.domain
    x = np.asarray(x, dtype=float)
    if not d.contains_ball(x, r):
        raise ValueError("ball B_r(x) not contained in domain")
    return sample(field_, x + r * np.asarray(points), renorm=True)


def polar_rescale(field_: SphereField, x, r: float, spec: LatticeSpec = LatticeSpec()):
    """Blow-up ``T_{x,r} f`` on the polar design; returns ``(values, points, weights)``."""
    pts, w = lattice(field_.domain.dim, 0, np.eye(field_.domain.dim), spec)
    return rescale(field_, x, r, pts), pts, w


def sphere_mean(values: np.ndarray, weights: np.ndarray, axis=-2) -> np.ndarray:
    """Normalized weighted mean along ``axis``; a zero mean maps to e_1."""
    s = np.sum(values * weights[..., None], axis=axis)
    n = np.linalg.norm(s, axis=-1, keepdims=True)
    out = np.zeros_like(s)
    out[..., 0] = 1.0
    np.divide(s, n, out=out, where=n > 0)
    return out


def moment_matrix(field_: SphereField, x, r: float, spec: LatticeSpec | None = None) -> np.ndarray:
    """``M = mean over B_r(x) of grad f^T grad f`` from centered differences of the interpolant."""
    d = field_.domain
    m, h = d.dim, d.h
    if spec is None:
        spec = LatticeSpec(directions=MOMENT_DIRECTIONS, radii=MOMENT_RADII)
    pts, w = lattice(m, 0, np.eye(m), spec)
    y = np.asarray(x, dtype=float) + r * pts.reshape(-1, m)
    # keep the difference stencil inside the box
    lo, hi = d.lower + h, d.upper - h
    y = np.clip(y, lo, hi)
    grads = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        grads.append((sample(field_, y + e) - sample(field_, y - e)) / (2 * h))
    G = np.stack(grads, axis=1)  # (P, m, C)
    return np.einsum("p,pic,pjc->ij", w.reshape(-1), G, G)


@dataclass(frozen=True)
class HomogeneousFit:
    k: int
    plane: np.ndarray  # (k, m) orthonormal rows
    deficit: float
    values: np.ndarray  # approximant per fiber direction, (n_fibers, n+1)
    directions: np.ndarray  # fiber directions in ambient coordinates, (n_fibers, m)
    evaluations: int


def _deficit_for_basis(field_, x, r, k, Q, spec):
    m = field_.domain.dim
    pts, w = lattice(m, k, Q, spec)
    T = rescale(field_, x, r, pts)
    hv = sphere_mean(T, w)
    dev = T - hv[:, None, :]
    return float(np.sum(w * np.einsum("abc,abc->ab", dev, dev))), hv, pts


def _complete_basis(V: np.ndarray, m: int) -> np.ndarray:
    """Orthonormal ``m x m`` matrix whose first columns span the rows of ``V``."""
    k = V.shape[0]
    if k == 0:
        return np.eye(m)
    A = np.concatenate([V.T, np.eye(m)], axis=1)
    Q, _ = np.linalg.qr(A)
    Q = Q[:, :m]
    # fix signs so the first k columns equal V exactly
    Q[:, :k] = V.T
    Q, _ = np.linalg.qr(Q)
    signs = np.sign(np.einsum("ij,ij->j", Q[:, :k], V.T))
    Q[:, :k] *= np.where(signs == 0, 1.0, signs)
    return Q


def fit_homogeneous(field_: SphereField, x, r: float, k: int, spec: LatticeSpec = LatticeSpec(),
                    budget: int = SEARCH_BUDGET, seed: int = 0, plane=None, moment=None) -> HomogeneousFit:
    """Best k-homogeneous approximant of the blow-up ``T_{x,r} f`` and its deficit.

    The plane starts from the k smallest eigenvectors of the gradient second
    moment (or ``plane`` if given) and is refined by accepting Givens
    rotations between V and V^perp that lower the deficit, within ``budget``
    deficit evaluations.  ``moment`` may pass a precomputed
    ``moment_matrix(field_, x, r)``.  Identical inputs give bitwise identical output.
    """
    m = field_.domain.dim
    if not 0 <= k <= m:
        raise ValueError(f"k must lie in 0..{m}")
    if not field_.domain.contains_ball(np.asarray(x, dtype=float), r):
        raise ValueError("ball B_r(x) not contained in domain")
    if plane is not None:
        V = np.atleast_2d(np.asarray(plane, dtype=float))[:k]
    elif 0 < k < m:
        M = moment_matrix(field_, x, r) if moment is None else moment
        _, vecs = np.linalg.eigh(M)
        V = vecs[:, :k].T
    else:
        V = np.eye(m)[:k]
    Q = _complete_basis(V, m)
    best, hv, pts = _deficit_for_basis(field_, x, r, k, Q, spec)
    evals = 1
    if 0 < k < m and budget > 1:
        rng = np.random.default_rng(seed)
        pairs = [(i, j) for i in range(k) for j in range(k, m)]
        order = rng.permutation(len(pairs))
        angle = 0.1
        while evals < budget and angle > 1e-4:
            improved = False
            for idx in order:
                i, j = pairs[idx]
                for sgn in (1.0, -1.0):
                    if evals >= budget:
                        break
                    c, s = np.cos(sgn * angle), np.sin(sgn * angle)
                    Qn = Q.copy()
                    Qn[:, i] = c * Q[:, i] + s * Q[:, j]
                    Qn[:, j] = -s * Q[:, i] + c * Q[:, j]
                    val, hvn, ptsn = _deficit_for_basis(field_, x, r, k, Qn, spec)
                    evals += 1
                    if val < best:
                        best, hv, pts, Q = val, hvn, ptsn, Qn
                        improved = True
                        break
                if evals >= budget:
                    break
            if not improved:
                angle *= 0.5
    if k == m:
        dirs = np.zeros((1, m))
    else:
        dirs = pts[:, 0, :] @ Q[:, k:] @ Q[:, k:].T
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return HomogeneousFit(k, Q[:, :k].T.copy(), best, hv, dirs, evals)


@dataclass(frozen=True)
class DeficitTable:
    center: tuple
    scales: tuple
    deficits: np.ndarray  # (n_scales, m + 1)
    raw: np.ndarray  # per-k fitted deficits before the nesting pass
    planes: tuple  # per (scale, k) plane actually attaining the table value

    def column(self, k):
        return self.deficits[:, k]


def deficit_table(field_: SphereField, x, scales, spec: LatticeSpec = LatticeSpec(),
                  budget: int = SEARCH_BUDGET, seed: int = 0, ks=None) -> DeficitTable:
    """``d_k(x, s)`` for every scale and every ``k`` in ``ks`` (default 0..m).

    A (k+1)-homogeneous map is also k-homogeneous, so the table stores
    ``d_k = min(fit_k, d_(k+1))``; the columns are then non-decreasing in k
    exactly.  Fitted values before this pass are kept in ``raw``.
    """
    m = field_.domain.dim
    ks = list(range(m + 1)) if ks is None else sorted(set(int(k) for k in ks))
    if any(not 0 <= k <= m for k in ks):
        raise ValueError(f"k must lie in 0..{m}")
    sc = tuple(float(s) for s in scales)
    if not sc:
        raise ValueError("empty scale ladder")
    D = np.full((len(sc), m + 1), np.nan)
    R = np.full((len(sc), m + 1), np.nan)
    planes = []
    for a, s in enumerate(sc):
        row_planes = [None] * (m + 1)
        upper = np.inf
        upper_plane = None
        M = moment_matrix(field_, x, s) if any(0 < k < m for k in ks) else None
        for k in sorted(ks, reverse=True):
            fit = fit_homogeneous(field_, x, s, k, spec, budget, seed, moment=M)
            R[a, k] = fit.deficit
            if fit.deficit <= upper:
                upper, upper_plane = fit.deficit, fit.plane
            D[a, k] = upper
            row_planes[k] = upper_plane
        planes.append(tuple(row_planes))
    return DeficitTable(tuple(np.asarray(x, dtype=float)), sc, D, R, tuple(planes))
