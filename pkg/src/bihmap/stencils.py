"""Finite-difference stencils, derivative jets, and pointwise derivative norms.

Every derivative is a tensor product of one-dimensional second-order
stencils, one per axis, so mixed partials commute exactly and jets are
symmetric by construction.  Nodes closer to the boundary than the centered
stencil allows fall back to one-sided windows of ``order + 2`` points and
are reported as flagged.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .grid import SphereField
from . import _kernels

# Centered second-order stencils on unit spacing.
CENTRAL = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}
REACH = {0: 0, 1: 1, 2: 1, 3: 2, 4: 2}


def fd_weights(offsets, order: int) -> np.ndarray:
    """Weights w with sum_k w_k g(k) ~ g^(order)(0) for the given integer offsets."""
    off = np.asarray(offsets, dtype=float)
    n = len(off)
    A = np.vander(off, n, increasing=True).T
    b = np.zeros(n)
    b[order] = factorial(order)
    return np.linalg.solve(A, b)


@lru_cache(maxsize=None)
def axis_stencil(i: int, n: int, order: int) -> tuple[tuple[int, ...], tuple[float, ...], bool]:
    """Stencil for the ``order``-th derivative at index ``i`` of an axis with ``n`` nodes.

    Returns ``(offsets, weights, one_sided)`` on unit spacing.
    """
    r = REACH[order]
    if i - r >= 0 and i + r <= n - 1:
        off, w = CENTRAL[order]
        return off, w, False
    width = order + 2
    if n < width:
        raise ValueError(f"axis with {n} nodes is too short for order {order}")
    start = min(max(i - width // 2, 0), n - width)
    off = tuple(range(start - i, start - i + width))
    return off, tuple(fd_weights(off, order)), True


def multi_indices(m: int, order: int):
    """Multi-indices ``alpha`` (per-axis derivative counts) with ``|alpha| == order``."""
    out = []
    for combo in itertools.combinations_with_replacement(range(m), order):
        alpha = [0] * m
        for ax in combo:
            alpha[ax] += 1
        out.append(tuple(alpha))
    return out


def multiplicity(alpha) -> int:
    """Number of ordered index tuples sharing the multi-index ``alpha``."""
    out = factorial(sum(alpha))
    for a in alpha:
        out //= factorial(a)
    return out


def deriv(a: np.ndarray, axis: int, order: int, h: float) -> np.ndarray:
    """Derivative of ``a`` along ``axis``, centered inside and one-sided at the edges."""
    if order == 0:
        return a.copy()
    n = a.shape[axis]
    r = REACH[order]
    out = np.empty_like(a)
    off, w = CENTRAL[order]
    dst = [slice(None)] * a.ndim
    dst[axis] = slice(r, n - r)
    acc = None
    for k, wk in zip(off, w):
        src = [slice(None)] * a.ndim
        src[axis] = slice(r + k, n - r + k)
        term = wk * a[tuple(src)]
        acc = term if acc is None else acc + term
    out[tuple(dst)] = acc
    for i in list(range(r)) + list(range(n - r, n)):
        off_i, w_i, _ = axis_stencil(i, n, order)
        acc = 0.0
        for k, wk in zip(off_i, w_i):
            acc = acc + wk * np.take(a, i + k, axis=axis)
        idx = [slice(None)] * a.ndim
        idx[axis] = i
        out[tuple(idx)] = acc
    return out / h**order


def gradient(a: np.ndarray, h: float, ndim: int) -> list[np.ndarray]:
    return [deriv(a, i, 1, h) for i in range(ndim)]


def laplacian(a: np.ndarray, h: float, ndim: int) -> np.ndarray:
    out = deriv(a, 0, 2, h)
    for i in range(1, ndim):
        out += deriv(a, i, 2, h)
    return out


@dataclass(frozen=True)
class Jet:
    """Derivatives of orders 1..order at one node.

    ``tensors[l - 1]`` has shape ``(m,) * l + (n + 1,)``.
    """

    order: int
    tensors: tuple[np.ndarray, ...]
    one_sided: bool = False

    def norm(self, level: int) -> float:
        return float(np.sqrt(np.sum(self.tensors[level - 1] ** 2)))

    @property
    def laplacian(self) -> np.ndarray:
        hess = self.tensors[1]
        return np.einsum("ii...->...", hess)


def _node_derivative(values, index, alpha, h):
    n = values.shape[0]
    m = len(alpha)
    parts = [axis_stencil(int(index[i]), n, alpha[i]) for i in range(m)]
    flagged = any(p[2] for p in parts)
    acc = np.zeros(values.shape[-1])
    for combo in itertools.product(*[list(zip(p[0], p[1])) for p in parts]):
        wt = 1.0
        pos = []
        for i, (k, w) in enumerate(combo):
            wt *= w
            pos.append(int(index[i]) + k)
        acc += wt * values[tuple(pos)]
    return acc / h ** sum(alpha), flagged


def jet_at(field: SphereField, index, order: int) -> Jet:
    """Finite-difference jet of ``field`` at the node with multi-index ``index``."""
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be in 1..4")
    d = field.domain
    m = d.dim
    index = tuple(int(i) for i in index)
    flagged = False
    tensors = []
    for level in range(1, order + 1):
        T = np.zeros((m,) * level + (field.ncomp,))
        for alpha in multi_indices(m, level):
            vec, f = _node_derivative(field.values, index, alpha, d.h)
            flagged |= f
            axes = [ax for ax in range(m) for _ in range(alpha[ax])]
            for perm in set(itertools.permutations(axes)):
                T[perm] = vec
        tensors.append(T)
    return Jet(order, tuple(tensors), flagged)


@lru_cache(maxsize=None)
def _central_tables(m: int, order: int, npa: int):
    """Flattened central stencils for all multi-indices up to ``order`` on an ``npa^m`` grid."""
    strides = np.array([npa ** (m - 1 - i) for i in range(m)], dtype=np.int64)
    offs, wts, starts, levels, mult = [], [], [0], [], []
    for level in range(1, order + 1):
        for alpha in multi_indices(m, level):
            per_axis = [list(zip(*CENTRAL[a])) for a in alpha]
            for combo in itertools.product(*per_axis):
                lin = 0
                wt = 1.0
                for ax, (k, w) in enumerate(combo):
                    lin += k * strides[ax]
                    wt *= w
                if wt != 0.0:
                    offs.append(lin)
                    wts.append(wt)
            starts.append(len(offs))
            levels.append(level)
            mult.append(multiplicity(alpha))
    return (
        np.array(offs, dtype=np.int64),
        np.array(wts),
        np.array(starts, dtype=np.int64),
        np.array(levels, dtype=np.int64),
        np.array(mult, dtype=float),
    )


def jet_norms(field: SphereField, nodes, order: int = 4) -> np.ndarray:
    """Frobenius norms ``|nabla^l f|`` at the given flat node indices, shape ``(K, order)``.

    Uses centered stencils only; every node must lie at least two layers
    inside the grid.
    """
    d = field.domain
    nodes = np.asarray(nodes, dtype=np.int64)
    idx = np.stack(np.unravel_index(nodes, d.shape), axis=-1)
    reach = max(REACH[k] for k in range(1, order + 1))
    if np.any(idx < reach) or np.any(idx > d.nodes_per_axis - 1 - reach):
        raise ValueError("jet_norms needs nodes at least two layers from the boundary")
    offs, wts, starts, levels, mult = _central_tables(d.dim, order, d.nodes_per_axis)
    scale = np.array([d.h ** -lv for lv in levels])
    sq = _kernels.jet_sq_norms(
        field.flat(), nodes, offs, wts * 1.0, starts, levels, mult * scale**2, order
    )
    return np.sqrt(sq)
