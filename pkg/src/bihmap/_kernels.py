"""Compiled inner loops over flattened grids.

All kernels take values as ``(nodes, ncomp)`` arrays and neighbors as
linear offsets, so one implementation serves every dimension.  Loops run in
a fixed node order; reductions are left to numpy on per-node buffers.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def laplacian_at(u, nodes, strides, inv_h2, out):
    """``out[p] = Delta_h u[p]`` for every ``p`` in ``nodes`` (5-point-type stencil)."""
    C = u.shape[1]
    m2 = 2.0 * strides.shape[0]
    for t in range(nodes.shape[0]):
        p = nodes[t]
        for c in range(C):
            acc = 0.0
            for s in strides:
                acc += u[p + s, c] + u[p - s, c]
            out[p, c] = (acc - m2 * u[p, c]) * inv_h2


@nb.njit(cache=True)
def energy_change(Lu, Ld, nodes, contrib):
    """Per-node ``|Lu + Ld|^2 - |Lu|^2 = (2 Lu + Ld) . Ld`` without cancellation."""
    C = Lu.shape[1]
    for t in range(nodes.shape[0]):
        p = nodes[t]
        acc = 0.0
        for c in range(C):
            acc += (2.0 * Lu[p, c] + Ld[p, c]) * Ld[p, c]
        contrib[t] = acc


@nb.njit(cache=True)
def tangential_bilaplacian(u, L, nodes, strides, inv_h2, out):
    """``out[t] = P_u (Delta_h L)`` at ``nodes[t]``, with ``P_u g = g - (g.u) u / |u|^2``."""
    C = u.shape[1]
    m2 = 2.0 * strides.shape[0]
    g = np.empty(C)
    for t in range(nodes.shape[0]):
        p = nodes[t]
        dot = 0.0
        uu = 0.0
        for c in range(C):
            acc = 0.0
            for s in strides:
                acc += L[p + s, c] + L[p - s, c]
            g[c] = (acc - m2 * L[p, c]) * inv_h2
            dot += g[c] * u[p, c]
            uu += u[p, c] * u[p, c]
        dot /= uu
        for c in range(C):
            out[t, c] = g[c] - dot * u[p, c]


@nb.njit(cache=True)
def retract_increment(u, d, step, nodes, delta):
    """``delta[p] = |u| (u + step d_T) / |u + step d_T| - u`` on the free nodes.

    ``d_T`` is ``d[t]`` projected once more onto the tangent space at
    ``u[p]``.  The increment is formed in closed form, vanishes exactly at
    ``step = 0`` and keeps ``|u|``, so energy differences stay accurate when
    ``step * d`` is far below unit roundoff.
    """
    C = u.shape[1]
    dt = np.empty(C)
    for t in range(nodes.shape[0]):
        p = nodes[t]
        uu = 0.0
        du = 0.0
        for c in range(C):
            uu += u[p, c] * u[p, c]
            du += d[t, c] * u[p, c]
        du /= uu
        dd = 0.0
        for c in range(C):
            dt[c] = d[t, c] - du * u[p, c]
            dd += dt[c] * dt[c]
        q = step * step * dd / uu
        nrm = np.sqrt(1.0 + q)
        shrink = -q / (nrm * (1.0 + nrm))
        for c in range(C):
            delta[p, c] = step * dt[c] / nrm + shrink * u[p, c]


@nb.njit(cache=True)
def jet_sq_norms(u, nodes, offs, wts, starts, levels, coef, order):
    """Sum over multi-indices of ``coef * |sum_k w_k u[p + off_k]|^2`` grouped by level."""
    C = u.shape[1]
    K = nodes.shape[0]
    out = np.zeros((K, order))
    vec = np.empty(C)
    nalpha = levels.shape[0]
    for t in range(K):
        p = nodes[t]
        for a in range(nalpha):
            for c in range(C):
                vec[c] = 0.0
            for k in range(starts[a], starts[a + 1]):
                q = p + offs[k]
                w = wts[k]
                for c in range(C):
                    vec[c] += w * u[q, c]
            sq = 0.0
            for c in range(C):
                sq += vec[c] * vec[c]
            out[t, levels[a] - 1] += coef[a] * sq
    return out


@nb.njit(cache=True)
def multilinear(u, base, frac, strides, out):
    """``out[q] = sum over the 2^m cell corners of the multilinear weight times u[corner]``."""
    m = strides.shape[0]
    C = u.shape[1]
    for q in range(base.shape[0]):
        for c in range(C):
            out[q, c] = 0.0
        for corner in range(1 << m):
            w = 1.0
            lin = base[q]
            for i in range(m):
                if (corner >> (m - 1 - i)) & 1:
                    w *= frac[q, i]
                    lin += strides[i]
                else:
                    w *= 1.0 - frac[q, i]
            if w != 0.0:
                for c in range(C):
                    out[q, c] += w * u[lin, c]
