"""Uniform grids on boxes in R^m and unit-vector fields sampled on them.

A :class:`SphereField` stores its values as an array of shape
``(N,) * m + (n + 1,)``; flattening the leading axes in C order gives the
row-major node ordering used by the binary ``BHF1`` file format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels

MAGIC = b"BHF1"
MIN_DIM, MAX_DIM = 2, 6
MIN_NODES = 8
UNIT_TOL = 1e-9
LOAD_TOL = 1e-6


class FieldFormatError(ValueError):
    """Raised when a field file or array violates the field invariants."""


@dataclass(frozen=True)
class GridDomain:
    """Axis-aligned box ``[origin - half_width, origin + half_width]^m``."""

    dim: int
    nodes_per_axis: int
    half_width: float
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        if not MIN_DIM <= self.dim <= MAX_DIM:
            raise FieldFormatError(f"unsupported dimension m={self.dim}")
        if self.nodes_per_axis < MIN_NODES:
            raise FieldFormatError(f"nodes_per_axis must be >= {MIN_NODES}")
        if not self.half_width > 0:
            raise FieldFormatError("half_width must be positive")
        origin = tuple(float(c) for c in self.origin) or (0.0,) * self.dim
        if len(origin) != self.dim:
            raise FieldFormatError("origin length does not match dimension")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "half_width", float(self.half_width))

    @classmethod
    def with_spacing(cls, dim, nodes_per_axis, h, origin=()):
        """Domain whose node spacing is exactly ``h``."""
        return cls(dim, nodes_per_axis, 0.5 * h * (nodes_per_axis - 1), origin)

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.nodes_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.nodes_per_axis**self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin) - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + self.half_width

    def axis(self, i: int) -> np.ndarray:
        """Node coordinates along axis ``i``."""
        return self.origin[i] - self.half_width + self.h * np.arange(self.nodes_per_axis)

    def node_coords(self, index) -> np.ndarray:
        """Coordinates of node(s) given integer multi-indices ``(..., m)``."""
        return self.lower + self.h * np.asarray(index, dtype=float)

    def coords(self) -> np.ndarray:
        """All node coordinates, shape ``shape + (m,)``. Memory heavy for large grids."""
        axes = [self.axis(i) for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        lo, hi = self.lower + margin, self.upper - margin
        eps = 1e-12 * max(1.0, self.half_width)
        return np.all((p >= lo - eps) & (p <= hi + eps), axis=-1)

    def contains_ball(self, center, radius: float) -> bool:
        return bool(self.contains(np.asarray(center, dtype=float), margin=radius))

    def boundary_distance(self, points) -> np.ndarray:
        """Chebyshev distance from each point to the box boundary (negative outside)."""
        p = np.asarray(points, dtype=float)
        return np.min(self.half_width - np.abs(p - np.asarray(self.origin)), axis=-1)

    def index_box(self, center, radius: float, halo: int = 0) -> tuple[slice, ...]:
        """Index slices of all nodes within ``radius`` (per axis) of ``center``, plus ``halo``."""
        c = np.asarray(center, dtype=float)
        lo = np.floor((c - radius - self.lower) / self.h - 1e-9).astype(int) - halo
        hi = np.ceil((c + radius - self.lower) / self.h + 1e-9).astype(int) + halo
        n = self.nodes_per_axis
        return tuple(slice(max(a, 0), min(b, n - 1) + 1) for a, b in zip(lo, hi))

    def collar_mask(self, width: int) -> np.ndarray:
        """Boolean mask of nodes at index distance >= ``width`` from the boundary."""
        n = self.nodes_per_axis
        i = np.arange(n)
        ok = (i >= width) & (i <= n - 1 - width)
        mask = ok
        for _ in range(self.dim - 1):
            mask = np.logical_and.outer(mask, ok)
        return mask


@dataclass(frozen=True)
class SphereField:
    """A map from grid nodes to the unit sphere S^n in R^(n+1)."""

    domain: GridDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        d = self.domain
        if v.ndim == 2 and v.shape[0] == d.size:
            v = v.reshape(d.shape + (v.shape[1],))
        if v.shape[:-1] != d.shape:
            raise FieldFormatError(
                f"values shape {v.shape} does not match grid {d.shape}"
            )
        if v.shape[-1] < 2:
            raise FieldFormatError("target dimension n must be >= 1")
        norms = np.linalg.norm(v, axis=-1)
        if not np.all(np.abs(norms - 1.0) <= UNIT_TOL):
            raise FieldFormatError("off-sphere value")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def target_dim(self) -> int:
        return self.values.shape[-1] - 1

    @property
    def ncomp(self) -> int:
        return self.values.shape[-1]

    def flat(self) -> np.ndarray:
        """Values as ``(nodes, n + 1)`` in row-major node order."""
        return self.values.reshape(-1, self.ncomp)

    def rotated(self, rotation) -> "SphereField":
        """Compose with an orthogonal map of the target space."""
        R = np.asarray(rotation, dtype=float)
        v = self.values @ R.T
        return SphereField(self.domain, normalize(v))


def normalize(v: np.ndarray) -> np.ndarray:
    """Nearest-point retraction onto the unit sphere (row-wise normalization)."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    out = np.empty_like(v)
    np.divide(v, n, out=out, where=n > 0)
    zero = (n == 0)[..., 0]
    if np.any(zero):
        out[zero] = 0.0
        out[zero, 0] = 1.0
    return out


def save_field(field: SphereField, path) -> None:
    d = field.domain
    header = MAGIC + struct.pack("<3I", d.dim, field.target_dim, d.nodes_per_axis)
    header += struct.pack(f"<{d.dim}d", *d.origin) + struct.pack("<d", d.half_width)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_field(path) -> SphereField:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise FieldFormatError("malformed header: bad magic")
    m, n, npa = struct.unpack_from("<3I", raw, 4)
    if not MIN_DIM <= m <= MAX_DIM:
        raise FieldFormatError(f"unsupported dimension m={m}")
    if n < 1 or npa < MIN_NODES:
        raise FieldFormatError("malformed header: bad target dimension or node count")
    off = 16
    need = off + 8 * (m + 1) + 8 * (n + 1) * npa**m
    if len(raw) != need:
        raise FieldFormatError(f"malformed header: expected {need} bytes, got {len(raw)}")
    origin = struct.unpack_from(f"<{m}d", raw, off)
    (half_width,) = struct.unpack_from("<d", raw, off + 8 * m)
    off += 8 * (m + 1)
    vals = np.frombuffer(raw, dtype="<f8", offset=off).astype(np.float64)
    vals = vals.reshape((npa,) * m + (n + 1,))
    norms = np.linalg.norm(vals, axis=-1)
    if np.any(np.abs(norms - 1.0) > LOAD_TOL):
        raise FieldFormatError("off-sphere value")
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        vals = vals / norms[..., None]
    return SphereField(GridDomain(m, npa, half_width, origin), vals)


def sample(field: SphereField, x, renorm: bool = False) -> np.ndarray:
    """Multilinear interpolation of the field at point(s) ``x`` of shape ``(..., m)``."""
    d = field.domain
    p = np.asarray(x, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, d.dim)
    if not np.all(d.contains(p)):
        raise ValueError("sample point outside the domain box")
    t = (p - d.lower) / d.h
    base = np.clip(np.floor(t).astype(np.int64), 0, d.nodes_per_axis - 2)
    frac = np.clip(t - base, 0.0, 1.0)
    strides = np.array([d.nodes_per_axis ** (d.dim - 1 - i) for i in range(d.dim)], dtype=np.int64)
    out = np.empty((p.shape[0], field.ncomp))
    _kernels.multilinear(field.flat(), base @ strides, frac, strides, out)
    if renorm:
        out = normalize(out)
    return out[0] if single else out.reshape(np.shape(x)[:-1] + (field.ncomp,))
