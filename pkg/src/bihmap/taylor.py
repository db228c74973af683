"""Truncated multivariate Taylor arithmetic (degree <= 4) for exact jets.

A :class:`Series` holds the Taylor coefficients of a vector-valued function
about a point, one coefficient vector per monomial ``delta^alpha`` with
``|alpha| <= degree``.  Composition with a univariate function only needs its
derivatives at the base value, which is all the oracle maps require
(square roots, inverse powers, trig functions, polynomials).
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np

from .stencils import multi_indices


@lru_cache(maxsize=None)
def monomials(m: int, degree: int):
    """Monomials of total degree <= ``degree`` in ``m`` variables, graded order."""
    out = []
    for d in range(degree + 1):
        out.extend(multi_indices(m, d) if d else [(0,) * m])
    return tuple(out)


@lru_cache(maxsize=None)
def _product_table(m: int, degree: int):
    mons = monomials(m, degree)
    pos = {a: i for i, a in enumerate(mons)}
    ia, ib, ic = [], [], []
    for i, a in enumerate(mons):
        for j, b in enumerate(mons):
            c = tuple(x + y for x, y in zip(a, b))
            k = pos.get(c)
            if k is not None:
                ia.append(i)
                ib.append(j)
                ic.append(k)
    return np.array(ia), np.array(ib), np.array(ic), len(mons)


class Series:
    """Coefficients ``c[k, ...]`` of ``sum_k c_k delta^{alpha_k}``; trailing axes are components."""

    __slots__ = ("m", "degree", "c")

    def __init__(self, m, degree, coeffs):
        self.m = m
        self.degree = degree
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, m, degree, x0, i):
        c = np.zeros(len(monomials(m, degree)))
        c[0] = x0[i]
        if degree >= 1:
            c[1 + i] = 1.0
        return cls(m, degree, c)

    @classmethod
    def point(cls, m, degree, x0):
        """The identity map ``x0 + delta`` as a vector series."""
        c = np.zeros((len(monomials(m, degree)), m))
        c[0] = x0
        if degree >= 1:
            c[1 : 1 + m] = np.eye(m)
        return cls(m, degree, c)

    @classmethod
    def const(cls, m, degree, value):
        v = np.asarray(value, dtype=float)
        c = np.zeros((len(monomials(m, degree)),) + v.shape)
        c[0] = v
        return cls(m, degree, c)

    @property
    def value(self):
        return self.c[0]

    def __getitem__(self, i):
        return Series(self.m, self.degree, self.c[:, i])

    def __add__(self, other):
        if isinstance(other, Series):
            return Series(self.m, self.degree, self.c + other.c)
        c = self.c.copy()
        c[0] = c[0] + other
        return Series(self.m, self.degree, c)

    __radd__ = __add__

    def __neg__(self):
        return Series(self.m, self.degree, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(self.m, self.degree, self.c * other)
        ia, ib, ic, n = _product_table(self.m, self.degree)
        a, b = self.c, other.c
        # broadcast scalar series against vector series
        while a.ndim < b.ndim:
            a = a[..., None]
        while b.ndim < a.ndim:
            b = b[..., None]
        prod = a[ia] * b[ib]
        out = np.zeros((n,) + prod.shape[1:])
        np.add.at(out, ic, prod)
        return Series(self.m, self.degree, out)

    __rmul__ = __mul__

    def apply(self, derivs):
        """Compose a scalar series with a univariate ``F`` given ``derivs[k] = F^(k)(value)``."""
        if self.c.ndim != 1:
            raise ValueError("apply needs a scalar series")
        d = self - float(self.c[0])
        out = Series.const(self.m, self.degree, derivs[0])
        power = Series.const(self.m, self.degree, 1.0)
        for k in range(1, self.degree + 1):
            power = power * d
            out = out + power * (derivs[k] / factorial(k))
        return out

    def dot(self, other):
        return Series(self.m, self.degree, np.sum((self * other).c, axis=-1))

    def tensor(self, level):
        """The ``level``-th derivative tensor, shape ``(m,) * level + components``."""
        from itertools import permutations

        mons = monomials(self.m, self.degree)
        T = np.zeros((self.m,) * level + self.c.shape[1:])
        for k, alpha in enumerate(mons):
            if sum(alpha) != level:
                continue
            scale = 1.0
            for a in alpha:
                scale *= factorial(a)
            axes = [ax for ax in range(self.m) for _ in range(alpha[ax])]
            for perm in set(permutations(axes)):
                T[perm] = scale * self.c[k]
        return T


def inv_sqrt(s: Series) -> Series:
    """``s^{-1/2}`` for a positive scalar series."""
    t = float(s.value)
    d = [t**-0.5]
    e = -0.5
    for _ in range(s.degree):
        d.append(d[-1] * e / t)
        e -= 1.0
    return s.apply(d)


def sqrt(s: Series) -> Series:
    t = float(s.value)
    d = [t**0.5]
    e = 0.5
    for _ in range(s.degree):
        d.append(d[-1] * e / t)
        e -= 1.0
    return s.apply(d)


def normalized(v: Series) -> Series:
    """``v / |v|`` for a vector series with nonzero value."""
    return v * inv_sqrt(v.dot(v))
