"""Quantitative strata, bad-scale sequences, tube volumes and singular-point counts.

Radii here are absolute (domain units).  A :class:`ScaleLadder` carries a
unit radius ``unit`` so that its levels are ``unit * gamma^j``; the paper's
unit ball becomes the ball of radius ``unit``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .grid import SphereField
from .homogeneity import LatticeSpec, fit_homogeneous, moment_matrix
from .monotonicity import DensityEvaluator
from .quadrature import ball_volume
from .regscale import RegScale

DEFAULT_GAMMA = 0.45
DEFAULT_Q = 2
VOLUME_SAMPLES = 1 << 15


@dataclass(frozen=True)
class ScaleLadder:
    gamma: float = DEFAULT_GAMMA
    q: int = DEFAULT_Q
    beta_max: int = 6
    unit: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")
        if self.q < 1:
            raise ValueError("q must be a positive integer")
        if self.beta_max < 1:
            raise ValueError("beta_max must be >= 1")
        if not self.unit > 0:
            raise ValueError("unit radius must be positive")

    def radius(self, j: float) -> float:
        return self.unit * self.gamma**j

    def radii(self, floor: float = 0.0) -> list:
        """Level radii ``unit * gamma^j`` for j = 0..beta_max that are >= ``floor``."""
        return [self.radius(j) for j in range(self.beta_max + 1) if self.radius(j) >= floor * (1 - 1e-12)]

    def annulus_pairs(self, j: int) -> list:
        """Five sampled ``(s, t)`` pairs of the region A_j: four corners and the geometric midpoint."""
        s_lo, s_hi = self.radius(j + self.q + 0.5), self.radius(j + self.q)
        t_lo, t_hi = self.radius(j), self.radius(j - 0.5)
        s_mid, t_mid = np.sqrt(s_lo * s_hi), np.sqrt(t_lo * t_hi)
        return [(s_lo, t_lo), (s_lo, t_hi), (s_hi, t_lo), (s_hi, t_hi), (s_mid, t_mid)]


@dataclass(frozen=True)
class ScaleSequence:
    point: tuple
    bits: tuple  # T_j for j = 1..beta_max
    defined: tuple  # whether any pair of A_j was computable
    delta: float
    q: int

    @property
    def count(self) -> int:
        return int(sum(self.bits))

    def bound(self, lam: float) -> float:
        """Discrete form of the bound on the number of bad scales: (q + 3) Lambda / delta + 1."""
        return (self.q + 3) * lam / self.delta + 1


def _pair_ok(domain, x, s, t):
    h = domain.h
    return t >= 4 * h * (1 - 1e-12) and max(s, 2 * h) < t and domain.contains_ball(x, t + h)


def scale_sequence(field_: SphereField, x, ladder: ScaleLadder, delta: float,
                   evaluator: DensityEvaluator | None = None) -> ScaleSequence:
    """Bits ``T_j = 1`` iff ``w_annulus(s, t) > delta`` for every computable sampled pair of A_j.

    A pair is computable when ``t >= 4h``, the ball ``B_(t+h)(x)`` lies in the
    domain and the inner cutoff ``max(s, 2h)`` is below ``t``.  Levels
    without a computable pair get ``T_j = 0`` and are flagged undefined.
    """
    d = field_.domain
    x = np.asarray(x, dtype=float)
    pairs = {j: [p for p in ladder.annulus_pairs(j) if _pair_ok(d, x, *p)] for j in range(1, ladder.beta_max + 1)}
    tmax = max((t for ps in pairs.values() for _, t in ps), default=None)
    bits, defined = [], []
    if tmax is not None and evaluator is None:
        evaluator = DensityEvaluator(field_, x, tmax)
    for j in range(1, ladder.beta_max + 1):
        ps = pairs[j]
        if not ps:
            bits.append(0)
            defined.append(False)
            continue
        defined.append(True)
        bits.append(int(all(evaluator.annulus(s, t)[0] > delta for s, t in ps)))
    return ScaleSequence(tuple(x), tuple(bits), tuple(defined), float(delta), ladder.q)


@dataclass
class Census:
    classes: list  # distinct non-empty T^beta prefixes for beta = 1..beta_max
    max_q: int  # largest 1-bit count over the samples
    sequences: list = field(repr=False, default_factory=list)

    def bound(self, beta: int) -> int:
        return beta**self.max_q

    def within_bound(self) -> bool:
        """Class count at most ``beta^Q_max`` at every depth, an exact inequality."""
        return all(c <= self.bound(b) for b, c in enumerate(self.classes, start=1))

    def rows(self):
        return [(b, c, self.bound(b)) for b, c in enumerate(self.classes, start=1)]


def decomposition_census(field_: SphereField, ladder: ScaleLadder, delta: float, samples) -> Census:
    """Distinct bit prefixes ``T^beta`` among the samples, for each depth beta."""
    seqs = [scale_sequence(field_, x, ladder, delta) for x in np.atleast_2d(samples)]
    classes = [len({s.bits[:beta] for s in seqs}) for beta in range(1, ladder.beta_max + 1)]
    return Census(classes, max((s.count for s in seqs), default=0), seqs)


# -- tube volumes and slopes ---------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def contains(self, z):
        return np.linalg.norm(z - np.asarray(self.center, dtype=float), axis=-1) <= self.radius


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def bounds(self):
        return np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)

    def contains(self, z):
        lo, hi = self.bounds()
        return np.all((z >= lo) & (z <= hi), axis=-1)


def as_region(region, dim: int):
    """A :class:`Ball` or :class:`Box`; a bare number means the ball of that radius about 0."""
    if isinstance(region, (Ball, Box)):
        return region
    return Ball(tuple(np.zeros(dim)), float(region))


def tube_volume(points, rho: float, region, cell=0.0, n: int = VOLUME_SAMPLES, seed: int = 0) -> float:
    """``Vol(T_rho(A) cap region)`` by scrambled-Sobol sampling of a bounding box.

    ``A`` is the union of the boxes of side ``cell`` (scalar or per axis)
    centered at ``points``, each sample standing for its lattice cell;
    ``cell = 0`` gives the tube around the bare point set.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.size == 0:
        return 0.0
    m = P.shape[1]
    region = as_region(region, m)
    half = 0.5 * np.broadcast_to(np.asarray(cell, dtype=float), (m,))
    rlo, rhi = region.bounds()
    lo = np.maximum(P.min(axis=0) - rho - half, rlo)
    hi = np.minimum(P.max(axis=0) + rho + half, rhi)
    if np.any(hi <= lo):
        return 0.0
    z = lo + qmc.Sobol(m, scramble=True, seed=seed).random(n) * (hi - lo)
    z = z[region.contains(z)]
    tree = cKDTree(P)
    if not np.any(half):
        dist, _ = tree.query(z, distance_upper_bound=rho * (1 + 1e-12))
        hit = np.count_nonzero(np.isfinite(dist))
    else:
        # the nearest cell need not hold the nearest center: test every center within reach
        hit = 0
        for zi, near in zip(z, tree.query_ball_point(z, rho + float(np.linalg.norm(half)))):
            if near:
                gap = np.maximum(np.abs(P[near] - zi) - half, 0.0)
                hit += bool(np.any(np.einsum("ij,ij->i", gap, gap) <= rho * rho))
    return float(hit / n * np.prod(hi - lo))


def fit_slope(rhos, volumes) -> tuple[float, float, float]:
    """Least-squares ``log V = slope log rho + intercept``; returns (slope, intercept, rms residual)."""
    r = np.asarray(rhos, dtype=float)
    v = np.asarray(volumes, dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        raise ValueError("need at least two positive volumes to fit a slope")
    A = np.stack([np.log(r[ok]), np.ones(ok.sum())], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(v[ok]), rcond=None)
    res = np.log(v[ok]) - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2)))


@dataclass
class FailScales:
    """Per-sample largest failing scale ``max{s : d_(k+1)(x, s) <= eta}`` over a scale list.

    Scales are visited from the top down and a sample stops at its first
    failure, since no smaller r can then admit it.  ``-inf`` means the
    sample never failed.  Membership in ``S^k_(eta, r)`` is ``fail < r``.
    """

    k: int
    eta: float
    scales: tuple  # descending
    samples: np.ndarray = field(repr=False)
    fail: np.ndarray = field(repr=False)
    evaluations: int = 0

    def members(self, r: float) -> np.ndarray:
        if not min(self.scales) * (1 - 1e-12) <= r <= max(self.scales) * (1 + 1e-12):
            raise ValueError("r outside the scale range")
        return self.fail < r * (1 - 1e-12)


def fail_scales(field_: SphereField, k: int, eta: float, scales, samples, spec: LatticeSpec | None = None,
                budget: int = 4, seed: int = 0) -> FailScales:
    m = field_.domain.dim
    if not 0 <= k < m:
        raise ValueError(f"k must lie in 0..{m - 1}")
    sc = tuple(sorted({float(s) for s in scales}, reverse=True))
    if not sc:
        raise ValueError("empty ladder")
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    spec = LatticeSpec.coarse() if spec is None else spec
    for x in S:
        if not field_.domain.contains_ball(x, sc[0]):
            raise ValueError("ball B_s(x) at the top scale not contained in domain")
    mspec = LatticeSpec(directions=min(64, spec.directions), radii=min(8, spec.radii))
    fail = np.full(len(S), -np.inf)
    evals = 0
    # d_(k+1) = min over j > k of the fitted deficits (the table's nesting pass), so a
    # scale fails as soon as one fit is <= eta; fit_(k+1) is tried first as the likeliest
    for i, x in enumerate(S):
        for s in sc:
            M = moment_matrix(field_, x, s, mspec)
            if any(_fit(field_, x, s, j, spec, budget, seed, M) <= eta for j in range(k + 1, m + 1)):
                fail[i] = s
                evals += 1
                break
            evals += 1
    return FailScales(k, float(eta), sc, S, fail, evals)


def _fit(field_, x, s, j, spec, budget, seed, M):
    return fit_homogeneous(field_, x, s, j, spec, budget, seed, moment=M).deficit


@dataclass
class StrataAtlas:
    k: int
    eta: float
    r: float
    samples: np.ndarray = field(repr=False)
    member: np.ndarray = field(repr=False)
    rhos: list = field(default_factory=list)
    volumes: list = field(default_factory=list)
    slope: float = float("nan")
    intercept: float = float("nan")
    residual: float = float("nan")

    @property
    def members(self) -> np.ndarray:
        return self.samples[self.member]

    def to_json(self) -> dict:
        return {"k": self.k, "eta": self.eta, "r": self.r, "members": int(self.member.sum()),
                "samples": int(len(self.samples)), "rho": self.rhos, "volume": self.volumes,
                "slope": self.slope, "intercept": self.intercept, "fit_residual": self.residual}


def stratum(field_: SphereField, k: int, eta: float, r: float, ladder: ScaleLadder, samples, rhos=None,
            region=None, cell=0.0, spec: LatticeSpec | None = None, budget: int = 4,
            fails: FailScales | None = None) -> StrataAtlas:
    """Members of ``S^k_(eta, r)``: ``d_(k+1)(x, s) > eta`` at every ladder scale ``s >= r``.

    With ``rhos`` the tube volumes ``Vol(T_rho(members) cap B_R(c))`` are
    recorded and a log-log slope fitted (default region: the ladder's unit ball).
    """
    if fails is None:
        scales = [s for s in ladder.radii() if s >= r * (1 - 1e-12)]
        if not scales:
            raise ValueError("empty ladder above r")
        fails = fail_scales(field_, k, eta, scales, samples, spec, budget)
    elif fails.k != k or fails.eta != eta:
        raise ValueError("fail scales computed for another (k, eta)")
    atlas = StrataAtlas(k, float(eta), float(r), fails.samples, fails.members(r))
    if rhos is not None:
        region = as_region(ladder.unit if region is None else region, field_.domain.dim)
        atlas.rhos = [float(x) for x in rhos]
        atlas.volumes = [tube_volume(atlas.members, x, region, cell) if atlas.member.any() else 0.0
                         for x in atlas.rhos]
        if sum(v > 0 for v in atlas.volumes) >= 2:
            atlas.slope, atlas.intercept, atlas.residual = fit_slope(atlas.rhos, atlas.volumes)
    return atlas


@dataclass
class MinkowskiScan:
    radii: list
    volumes: list
    members: list
    slope: float
    intercept: float
    residual: float

    def to_json(self) -> dict:
        return {"r": self.radii, "volume": self.volumes, "members": self.members, "slope": self.slope,
                "intercept": self.intercept, "fit_residual": self.residual}


def _scan(radii, volumes, members):
    ok = [v > 0 for v in volumes]
    fit = fit_slope(radii, volumes) if sum(ok) >= 2 else (float("nan"),) * 3
    return MinkowskiScan([float(r) for r in radii], [float(v) for v in volumes], members, *fit)


def minkowski_scan(fails: FailScales, radii, region, cell=0.0) -> MinkowskiScan:
    """``Vol(T_r(S^k_(eta, r)) cap B_R(c))`` against r with its fitted slope (bound: C r^(m - k - eta))."""
    vols, counts = [], []
    for r in radii:
        mem = fails.members(r)
        counts.append(int(mem.sum()))
        vols.append(tube_volume(fails.samples[mem], r, region, cell) if mem.any() else 0.0)
    return _scan(radii, vols, counts)


# -- bad set -------------------------------------------------------------------


@dataclass
class BadSet:
    r: float
    points: np.ndarray
    tube_volume: float


def bad_set(field_: SphereField, r: float, samples, rs: RegScale | None = None, region=None) -> BadSet:
    """Samples with ``r_f <= r`` and, given a region, ``Vol(T_r(B_r) cap region)``.

    Away from the cap, ``r_f(x) <= r`` exactly when x lies within r of a
    node y with ``rho*(y) <= r``, so ``T_r(B_r) = T_(2r)(Z_r)`` with
    ``Z_r = {rho* <= r}``; the tube volume uses that identity, each node
    standing for its grid cell.
    """
    rs = RegScale(field_) if rs is None else rs
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    rf = np.array([rs.reg_scale(x) for x in S])
    vol = float("nan") if region is None else bad_tube_volume(rs, r, region)
    return BadSet(float(r), S[rf <= r], vol)


def bad_tube_volume(rs: RegScale, r: float, region) -> float:
    """``Vol(T_r(B_r(f)) cap region)`` from the low nodes ``rho* <= r`` within reach of the region."""
    d = rs.domain
    region = as_region(region, d.dim)
    lo, hi = region.bounds()
    box = d.index_box(0.5 * (lo + hi), float(np.max(0.5 * (hi - lo))) + 2 * r + d.h)
    mask = np.zeros(d.shape, dtype=bool)
    mask[box] = True
    mask &= d.collar_mask(rs.collar)
    low = rs.low_nodes(r, mask)
    if low.size == 0:
        return 0.0
    pts = d.node_coords(np.stack(np.unravel_index(low, d.shape), axis=-1))
    return tube_volume(pts, 2 * r, region, cell=d.h)


def bad_scan(rs: RegScale, radii, region) -> MinkowskiScan:
    """``Vol(T_r(B_r(f)) cap region)`` against r with its fitted slope."""
    vols, counts = [], []
    for r in radii:
        vols.append(bad_tube_volume(rs, r, region))
        counts.append(int(rs.low_nodes(r).size))
    return _scan(radii, vols, counts)


# -- singular-point counting -------------------------------------------------------


class SaturationError(RuntimeError):
    """Raised when singular candidates fill the sample: not an isolated-singularity regime."""


@dataclass
class SingularCount:
    count: int
    representatives: np.ndarray
    r_f: np.ndarray
    schedule: list
    counts: list


def count_singular(field_: SphereField, r_star: float, schedule=None, rs: RegScale | None = None,
                   saturation: float = 0.25) -> SingularCount:
    """Number of isolated singular points: local maxima of ``1/r_f`` above ``1/r_star``, merged by packing.

    Candidates are interior nodes with ``r_f <= r_star`` that are local
    minima of r_f over their 3^m neighborhood.  They are visited in
    increasing r_f (ties by node index); each unvisited one opens a class
    absorbing every candidate within the current packing radius.  The
    radius runs through ``schedule`` (default: the cell diagonal
    ``sqrt(m) h`` times powers of sqrt 2, so tied minima on the corners of
    one cell always merge first) and the count is returned once two
    consecutive radii agree.
    """
    d = field_.domain
    rs = RegScale(field_) if rs is None else rs
    interior = d.collar_mask(rs.collar + 1)
    nodes = np.flatnonzero(interior)
    low = nodes[rs.rho_star(nodes) <= r_star]
    if low.size == 0:
        return SingularCount(0, np.zeros((0, d.dim)), np.zeros(0), [], [])
    # only nodes within r_star of a low node can have r_f <= r_star
    reach = np.zeros(d.shape, dtype=bool)
    idx = np.stack(np.unravel_index(low, d.shape), axis=-1)
    span = int(np.floor(r_star / d.h))
    for off in np.ndindex(*(2 * span + 1,) * d.dim):
        o = np.asarray(off) - span
        if np.linalg.norm(o) * d.h >= r_star:
            continue
        t = idx + o
        ok = np.all((t >= 0) & (t < d.nodes_per_axis), axis=1)
        reach[tuple(t[ok].T)] = True
    reach &= interior
    cand = np.flatnonzero(reach)
    if cand.size > saturation * nodes.size:
        raise SaturationError(
            f"{cand.size} of {nodes.size} interior nodes are singular candidates: not an isolated-singularity regime")
    pts = d.node_coords(np.stack(np.unravel_index(cand, d.shape), axis=-1))
    rf = np.array([rs.reg_scale(p) for p in pts])
    keep = rf <= r_star
    cand, pts, rf = cand[keep], pts[keep], rf[keep]
    value = dict(zip(cand.tolist(), rf.tolist()))
    cidx = np.stack(np.unravel_index(cand, d.shape), axis=-1)
    offsets = [np.asarray(o) - 1 for o in np.ndindex(*(3,) * d.dim) if any(v != 1 for v in o)]
    is_min = np.ones(len(cand), dtype=bool)
    for i, (ci, v) in enumerate(zip(cidx, rf)):
        for o in offsets:
            t = ci + o
            if np.any(t < 0) or np.any(t >= d.nodes_per_axis):
                continue
            w = value.get(int(np.ravel_multi_index(tuple(t), d.shape)))
            if w is not None and w < v:
                is_min[i] = False
                break
    order = np.lexsort((cand[is_min], rf[is_min]))
    cpts, crf = pts[is_min][order], rf[is_min][order]
    if schedule is None:
        schedule = [np.sqrt(d.dim) * d.h * (1 + 1e-9) * 2 ** (0.5 * i) for i in range(8)]
    schedule = [float(s) for s in schedule]
    counts, packs = [], []
    for R in schedule:
        packs.append(_greedy_pack(cpts, crf, R))
        counts.append(len(packs[-1][0]))
        if len(counts) >= 2 and counts[-1] == counts[-2]:
            break
    reps, vals = packs[-1]
    return SingularCount(len(reps), np.asarray(reps).reshape(-1, d.dim), np.asarray(vals),
                         schedule[: len(counts)], counts)


def _greedy_pack(points, values, radius):
    taken = np.zeros(len(points), dtype=bool)
    reps, rv = [], []
    for i in range(len(points)):
        if taken[i]:
            continue
        reps.append(points[i])
        rv.append(values[i])
        taken |= np.linalg.norm(points - points[i], axis=1) < radius
    return reps, rv


def grid_samples(domain, center, radius, stride: int = 1, margin: float = 0.0) -> np.ndarray:
    """Grid nodes in the ball ``B_radius(center)``, every ``stride``-th per axis."""
    box = domain.index_box(center, radius)
    axes = [np.arange(s.start, s.stop, stride) for s in box]
    idx = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    pts = domain.node_coords(idx)
    keep = np.linalg.norm(pts - np.asarray(center), axis=1) <= radius
    keep &= domain.contains(pts, margin)
    return pts[keep]


def qmc_samples(m: int, center, radius: float, n: int, seed: int = 0) -> np.ndarray:
    """``n`` scrambled-Sobol points, uniform in the ball (rejection from the cube, deterministic)."""
    pts = []
    got = 0
    sob = qmc.Sobol(m, scramble=True, seed=seed)
    while got < n:
        z = 2 * sob.random(1 << max(6, int(np.ceil(np.log2(4 * n))))) - 1
        z = z[np.linalg.norm(z, axis=1) <= 1]
        pts.append(z)
        got += len(z)
    z = np.concatenate(pts)[:n]
    return np.asarray(center, dtype=float) + radius * z


def ball_fraction(m: int, r: float, R: float) -> float:
    return ball_volume(m, r) / ball_volume(m, R)

