"""Experiment configuration: a typed INI file with one section per analysis.

Example::

    [run]
    seed = 0
    analyses = theta, regscale

    [field]
    source = oracle            ; oracle | file | solve
    kind = radial_projection
    dim = 5
    nodes = 24
    half_width = 0.4791666666666667

    [theta]
    centers = 0 0 0 0 0
    radii = 0.2, 0.3, 0.4

Lists are comma separated; points are space separated coordinates, several
points separated by ``;``.  Every parameter is checked against the
preconditions of its operation before any computation starts.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bienergy import MinimizeConfig
from .grid import FieldFormatError, GridDomain, load_field
from .oracle import KINDS, OracleMap
from .strata import ScaleLadder

ANALYSES = ("theta", "strata", "regscale", "count", "census")
SOURCES = ("oracle", "file", "solve")


class ConfigError(ValueError):
    """Invalid configuration (exit status 2)."""


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def _points(text: str) -> np.ndarray:
    rows = [_floats(p) for p in text.split(";") if p.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"malformed point list {text!r}")
    return np.array(rows)


@dataclass
class FieldSpec:
    source: str
    oracle: OracleMap | None = None
    domain: GridDomain | None = None
    path: Path | None = None
    solve: MinimizeConfig | None = None
    start: str = "boundary"  # boundary | random
    amplitude: float | None = None


@dataclass
class ExperimentConfig:
    path: Path
    digest: str
    seed: int
    threads: int
    analyses: list
    field: FieldSpec
    params: dict = field(default_factory=dict)  # analysis name -> dict of typed parameters


def _oracle(sec, dim, half_width) -> OracleMap:
    kind = sec.get("kind", fallback=None)
    if kind not in KINDS:
        raise ConfigError(f"field.kind must be one of {', '.join(KINDS)}")
    kw = {}
    if "axes" in sec:
        kw["axes"] = sec.getint("axes")
    if "value" in sec:
        kw["value"] = tuple(_floats(sec["value"]))
    if "a" in sec:
        kw["a"] = sec.getfloat("a")
    if "target_dim" in sec:
        kw["target_dim"] = sec.getint("target_dim")
    if "centers" in sec:
        kw["centers"] = tuple(map(tuple, _points(sec["centers"])))
    if kw.get("centers"):
        kw["blend_radius"] = sec.getfloat("blend_radius", 0.15 * half_width)
    try:
        return OracleMap(kind, dim, **kw)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _field(cp, base: Path) -> FieldSpec:
    if "field" not in cp:
        raise ConfigError("missing [field] section")
    sec = cp["field"]
    src = sec.get("source", "oracle")
    if src not in SOURCES:
        raise ConfigError(f"field.source must be one of {', '.join(SOURCES)}")
    if src == "file":
        if "path" not in sec:
            raise ConfigError("field.path is required for source = file")
        path = Path(sec["path"])
        path = path if path.is_absolute() else base / path
        return FieldSpec(src, domain=load_field(path).domain, path=path)
    try:
        dim = sec.getint("dim")
        domain = GridDomain(dim, sec.getint("nodes"), sec.getfloat("half_width", 1.0))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad grid in [field]: {e}") from e
    spec = FieldSpec(src, oracle=_oracle(sec, dim, domain.half_width), domain=domain)
    if src == "solve":
        try:
            spec.solve = MinimizeConfig(
                max_iters=sec.getint("max_iters", 5000),
                el_tolerance=sec.getfloat("el_tolerance", 1e-5),
                collar_width=sec.getint("collar_width", 2),
                method=sec.get("method", "cg"),
                time_limit=sec.getfloat("time_limit", None),
                seed=cp.getint("run", "seed", fallback=0),
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e
        spec.start = sec.get("start", "boundary")
        if spec.start not in ("boundary", "random"):
            raise ConfigError("field.start must be boundary or random")
        spec.amplitude = sec.getfloat("amplitude", None)
    return spec


def _ladder(sec) -> ScaleLadder:
    try:
        return ScaleLadder(sec.getfloat("gamma", 0.45), sec.getint("q", 2), sec.getint("beta_max", 6),
                           sec.getfloat("unit", 1.0))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _samples(sec, dim) -> dict:
    out = {}
    if "points" in sec:
        out["points"] = _points(sec["points"])
    else:
        out["sample_center"] = _floats(sec.get("sample_center", " ".join(["0"] * dim)))
        out["sample_radius"] = sec.getfloat("sample_radius", 0.1)
        out["stride"] = sec.getint("stride", 1)
        if out["sample_radius"] <= 0 or out["stride"] < 1:
            raise ConfigError("sample_radius must be positive and stride >= 1")
    return out


def _params(name, sec, dim) -> dict:
    p = {}
    if name == "theta":
        p["centers"] = _points(sec.get("centers", " ".join(["0"] * dim)))
        p["radii"] = _floats(sec.get("radii", ""))
        if not p["radii"] or any(b <= a for a, b in zip(p["radii"], p["radii"][1:])):
            raise ConfigError("theta.radii must be a non-empty ascending list")
        p["lambda_bound"] = sec.getfloat("lambda_bound", None)
    elif name == "strata":
        p["ladder"] = _ladder(sec)
        p["k"] = sec.getint("k", 0)
        p["eta"] = sec.getfloat("eta", None)
        if p["eta"] is None or p["eta"] <= 0:
            raise ConfigError("strata.eta must be given and positive")
        if not 0 <= p["k"] < dim:
            raise ConfigError(f"strata.k must lie in 0..{dim - 1}")
        p["radii"] = _floats(sec.get("radii", ""))
        if len(p["radii"]) < 2:
            raise ConfigError("strata.radii needs at least two radii")
        p["region_radius"] = sec.getfloat("region_radius", p["ladder"].unit)
        p["cell"] = sec.getfloat("cell", 0.0)
        p["budget"] = sec.getint("budget", 1)
        p.update(_samples(sec, dim))
    elif name == "regscale":
        p.update(_samples(sec, dim))
        p["p"] = _floats(sec.get("p", ""))
        if any(v < 1 for v in p["p"]):
            raise ConfigError("regscale.p values must be >= 1")
        p["lp_radius"] = sec.getfloat("lp_radius", None)
        p["bad_radii"] = _floats(sec.get("bad_radii", ""))
        p["region_radius"] = sec.getfloat("region_radius", None)
    elif name == "count":
        p["r_star"] = sec.getfloat("r_star", None)
        if p["r_star"] is None or p["r_star"] <= 0:
            raise ConfigError("count.r_star must be given and positive")
        sch = _floats(sec.get("schedule", ""))
        p["schedule"] = sch or None
    elif name == "census":
        p["ladder"] = _ladder(sec)
        p["delta"] = sec.getfloat("delta", None)
        p["delta_fraction"] = sec.getfloat("delta_fraction", 0.05)
        p["lambda_radius"] = sec.getfloat("lambda_radius", p["ladder"].unit)
        p["n"] = sec.getint("n", 16)
        p["sample_center"] = _floats(sec.get("sample_center", " ".join(["0"] * dim)))
        p["sample_radius"] = sec.getfloat("sample_radius", 0.1)
    return p


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    raw = path.read_bytes()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(raw.decode())
    except (configparser.Error, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config: {e}") from e
    run = cp["run"] if "run" in cp else {}
    try:
        seed = int(run.get("seed", 0))
        threads = int(run.get("threads", 1))
    except ValueError as e:
        raise ConfigError(f"bad [run] value: {e}") from e
    names = [a.strip() for a in run.get("analyses", "").split(",") if a.strip()]
    for n in names:
        if n not in ANALYSES:
            raise ConfigError(f"unknown analysis {n!r}; choose from {', '.join(ANALYSES)}")
    try:
        fs = _field(cp, path.parent)
    except FieldFormatError as e:
        raise ConfigError(str(e)) from e
    dim = fs.domain.dim
    params = {}
    for n in names:
        sec = cp[n] if n in cp else cp[configparser.DEFAULTSECT]
        try:
            params[n] = _params(n, sec, dim)
        except ValueError as e:
            raise ConfigError(f"[{n}] {e}") from e
    return ExperimentConfig(path, hashlib.sha256(raw).hexdigest(), seed, threads, names, fs, params)
