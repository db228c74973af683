"""Command line: ``bihmap run``, ``bihmap gen-oracle`` and ``bihmap solve``.

Exit status 0 on success, 2 on invalid configuration, 3 when a computation
aborts, 4 on I/O failure.  Failures print a JSON object to stderr and, when
the output directory exists, write it to ``error.json``.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bienergy import DescentAbort, energy, minimize, random_start
from .config import ConfigError, ExperimentConfig, load_config
from .grid import FieldFormatError, GridDomain, load_field, save_field
from .monotonicity import density_profile, lambda_bound
from .oracle import KINDS, OracleMap
from .regscale import RegScale, lp_derivative_sum, lp_reciprocal, pointwise_domination
from .strata import (SaturationError, Ball, bad_scan, count_singular, decomposition_census, fail_scales,
                     grid_samples, minkowski_scan, qmc_samples)

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO = 0, 2, 3, 4


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _versions() -> dict:
    import numba
    import scipy

    return {"bihmap": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def set_threads(hint: int) -> int:
    """Thread count in force: ``BIHMAP_THREADS`` overrides the config hint.

    The grid kernels are serial (bitwise reproducible sums), so the count is
    advisory and recorded in the manifest.
    """
    try:
        n = int(os.environ.get("BIHMAP_THREADS", hint or 1))
    except ValueError as e:
        raise ConfigError(f"BIHMAP_THREADS must be an integer: {e}") from e
    return max(1, n)


# -- field sources ---------------------------------------------------------------


def build_field(cfg: ExperimentConfig, out: Path | None = None):
    """The field of the config's source; solves also write ``trace.csv`` and ``solution.bhf``."""
    spec = cfg.field
    if spec.source == "file":
        return load_field(spec.path), {}
    boundary = spec.oracle.rasterize(spec.domain)
    if spec.source == "oracle":
        return boundary, {}
    if spec.start == "random":
        start = random_start(boundary, cfg.seed, spec.amplitude, spec.solve.collar_width)
    else:
        start = boundary
    f, trace = minimize(start, boundary, spec.solve)
    info = {"converged": trace.converged, "reason": trace.reason, "iterations": len(trace.iteration) - 1,
            "energy": trace.energy[-1], "residual": trace.residual[-1], "boundary_energy": energy(boundary)}
    if out is not None:
        trace.to_csv(out / "trace.csv")
        save_field(f, out / "solution.bhf")
    return f, info


# -- analyses --------------------------------------------------------------------


def run_theta(f, p, out: Path) -> dict:
    rows, checks = [], []
    m = f.domain.dim
    for c in p["centers"]:
        prof = density_profile(f, c, p["radii"], p["lambda_bound"])
        diffs = {d.t: d for d in prof.diffs}
        for r, th in zip(prof.scales, prof.theta):
            d = diffs.get(r)
            rows.append(list(c) + [r, th, d.w_theta if d else np.nan, d.w_annulus if d else np.nan])
        checks.append({"center": list(c), "monotone": prof.monotone, "max_violation": prof.max_violation,
                       "within_bound": prof.within_bound, "lambda": prof.lambda_bound})
    write_csv(out / "theta.csv", [f"x{i}" for i in range(m)] + ["r", "theta", "w_theta", "w_annulus"], rows)
    return {"pass": all(c["monotone"] and c["within_bound"] for c in checks), "profiles": checks}


def _sample_set(f, p):
    if "points" in p:
        return p["points"], 0.0
    S = grid_samples(f.domain, p["sample_center"], p["sample_radius"], p["stride"])
    return S, p["stride"] * f.domain.h


def run_strata(f, p, out: Path) -> dict:
    ladder = p["ladder"]
    S, cell = _sample_set(f, p)
    cell = p["cell"] or cell
    radii = sorted(p["radii"])
    scales = sorted(set(radii) | {s for s in ladder.radii() if s >= radii[0]})
    fs = fail_scales(f, p["k"], p["eta"], scales, S, budget=p["budget"])
    m = f.domain.dim
    region = Ball(tuple(p.get("sample_center", [0.0] * m)), p["region_radius"])
    scan = minkowski_scan(fs, radii, region, cell)
    rows = []
    for r in radii:
        mem = fs.members(r)
        rows += [list(x) + [r, int(b)] for x, b in zip(S, mem)]
    write_csv(out / "strata.csv", [f"x{i}" for i in range(m)] + ["r", "member"], rows)
    nested = all(np.all(fs.members(a) <= fs.members(b)) for a, b in zip(radii, radii[1:]))
    atlas = {"k": p["k"], "eta": p["eta"], "gamma": ladder.gamma, "unit": ladder.unit, "scales": scales,
             "samples": len(S), "cell": cell, "region_radius": p["region_radius"], "evaluations": fs.evaluations,
             **scan.to_json()}
    write_json(out / "strata.json", atlas)
    return {"pass": bool(nested), "nested_in_r": bool(nested), "slope": scan.slope}


def ball_nodes(d, center, radius, collar):
    """Flat indices of nodes in the open ball ``B_radius(center)`` at index distance >= ``collar``."""
    box = d.index_box(center, radius)
    idx = np.stack([g.reshape(-1) for g in np.meshgrid(*[np.arange(b.start, b.stop) for b in box],
                                                       indexing="ij")], axis=-1)
    n = d.nodes_per_axis
    keep = np.all((idx >= collar) & (idx < n - collar), axis=1)
    keep &= np.linalg.norm(d.node_coords(idx) - center, axis=1) < radius
    return np.ravel_multi_index(tuple(idx[keep].T), d.shape)


def run_regscale(f, p, out: Path) -> dict:
    rs = RegScale(f)
    S, _ = _sample_set(f, p)
    d = f.domain
    S = S[np.array([rs.cap(x) > 0 for x in S], dtype=bool)] if len(S) else S
    rf = rs.field_at(S)
    rf.to_csv(out / "regscale.csv")
    cert = rs.certify(rf)
    bounds = bool(np.all((rf.r_f >= 0) & (rf.r_f <= rf.cap + 1e-15)))
    res = {"certified": float(np.mean(cert)) if len(cert) else 1.0, "bounds": bounds}
    if p["p"]:
        R = p["lp_radius"] if p["lp_radius"] is not None else p.get("sample_radius", 0.1)
        c = np.asarray(p.get("sample_center", np.zeros(d.dim)))
        nodes = ball_nodes(d, c, R, rs.collar + 1)
        table = []
        dom = []
        for q in p["p"]:
            a = lp_reciprocal(f, q, nodes, rs)
            b = lp_derivative_sum(f, q, nodes)
            ok = pointwise_domination(f, nodes, q, rs)
            dom.append(bool(ok.all()))
            table.append({"p": q, "lp_reciprocal": a.value, "lp_derivative_sum": b, "floored": a.floored,
                          "floor_contribution": a.floor_contribution, "nodes": a.points,
                          "domination_fraction": float(ok.mean()) if ok.size else 1.0})
        write_json(out / "lp.json", {"radius": R, "center": c, "table": table})
        res["domination"] = all(dom)
    if p["bad_radii"]:
        R = p["region_radius"] if p["region_radius"] is not None else d.half_width - rs.collar * d.h
        scan = bad_scan(rs, sorted(p["bad_radii"]), Ball(tuple(np.zeros(d.dim)), R))
        write_json(out / "badset.json", {"region_radius": R, **scan.to_json()})
        res["bad_slope"] = scan.slope
    res["pass"] = bool(res["bounds"] and res["certified"] == 1.0 and res.get("domination", True))
    return res


def run_count(f, p, out: Path) -> dict:
    res = count_singular(f, p["r_star"], p["schedule"])
    m = f.domain.dim
    write_csv(out / "count.csv", [f"x{i}" for i in range(m)] + ["r_f"],
              [list(x) + [v] for x, v in zip(res.representatives, res.r_f)])
    write_json(out / "count.json", {"count": res.count, "r_star": p["r_star"], "schedule": res.schedule,
                                    "counts": res.counts})
    stable = len(res.counts) >= 2 and res.counts[-1] == res.counts[-2]
    return {"pass": bool(stable or res.count == 0), "count": res.count, "stable": bool(stable)}


def run_census(f, p, out: Path, seed: int) -> dict:
    ladder = p["ladder"]
    m = f.domain.dim
    c = np.asarray(p["sample_center"], dtype=float)
    lam = lambda_bound(f, [c], p["lambda_radius"])
    delta = p["delta"] if p["delta"] is not None else p["delta_fraction"] * lam
    S = qmc_samples(m, c, p["sample_radius"], p["n"], seed)
    cen = decomposition_census(f, ladder, delta, S)
    write_csv(out / "census.csv", ["beta", "classes", "bound"], cen.rows())
    write_csv(out / "sequences.csv", [f"x{i}" for i in range(m)] + [f"T{j}" for j in range(1, ladder.beta_max + 1)],
              [list(s.point) + list(s.bits) for s in cen.sequences])
    nbound = (ladder.q + 3) * lam / delta + 1
    ok = cen.within_bound() and cen.max_q <= nbound
    write_json(out / "census.json", {"lambda": lam, "delta": delta, "max_q": cen.max_q, "q_bound": nbound,
                                     "classes": cen.classes})
    return {"pass": bool(ok), "max_q": cen.max_q, "q_bound": nbound, "classes_within_bound": cen.within_bound()}


# -- commands --------------------------------------------------------------------


def _fail(code: int, kind: str, err: Exception, out: Path | None):
    doc = {"status": "error", "exit_code": code, "kind": kind, "type": type(err).__name__, "message": str(err)}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    if out is not None and out.is_dir():
        try:
            write_json(out / "error.json", doc)
        except OSError:
            pass
    return code


def cmd_run(args) -> int:
    out = None
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, "validation", e, None)
    except OSError as e:
        return _fail(EXIT_IO, "io", e, None)
    out = Path(args.out) if args.out else Path(args.config).with_suffix("")
    try:
        out.mkdir(parents=True, exist_ok=True)
        threads = set_threads(args.threads if args.threads is not None else cfg.threads)
        manifest = {"config": str(cfg.path), "config_sha256": cfg.digest, "seed": cfg.seed, "threads": threads,
                    "versions": _versions(), "analyses": cfg.analyses, "status": "running", "timings": {}}
        write_json(out / "manifest.json", manifest)
    except OSError as e:
        return _fail(EXIT_IO, "io", e, out if out.is_dir() else None)
    summary = {}
    try:
        t0 = time.perf_counter()
        f, info = build_field(cfg, out if cfg.field.source == "solve" else None)
        manifest["timings"]["field"] = time.perf_counter() - t0
        if info:
            summary["solve"] = {"pass": bool(info["converged"]), **info}
        for name in cfg.analyses:
            t0 = time.perf_counter()
            p = cfg.params[name]
            if name == "theta":
                summary[name] = run_theta(f, p, out)
            elif name == "strata":
                summary[name] = run_strata(f, p, out)
            elif name == "regscale":
                summary[name] = run_regscale(f, p, out)
            elif name == "count":
                summary[name] = run_count(f, p, out)
            elif name == "census":
                summary[name] = run_census(f, p, out, cfg.seed)
            manifest["timings"][name] = time.perf_counter() - t0
        write_json(out / "invariants.json", summary)
        manifest["status"] = "ok"
        write_json(out / "manifest.json", manifest)
    except OSError as e:
        return _fail(EXIT_IO, "io", e, out)
    except (DescentAbort, SaturationError, FieldFormatError, ValueError, FloatingPointError) as e:
        manifest["status"] = "aborted"
        try:
            write_json(out / "manifest.json", manifest)
        except OSError:
            pass
        return _fail(EXIT_COMPUTE, "compute", e, out)
    print(json.dumps({"status": "ok", "out": str(out), "pass": {k: v["pass"] for k, v in summary.items()}},
                     sort_keys=True))
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        cfg = load_config(args.config)
        if cfg.field.source != "solve":
            raise ConfigError("bihmap solve needs field.source = solve")
    except ConfigError as e:
        return _fail(EXIT_CONFIG, "validation", e, None)
    except OSError as e:
        return _fail(EXIT_IO, "io", e, None)
    out = Path(args.out) if args.out else Path(args.config).with_suffix("")
    try:
        out.mkdir(parents=True, exist_ok=True)
        threads = set_threads(args.threads if args.threads is not None else cfg.threads)
        manifest = {"config": str(cfg.path), "config_sha256": cfg.digest, "seed": cfg.seed, "threads": threads,
                    "versions": _versions(), "analyses": ["solve"], "status": "running", "timings": {}}
        write_json(out / "manifest.json", manifest)
        t0 = time.perf_counter()
        _, info = build_field(cfg, out)
        manifest["timings"]["solve"] = time.perf_counter() - t0
        manifest["status"] = "ok"
        write_json(out / "manifest.json", manifest)
        write_json(out / "solve.json", info)
    except OSError as e:
        return _fail(EXIT_IO, "io", e, out if out.is_dir() else None)
    except (DescentAbort, ValueError, FloatingPointError) as e:
        return _fail(EXIT_COMPUTE, "compute", e, out)
    print(json.dumps({"status": "ok", "out": str(out), **info}, sort_keys=True, default=_jsonable))
    return EXIT_OK


def cmd_gen_oracle(args) -> int:
    try:
        br = args.blend_radius if args.blend_radius is not None else 0.15 * args.half_width
        kw = {"axes": args.axes, "a": args.a, "blend_radius": br}
        if args.value:
            kw["value"] = tuple(float(v) for v in args.value.replace(",", " ").split())
        if args.centers:
            kw["centers"] = tuple(tuple(float(v) for v in c.replace(",", " ").split())
                                  for c in args.centers.split(";") if c.strip())
        if args.target_dim is not None:
            kw["target_dim"] = args.target_dim
        omap = OracleMap(args.kind, args.dim, **kw)
        domain = GridDomain(args.dim, args.nodes, args.half_width)
    except ValueError as e:
        return _fail(EXIT_CONFIG, "validation", e, None)
    try:
        f = omap.rasterize(domain)
    except ValueError as e:
        return _fail(EXIT_COMPUTE, "compute", e, None)
    try:
        save_field(f, args.out)
    except OSError as e:
        return _fail(EXIT_IO, "io", e, None)
    print(json.dumps({"status": "ok", "out": str(args.out), "kind": args.kind, "dim": args.dim,
                      "nodes": args.nodes, "h": domain.h}, sort_keys=True))
    return EXIT_OK


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bihmap", description="Numerical lab for biharmonic maps into spheres")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: config path without suffix)")
    r.add_argument("--threads", type=int, default=None)
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("solve", help="minimize the bienergy for a config with field.source = solve")
    s.add_argument("config")
    s.add_argument("--out", default=None)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_solve)
    g = sub.add_parser("gen-oracle", help="rasterize an oracle map to a field file")
    g.add_argument("kind", choices=KINDS)
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--half-width", type=float, default=1.0)
    g.add_argument("--axes", type=int, default=1)
    g.add_argument("--value", default=None, help="constant value, comma separated")
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--target-dim", type=int, default=None)
    g.add_argument("--centers", default=None, help="planted centers: 'x y ...; x y ...'")
    g.add_argument("--blend-radius", type=float, default=None, help="default 0.15 * half-width")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_oracle)
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
