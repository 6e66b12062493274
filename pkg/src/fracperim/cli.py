"""Command-line entry point wiring configs to experiments.

Subcommands
-----------
validate-kernel   check the kernel hypotheses on a deterministic grid
perimeter         one fractional-perimeter evaluation with P1/P2 split
sweep             s -> 1 sweep of (1-s) P against the limit target
lemmas            boundary-term, halfspace-cube, strip-bound, additivity
                  and coarea experiments
moment-norm       evaluate the limiting surface-density norm on directions
minimize          voxel-grid local minimization across an s list

Global flags: --config PATH (required), --out DIR, --seed N (overrides the
config seed), --threads K (never changes results), --format json|csv
(what is printed to stdout; files are always written).

Exit codes: 0 pass, 1 computational or verdict failure, 2 usage/config
error.  Every error path prints a single line ``error: <kind>: <message>``
to stderr.

Config schema (JSON, one experiment per file)
---------------------------------------------
{
  "experiment": "validate-kernel" | "perimeter" | "sweep" | "lemmas"
                | "moment-norm" | "minimize",
  "kernel": {"kind": "euclidean", "dim": 2}
            | {"kind": "lp", "dim": 2, "p": 2.0}
            | {"kind": "polytope", "dim": 2, "halfspaces": [[[1,0],1], ...]}
            | {"kind": "expression", "dim": 2, "expression": "r*(1+0.1*cos(4*arctan2(x1,x0)))", "tau": 1.2},
            each optionally with "c": declared comparability constant,
  "set":    {"intervals": [[0,1],[2,3]]} | {"ball": {"center": [0,0], "radius": 1}}
            | {"polytope": {"halfspaces": [[[1,0],0.5], ...]}}
            | {"halfspace": {"normal": [0,1], "offset": 0}}
            | {"complement": <set>} | {"intersect": [<set>, <set>]},
  "domain": {"whole_space": 2} | {"bounded": <ball-or-polytope set>},
  "engine": {"engine": "exact1d" | "slicing" | "montecarlo",
             "n_lines": 100000, "n_pairs": 200000, "seed": 42,
             "threads": 1, "r_min": ..., "r_max_factor": ...,
             "truncation_target": ...},
  "s": 0.5,                     # perimeter, strip-bound, additivity, coarea
  "s_grid": [0.5, ..., 0.99],   # sweep, boundary-term, halfspace-cube
  "tolerance": 0.02,
  "directions": [[1,0],[0,1]],  # moment-norm
  "moment_engine": "auto",
  "lemma": "boundary-term" | "halfspace-cube" | "strip-bound"
           | "additivity" | "coarea",
  "delta1": 0.25, "delta2": 0.25,          # strip-bound
  "omega1": <set>, "omega2": <set>,        # additivity
  "levels": [[2.0, [[0,1]]], [1.0, [[2,3]]]],   # coarea
  "minimize": {"lo": [0,0], "hi": [1,1], "shape": [32,32],
               "omega_lo": [0.2,0.2], "omega_hi": [0.8,0.8],
               "exterior": <set>, "s_list": [0.6,0.8,0.95], "seed": 0}
}
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import config as cfgmod
from . import geometry as geo
from . import integration as integ
from . import limits
from . import minimize as mini
from . import momentbody as mb
from .config import ConfigError
from .kernels import fibonacci_directions, validate_hypotheses


def _err(kind: str, message: str) -> None:
    sys.stderr.write(f"error: {kind}: {message}\n")


def _record(cfg: dict, results: dict, started: float) -> dict:
    return {
        "version": __version__,
        "config_digest": cfgmod.config_digest(cfg),
        "experiment": cfg["experiment"],
        "results": results,
        "wall_clock_s": time.time() - started,
    }


def _write_record(record: dict, out_dir: str, name: str) -> str:
    path = os.path.join(out_dir, f"{name}.json")
    with open(path, "w") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _write_csv(rows, fieldnames, out_dir: str, name: str) -> str:
    path = os.path.join(out_dir, f"{name}.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def _csv_text(rows, fieldnames) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _engine_spec(cfg: dict, args) -> tuple[dict, int]:
    spec = dict(cfg.get("engine", {}))
    seed = spec.pop("seed", 0)
    if args.seed is not None:
        seed = args.seed
    if args.threads is not None:
        spec["threads"] = args.threads
    return spec, seed


def _run_validate_kernel(cfg, args):
    fam = cfgmod.build_kernel_family(cfg["kernel"])
    block = cfg.get("validate", {"s_samples": [0.3, 0.5, 0.7, 0.9], "tol": 1e-9, "z_count": 64})
    dirs = fibonacci_directions(fam.dim, block["z_count"])
    z = np.concatenate([r * dirs for r in (0.5, 1.0, 2.0)])
    report = validate_hypotheses(fam, block["s_samples"], z, tol=block["tol"])
    return report.to_dict(), report.passed, []


def _run_perimeter(cfg, args):
    fam = cfgmod.build_kernel_family(cfg["kernel"])
    E = cfgmod.build_region(cfg["set"])
    D = cfgmod.build_domain(cfg["domain"])
    spec, seed = _engine_spec(cfg, args)
    res = integ.perimeter_full(E, D, fam, cfg["s"], spec, seed)
    return res.to_dict(), True, []


def _run_sweep(cfg, args):
    fam = cfgmod.build_kernel_family(cfg["kernel"])
    E = cfgmod.build_region(cfg["set"])
    D = cfgmod.build_domain(cfg["domain"])
    spec, seed = _engine_spec(cfg, args)
    res = limits.sweep(E, D, fam, cfg["s_grid"], spec, seed, tolerance=cfg.get("tolerance"))
    rows = res.csv_rows()
    fields = ["s", "value", "std_error", "rescaled", "rescaled_std_error", "target"]
    return res.to_dict(), res.verdict, [(rows, fields, "sweep")]


def _run_lemmas(cfg, args):
    fam = cfgmod.build_kernel_family(cfg["kernel"])
    spec, seed = _engine_spec(cfg, args)
    lemma = cfg["lemma"]
    csv_out = []
    if lemma == "boundary-term":
        rep = limits.boundary_term_vanishing(fam, cfg["s_grid"], spec, seed)
        rows = [
            {"s": s, "value": v, "sigma": sg}
            for s, v, sg in zip(rep["s_grid"], rep["values"], rep["sigmas"])
        ]
        csv_out.append((rows, ["s", "value", "sigma"], "boundary_term"))
        return rep, rep["passed"], csv_out
    if lemma == "halfspace-cube":
        res = limits.halfspace_cube_limit(fam, cfg["s_grid"], spec, seed, tolerance=cfg.get("tolerance"))
        rows = res.csv_rows()
        csv_out.append((rows, ["s", "value", "std_error", "rescaled", "rescaled_std_error", "target"], "halfspace_cube"))
        return res.to_dict(), res.verdict, csv_out
    if lemma == "strip-bound":
        rep = limits.strip_energy_bound(fam, cfg["s"], cfg["delta1"], cfg["delta2"], spec, seed)
        return rep, rep["passed"], csv_out
    if lemma == "additivity":
        E = cfgmod.build_region(cfg["set"])
        om1 = cfgmod.build_region(cfg["omega1"])
        om2 = cfgmod.build_region(cfg["omega2"])
        rep = integ.additivity_defect_check(E, om1, om2, fam, cfg["s"], spec, seed)
        return rep, rep["passed"], csv_out
    levels = [(v, geo.Intervals1D([tuple(ab) for ab in ivs])) for v, ivs in cfg["levels"]]
    rep = integ.coarea_check_1d(levels, cfg["s"])
    return rep, rep["passed"], csv_out


def _run_moment_norm(cfg, args):
    fam = cfgmod.build_kernel_family(cfg["kernel"])
    tol = cfg.get("tolerance", 1e-8)
    m = mb.moment_norm_from_gauge(fam.limit_gauge, engine=cfg["moment_engine"], tol=tol)
    dirs = np.asarray(cfg["directions"], dtype=float)
    values = m.eval(dirs)
    rows = [
        {"direction": " ".join(f"{c:.17g}" for c in d), "value": float(v)}
        for d, v in zip(dirs, values)
    ]
    results = {
        "method": m.method,
        "accuracy": m.accuracy,
        "values": [float(v) for v in values],
    }
    return results, True, [(rows, ["direction", "value"], "moment_norm")]


def _run_minimize(cfg, args):
    fam = cfgmod.build_kernel_family(cfg["kernel"])
    block = cfg["minimize"]
    shape = tuple(block["shape"])
    grid = geo.VoxelGrid(block["lo"], block["hi"], shape, np.zeros(shape, bool))
    centers = grid.centers()
    omega = np.all(
        (centers >= np.asarray(block["omega_lo"])) & (centers <= np.asarray(block["omega_hi"])),
        axis=1,
    ).reshape(shape)
    exterior_region = cfgmod.build_region(block["exterior"])
    seed = block["seed"] if args.seed is None else args.seed
    study = mini.minimizer_convergence_study(
        block["lo"], block["hi"], shape, omega, exterior_region, block["s_list"], fam, seed=seed
    )
    results = {"runs": []}
    grids = []
    for run in study["runs"]:
        out = {k: v for k, v in run.items() if k != "occupancy"}
        results["runs"].append(out)
        grids.append((run["s"], run["occupancy"]))
    return results, all(r["converged"] for r in results["runs"]), grids


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracperim", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=list(cfgmod.EXPERIMENTS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=".")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    args = parser.parse_args(argv)

    started = time.time()
    try:
        cfg = cfgmod.load_config(args.config)
    except ConfigError as exc:
        _err("config", str(exc))
        return 2
    if cfg["experiment"] != args.command:
        _err("config", f"config experiment '{cfg['experiment']}' does not match subcommand '{args.command}'")
        return 2
    os.makedirs(args.out, exist_ok=True)

    runners = {
        "validate-kernel": _run_validate_kernel,
        "perimeter": _run_perimeter,
        "sweep": _run_sweep,
        "lemmas": _run_lemmas,
        "moment-norm": _run_moment_norm,
        "minimize": _run_minimize,
    }
    try:
        results, passed, extra = runners[cfg["experiment"]](cfg, args)
    except ConfigError as exc:
        _err("config", str(exc))
        return 2
    except (ValueError, ArithmeticError) as exc:
        _err("compute", str(exc))
        return 1

    record = _record(cfg, results, started)
    name = cfg["experiment"].replace("-", "_")
    _write_record(record, args.out, name)
    csv_text = None
    if cfg["experiment"] == "minimize":
        for s, occ in extra:
            path = os.path.join(args.out, f"occupancy_s{s:g}.txt")
            with open(path, "w") as fh:
                fh.write(mini.occupancy_to_text(occ))
    else:
        for rows, fields, suffix in extra:
            _write_csv(rows, fields, args.out, f"{name}_{suffix}")
            csv_text = _csv_text(rows, fields)
    if args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        json.dump(record, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")
    if not passed:
        _err("verdict", f"{cfg['experiment']} checks failed")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
