"""Run-configuration schema: parsing, strict validation, canonical digest.

Configs are JSON files with one experiment per file.  Unknown keys are
rejected with the offending path; the digest is a SHA-256 of the
canonicalized (type-normalized, key-sorted) configuration, so formatting
and key order never change it while any semantic change does.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from . import geometry as geo
from . import kernels as K

__all__ = ["ConfigError", "load_config", "parse_config", "config_digest", "build_kernel_family", "build_region", "build_domain"]


class ConfigError(ValueError):
    """Schema violation; the message carries a config path like kernel.dim."""


EXPERIMENTS = ("validate-kernel", "perimeter", "sweep", "lemmas", "moment-norm", "minimize")

_TOP_KEYS = {
    "experiment",
    "kernel",
    "set",
    "domain",
    "engine",
    "s",
    "s_grid",
    "tolerance",
    "directions",
    "moment_engine",
    "lemma",
    "delta1",
    "delta2",
    "omega1",
    "omega2",
    "levels",
    "minimize",
    "validate",
}


def _require(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _check_keys(block, allowed, path):
    unknown = set(block) - set(allowed)
    _require(not unknown, path, f"unknown keys {sorted(unknown)}")


def _as_float(value, path):
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), path, "expected a number")
    return float(value)


def _as_int(value, path):
    _require(isinstance(value, int) and not isinstance(value, bool), path, "expected an integer")
    return int(value)


def _as_vector(value, path, dim=None):
    _require(isinstance(value, list) and all(isinstance(v, (int, float)) for v in value), path, "expected a number list")
    if dim is not None:
        _require(len(value) == dim, path, f"expected {dim} components")
    return [float(v) for v in value]


# ---------------------------------------------------------------------------
# kernel block

def normalize_kernel(block, path="kernel"):
    _require(isinstance(block, dict), path, "expected an object")
    kind = block.get("kind")
    _require(kind in ("euclidean", "lp", "polytope", "expression"), path + ".kind",
             "must be euclidean | lp | polytope | expression")
    dim = _as_int(block.get("dim", 0), path + ".dim")
    _require(dim >= 1, path + ".dim", "must be >= 1")
    out = {"kind": kind, "dim": dim}
    allowed = {"kind", "dim", "c"}
    if kind == "lp":
        allowed.add("p")
        p = block.get("p", 2.0)
        if p == "inf":
            out["p"] = "inf"
        else:
            out["p"] = _as_float(p, path + ".p")
            _require(out["p"] >= 1, path + ".p", "must be >= 1")
    elif kind == "polytope":
        allowed.add("halfspaces")
        hs = block.get("halfspaces")
        _require(isinstance(hs, list) and len(hs) >= 2, path + ".halfspaces", "expected a list of [normal, offset]")
        norm_hs = []
        for i, item in enumerate(hs):
            _require(isinstance(item, list) and len(item) == 2, f"{path}.halfspaces[{i}]", "expected [normal, offset]")
            norm_hs.append([_as_vector(item[0], f"{path}.halfspaces[{i}][0]", dim), _as_float(item[1], f"{path}.halfspaces[{i}][1]")])
        out["halfspaces"] = norm_hs
    elif kind == "expression":
        allowed.update({"expression", "tau"})
        _require(isinstance(block.get("expression"), str), path + ".expression", "expected a string")
        out["expression"] = block["expression"]
        out["tau"] = _as_float(block.get("tau", 0.0), path + ".tau")
        _require(out["tau"] >= 1, path + ".tau", "must be >= 1")
    _check_keys(block, allowed, path)
    if "c" in block:
        out["c"] = _as_float(block["c"], path + ".c")
        _require(out["c"] >= 1, path + ".c", "must be >= 1")
    return out


def build_kernel_family(norm_block) -> K.KernelFamily:
    kind = norm_block["kind"]
    dim = norm_block["dim"]
    if kind == "euclidean":
        gauge = K.euclidean_gauge(dim)
    elif kind == "lp":
        p = norm_block["p"]
        gauge = K.lp_gauge(dim, math.inf if p == "inf" else p)
    elif kind == "polytope":
        gauge = K.quasi_norm_from_convex_body(halfspaces=[(h[0], h[1]) for h in norm_block["halfspaces"]], dim=dim)
    else:
        gauge = K.gauge_from_expression(norm_block["expression"], dim, norm_block["tau"])
    return K.constant_family(gauge, c=norm_block.get("c"))


# ---------------------------------------------------------------------------
# set and domain blocks

_SET_KEYS = ("intervals", "ball", "polytope", "halfspace", "complement", "intersect")


def normalize_set(block, dim, path="set"):
    _require(isinstance(block, dict) and len(block) == 1, path,
             f"expected exactly one of {_SET_KEYS}")
    key = next(iter(block))
    _require(key in _SET_KEYS, path, f"unknown set kind '{key}'")
    val = block[key]
    if key == "intervals":
        _require(dim == 1, path, "interval sets require dimension 1")
        _require(isinstance(val, list), path + ".intervals", "expected [[a, b], ...]")
        ivs = []
        for i, ab in enumerate(val):
            pair = _as_vector(ab, f"{path}.intervals[{i}]", 2)
            _require(pair[0] < pair[1], f"{path}.intervals[{i}]", "needs a < b")
            ivs.append(pair)
        return {"intervals": ivs}
    if key == "ball":
        _require(isinstance(val, dict), path + ".ball", "expected an object")
        _check_keys(val, ("center", "radius"), path + ".ball")
        return {"ball": {
            "center": _as_vector(val.get("center"), path + ".ball.center", dim),
            "radius": _as_float(val.get("radius"), path + ".ball.radius"),
        }}
    if key == "polytope":
        _require(isinstance(val, dict), path + ".polytope", "expected an object")
        _check_keys(val, ("halfspaces",), path + ".polytope")
        hs = val.get("halfspaces")
        _require(isinstance(hs, list) and hs, path + ".polytope.halfspaces", "expected [[normal, offset], ...]")
        out = []
        for i, item in enumerate(hs):
            _require(isinstance(item, list) and len(item) == 2, f"{path}.polytope.halfspaces[{i}]", "expected [normal, offset]")
            out.append([_as_vector(item[0], f"{path}.polytope.halfspaces[{i}][0]", dim),
                        _as_float(item[1], f"{path}.polytope.halfspaces[{i}][1]")])
        return {"polytope": {"halfspaces": out}}
    if key == "halfspace":
        _require(isinstance(val, dict), path + ".halfspace", "expected an object")
        _check_keys(val, ("normal", "offset"), path + ".halfspace")
        return {"halfspace": {
            "normal": _as_vector(val.get("normal"), path + ".halfspace.normal", dim),
            "offset": _as_float(val.get("offset"), path + ".halfspace.offset"),
        }}
    if key == "complement":
        return {"complement": normalize_set(val, dim, path + ".complement")}
    inner = val
    _require(isinstance(inner, list) and len(inner) == 2, path + ".intersect", "expected [set, set]")
    return {"intersect": [normalize_set(inner[0], dim, path + ".intersect[0]"),
                          normalize_set(inner[1], dim, path + ".intersect[1]")]}


def build_region(norm_block):
    key = next(iter(norm_block))
    val = norm_block[key]
    if key == "intervals":
        return geo.Intervals1D([tuple(ab) for ab in val])
    if key == "ball":
        return geo.Ball(val["center"], val["radius"])
    if key == "polytope":
        A = np.array([h[0] for h in val["halfspaces"]])
        b = np.array([h[1] for h in val["halfspaces"]])
        return geo.ConvexPolytope(A, b)
    if key == "halfspace":
        return geo.Halfspace(val["normal"], val["offset"])
    if key == "complement":
        return geo.Complement(build_region(val))
    return geo.Intersection(build_region(val[0]), build_region(val[1]))


def normalize_domain(block, dim, path="domain"):
    _require(isinstance(block, dict) and len(block) == 1, path, "expected {'whole_space': dim} or {'bounded': set}")
    if "whole_space" in block:
        d = _as_int(block["whole_space"], path + ".whole_space")
        _require(d == dim, path + ".whole_space", f"must equal kernel dim {dim}")
        return {"whole_space": d}
    _require("bounded" in block, path, "expected whole_space or bounded")
    inner = normalize_set(block["bounded"], dim, path + ".bounded")
    _require(next(iter(inner)) in ("ball", "polytope"), path + ".bounded",
             "bounded domains must be balls or polytopes")
    return {"bounded": inner}


def build_domain(norm_block) -> geo.Domain:
    if "whole_space" in norm_block:
        return geo.Domain.whole_space(norm_block["whole_space"])
    return geo.Domain.bounded(build_region(norm_block["bounded"]))


# ---------------------------------------------------------------------------
# engine block

_ENGINE_KEYS = ("engine", "n_lines", "n_pairs", "seed", "threads", "r_min", "r_max_factor", "truncation_target")


def normalize_engine(block, path="engine"):
    _require(isinstance(block, dict), path, "expected an object")
    _check_keys(block, _ENGINE_KEYS, path)
    out = {}
    engine = block.get("engine", "slicing")
    _require(engine in ("exact1d", "slicing", "montecarlo"), path + ".engine",
             "must be exact1d | slicing | montecarlo")
    out["engine"] = engine
    for key in ("n_lines", "n_pairs", "seed", "threads"):
        if key in block:
            out[key] = _as_int(block[key], f"{path}.{key}")
            _require(out[key] >= (0 if key == "seed" else 1), f"{path}.{key}", "must be positive")
    for key in ("r_min", "r_max_factor", "truncation_target"):
        if key in block:
            out[key] = _as_float(block[key], f"{path}.{key}")
    return out


# ---------------------------------------------------------------------------
# whole config

def parse_config(raw: dict) -> dict:
    _require(isinstance(raw, dict), "config", "top level must be an object")
    _check_keys(raw, _TOP_KEYS, "config")
    experiment = raw.get("experiment")
    _require(experiment in EXPERIMENTS, "config.experiment", f"must be one of {EXPERIMENTS}")
    cfg = {"experiment": experiment}
    _require("kernel" in raw or experiment == "minimize", "config.kernel", "kernel block is required")
    if "kernel" in raw:
        cfg["kernel"] = normalize_kernel(raw["kernel"])
        dim = cfg["kernel"]["dim"]
    if experiment in ("perimeter", "sweep"):
        _require("set" in raw, "config.set", "required for this experiment")
        cfg["set"] = normalize_set(raw["set"], dim)
        _require("domain" in raw, "config.domain", "required for this experiment")
        cfg["domain"] = normalize_domain(raw["domain"], dim)
        cfg["engine"] = normalize_engine(raw.get("engine", {}))
    if experiment == "perimeter":
        _require("s" in raw, "config.s", "required")
        cfg["s"] = _as_float(raw["s"], "config.s")
        _require(0 < cfg["s"] < 1, "config.s", "must lie in (0,1)")
    if experiment == "sweep":
        grid = raw.get("s_grid")
        _require(isinstance(grid, list) and len(grid) >= 3, "config.s_grid", "need at least 3 points")
        cfg["s_grid"] = [_as_float(v, "config.s_grid") for v in grid]
        _require(all(0 < s < 1 for s in cfg["s_grid"]), "config.s_grid", "grid must lie in (0,1)")
        if "tolerance" in raw:
            cfg["tolerance"] = _as_float(raw["tolerance"], "config.tolerance")
    if experiment == "validate-kernel":
        block = raw.get("validate", {})
        _check_keys(block, ("s_samples", "tol", "z_count"), "config.validate")
        cfg["validate"] = {
            "s_samples": [_as_float(v, "config.validate.s_samples") for v in block.get("s_samples", [0.3, 0.5, 0.7, 0.9])],
            "tol": _as_float(block.get("tol", 1e-9), "config.validate.tol"),
            "z_count": _as_int(block.get("z_count", 64), "config.validate.z_count"),
        }
    if experiment == "moment-norm":
        dirs = raw.get("directions")
        _require(isinstance(dirs, list) and dirs, "config.directions", "expected a list of vectors")
        cfg["directions"] = [_as_vector(v, f"config.directions[{i}]", dim) for i, v in enumerate(dirs)]
        engine = raw.get("moment_engine", "auto")
        _require(engine in ("auto", "exact", "quadrature", "montecarlo"), "config.moment_engine", "bad engine")
        cfg["moment_engine"] = engine
        if "tolerance" in raw:
            cfg["tolerance"] = _as_float(raw["tolerance"], "config.tolerance")
    if experiment == "lemmas":
        lemma = raw.get("lemma")
        _require(lemma in ("boundary-term", "halfspace-cube", "strip-bound", "additivity", "coarea"),
                 "config.lemma", "unknown lemma experiment")
        cfg["lemma"] = lemma
        cfg["engine"] = normalize_engine(raw.get("engine", {}))
        if lemma in ("boundary-term", "halfspace-cube"):
            grid = raw.get("s_grid")
            _require(isinstance(grid, list) and len(grid) >= 3, "config.s_grid", "need at least 3 points")
            cfg["s_grid"] = [_as_float(v, "config.s_grid") for v in grid]
            if "tolerance" in raw:
                cfg["tolerance"] = _as_float(raw["tolerance"], "config.tolerance")
        if lemma == "strip-bound":
            cfg["s"] = _as_float(raw.get("s"), "config.s")
            cfg["delta1"] = _as_float(raw.get("delta1"), "config.delta1")
            cfg["delta2"] = _as_float(raw.get("delta2"), "config.delta2")
        if lemma == "additivity":
            cfg["s"] = _as_float(raw.get("s"), "config.s")
            for key in ("set", "omega1", "omega2"):
                _require(key in raw, f"config.{key}", "required")
            cfg["set"] = normalize_set(raw["set"], dim)
            cfg["omega1"] = normalize_set(raw["omega1"], dim, "config.omega1")
            cfg["omega2"] = normalize_set(raw["omega2"], dim, "config.omega2")
        if lemma == "coarea":
            _require(dim == 1, "config.kernel.dim", "coarea experiment requires dimension 1")
            cfg["s"] = _as_float(raw.get("s"), "config.s")
            levels = raw.get("levels")
            _require(isinstance(levels, list) and levels, "config.levels", "expected [[value, intervals], ...]")
            out = []
            for i, lv in enumerate(levels):
                _require(isinstance(lv, list) and len(lv) == 2, f"config.levels[{i}]", "expected [value, intervals]")
                value = _as_float(lv[0], f"config.levels[{i}][0]")
                ivs = normalize_set({"intervals": lv[1]}, 1, f"config.levels[{i}][1]")
                out.append([value, ivs["intervals"]])
            cfg["levels"] = out
    if experiment == "minimize":
        block = raw.get("minimize")
        _require(isinstance(block, dict), "config.minimize", "expected an object")
        _check_keys(block, ("lo", "hi", "shape", "omega_lo", "omega_hi", "exterior", "s_list", "kernel", "seed"), "config.minimize")
        kernel = normalize_kernel(block.get("kernel", raw.get("kernel")), "config.minimize.kernel")
        dim = kernel["dim"]
        cfg["kernel"] = kernel
        cfg["minimize"] = {
            "lo": _as_vector(block.get("lo"), "config.minimize.lo", dim),
            "hi": _as_vector(block.get("hi"), "config.minimize.hi", dim),
            "shape": [_as_int(v, "config.minimize.shape") for v in block.get("shape", [])],
            "omega_lo": _as_vector(block.get("omega_lo"), "config.minimize.omega_lo", dim),
            "omega_hi": _as_vector(block.get("omega_hi"), "config.minimize.omega_hi", dim),
            "exterior": normalize_set(block.get("exterior"), dim, "config.minimize.exterior"),
            "s_list": [_as_float(v, "config.minimize.s_list") for v in block.get("s_list", [])],
            "seed": _as_int(block.get("seed", 0), "config.minimize.seed"),
        }
        _require(len(cfg["minimize"]["shape"]) == dim, "config.minimize.shape", f"expected {dim} entries")
        _require(cfg["minimize"]["s_list"], "config.minimize.s_list", "must be nonempty")
    return cfg


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}")
    return parse_config(raw)


def config_digest(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode()).hexdigest()
