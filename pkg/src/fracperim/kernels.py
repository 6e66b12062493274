"""Quasi-norms and the anisotropic kernel families built from them.

A kernel k_s(z) = |z|^{-(n+s)} is determined by a gauge |.| that is
positively 1-homogeneous, origin symmetric and comparable to the Euclidean
norm.  Everything downstream (integration engines, moment norms) consumes
gauges through the vectorized evaluator stored on :class:`QuasiNorm`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "QuasiNorm",
    "KernelFamily",
    "ValidationReport",
    "euclidean_gauge",
    "lp_gauge",
    "quasi_norm_from_convex_body",
    "gauge_from_expression",
    "kernel_from_gauge",
    "gauge_from_kernel",
    "constant_family",
    "validate_hypotheses",
    "fibonacci_directions",
]


def _as_points(v, dim: int) -> np.ndarray:
    """Coerce input to an (..., dim) float array."""
    a = np.asarray(v, dtype=float)
    if a.shape == (dim,) or (a.ndim >= 1 and a.shape[-1] == dim):
        return a
    if dim == 1 and a.ndim == 0:
        return a.reshape(1)
    raise ValueError(f"expected points with last axis {dim}, got shape {a.shape}")


@dataclass(frozen=True)
class QuasiNorm:
    """Positively 1-homogeneous, origin-symmetric gauge on R^dim.

    ``gauge`` is a pure function mapping (..., dim) arrays to (...) values.
    ``tau`` is a declared two-sided Euclidean comparability constant:
    (1/tau)|v|_2 <= gauge(v) <= tau |v|_2.
    """

    dim: int
    gauge: Callable[[np.ndarray], np.ndarray]
    tau: float
    label: str = "gauge"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.tau < 1.0:
            raise ValueError("tau must be >= 1")

    def __call__(self, v) -> np.ndarray:
        pts = _as_points(v, self.dim)
        if pts.shape == (self.dim,):
            return float(self.gauge(pts[None, :])[0])
        return np.asarray(self.gauge(pts), dtype=float)


@dataclass(frozen=True)
class KernelFamily:
    """Family s -> k_s(z) = gauge_at(s)(z)^{-(n+s)} with a pointwise limit gauge.

    ``c`` is the declared uniform Euclidean comparability constant of the
    kernels over s in (0,1); it is validated, not derived.
    """

    dim: int
    gauge_at: Callable[[float], QuasiNorm]
    limit_gauge: QuasiNorm
    c: float

    def __post_init__(self):
        if self.c < 1.0:
            raise ValueError("comparability constant c must be >= 1")
        if self.limit_gauge.dim != self.dim:
            raise ValueError("limit gauge dimension mismatch")

    def kernel_at(self, s: float) -> Callable[[np.ndarray], np.ndarray]:
        return kernel_from_gauge(self.gauge_at(s), s)


def euclidean_gauge(dim: int) -> QuasiNorm:
    return QuasiNorm(dim, lambda v: np.linalg.norm(v, axis=-1), tau=1.0, label="euclidean")


def lp_gauge(dim: int, p: float) -> QuasiNorm:
    """Gauge |v|_p.  tau is the standard norm-equivalence constant."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == math.inf:
        tau = dim ** 0.5
        return QuasiNorm(dim, lambda v: np.max(np.abs(v), axis=-1), tau=tau, label="linf")
    tau = dim ** abs(1.0 / p - 0.5)
    return QuasiNorm(
        dim,
        lambda v: np.sum(np.abs(v) ** p, axis=-1) ** (1.0 / p),
        tau=max(tau, 1.0),
        label=f"l{p:g}",
    )


def _symmetrize_halfspaces(halfspaces, dim: int, tol: float = 1e-9):
    """Validate an origin-symmetric H-representation {x : a_i.x <= b_i}.

    Every halfspace must have a mirror (-a, b) within tolerance after
    normalizing a to unit length; all b must be positive (origin interior).
    Returns unit normals A (m, dim) and offsets b (m,).
    """
    A = np.asarray([h[0] for h in halfspaces], dtype=float).reshape(-1, dim)
    b = np.asarray([h[1] for h in halfspaces], dtype=float)
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms <= 0):
        raise ValueError("halfspace with zero normal vector")
    A = A / norms[:, None]
    b = b / norms
    if np.any(b <= tol):
        raise ValueError("origin is not interior to the body")
    for i in range(len(b)):
        diff = np.linalg.norm(A + A[i], axis=1) + np.abs(b - b[i])
        if not np.any(diff < 1e-6):
            raise ValueError("body is not origin-symmetric (unmatched halfspace)")
    return A, b


def quasi_norm_from_convex_body(
    halfspaces=None, vertices=None, dim: int | None = None, label: str = "polytope"
) -> QuasiNorm:
    """Minkowski gauge of a bounded origin-symmetric convex body.

    The body is given either in H-representation (list of (a, b) with
    a.x <= b) or as a symmetric vertex cloud.  For H-representations the
    gauge is max_i a_i.x / b_i.
    """
    if (halfspaces is None) == (vertices is None):
        raise ValueError("give exactly one of halfspaces or vertices")
    if vertices is not None:
        V = np.asarray(vertices, dtype=float)
        if dim is None:
            dim = V.shape[1]
        for v in V:
            if not np.any(np.linalg.norm(V + v, axis=1) < 1e-9 * (1 + np.linalg.norm(v))):
                raise ValueError("body is not origin-symmetric (unmatched vertex)")
        from scipy.spatial import ConvexHull

        hull = ConvexHull(V)
        # hull equations: normal.x + offset <= 0  =>  a.x <= b with b = -offset
        halfspaces = [(eq[:-1], -eq[-1]) for eq in hull.equations]
    if dim is None:
        raise ValueError("dim is required with halfspaces input")
    A, b = _symmetrize_halfspaces(halfspaces, dim)
    ratios = A / b[:, None]

    def gauge(v: np.ndarray) -> np.ndarray:
        return np.max(v @ ratios.T, axis=-1)

    # sup over the sphere of the gauge, and 1/(inscribed gauge minimum)
    upper = float(np.max(np.linalg.norm(ratios, axis=1)))
    # circumradius: solve max |x| s.t. gauge(x) = 1 via the vertex set
    from scipy.spatial import HalfspaceIntersection
    from scipy.optimize import linprog  # noqa: F401  (import here keeps scipy optional paths together)

    hs = np.hstack([A, -b[:, None]])
    inter = HalfspaceIntersection(hs, np.zeros(dim))
    circum = float(np.max(np.linalg.norm(inter.intersections, axis=1)))
    tau = max(upper, circum, 1.0)
    return QuasiNorm(dim, gauge, tau=tau, label=label)


_EXPR_NAMES = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "maximum": np.maximum,
    "minimum": np.minimum,
    "hypot": np.hypot,
    "sin": np.sin,
    "cos": np.cos,
    "arctan2": np.arctan2,
    "exp": np.exp,
    "log": np.log,
    "pi": math.pi,
    "where": np.where,
}


def gauge_from_expression(expr: str, dim: int, tau: float, label: str = "custom") -> QuasiNorm:
    """Gauge from a numpy expression in x0..x{dim-1} and r (Euclidean norm).

    The expression is evaluated with a restricted namespace; the caller is
    responsible for 1-homogeneity and symmetry (validate_hypotheses checks).
    """
    code = compile(expr, "<gauge>", "eval")

    def gauge(v: np.ndarray) -> np.ndarray:
        ns = {f"x{i}": v[..., i] for i in range(dim)}
        ns["r"] = np.linalg.norm(v, axis=-1)
        ns.update(_EXPR_NAMES)
        out = eval(code, {"__builtins__": {}}, ns)
        return np.broadcast_to(np.asarray(out, dtype=float), v.shape[:-1]).copy()

    return QuasiNorm(dim, gauge, tau=tau, label=label)


def kernel_from_gauge(g: QuasiNorm, s: float) -> Callable[[np.ndarray], np.ndarray]:
    """k_s(z) = g(z)^{-(n+s)}; evaluation at z = 0 is a hard error."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    exponent = g.dim + s

    def kernel(z) -> np.ndarray:
        pts = _as_points(z, g.dim)
        vals = g(pts)
        if np.any(np.asarray(vals) == 0.0):
            raise ValueError("kernel evaluated at z = 0")
        return np.asarray(vals) ** (-exponent)

    return kernel


def gauge_from_kernel(k: Callable, dim: int, s: float, tau: float | None = None) -> QuasiNorm:
    """Invert kernel_from_gauge: gauge(z) = k(z)^{-1/(n+s)}.

    Samples a deterministic direction set to estimate tau when not given and
    to reject kernels that are nonpositive somewhere.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    exponent = dim + s

    def gauge(v: np.ndarray) -> np.ndarray:
        kv = np.asarray(k(v), dtype=float)
        if np.any(kv <= 0.0):
            raise ValueError("kernel is nonpositive at a sample point")
        return kv ** (-1.0 / exponent)

    if tau is None:
        dirs = fibonacci_directions(dim, 64)
        vals = gauge(dirs)
        tau = float(max(np.max(vals), np.max(1.0 / vals), 1.0))
    return QuasiNorm(dim, gauge, tau=tau, label="from-kernel")


def constant_family(gauge: QuasiNorm, c: float | None = None) -> KernelFamily:
    """Family whose gauge does not depend on s (the common case)."""
    if c is None:
        c = gauge.tau ** (gauge.dim + 1)
    return KernelFamily(gauge.dim, lambda s: gauge, gauge, c=c)


def fibonacci_directions(dim: int, count: int) -> np.ndarray:
    """Deterministic, roughly equidistributed unit vectors (count, dim)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]] * ((count + 1) // 2))[:count]
    if dim == 2:
        golden = (1 + math.sqrt(5)) / 2
        ang = 2 * math.pi * np.arange(count) / golden
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 3:
        i = np.arange(count) + 0.5
        phi = math.pi * (3 - math.sqrt(5)) * i
        z = 1 - 2 * i / count
        r = np.sqrt(np.maximum(0.0, 1 - z * z))
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    # higher dims: Halton-like lattice pushed through the sphere
    rng = np.random.Generator(np.random.Philox(key=[dim, count]))
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class ValidationReport:
    """Numeric check of the kernel hypotheses on a sample grid."""

    symmetry_violation: float
    homogeneity_violation: float
    empirical_c: float
    declared_c: float
    tol: float
    failures: list = field(default_factory=list)
    limit_deviation_trend: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "symmetry_violation": self.symmetry_violation,
            "homogeneity_violation": self.homogeneity_violation,
            "empirical_c": self.empirical_c,
            "declared_c": self.declared_c,
            "tol": self.tol,
            "failures": list(self.failures),
            "limit_deviation_trend": [list(t) for t in self.limit_deviation_trend],
            "passed": self.passed,
        }


def validate_hypotheses(fam: KernelFamily, s_samples, z_samples, tol: float = 1e-9) -> ValidationReport:
    """Check symmetry, homogeneity and two-sided comparability on a grid.

    Homogeneity is probed at scale factors 0.5, 2 and 10.  The tightest
    constant that makes the Euclidean sandwich hold over the grid is
    reported as ``empirical_c`` and compared to the declared bound.
    The pointwise approach of gauge_at(s) to the limit gauge is reported
    as an informational trend on a fixed direction x radius sample.
    """
    s_samples = [float(s) for s in s_samples]
    if any(not 0 < s < 1 for s in s_samples):
        raise ValueError("all s samples must lie in (0,1)")
    Z = np.asarray(z_samples, dtype=float).reshape(-1, fam.dim)
    if np.any(np.linalg.norm(Z, axis=1) == 0):
        raise ValueError("z samples must be nonzero")

    sym = 0.0
    hom = 0.0
    emp_c = 1.0
    for s in s_samples:
        k = fam.kernel_at(s)
        kz = k(Z)
        sym = max(sym, float(np.max(np.abs(k(-Z) - kz) / kz)))
        for lam in (0.5, 2.0, 10.0):
            pred = lam ** (-(fam.dim + s)) * kz
            hom = max(hom, float(np.max(np.abs(k(lam * Z) - pred) / pred)))
        ratio = kz * np.linalg.norm(Z, axis=1) ** (fam.dim + s)
        emp_c = max(emp_c, float(np.max(ratio)), float(np.max(1.0 / ratio)))

    trend = []
    dirs = fibonacci_directions(fam.dim, 32)
    probe = np.concatenate([r * dirs for r in (0.5, 1.0, 2.0)])
    lim = fam.limit_gauge(probe)
    for s in (0.9, 0.99, 0.999):
        gs = fam.gauge_at(s)(probe)
        trend.append((s, float(np.max(np.abs(gs - lim) / lim))))

    failures = []
    if sym > tol:
        failures.append("h.0")
    if hom > tol:
        failures.append("h.1")
    if emp_c > fam.c * (1.0 + tol):
        failures.append("h.2")
    return ValidationReport(
        symmetry_violation=sym,
        homogeneity_violation=hom,
        empirical_c=emp_c,
        declared_c=fam.c,
        tol=tol,
        failures=failures,
        limit_deviation_trend=trend,
    )
