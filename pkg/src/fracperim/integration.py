"""Locality defects and fractional perimeters by three engines.

* exact1d   -- closed-form pair formulas for interval unions on the line
* slicing   -- Monte Carlo over lines; each line contributes the exact 1-D
               energy of the sliced sets, weighted by the direction gauge
* montecarlo -- direct importance-sampled double integral with certified
               truncation bounds

All randomness flows from a 64-bit seed through counter-based Philox
streams keyed by (seed, chunk index); partial sums are combined in fixed
chunk order, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .geometry import (
    Ball,
    Complement,
    ConvexPolytope,
    Domain,
    Halfspace,
    Intersection,
    Intervals1D,
    ball_volume,
    sphere_surface,
)
from .kernels import KernelFamily

__all__ = [
    "EstimateResult",
    "LineMeasureSampler",
    "interval_defect_exact",
    "perimeter_1d_exact",
    "locality_defect_slicing",
    "perimeter_slicing",
    "locality_defect_mc",
    "perimeter_full",
    "locality_defect",
    "p1_on_region",
    "additivity_defect_check",
    "coarea_check_1d",
]

CHUNK = 65536
_INF = math.inf


@dataclass
class EstimateResult:
    """Universal return of all integral operations."""

    value: float
    std_error: float
    engine: str
    samples: int
    seed: int
    s: float
    decomposition: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("estimate value must be finite")
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "std_error": self.std_error,
            "engine": self.engine,
            "samples": self.samples,
            "seed": self.seed,
            "s": self.s,
        }
        if self.decomposition is not None:
            out["p1"], out["p2"] = self.decomposition
        if self.meta:
            out["meta"] = self.meta
        return out


# ---------------------------------------------------------------------------
# exact 1-D pair formulas

def _pair_terms(left, right):
    """Signed g(t) = t^{1-s} term list for two disjoint intervals.

    ``left`` must lie to the left of ``right``.  Terms involving an
    infinite endpoint cancel in conjugate pairs and are dropped; a pair of
    opposite half-lines is divergent.
    """
    l0, l1 = left
    r0, r1 = right
    if l0 == -_INF and r1 == _INF:
        raise ValueError("divergent interaction of opposite half-lines")
    terms = []
    if l0 > -_INF and r1 < _INF:
        candidates = [(1.0, r0 - l0), (-1.0, r0 - l1), (-1.0, r1 - l0), (1.0, r1 - l1)]
    elif l0 == -_INF:
        candidates = [(1.0, r1 - l1), (-1.0, r0 - l1)]
    else:  # r1 == +inf
        candidates = [(1.0, r0 - l0), (-1.0, r0 - l1)]
    for c, d in candidates:
        if d > 0:
            terms.append((c, d))
    return terms


def _ordered_pair_terms(I, J, tol=1e-12):
    a, b = I
    c, d = J
    span = max(abs(x) for x in (a, b, c, d) if math.isfinite(x)) if any(
        math.isfinite(x) for x in (a, b, c, d)
    ) else 1.0
    eps = tol * max(span, 1.0)
    if b <= c + eps:
        return _pair_terms((a, b), (c, d))
    if d <= a + eps:
        return _pair_terms((c, d), (a, b))
    raise ValueError("intervals overlap with positive measure")


def interval_defect_exact(A: Intervals1D, B: Intervals1D, s: float) -> float:
    """Exact double integral of |x-y|^{-1-s} over A x B for disjoint unions."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    if A.intersect(B).measure() > 0:
        raise ValueError("sets overlap with positive measure")
    total = 0.0
    for I in A.intervals:
        for J in B.intervals:
            for coef, dist in _ordered_pair_terms(I, J):
                total += coef * dist ** (1.0 - s)
    return total / (s * (1.0 - s))


def _intervals_of(E, dim_hint=1) -> Intervals1D:
    iv = geo._to_intervals_1d(E)
    if iv is None:
        raise ValueError("set is not representable as a 1-D interval union")
    return iv


def perimeter_1d_exact(E, s: float, domain: Domain | None = None) -> EstimateResult:
    """Exact fractional perimeter of an interval union.

    Whole-line domain requires E or its complement to be bounded; bounded
    1-D domains assemble the interior and cross-boundary parts from the
    same pair formula.
    """
    iv = _intervals_of(E)
    if domain is None:
        domain = Domain.whole_space(1)
    comp = iv.complement()
    if domain.is_whole:
        if iv.is_bounded():
            value = interval_defect_exact(iv, comp, s)
        elif comp.is_bounded():
            value = interval_defect_exact(comp, iv, s)
        else:
            raise ValueError("fractional perimeter diverges: set and complement unbounded")
        return EstimateResult(value, 0.0, "exact1d", 0, 0, s, decomposition=(value, 0.0))
    om = _intervals_of(domain.region)
    om_c = om.complement()
    p1 = interval_defect_exact(iv.intersect(om), comp.intersect(om), s)
    p2 = interval_defect_exact(iv.intersect(om), comp.intersect(om_c), s)
    p2 += interval_defect_exact(comp.intersect(om), iv.intersect(om_c), s)
    return EstimateResult(p1 + p2, 0.0, "exact1d", 0, 0, s, decomposition=(p1, p2))


# ---------------------------------------------------------------------------
# line measure sampler

@dataclass(frozen=True)
class LineMeasureSampler:
    """Samples lines meeting a bounding ball under the invariant measure.

    A line is (u, x) with u uniform on the sphere and x uniform on the
    (dim-1)-disk of the bounding radius inside u-perp, centered at the
    projection of the bounding center.  The measure of the sampled line
    set is normalization(), including the 1/2 that accounts for the (u,-u)
    double cover.
    """

    dim: int
    center: tuple
    radius: float
    seed: int

    def normalization(self) -> float:
        n = self.dim
        return 0.5 * sphere_surface(n) * ball_volume(n - 1) * self.radius ** (n - 1)

    def sample(self, chunk_index: int, count: int):
        rng = np.random.Generator(
            np.random.Philox(key=[np.uint64(self.seed), np.uint64(chunk_index)])
        )
        c = np.asarray(self.center, dtype=float)
        if self.dim == 2:
            phi = rng.random(count) * (2 * math.pi)
            U = np.stack([np.cos(phi), np.sin(phi)], axis=1)
            V = np.stack([-np.sin(phi), np.cos(phi)], axis=1)
            off = (2.0 * rng.random(count) - 1.0) * self.radius
            proj = c[None, :] - (U @ c)[:, None] * U
            X = proj + off[:, None] * V
            return U, X
        if self.dim == 3:
            g = rng.standard_normal((count, 3))
            U = g / np.linalg.norm(g, axis=1, keepdims=True)
            helper = np.where(np.abs(U[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
            V1 = np.cross(U, helper)
            V1 /= np.linalg.norm(V1, axis=1, keepdims=True)
            V2 = np.cross(U, V1)
            r = self.radius * np.sqrt(rng.random(count))
            beta = rng.random(count) * (2 * math.pi)
            proj = c[None, :] - (U @ c)[:, None] * U
            X = proj + r[:, None] * (np.cos(beta)[:, None] * V1 + np.sin(beta)[:, None] * V2)
            return U, X
        raise ValueError("line sampling supports dimensions 2 and 3")


# ---------------------------------------------------------------------------
# vectorized convex traces and pair values

def _canonical(region):
    """Collapse double complements and complement-of-halfspace."""
    if isinstance(region, Complement):
        inner = _canonical(region.region)
        if isinstance(inner, Complement):
            return _canonical(inner.region)
        if isinstance(inner, Halfspace):
            return Halfspace(tuple(-c for c in inner.normal), -inner.offset)
        return Complement(inner)
    if isinstance(region, Intersection):
        return Intersection(_canonical(region.first), _canonical(region.second))
    return region


def _is_convex_traceable(region) -> bool:
    region = _canonical(region)
    if isinstance(region, (Ball, Halfspace, ConvexPolytope)):
        return True
    if isinstance(region, Intersection):
        return _is_convex_traceable(region.first) and _is_convex_traceable(region.second)
    return False


def _convex_trace_batch(region, U, X):
    """(t0, t1) arrays per line; empty encoded as t0=+inf, t1=-inf."""
    region = _canonical(region)
    n = len(U)
    if isinstance(region, Ball):
        d = X - np.asarray(region.center)
        m = -np.einsum("ij,ij->i", U, d)
        disc = m * m - (np.einsum("ij,ij->i", d, d) - region.radius**2)
        hit = disc > 0
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = np.where(hit, m - sq, _INF)
        t1 = np.where(hit, m + sq, -_INF)
        return t0, t1
    if isinstance(region, Halfspace):
        t0 = np.full(n, -_INF)
        t1 = np.full(n, _INF)
        _clip_halfspace(t0, t1, U, X, np.asarray(region.normal), region.offset)
        return t0, t1
    if isinstance(region, ConvexPolytope):
        t0 = np.full(n, -_INF)
        t1 = np.full(n, _INF)
        for a, b in zip(region.A, region.b):
            _clip_halfspace(t0, t1, U, X, a, b)
        return t0, t1
    if isinstance(region, Intersection):
        a0, a1 = _convex_trace_batch(region.first, U, X)
        b0, b1 = _convex_trace_batch(region.second, U, X)
        return np.maximum(a0, b0), np.minimum(a1, b1)
    raise ValueError(f"no vectorized trace for {type(region).__name__}")


def _clip_halfspace(t0, t1, U, X, normal, offset):
    du = U @ normal
    dx = offset - X @ normal
    parallel = np.abs(du) < 1e-14
    ratio = dx / np.where(parallel, 1.0, du)
    np.maximum(t0, np.where(parallel | (du > 0), -_INF, ratio), out=t0)
    np.minimum(t1, np.where(parallel | (du < 0), _INF, ratio), out=t1)
    infeasible = parallel & (dx < 0)
    t0[infeasible] = _INF
    t1[infeasible] = -_INF


def _pair_value_vec(l0, l1, r0, r1, one_minus_s):
    """Vectorized pair formula (without the 1/(s(1-s)) prefactor).

    The left interval must lie left of the right one elementwise.  Terms
    with an infinite distance drop in cancelling pairs; an opposite pair
    of half-lines raises.
    """
    valid = (l1 > l0) & (r1 > r0)
    if np.any(valid & np.isneginf(l0) & np.isposinf(r1)):
        raise ValueError("divergent interaction of opposite half-lines")
    out = np.zeros(len(l0))
    with np.errstate(invalid="ignore"):
        for sign, d in (
            (1.0, r0 - l0),
            (-1.0, r0 - l1),
            (-1.0, r1 - l0),
            (1.0, r1 - l1),
        ):
            mask = valid & np.isfinite(d) & (d > 0)
            if np.any(mask):
                out[mask] += sign * d[mask] ** one_minus_s
    return out


def _p1_p2_values_fast(e0, e1, w0, w1, one_minus_s, whole_domain):
    """Per-line P1/P2 pair-formula sums for convex E-trace and domain-trace."""
    a0 = np.maximum(e0, w0)
    a1 = np.minimum(e1, w1)
    b1l_0, b1l_1 = w0, np.minimum(e0, w1)
    b1r_0, b1r_1 = np.maximum(e1, w0), w1
    p1 = _pair_value_vec(b1l_0, b1l_1, a0, a1, one_minus_s)
    p1 += _pair_value_vec(a0, a1, b1r_0, b1r_1, one_minus_s)
    if whole_domain:
        return p1, np.zeros_like(p1)
    b2l_0 = np.full_like(e0, -_INF)
    b2l_1 = np.minimum(e0, w0)
    b2r_0 = np.maximum(e1, w1)
    b2r_1 = np.full_like(e0, _INF)
    b3l_0, b3l_1 = e0, np.minimum(e1, w0)
    b3r_0, b3r_1 = np.maximum(e0, w1), e1
    p2 = _pair_value_vec(b2l_0, b2l_1, a0, a1, one_minus_s)
    p2 += _pair_value_vec(a0, a1, b2r_0, b2r_1, one_minus_s)
    p2 += _pair_value_vec(b1l_0, b1l_1, b3r_0, b3r_1, one_minus_s)
    p2 += _pair_value_vec(b3l_0, b3l_1, b1r_0, b1r_1, one_minus_s)
    return p1, p2


def _p1_p2_values_slow(E, domain_region, U, X, one_minus_s):
    """Per-line P1/P2 sums via exact interval algebra (any traceable sets)."""
    n = len(U)
    p1 = np.zeros(n)
    p2 = np.zeros(n)
    whole = domain_region is None
    for i in range(n):
        e = E.trace(U[i], X[i])
        w = geo.WHOLE_LINE if whole else domain_region.trace(U[i], X[i])
        e_c = e.complement()
        a = e.intersect(w)
        p1[i] = _terms_sum(a, e_c.intersect(w), one_minus_s)
        if not whole:
            w_c = w.complement()
            p2[i] = _terms_sum(a, e_c.intersect(w_c), one_minus_s)
            p2[i] += _terms_sum(e_c.intersect(w), e.intersect(w_c), one_minus_s)
    return p1, p2


def _terms_sum(A: Intervals1D, B: Intervals1D, one_minus_s: float) -> float:
    total = 0.0
    for I in A.intervals:
        for J in B.intervals:
            for coef, dist in _ordered_pair_terms(I, J):
                total += coef * dist**one_minus_s
    return total


def _defect_values_fast(a_tr, b_tr, one_minus_s):
    a0, a1 = a_tr
    b0, b1 = b_tr
    both = (a1 > a0) & (b1 > b0)
    a_left = a1 <= b0 + 1e-12
    b_left = b1 <= a0 + 1e-12
    bad = both & ~(a_left | b_left)
    if np.any(bad):
        raise ValueError("sets overlap with positive measure on sampled lines")
    l0 = np.where(a_left, a0, b0)
    l1 = np.where(a_left, a1, b1)
    r0 = np.where(a_left, b0, a0)
    r1 = np.where(a_left, b1, a1)
    return _pair_value_vec(l0, l1, r0, r1, one_minus_s)


def _defect_values_slow(A, B, U, X, one_minus_s):
    n = len(U)
    out = np.zeros(n)
    for i in range(n):
        out[i] = _terms_sum(A.trace(U[i], X[i]), B.trace(U[i], X[i]), one_minus_s)
    return out


def _run_chunks(total, worker, threads):
    n_chunks = (total + CHUNK - 1) // CHUNK
    sizes = [min(CHUNK, total - i * CHUNK) for i in range(n_chunks)]
    if threads <= 1:
        return [worker(i, sizes[i]) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futures = [ex.submit(worker, i, sizes[i]) for i in range(n_chunks)]
        return [f.result() for f in futures]


def _gauge_prefactor(fam: KernelFamily, s: float, U):
    return fam.gauge_at(s)(U) ** (-(fam.dim + s))


def _sampler_for(region, seed) -> LineMeasureSampler:
    center, radius = geo.region_circumball(region)
    return LineMeasureSampler(region.dim, tuple(center), radius, seed)


def perimeter_slicing(
    E,
    D: Domain,
    fam: KernelFamily,
    s: float,
    n_lines: int,
    seed: int,
    threads: int = 1,
) -> EstimateResult:
    """Blaschke-Petkantschin slicing estimate of the full perimeter.

    Lines are sampled against the circumball of E (whole space) or of the
    domain; each line contributes the exact 1-D pair-formula energy of the
    sliced sets times the direction weight |u|^{-(n+s)}.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    n = fam.dim
    if n == 1:
        res = perimeter_full_exact1d(E, D, s)
        res.engine = "slicing"
        return res
    if D.is_whole:
        bound_region = E
    else:
        bound_region = D.region
    try:
        sampler = _sampler_for(bound_region, seed)
    except ValueError:
        raise ValueError("slicing requires a bounded set or a bounded domain")
    one_minus_s = 1.0 - s
    fast = _is_convex_traceable(E) and (D.is_whole or _is_convex_traceable(D.region))
    w_region = None if D.is_whole else D.region

    def worker(chunk_idx, count):
        U, X = sampler.sample(chunk_idx, count)
        pref = _gauge_prefactor(fam, s, U)
        if fast:
            e0, e1 = _convex_trace_batch(E, U, X)
            if D.is_whole:
                w0 = np.full(count, -_INF)
                w1 = np.full(count, _INF)
            else:
                w0, w1 = _convex_trace_batch(D.region, U, X)
            p1, p2 = _p1_p2_values_fast(e0, e1, w0, w1, one_minus_s, D.is_whole)
            hits = int(np.sum(e1 > e0))
        else:
            p1, p2 = _p1_p2_values_slow(E, w_region, U, X, one_minus_s)
            hits = int(np.sum((p1 != 0) | (p2 != 0)))
        p1 = p1 * pref
        p2 = p2 * pref
        tot = p1 + p2
        return (
            float(np.sum(p1)),
            float(np.sum(p2)),
            float(np.sum(tot)),
            float(np.sum(tot * tot)),
            hits,
        )

    parts = _run_chunks(n_lines, worker, threads)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    st = sum(p[2] for p in parts)
    st2 = sum(p[3] for p in parts)
    hits = sum(p[4] for p in parts)
    scale = sampler.normalization() / (s * one_minus_s)
    mean_t = st / n_lines
    var_t = max(st2 / n_lines - mean_t**2, 0.0)
    value = scale * mean_t
    std = scale * math.sqrt(var_t / n_lines)
    return EstimateResult(
        value,
        std,
        "slicing",
        n_lines,
        seed,
        s,
        decomposition=(scale * s1 / n_lines, scale * s2 / n_lines),
        meta={"hits": hits, "radius": sampler.radius},
    )


def locality_defect_slicing(
    A,
    B,
    fam: KernelFamily,
    s: float,
    n_lines: int,
    seed: int,
    threads: int = 1,
) -> EstimateResult:
    """Slicing estimate of the locality defect between two disjoint regions."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    n = fam.dim
    if n == 1:
        value = interval_defect_exact(_intervals_of(A), _intervals_of(B), s)
        return EstimateResult(value, 0.0, "slicing", 0, seed, s)
    try:
        sampler = _sampler_for(A, seed)
    except ValueError:
        try:
            sampler = _sampler_for(B, seed)
            A, B = B, A
        except ValueError:
            raise ValueError("locality defect requires at least one bounded set")
    one_minus_s = 1.0 - s
    fast = _is_convex_traceable(A) and _is_convex_traceable(B)

    def worker(chunk_idx, count):
        U, X = sampler.sample(chunk_idx, count)
        pref = _gauge_prefactor(fam, s, U)
        if fast:
            vals = _defect_values_fast(
                _convex_trace_batch(A, U, X), _convex_trace_batch(B, U, X), one_minus_s
            )
        else:
            vals = _defect_values_slow(A, B, U, X, one_minus_s)
        vals = vals * pref
        return float(np.sum(vals)), float(np.sum(vals * vals)), int(np.sum(vals != 0))

    parts = _run_chunks(n_lines, worker, threads)
    sv = sum(p[0] for p in parts)
    sv2 = sum(p[1] for p in parts)
    hits = sum(p[2] for p in parts)
    scale = sampler.normalization() / (s * one_minus_s)
    mean = sv / n_lines
    var = max(sv2 / n_lines - mean**2, 0.0)
    return EstimateResult(
        scale * mean,
        scale * math.sqrt(var / n_lines),
        "slicing",
        n_lines,
        seed,
        s,
        meta={"hits": hits, "radius": sampler.radius},
    )


# ---------------------------------------------------------------------------
# direct Monte Carlo with radial importance sampling

def _bbox_or_none(region):
    try:
        return geo.region_bounding_box(region)
    except ValueError:
        return None


def _perimeter_hint(region) -> float:
    try:
        return geo.classical_perimeter(region, Domain.whole_space(region.dim))
    except ValueError:
        lo, hi = geo.region_bounding_box(region)
        w = hi - lo
        n = len(w)
        total = 0.0
        for i in range(n):
            total += 2.0 * np.prod(np.delete(w, i))
        return 2.0 * float(total)


def _mc_truncated_run(A, B, fam, s, n_pairs, seed, threads, r_min, r_max, lo_a, width_a):
    """One unbiased pass of the truncated estimator; returns (mean, var, hits, wmax)."""
    n = fam.dim
    vol_box_a = float(np.prod(width_a))
    surf = sphere_surface(n)
    Z = (r_min ** (-s) - r_max ** (-s)) / s
    gauge = fam.gauge_at(s)
    exponent = n + s

    def worker(chunk_idx, count):
        rng = np.random.Generator(
            np.random.Philox(key=[np.uint64(seed), np.uint64(chunk_idx)])
        )
        x = lo_a + rng.random((count, n)) * width_a
        in_a = np.asarray(A.contains(x), dtype=bool)
        if n == 1:
            theta = np.where(rng.random(count) < 0.5, -1.0, 1.0)[:, None]
        else:
            g = rng.standard_normal((count, n))
            theta = g / np.linalg.norm(g, axis=1, keepdims=True)
        u = rng.random(count)
        r = (r_min ** (-s) * (1 - u) + r_max ** (-s) * u) ** (-1.0 / s)
        y = x + r[:, None] * theta
        in_b = np.asarray(B.contains(y), dtype=bool)
        hit = in_a & in_b
        w = np.where(hit, vol_box_a * surf * Z * gauge(theta) ** (-exponent), 0.0)
        return float(np.sum(w)), float(np.sum(w * w)), int(np.sum(hit))

    parts = _run_chunks(n_pairs, worker, threads)
    sw = sum(p[0] for p in parts)
    sw2 = sum(p[1] for p in parts)
    hits = sum(p[2] for p in parts)
    mean = sw / n_pairs
    var = max(sw2 / n_pairs - mean**2, 0.0)
    wmax = vol_box_a * surf * Z * fam.c
    return mean, var, hits, wmax


def locality_defect_mc(
    A,
    B,
    fam: KernelFamily,
    s: float,
    n_pairs: int,
    seed: int,
    threads: int = 1,
    r_min: float | None = None,
    r_max_factor: float = 10.0,
    perimeter_hint: float | None = None,
    min_distance: float = 0.0,
    truncation_target: float = 1e-3,
) -> EstimateResult:
    """Importance-sampled estimate of the kernel double integral over A x B.

    x is sampled in A's bounding box (indicator weighting); the offset to y
    has a uniform direction and radial law proportional to r^{-1-s} on
    [r_min, r_max], which makes the hit weight independent of r.

    r_min trades certified truncation bias against hit-rate variance: the
    mass below r_min is bounded through the interface-profile estimate
    c * omega_{n-1} * P(A) * r_min^{1-s}/(1-s) and targeted at
    ``truncation_target`` times a pilot estimate, but r_min is never pushed
    below the radius that keeps the expected hit count usable.  When B is
    unbounded the mass beyond r_max is bounded by c*vol*surf*r_max^{-s}/s.
    Both certified bounds are added to the reported standard error, so the
    result stays honest even where the target is unreachable (s close to 1).
    Sets at distance >= min_distance > r_min carry no lower truncation.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    n = fam.dim
    lo_a, hi_a = geo.region_bounding_box(A)
    width_a = hi_a - lo_a
    vol_box_a = float(np.prod(width_a))
    if vol_box_a <= 0.0:
        return EstimateResult(0.0, 0.0, "montecarlo", 0, seed, s)
    bbox_b = _bbox_or_none(B)
    scale = float(np.linalg.norm(width_a)) or 1.0
    if bbox_b is not None:
        lo = np.minimum(lo_a, bbox_b[0])
        hi = np.maximum(hi_a, bbox_b[1])
        scale = float(np.linalg.norm(hi - lo)) or scale
        r_max = scale
        tail_above = 0.0
    else:
        r_max = r_max_factor * scale
        tail_above = fam.c * vol_box_a * sphere_surface(n) * r_max ** (-s) / s
    if perimeter_hint is None:
        perimeter_hint = _perimeter_hint(A)
    omega = ball_volume(n - 1) if n >= 2 else 1.0
    bias_coef = fam.c * omega * perimeter_hint / (1.0 - s)

    if r_min is None:
        # pilot pass at a coarse r_min to size the integral
        pilot_rmin = max(min_distance, 1e-3 * scale)
        pilot_rmin = min(pilot_rmin, 0.25 * r_max)
        n_pilot = min(n_pairs, max(20_000, n_pairs // 20))
        pilot_mean, _, pilot_hits, _ = _mc_truncated_run(
            A, B, fam, s, n_pilot, seed ^ 0x9E3779B9, threads, pilot_rmin, r_max, lo_a, width_a
        )
        magnitude = abs(pilot_mean) if pilot_hits > 0 else bias_coef * r_max ** (1.0 - s)
        # bias-limited ceiling for r_min
        r_bias = (truncation_target * magnitude / bias_coef) ** (1.0 / (1.0 - s))
        # hit-rate floor: keep the expected number of hits usable
        surf = sphere_surface(n)
        target_hits = max(100.0, 1e-3 * n_pairs)
        r_var = (target_hits * vol_box_a * surf / (n_pairs * max(magnitude, 1e-300) * s)) ** (
            1.0 / s
        )
        r_min = max(min(r_bias, 1e-3 * scale), r_var, 1e-15 * scale)
    r_min = min(r_min, 0.5 * r_max)

    if min_distance > r_min:
        tail_below = 0.0
    else:
        tail_below = bias_coef * r_min ** (1.0 - s)

    mean, var, hits, wmax = _mc_truncated_run(
        A, B, fam, s, n_pairs, seed, threads, r_min, r_max, lo_a, width_a
    )
    sample_std = math.sqrt(var / n_pairs)
    # rare-hit floor: with few hits the empirical variance is unreliable
    poisson_floor = wmax * math.sqrt(hits + 1.0) / n_pairs
    std = max(sample_std, poisson_floor) + tail_below + tail_above
    return EstimateResult(
        mean,
        std,
        "montecarlo",
        n_pairs,
        seed,
        s,
        meta={
            "hits": hits,
            "r_min": r_min,
            "r_max": r_max,
            "truncation_below": tail_below,
            "truncation_above": tail_above,
        },
    )


# ---------------------------------------------------------------------------
# assembled operations

def perimeter_full_exact1d(E, D: Domain, s: float) -> EstimateResult:
    return perimeter_1d_exact(E, s, D)


def perimeter_full(
    E, D: Domain, fam: KernelFamily, s: float, engine_spec: dict, seed: int
) -> EstimateResult:
    """P = P1 + P2 with the requested engine; P2 is identically zero on the
    whole space and is never computed there."""
    spec = dict(engine_spec)
    engine = spec.pop("engine", "slicing")
    threads = int(spec.pop("threads", 1))
    if engine == "exact1d":
        if fam.dim != 1:
            raise ValueError("exact1d engine requires dimension 1")
        res = perimeter_1d_exact(E, s, D)
        res.seed = seed
        return res
    if engine == "slicing":
        n_lines = int(spec.pop("n_lines", 100_000))
        return perimeter_slicing(E, D, fam, s, n_lines, seed, threads=threads)
    if engine == "montecarlo":
        n_pairs = int(spec.pop("n_pairs", 200_000))
        mc_kwargs = {
            k: spec[k] for k in ("r_min", "r_max_factor", "perimeter_hint") if k in spec
        }
        E_c = Complement(E)
        if D.is_whole:
            res = locality_defect_mc(
                E, E_c, fam, s, n_pairs, seed, threads=threads, **mc_kwargs
            )
            res.decomposition = (res.value, 0.0)
            return res
        om = D.region
        a_in = Intersection(E, om)
        b_in = Intersection(E_c, om)
        out = Complement(om)
        p1 = locality_defect_mc(a_in, b_in, fam, s, n_pairs, seed, threads=threads, **mc_kwargs)
        p2a = locality_defect_mc(
            a_in, Intersection(E_c, out), fam, s, n_pairs, seed + 1, threads=threads, **mc_kwargs
        )
        p2b = locality_defect_mc(
            b_in, Intersection(E, out), fam, s, n_pairs, seed + 2, threads=threads, **mc_kwargs
        )
        value = p1.value + p2a.value + p2b.value
        std = math.sqrt(p1.std_error**2 + p2a.std_error**2 + p2b.std_error**2)
        return EstimateResult(
            value,
            std,
            "montecarlo",
            3 * n_pairs,
            seed,
            s,
            decomposition=(p1.value, p2a.value + p2b.value),
        )
    raise ValueError(f"unknown engine '{engine}'")


def locality_defect(
    A, B, fam: KernelFamily, s: float, engine_spec: dict, seed: int
) -> EstimateResult:
    """Engine-dispatched locality defect I(A, B)."""
    spec = dict(engine_spec)
    engine = spec.pop("engine", "slicing")
    threads = int(spec.pop("threads", 1))
    if engine == "exact1d":
        value = interval_defect_exact(_intervals_of(A), _intervals_of(B), s)
        return EstimateResult(value, 0.0, "exact1d", 0, seed, s)
    if engine == "slicing":
        n_lines = int(spec.pop("n_lines", 100_000))
        return locality_defect_slicing(A, B, fam, s, n_lines, seed, threads=threads)
    if engine == "montecarlo":
        n_pairs = int(spec.pop("n_pairs", 200_000))
        mc_kwargs = {
            k: spec[k]
            for k in ("r_min", "r_max_factor", "perimeter_hint", "min_distance")
            if k in spec
        }
        return locality_defect_mc(A, B, fam, s, n_pairs, seed, threads=threads, **mc_kwargs)
    raise ValueError(f"unknown engine '{engine}'")


def p1_on_region(E, region, fam: KernelFamily, s: float, engine_spec: dict, seed: int) -> EstimateResult:
    """Interior term I(E inside region, E^c inside region) for any region."""
    if fam.dim == 1:
        e = _intervals_of(E)
        w = _intervals_of(region)
        value = interval_defect_exact(e.intersect(w), e.complement().intersect(w), s)
        return EstimateResult(value, 0.0, "exact1d", 0, seed, s)
    A = Intersection(E, region)
    B = Intersection(Complement(E), region)
    return locality_defect(A, B, fam, s, engine_spec, seed)


def additivity_defect_check(
    E, omega1, omega2, fam: KernelFamily, s: float, engine_spec: dict, seed: int
) -> dict:
    """P1(E, O1 u O2) vs P1(E,O1) + P1(E,O2) + cross defects.

    The two domains must be disjoint; the identity is algebraic for the
    exact engine and holds within combined Monte Carlo error otherwise.
    """
    union = Complement(Intersection(Complement(omega1), Complement(omega2)))
    lhs = p1_on_region(E, union, fam, s, engine_spec, seed)
    t1 = p1_on_region(E, omega1, fam, s, engine_spec, seed + 10)
    t2 = p1_on_region(E, omega2, fam, s, engine_spec, seed + 11)
    E_c = Complement(E)
    if fam.dim == 1:
        e = _intervals_of(E)
        o1 = _intervals_of(omega1)
        o2 = _intervals_of(omega2)
        c1 = interval_defect_exact(e.intersect(o1), e.complement().intersect(o2), s)
        c2 = interval_defect_exact(e.intersect(o2), e.complement().intersect(o1), s)
        cross = EstimateResult(c1 + c2, 0.0, "exact1d", 0, seed, s)
    else:
        x1 = locality_defect(
            Intersection(E, omega1), Intersection(E_c, omega2), fam, s, engine_spec, seed + 12
        )
        x2 = locality_defect(
            Intersection(E, omega2), Intersection(E_c, omega1), fam, s, engine_spec, seed + 13
        )
        cross = EstimateResult(
            x1.value + x2.value,
            math.hypot(x1.std_error, x2.std_error),
            x1.engine,
            x1.samples + x2.samples,
            seed,
            s,
        )
    rhs = t1.value + t2.value + cross.value
    sigma = math.sqrt(
        lhs.std_error**2 + t1.std_error**2 + t2.std_error**2 + cross.std_error**2
    )
    discrepancy = abs(lhs.value - rhs)
    tol = max(1e-10 * max(abs(lhs.value), 1.0), 3.0 * sigma)
    return {
        "lhs": lhs.value,
        "rhs": rhs,
        "discrepancy": discrepancy,
        "combined_sigma": sigma,
        "tolerance": tol,
        "passed": bool(discrepancy <= tol),
    }


def coarea_check_1d(levels, s: float) -> dict:
    """Coarea identity for a piecewise-constant u on the line.

    ``levels`` is a list of (value, Intervals1D) with pairwise-disjoint
    bounded supports; u is zero elsewhere.  Both sides are exact:
    half the Gagliardo seminorm equals the integral over t of the
    perimeter of the superlevel sets.
    """
    vals = [float(v) for v, _ in levels]
    regs = [iv if isinstance(iv, Intervals1D) else Intervals1D(iv) for _, iv in levels]
    for r in regs:
        if not r.is_bounded():
            raise ValueError("level supports must be bounded")
    for i in range(len(regs)):
        for j in range(i + 1, len(regs)):
            if regs[i].intersect(regs[j]).measure() > 0:
                raise ValueError("level supports must be disjoint")
    background = Intervals1D([])
    for r in regs:
        background = background.union(r)
    background = background.complement()
    all_vals = vals + [0.0]
    all_regs = regs + [background]

    lhs = 0.0
    for i in range(len(all_regs)):
        for j in range(i + 1, len(all_regs)):
            dv = abs(all_vals[i] - all_vals[j])
            if dv > 0:
                lhs += dv * interval_defect_exact(all_regs[i], all_regs[j], s)

    cuts = sorted(set(all_vals))
    rhs = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        t_mid = 0.5 * (lo + hi)
        level = Intervals1D([])
        for v, r in zip(all_vals, all_regs):
            if v > t_mid:
                level = level.union(r)
        if level.measure() == 0:
            continue
        if level.is_bounded():
            per = interval_defect_exact(level, level.complement(), s)
        else:
            per = interval_defect_exact(level.complement(), level, s)
        rhs += (hi - lo) * per

    denom = max(abs(lhs), abs(rhs), 1e-300)
    rel = abs(lhs - rhs) / denom
    return {"lhs": lhs, "rhs": rhs, "relative_discrepancy": rel, "passed": bool(rel <= 1e-9)}
