"""Geometric set representations, line traces and classical perimeter data.

Sets are exact primitives (interval unions, halfspaces, balls, convex
polytopes in H-representation) plus complement/intersection wrappers and a
voxel grid used only by the discrete minimization experiment.  Reduced
boundaries are read off the representation; nothing is meshed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Intervals1D",
    "Halfspace",
    "Ball",
    "ConvexPolytope",
    "VoxelGrid",
    "Complement",
    "Intersection",
    "Domain",
    "LineSegmentTrace",
    "cube",
    "standard_halfspace",
    "ball_volume",
    "sphere_surface",
    "classical_perimeter",
    "anisotropic_perimeter",
    "trace_line",
    "region_volume",
    "region_bounding_box",
    "region_circumball",
    "sample_uniform",
]

_INF = math.inf


# ---------------------------------------------------------------------------
# interval unions on the real line

def _merge_intervals(pairs):
    """Sort and merge (a, b) pairs; touching or overlapping pieces coalesce."""
    pairs = [(float(a), float(b)) for a, b in pairs if b > a]
    pairs.sort()
    merged = []
    for a, b in pairs:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


@dataclass(frozen=True)
class Intervals1D:
    """Disjoint open intervals, sorted; endpoints may be +-inf."""

    intervals: tuple

    def __init__(self, intervals):
        object.__setattr__(self, "intervals", _merge_intervals(intervals))

    @property
    def dim(self):
        return 1

    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def is_bounded(self) -> bool:
        return all(math.isfinite(a) and math.isfinite(b) for a, b in self.intervals)

    def endpoints(self):
        """Finite endpoints, i.e. the reduced boundary."""
        pts = []
        for a, b in self.intervals:
            if math.isfinite(a):
                pts.append(a)
            if math.isfinite(b):
                pts.append(b)
        return pts

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        if not scalar and x.ndim == 2:  # (N, 1) points
            x = x[:, 0]
        out = np.zeros(np.shape(x), dtype=bool)
        for a, b in self.intervals:
            out |= (x > a) & (x < b)
        return bool(out) if scalar else out

    def intersect(self, other: "Intervals1D") -> "Intervals1D":
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if hi > lo:
                    out.append((lo, hi))
        return Intervals1D(out)

    def complement(self) -> "Intervals1D":
        out = []
        cur = -_INF
        for a, b in self.intervals:
            if a > cur:
                out.append((cur, a))
            cur = max(cur, b)
        if cur < _INF:
            out.append((cur, _INF))
        return Intervals1D(out)

    def difference(self, other: "Intervals1D") -> "Intervals1D":
        return self.intersect(other.complement())

    def translate(self, t: float) -> "Intervals1D":
        return Intervals1D([(a + t, b + t) for a, b in self.intervals])

    def scale(self, lam: float) -> "Intervals1D":
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        return Intervals1D([(lam * a, lam * b) for a, b in self.intervals])

    def union(self, other: "Intervals1D") -> "Intervals1D":
        return Intervals1D(list(self.intervals) + list(other.intervals))


WHOLE_LINE = Intervals1D([(-_INF, _INF)])
EMPTY_LINE = Intervals1D([])


# ---------------------------------------------------------------------------
# n-dimensional regions

@dataclass(frozen=True)
class Halfspace:
    """{x : normal . x <= offset} with unit normal."""

    normal: tuple
    offset: float

    def __init__(self, normal, offset):
        n = np.asarray(normal, dtype=float)
        length = float(np.linalg.norm(n))
        if length == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", tuple(n / length))
        object.__setattr__(self, "offset", float(offset) / length)

    @property
    def dim(self):
        return len(self.normal)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return x @ np.asarray(self.normal) <= self.offset

    def trace(self, u, base) -> Intervals1D:
        n = np.asarray(self.normal)
        du = float(n @ u)
        dx = self.offset - float(n @ base)
        if abs(du) < 1e-14:
            return WHOLE_LINE if dx >= 0 else EMPTY_LINE
        t = dx / du
        return Intervals1D([(-_INF, t)]) if du > 0 else Intervals1D([(t, _INF)])


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __init__(self, center, radius):
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        c = np.asarray(center, dtype=float)
        object.__setattr__(self, "center", tuple(c))
        object.__setattr__(self, "radius", float(radius))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        return np.sum(d * d, axis=-1) <= self.radius**2

    def trace(self, u, base) -> Intervals1D:
        d = np.asarray(base, dtype=float) - np.asarray(self.center)
        m = -float(np.dot(u, d))
        disc = m * m - (float(np.dot(d, d)) - self.radius**2)
        if disc <= 0:
            return EMPTY_LINE
        h = math.sqrt(disc)
        return Intervals1D([(m - h, m + h)])


class ConvexPolytope:
    """Bounded intersection of halfspaces {x : A x <= b}.

    Vertices, facet normals and facet (n-1)-measures are derived once and
    cached.  Facet normals satisfy the divergence-theorem closure
    sum(measure * normal) = 0 up to 1e-9 of the total surface measure.
    """

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or A.shape[0] != b.shape[0]:
            raise ValueError("H-representation shape mismatch")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero normal in H-representation")
        self.A = A / norms[:, None]
        self.b = b / norms
        self._geom = None

    @property
    def dim(self):
        return self.A.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, ConvexPolytope)
            and self.A.shape == other.A.shape
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes()))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.A.T <= self.b + 1e-12, axis=-1)

    def trace(self, u, base) -> Intervals1D:
        du = self.A @ np.asarray(u, dtype=float)
        dx = self.b - self.A @ np.asarray(base, dtype=float)
        lo, hi = -_INF, _INF
        for a, c in zip(du, dx):
            if abs(a) < 1e-14:
                if c < 0:
                    return EMPTY_LINE
            elif a > 0:
                hi = min(hi, c / a)
            else:
                lo = max(lo, c / a)
        return Intervals1D([(lo, hi)]) if hi > lo else EMPTY_LINE

    def _compute_geometry(self):
        n = self.dim
        if n == 1:
            his = [bv / av for av, bv in zip(self.A[:, 0], self.b) if av > 0]
            los = [bv / av for av, bv in zip(self.A[:, 0], self.b) if av < 0]
            if not his or not los:
                raise ValueError("polytope is unbounded")
            lo, hi = max(los), min(his)
            if hi <= lo:
                raise ValueError("polytope is empty")
            verts = np.array([[lo], [hi]])
            facets = [
                {"normal": np.array([-1.0]), "measure": 1.0, "vertices": verts[:1], "row": None},
                {"normal": np.array([1.0]), "measure": 1.0, "vertices": verts[1:], "row": None},
            ]
            self._geom = {"vertices": verts, "facets": facets, "volume": hi - lo}
            return
        from scipy.optimize import linprog
        from scipy.spatial import ConvexHull, HalfspaceIntersection

        # Chebyshev center as a guaranteed interior point
        res = linprog(
            c=np.r_[np.zeros(n), -1.0],
            A_ub=np.c_[self.A, np.ones(len(self.b))],
            b_ub=self.b,
            bounds=[(None, None)] * n + [(None, None)],
            method="highs",
        )
        if not res.success or res.x[-1] <= 1e-12:
            raise ValueError("polytope is empty or degenerate")
        interior = res.x[:n]
        hs = np.hstack([self.A, -self.b[:, None]])
        inter = HalfspaceIntersection(hs, interior)
        verts = inter.intersections
        hull = ConvexHull(verts)
        scale = max(1.0, float(np.max(np.abs(verts))))
        facets = []
        for i in range(len(self.b)):
            on = verts[np.abs(verts @ self.A[i] - self.b[i]) <= 1e-9 * scale]
            if len(on) < n:
                continue  # redundant halfspace
            measure = _facet_measure(on, self.A[i])
            if measure <= 0:
                continue
            facets.append(
                {"normal": self.A[i].copy(), "measure": measure, "vertices": on, "row": i}
            )
        total = sum(f["measure"] for f in facets)
        closure = np.linalg.norm(sum(f["measure"] * f["normal"] for f in facets))
        if closure > 1e-9 * max(total, 1.0):
            raise ValueError("facet closure defect exceeds tolerance")
        self._geom = {"vertices": verts, "facets": facets, "volume": float(hull.volume)}

    def _geometry(self):
        if self._geom is None:
            self._compute_geometry()
        return self._geom

    @property
    def vertices(self):
        return self._geometry()["vertices"]

    @property
    def facets(self):
        return self._geometry()["facets"]

    @property
    def volume(self):
        return self._geometry()["volume"]


def _facet_measure(points, normal):
    """(n-1)-measure of the convex hull of coplanar points."""
    n = len(normal)
    basis = _hyperplane_basis(np.asarray(normal, dtype=float))
    proj = (points - points[0]) @ basis.T
    if n == 2:
        return float(np.max(proj[:, 0]) - np.min(proj[:, 0]))
    from scipy.spatial import ConvexHull

    try:
        return float(ConvexHull(proj).volume)
    except Exception:
        return 0.0


def _hyperplane_basis(normal):
    """Orthonormal basis of normal^perp, deterministic in the normal."""
    n = len(normal)
    # Householder reflection mapping e_n to the normal gives the first n-1
    # columns as a basis of the orthogonal complement.
    e = np.zeros(n)
    e[-1] = 1.0
    v = normal / np.linalg.norm(normal)
    w = v - e if np.dot(v, e) > 0 else v + e
    if np.linalg.norm(w) < 1e-12:
        H = np.eye(n)
    else:
        w = w / np.linalg.norm(w)
        H = np.eye(n) - 2 * np.outer(w, w)
    return H[:, : n - 1].T if np.dot(v, e) <= 0 else -H[:, : n - 1].T


@dataclass(frozen=True)
class VoxelGrid:
    """Axis-aligned box split into a regular grid with boolean occupancy."""

    lo: tuple
    hi: tuple
    shape: tuple
    occupancy: np.ndarray

    def __init__(self, lo, hi, shape, occupancy):
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        shape = tuple(int(v) for v in shape)
        occ = np.asarray(occupancy, dtype=bool).reshape(shape)
        if len(lo) != len(hi) or len(lo) != len(shape):
            raise ValueError("voxel grid dimension mismatch")
        if occ.size != int(np.prod(shape)):
            raise ValueError("occupancy length must equal product of resolutions")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "occupancy", occ)

    @property
    def dim(self):
        return len(self.lo)

    def voxel_size(self):
        return tuple((h - l) / s for l, h, s in zip(self.lo, self.hi, self.shape))

    def centers(self):
        axes = [
            l + (np.arange(s) + 0.5) * (h - l) / s
            for l, h, s in zip(self.lo, self.hi, self.shape)
        ]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        shape = np.asarray(self.shape)
        inside = np.all((x >= lo) & (x < hi), axis=-1)
        idx = np.clip(((x - lo) / (hi - lo) * shape).astype(int), 0, shape - 1)
        occ = self.occupancy[tuple(idx.T)]
        out = inside & occ
        return out if out.shape != (1,) else bool(out[0])


@dataclass(frozen=True)
class Complement:
    region: object

    @property
    def dim(self):
        return self.region.dim

    def contains(self, x):
        return ~np.asarray(self.region.contains(x))

    def trace(self, u, base) -> Intervals1D:
        return self.region.trace(u, base).complement()


@dataclass(frozen=True)
class Intersection:
    first: object
    second: object

    def __post_init__(self):
        if self.first.dim != self.second.dim:
            raise ValueError("intersection operands must share dimension")

    @property
    def dim(self):
        return self.first.dim

    def contains(self, x):
        return np.asarray(self.first.contains(x)) & np.asarray(self.second.contains(x))

    def trace(self, u, base) -> Intervals1D:
        return self.first.trace(u, base).intersect(self.second.trace(u, base))


@dataclass(frozen=True)
class Domain:
    """Either the whole space or a bounded ball/polytope domain."""

    dim: int
    region: object = None

    @staticmethod
    def whole_space(dim: int) -> "Domain":
        return Domain(dim=dim, region=None)

    @staticmethod
    def bounded(region) -> "Domain":
        if not isinstance(region, (Ball, ConvexPolytope)):
            raise ValueError("bounded domains must be balls or convex polytopes")
        if isinstance(region, ConvexPolytope):
            region._geometry()  # validates nonempty interior
        return Domain(dim=region.dim, region=region)

    @property
    def is_whole(self) -> bool:
        return self.region is None


@dataclass(frozen=True)
class LineSegmentTrace:
    direction: tuple
    base: tuple
    inside_E: Intervals1D
    inside_domain: Intervals1D


def cube(dim: int, side: float = 1.0, center=None) -> ConvexPolytope:
    """Axis-aligned cube of given side; default is (-side/2, side/2)^dim."""
    if center is None:
        center = np.zeros(dim)
    center = np.asarray(center, dtype=float)
    A = np.vstack([np.eye(dim), -np.eye(dim)])
    b = np.concatenate([center + side / 2.0, -(center - side / 2.0)])
    return ConvexPolytope(A, b)


def standard_halfspace(dim: int) -> Halfspace:
    """H = {x : x_dim <= 0}."""
    normal = np.zeros(dim)
    normal[-1] = 1.0
    return Halfspace(normal, 0.0)


def ball_volume(dim: int, radius: float = 1.0) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0) * radius**dim


def sphere_surface(dim: int, radius: float = 1.0) -> float:
    """Surface measure of the (dim-1)-sphere bounding a radius-r ball in R^dim."""
    if dim == 1:
        return 2.0
    return dim * ball_volume(dim) * radius ** (dim - 1)


# ---------------------------------------------------------------------------
# perimeters

def _polytope_clipped_facets(E, D: Domain):
    """Facets of E inside the domain, with their normals and measures.

    E is a ConvexPolytope or Halfspace; bounded domains must be polytopes.
    Returns a list of (normal, measure).
    """
    if D.is_whole:
        if isinstance(E, Halfspace):
            raise ValueError("halfspace has infinite perimeter in the whole space")
        return [(f["normal"], f["measure"]) for f in E.facets]
    if not isinstance(D.region, ConvexPolytope):
        raise ValueError("polytope perimeters support polytope domains only")
    if isinstance(E, Halfspace):
        rows_E = np.asarray([E.normal]), np.asarray([E.offset])
    else:
        rows_E = E.A, E.b
    A = np.vstack([rows_E[0], D.region.A])
    b = np.concatenate([rows_E[1], D.region.b])
    clipped = ConvexPolytope(A, b)
    n_E = len(rows_E[1])
    out = []
    for f in clipped.facets:
        if f["row"] is not None and f["row"] < n_E:
            out.append((f["normal"], f["measure"]))
    return out


def _circle_arcs_inside(center, radius, region, dim):
    """Angular intervals where the circle around a 2-D ball lies in region."""
    halfspaces = []
    if isinstance(region, ConvexPolytope):
        halfspaces = list(zip(region.A, region.b))
    elif isinstance(region, Halfspace):
        halfspaces = [(np.asarray(region.normal), region.offset)]
    else:
        raise ValueError("ball perimeter supports polytope/halfspace domains in 2-D")
    arcs = Intervals1D([(0.0, 2 * math.pi)])
    c = np.asarray(center)
    for a, bb in halfspaces:
        # a.(c + r(cos t, sin t)) <= bb  <=>  R cos(t - phi) <= bb - a.c
        R = radius * float(np.hypot(a[0], a[1]))
        phi = math.atan2(a[1], a[0])
        rhs = bb - float(a @ c)
        if R < 1e-15:
            if rhs < 0:
                return EMPTY_LINE
            continue
        cosv = rhs / R
        if cosv >= 1:
            continue
        if cosv <= -1:
            return EMPTY_LINE
        half = math.acos(cosv)  # allowed: |t - phi| >= half (mod 2pi)
        lo, hi = phi + half, phi + 2 * math.pi - half
        pieces = []
        for k in (-1, 0, 1):
            s0, s1 = lo + 2 * math.pi * k, hi + 2 * math.pi * k
            s0, s1 = max(s0, 0.0), min(s1, 2 * math.pi)
            if s1 > s0:
                pieces.append((s0, s1))
        arcs = arcs.intersect(Intervals1D(pieces))
    return arcs


def classical_perimeter(E, D: Domain) -> float:
    """Perimeter of E inside the domain, exact for the supported primitives."""
    if isinstance(E, VoxelGrid):
        raise ValueError("voxel grids are not exact; use voxel_perimeter_estimate")
    if isinstance(E, Intervals1D):
        pts = E.endpoints()
        if D.is_whole:
            return float(len(pts))
        return float(sum(bool(D.region.contains(np.array([p]))) for p in pts))
    if isinstance(E, Ball):
        if D.is_whole:
            return sphere_surface(E.dim, E.radius)
        if E.dim == 2:
            arcs = _circle_arcs_inside(E.center, E.radius, D.region, 2)
            return E.radius * arcs.measure()
        raise ValueError("clipped ball perimeter implemented for n = 2 only")
    if isinstance(E, (Halfspace, ConvexPolytope)):
        facets = _polytope_clipped_facets(E, D)
        return float(sum(m for _, m in facets))
    raise ValueError(f"classical perimeter unsupported for {type(E).__name__}")


def anisotropic_perimeter(E, D: Domain, m) -> float:
    """Surface energy of E in D with density m(normal); m is a MomentNorm
    or any 1-homogeneous evaluator of unit normals."""
    ev = m.eval if hasattr(m, "eval") else m
    if isinstance(E, Intervals1D):
        total = 0.0
        for a, b in E.intervals:
            for p, nu in ((a, -1.0), (b, 1.0)):
                if math.isfinite(p) and (D.is_whole or bool(D.region.contains(np.array([p])))):
                    total += float(ev(np.array([nu])))
        return total
    if isinstance(E, (Halfspace, ConvexPolytope)):
        facets = _polytope_clipped_facets(E, D)
        return float(sum(measure * float(ev(normal)) for normal, measure in facets))
    if isinstance(E, Ball):
        return _ball_anisotropic_perimeter(E, D, ev)
    raise ValueError(f"anisotropic perimeter unsupported for {type(E).__name__}")


def _ball_anisotropic_perimeter(E: Ball, D: Domain, ev, rel_tol: float = 1e-6) -> float:
    n = E.dim
    if n == 2:
        if D.is_whole:
            arcs = Intervals1D([(0.0, 2 * math.pi)])
        else:
            arcs = _circle_arcs_inside(E.center, E.radius, D.region, 2)
        # doubling trapezoid on each arc until the requested accuracy
        total_prev = None
        M = 512
        while True:
            total = 0.0
            for a, b in arcs.intervals:
                t = np.linspace(a, b, M, endpoint=False) + 0.5 * (b - a) / M
                nu = np.stack([np.cos(t), np.sin(t)], axis=1)
                total += float(np.mean(ev(nu))) * (b - a) * E.radius
            if total_prev is not None and abs(total - total_prev) <= rel_tol * abs(total):
                return total
            if M > 2**20:
                return total
            total_prev, M = total, M * 2
        # unreachable
    if n == 3 and D.is_whole:
        M = 64
        total_prev = None
        while True:
            za, wz = np.polynomial.legendre.leggauss(M)
            phi = (np.arange(2 * M) + 0.5) * (2 * math.pi / (2 * M))
            Z, PHI = np.meshgrid(za, phi, indexing="ij")
            W = np.repeat(wz[:, None], 2 * M, axis=1) * (2 * math.pi / (2 * M))
            r = np.sqrt(1 - Z**2)
            nu = np.stack([r * np.cos(PHI), r * np.sin(PHI), Z], axis=-1)
            total = float(np.sum(W * ev(nu.reshape(-1, 3)).reshape(W.shape))) * E.radius**2
            if total_prev is not None and abs(total - total_prev) <= rel_tol * abs(total):
                return total
            if M > 4096:
                return total
            total_prev, M = total, M * 2
    raise ValueError("ball anisotropic perimeter supports n = 2 (any domain) and n = 3 whole space")


def trace_line(E, D: Domain, u, base) -> LineSegmentTrace:
    """Exact parameter intervals of the line {base + t u} inside E and D.

    The base point must lie in u-perp; u must be a unit vector.
    """
    u = np.asarray(u, dtype=float)
    base = np.asarray(base, dtype=float)
    nu = float(np.linalg.norm(u))
    if nu == 0.0:
        raise ValueError("degenerate line direction")
    if abs(nu - 1.0) > 1e-12:
        raise ValueError("line direction must be a unit vector")
    if abs(float(u @ base)) > 1e-9 * (1 + float(np.linalg.norm(base))):
        raise ValueError("base point must lie in the orthogonal complement of u")
    inside_E = E.trace(u, base)
    inside_D = WHOLE_LINE if D.is_whole else D.region.trace(u, base)
    return LineSegmentTrace(tuple(u), tuple(base), inside_E, inside_D)


# ---------------------------------------------------------------------------
# volumes, bounding data, sampling

def region_volume(region) -> float:
    """Exact volume for intervals, balls, polytopes and polytope clips."""
    if isinstance(region, Intervals1D):
        if not region.is_bounded():
            raise ValueError("unbounded interval union has infinite measure")
        return region.measure()
    if isinstance(region, Ball):
        return ball_volume(region.dim, region.radius)
    if isinstance(region, ConvexPolytope):
        return region.volume
    if isinstance(region, Intersection):
        rows = _collect_halfspace_rows(region)
        if rows is not None:
            A, b = rows
            return ConvexPolytope(A, b).volume
        if region.dim == 1:
            iv = _to_intervals_1d(region)
            if iv is not None:
                return iv.measure()
    raise ValueError(f"exact volume unsupported for {type(region).__name__}")


def _collect_halfspace_rows(region):
    """Flatten nested intersections of polytopes/halfspaces to H-rep rows."""
    if isinstance(region, Halfspace):
        return np.asarray([region.normal]), np.asarray([region.offset])
    if isinstance(region, ConvexPolytope):
        return region.A, region.b
    if isinstance(region, Intersection):
        left = _collect_halfspace_rows(region.first)
        right = _collect_halfspace_rows(region.second)
        if left is None or right is None:
            return None
        return np.vstack([left[0], right[0]]), np.concatenate([left[1], right[1]])
    return None


def _to_intervals_1d(region):
    if isinstance(region, Intervals1D):
        return region
    if region.dim != 1:
        return None
    if isinstance(region, Halfspace):
        return region.trace(np.array([1.0]), np.array([0.0]))
    if isinstance(region, Ball):
        c, r = region.center[0], region.radius
        return Intervals1D([(c - r, c + r)])
    if isinstance(region, ConvexPolytope):
        return region.trace(np.array([1.0]), np.array([0.0]))
    if isinstance(region, Complement):
        inner = _to_intervals_1d(region.region)
        return None if inner is None else inner.complement()
    if isinstance(region, Intersection):
        a = _to_intervals_1d(region.first)
        b = _to_intervals_1d(region.second)
        if a is None or b is None:
            return None
        return a.intersect(b)
    return None


def region_bounding_box(region):
    """(lo, hi) arrays; raises if the region is unbounded."""
    lo, hi = _bounding_box_or_inf(region)
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
        raise ValueError("region is unbounded")
    return lo, hi


def _bounding_box_or_inf(region):
    d = region.dim
    if isinstance(region, Intervals1D):
        if not region.intervals:
            return np.array([0.0]), np.array([0.0])
        return (
            np.array([region.intervals[0][0]]),
            np.array([region.intervals[-1][1]]),
        )
    if isinstance(region, Ball):
        c = np.asarray(region.center)
        return c - region.radius, c + region.radius
    if isinstance(region, ConvexPolytope):
        v = region.vertices
        return v.min(axis=0), v.max(axis=0)
    if isinstance(region, VoxelGrid):
        return np.asarray(region.lo), np.asarray(region.hi)
    if isinstance(region, Intersection):
        lo1, hi1 = _bounding_box_or_inf(region.first)
        lo2, hi2 = _bounding_box_or_inf(region.second)
        return np.maximum(lo1, lo2), np.minimum(hi1, hi2)
    if isinstance(region, Complement):
        inner = region.region
        if isinstance(inner, Complement):
            return _bounding_box_or_inf(inner.region)
        if (
            isinstance(inner, Intersection)
            and isinstance(inner.first, Complement)
            and isinstance(inner.second, Complement)
        ):
            # De Morgan: complement of intersection of complements is a union
            lo1, hi1 = _bounding_box_or_inf(inner.first.region)
            lo2, hi2 = _bounding_box_or_inf(inner.second.region)
            return np.minimum(lo1, lo2), np.maximum(hi1, hi2)
        return np.full(d, -_INF), np.full(d, _INF)
    if isinstance(region, Halfspace):
        return np.full(d, -_INF), np.full(d, _INF)
    raise ValueError(f"bounding box unsupported for {type(region).__name__}")


def region_circumball(region):
    """(center, radius) of a ball containing the region (from its box)."""
    lo, hi = region_bounding_box(region)
    center = (lo + hi) / 2.0
    radius = float(np.linalg.norm(hi - lo)) / 2.0
    return center, max(radius, 1e-300)


def sample_uniform(region, count: int, seed: int, acceptance_floor: float = 1e-3):
    """I.i.d. uniform points by rejection from the bounding box.

    Deterministic for a fixed seed regardless of how work is scheduled:
    candidate batches come from counter-derived Philox streams consumed in
    a fixed order.  Raises if the empirical acceptance rate falls below
    ``acceptance_floor``.
    """
    lo, hi = region_bounding_box(region)
    d = len(lo)
    width = hi - lo
    if np.any(width <= 0):
        raise ValueError("degenerate region: empty bounding box")
    batch = 8192
    out = []
    got = 0
    attempts = 0
    chunk = 0
    min_attempts = max(int(10 / acceptance_floor), batch)
    while got < count:
        rng = np.random.Generator(np.random.Philox(key=[np.uint64(seed), np.uint64(chunk)]))
        pts = lo + rng.random((batch, d)) * width
        keep = np.asarray(region.contains(pts), dtype=bool)
        accepted = pts[keep]
        out.append(accepted)
        got += len(accepted)
        attempts += batch
        chunk += 1
        if attempts >= min_attempts and got < acceptance_floor * attempts:
            raise ValueError(
                f"acceptance rate below floor {acceptance_floor:g}; degenerate region"
            )
    return np.concatenate(out)[:count]
