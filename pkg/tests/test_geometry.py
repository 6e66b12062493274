import math

import numpy as np
import pytest

from fracperim.geometry import (
    Ball,
    Complement,
    ConvexPolytope,
    Domain,
    Intersection,
    Intervals1D,
    VoxelGrid,
    anisotropic_perimeter,
    classical_perimeter,
    cube,
    region_bounding_box,
    region_volume,
    sample_uniform,
    standard_halfspace,
    trace_line,
)
from fracperim.kernels import euclidean_gauge
from fracperim.momentbody import moment_norm_from_gauge

WHOLE2 = Domain.whole_space(2)


def test_intervals_merge_and_measure():
    iv = Intervals1D([(2, 3), (0, 1), (0.5, 0.8)])
    assert iv.intervals == ((0.0, 1.0), (2.0, 3.0))
    assert iv.measure() == pytest.approx(2.0)
    assert iv.contains(0.5) and not iv.contains(1.5)


def test_interval_boolean_algebra():
    a = Intervals1D([(0, 2)])
    b = Intervals1D([(1, 3)])
    assert a.intersect(b).intervals == ((1.0, 2.0),)
    assert a.difference(b).intervals == ((0.0, 1.0),)
    comp = a.complement()
    assert comp.intervals == ((-math.inf, 0.0), (2.0, math.inf))
    assert a.union(b).intervals == ((0.0, 3.0),)


def test_classical_perimeter_examples():
    assert classical_perimeter(Intervals1D([(0, 1), (2, 3)]), Domain.whole_space(1)) == 4.0
    assert classical_perimeter(Ball((0, 0), 1.0), WHOLE2) == pytest.approx(2 * math.pi)
    assert classical_perimeter(cube(2, 1.0), WHOLE2) == pytest.approx(4.0, abs=1e-12)


def test_halfspace_perimeter_in_cube():
    H = standard_halfspace(2)
    Q = Domain.bounded(cube(2, 1.0))
    assert classical_perimeter(H, Q) == pytest.approx(1.0, abs=1e-12)
    H3 = standard_halfspace(3)
    Q3 = Domain.bounded(cube(3, 1.0))
    assert classical_perimeter(H3, Q3) == pytest.approx(1.0, abs=1e-9)


def test_halfspace_whole_space_perimeter_is_error():
    with pytest.raises(ValueError, match="infinite"):
        classical_perimeter(standard_halfspace(2), WHOLE2)


def test_voxel_grid_routed_to_estimate():
    grid = VoxelGrid((0, 0), (1, 1), (4, 4), np.zeros((4, 4), bool))
    with pytest.raises(ValueError, match="voxel_perimeter_estimate"):
        classical_perimeter(grid, WHOLE2)


def test_anisotropic_equals_classical_for_euclidean_density():
    m = moment_norm_from_gauge(euclidean_gauge(2))
    omega1 = m.eval((1.0, 0.0))
    square = cube(2, 1.0)
    disk = Ball((0.5, -0.25), 0.75)
    assert anisotropic_perimeter(square, WHOLE2, m) == pytest.approx(
        omega1 * classical_perimeter(square, WHOLE2), rel=1e-9
    )
    assert anisotropic_perimeter(disk, WHOLE2, m) == pytest.approx(
        omega1 * classical_perimeter(disk, WHOLE2), rel=1e-6
    )


def test_anisotropic_perimeter_examples():
    m = moment_norm_from_gauge(euclidean_gauge(2))
    assert anisotropic_perimeter(cube(2, 1.0), WHOLE2, m) == pytest.approx(8.0, rel=1e-12)
    assert anisotropic_perimeter(Ball((0, 0), 1.0), WHOLE2, m) == pytest.approx(4 * math.pi, rel=1e-6)
    m1 = moment_norm_from_gauge(euclidean_gauge(1))
    assert anisotropic_perimeter(Intervals1D([(0, 1)]), Domain.whole_space(1), m1) == pytest.approx(2.0)


def test_trace_line_examples():
    disk = Ball((0, 0), 1.0)
    tr = trace_line(disk, WHOLE2, (1.0, 0.0), (0.0, 0.0))
    assert tr.inside_E.intervals == ((-1.0, 1.0),)
    sq = ConvexPolytope([[1, 0], [-1, 0], [0, 1], [0, -1]], [1, 0, 1, 0])  # (0,1)^2
    tr2 = trace_line(sq, WHOLE2, (0.0, 1.0), (0.5, 0.0))
    (a, b), = tr2.inside_E.intervals
    assert b - a == pytest.approx(1.0)
    tr3 = trace_line(disk, WHOLE2, (1.0, 0.0), (0.0, 2.0))
    assert tr3.inside_E.intervals == ()


def test_trace_line_validates_direction():
    disk = Ball((0, 0), 1.0)
    with pytest.raises(ValueError, match="degenerate"):
        trace_line(disk, WHOLE2, (0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError, match="unit"):
        trace_line(disk, WHOLE2, (2.0, 0.0), (0.0, 0.0))


def test_trace_consistency_random_lines():
    regions = [
        Ball((0.2, -0.1), 0.8),
        cube(2, 1.2),
        Intersection(Ball((0, 0), 1.0), standard_halfspace(2)),
        Complement(Ball((0, 0), 0.5)),
    ]
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(2500):
        phi = rng.uniform(0, 2 * math.pi)
        u = np.array([math.cos(phi), math.sin(phi)])
        off = rng.uniform(-1.5, 1.5)
        base = off * np.array([-u[1], u[0]])
        for region in regions:
            iv = region.trace(u, base)
            for a, b in iv.intervals:
                if b - a < 1e-9:
                    continue
                mid = np.clip(0.5 * (a + b), -1e6, 1e6)
                assert region.contains(base + mid * u)
                if math.isfinite(a):
                    assert not region.contains(base + (a - 1e-6 * (1 + abs(a))) * u)
                if math.isfinite(b):
                    assert not region.contains(base + (b + 1e-6 * (1 + abs(b))) * u)
                checked += 1
    assert checked > 4000


def test_polytope_facet_closure():
    diamond = ConvexPolytope([[1, 1], [1, -1], [-1, 1], [-1, -1]], [1, 1, 1, 1])
    total = sum(f["measure"] for f in diamond.facets)
    closure = np.linalg.norm(sum(f["measure"] * f["normal"] for f in diamond.facets))
    assert closure <= 1e-9 * total
    assert total == pytest.approx(4 * math.sqrt(2), rel=1e-9)


def test_region_volumes():
    assert region_volume(cube(2, 1.0)) == pytest.approx(1.0, rel=1e-12)
    assert region_volume(Ball((0, 0), 1.0)) == pytest.approx(math.pi)
    assert region_volume(Intervals1D([(0, 1), (2, 3)])) == pytest.approx(2.0)
    clipped = Intersection(cube(2, 2.0), standard_halfspace(2))
    assert region_volume(clipped) == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(ValueError):
        region_volume(Intervals1D([(0, math.inf)]))


def test_complement_involution():
    disk = Ball((0, 0), 1.0)
    rr = Complement(Complement(disk))
    rng = np.random.default_rng(12)
    pts = rng.uniform(-2, 2, size=(500, 2))
    assert np.array_equal(np.asarray(rr.contains(pts)), np.asarray(disk.contains(pts)))


def test_sample_uniform_membership_and_moments():
    square = cube(2, 1.0, center=(0.5, 0.5))
    pts = sample_uniform(square, 20000, seed=1)
    assert np.all(square.contains(pts))
    sigma = 1.0 / math.sqrt(12 * len(pts))
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) < 3.5 * sigma)


def test_sample_uniform_respects_complement():
    region = Intersection(cube(2, 2.0), Complement(Ball((0, 0), 0.5)))
    pts = sample_uniform(region, 5000, seed=2)
    assert np.all(np.linalg.norm(pts, axis=1) > 0.5)


def test_sample_uniform_frozen_reference():
    pts = sample_uniform(Intervals1D([(0.0, 1.0)]), 10, seed=42)
    expected = [
        0.8201981478608876, 0.18924562408645496, 0.8676608148821462,
        0.3945814702827203, 0.36812845090913937, 0.4344462539595917,
        0.1946354913878905, 0.06224821089808552, 0.8767979674463799,
        0.7670379910197939,
    ]
    assert pts[:, 0].tolist() == expected


def test_sample_uniform_degenerate_region_raises():
    sliver = Intersection(cube(2, 2.0), Ball((0, 0), 1e-4))
    # bounding box is the tiny ball's box, so acceptance is fine; instead make
    # the box large and the region nearly empty via a complement trick
    thin = Intersection(cube(2, 2.0), Complement(Ball((0, 0), 1.4143)))
    with pytest.raises(ValueError, match="acceptance rate"):
        sample_uniform(thin, 100, seed=3)
    # sanity: the sliver itself is fine
    assert len(sample_uniform(sliver, 16, seed=4)) == 16


def test_bounding_box_through_de_morgan_union():
    a = Ball((0, 0), 1.0)
    b = cube(2, 1.0, center=(3.0, 0.0))
    union = Complement(Intersection(Complement(a), Complement(b)))
    lo, hi = region_bounding_box(union)
    assert lo[0] == pytest.approx(-1.0) and hi[0] == pytest.approx(3.5)
