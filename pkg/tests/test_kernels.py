import math

import numpy as np
import pytest

from fracperim.kernels import (
    KernelFamily,
    QuasiNorm,
    constant_family,
    euclidean_gauge,
    fibonacci_directions,
    gauge_from_expression,
    gauge_from_kernel,
    kernel_from_gauge,
    lp_gauge,
    quasi_norm_from_convex_body,
    validate_hypotheses,
)

SQUARE_HS = [([1.0, 0.0], 1.0), ([-1.0, 0.0], 1.0), ([0.0, 1.0], 1.0), ([0.0, -1.0], 1.0)]


def test_gauge_of_square():
    g = quasi_norm_from_convex_body(halfspaces=SQUARE_HS, dim=2)
    assert g((2.0, 0.5)) == pytest.approx(2.0, abs=1e-14)


def test_gauge_of_ball():
    g = euclidean_gauge(2)
    assert g((3.0, 4.0)) == pytest.approx(5.0, abs=1e-14)


def test_gauge_of_diamond_from_vertices():
    g = quasi_norm_from_convex_body(vertices=[[1, 0], [-1, 0], [0, 1], [0, -1]], dim=2)
    assert g((1.0, 1.0)) == pytest.approx(2.0, rel=1e-12)


def test_gauge_rejects_asymmetric_body():
    with pytest.raises(ValueError, match="symmetric"):
        quasi_norm_from_convex_body(
            halfspaces=[([1.0, 0.0], 1.0), ([-1.0, 0.0], 2.0), ([0.0, 1.0], 1.0), ([0.0, -1.0], 1.0)],
            dim=2,
        )


def test_gauge_rejects_origin_not_interior():
    bad = [([1.0, 0.0], 0.0), ([-1.0, 0.0], 0.0), ([0.0, 1.0], 1.0), ([0.0, -1.0], 1.0)]
    with pytest.raises(ValueError, match="interior"):
        quasi_norm_from_convex_body(halfspaces=bad, dim=2)


def test_kernel_values():
    assert kernel_from_gauge(euclidean_gauge(1), 0.5)(np.array([2.0])) == pytest.approx(2 ** -1.5)
    assert kernel_from_gauge(euclidean_gauge(2), 0.5)((1.0, 0.0)) == pytest.approx(1.0)
    g = lp_gauge(2, math.inf)
    # gauge of (2,1) for the square [-1,1]^2 is 2
    assert kernel_from_gauge(g, 0.5)((2.0, 1.0)) == pytest.approx(2 ** -2.5)


def test_kernel_at_origin_is_hard_error():
    k = kernel_from_gauge(euclidean_gauge(2), 0.5)
    with pytest.raises(ValueError, match="z = 0"):
        k((0.0, 0.0))


def test_kernel_requires_s_in_unit_interval():
    for s in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            kernel_from_gauge(euclidean_gauge(2), s)


def test_gauge_kernel_round_trip():
    rng = np.random.default_rng(0)
    g = lp_gauge(3, 3.0)
    s = 0.4
    k = kernel_from_gauge(g, s)
    g2 = gauge_from_kernel(k, 3, s)
    pts = rng.standard_normal((100, 3))
    assert np.max(np.abs(g2(pts) - g(pts)) / g(pts)) < 1e-12


def test_gauge_from_scaled_sup_kernel():
    s = 0.5
    k = lambda z: (2.0 * np.max(np.abs(z), axis=-1)) ** (-(2 + s))
    g = gauge_from_kernel(k, 2, s)
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((50, 2))
    expected = 2.0 * np.max(np.abs(pts), axis=-1)
    assert np.max(np.abs(g(pts) - expected) / expected) < 1e-12


def test_gauge_from_kernel_recovers_directional_profile():
    s = 0.3
    profile = lambda ang: 1.0 + 0.1 * np.sin(3 * ang) ** 2

    def kern(z):
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        ang = np.arctan2(z[..., 1], z[..., 0])
        return (r * profile(ang)) ** (-(2 + s))

    g = gauge_from_kernel(kern, 2, s)
    angles = np.linspace(0, 2 * math.pi, 20, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    assert np.max(np.abs(g(dirs) - profile(angles)) / profile(angles)) < 1e-12


def test_gauge_from_kernel_rejects_nonpositive():
    bad = lambda z: -np.ones(np.asarray(z).shape[:-1])
    with pytest.raises(ValueError, match="nonpositive"):
        gauge_from_kernel(bad, 2, 0.5)


def test_kernel_homogeneity_tight():
    g = lp_gauge(2, math.inf)
    s = 0.7
    k = kernel_from_gauge(g, s)
    rng = np.random.default_rng(2)
    z = rng.standard_normal((50, 2))
    base = k(z)
    for lam in (1e-3, 1.0, 1e3):
        pred = lam ** (-(2 + s)) * base
        assert np.max(np.abs(k(lam * z) - pred) / pred) < 1e-12


def test_unit_level_set_consistency():
    g = lp_gauge(2, 1.0)
    k = kernel_from_gauge(g, 0.5)
    rng = np.random.default_rng(3)
    z = rng.standard_normal((200, 2))
    inside = g(z) < 1.0
    assert np.array_equal(inside, k(z) > 1.0)


def test_tau_sandwich_on_samples():
    rng = np.random.default_rng(4)
    for g in (euclidean_gauge(2), lp_gauge(2, math.inf), lp_gauge(3, 1.0),
              quasi_norm_from_convex_body(halfspaces=SQUARE_HS, dim=2)):
        pts = rng.standard_normal((200, g.dim))
        norms = np.linalg.norm(pts, axis=1)
        vals = g(pts)
        assert np.all(vals <= g.tau * norms * (1 + 1e-12))
        assert np.all(vals >= norms / g.tau * (1 - 1e-12))


def test_origin_symmetry_and_positive_homogeneity():
    g = quasi_norm_from_convex_body(halfspaces=SQUARE_HS, dim=2)
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((100, 2))
    assert np.allclose(g(-pts), g(pts), rtol=1e-14)
    assert np.allclose(g(2.5 * pts), 2.5 * g(pts), rtol=1e-14)


def test_validate_euclidean_family_passes_with_c_one():
    fam = constant_family(euclidean_gauge(2))
    z = fibonacci_directions(2, 32)
    rep = validate_hypotheses(fam, [0.3, 0.6, 0.9], z, tol=1e-9)
    assert rep.passed
    assert rep.empirical_c == pytest.approx(1.0, abs=1e-12)


def test_validate_sup_family_empirical_c_bound():
    # sup norm: |z|_inf <= |z|_2 <= sqrt(2) |z|_inf, so c <= 2^{(n+s)/2}
    fam = constant_family(lp_gauge(2, math.inf))
    rng = np.random.default_rng(6)
    z = rng.standard_normal((500, 2))
    s_samples = [0.3, 0.5, 0.9]
    rep = validate_hypotheses(fam, s_samples, z, tol=1e-9)
    assert rep.passed
    assert rep.empirical_c <= 2 ** ((2 + max(s_samples)) / 2) * (1 + 1e-12)


def test_validate_flags_injected_asymmetry():
    base = euclidean_gauge(2)

    def gauge(v):
        bump = 1.0 + 0.01 * (v[..., 0] > 0)
        return base.gauge(v) * bump

    fam = KernelFamily(2, lambda s: QuasiNorm(2, gauge, tau=1.02), QuasiNorm(2, gauge, tau=1.02), c=1.2)
    z = fibonacci_directions(2, 64)
    rep = validate_hypotheses(fam, [0.5], z, tol=1e-6)
    assert not rep.passed
    assert "h.0" in rep.failures
    # the kernel changes by about (1.01)^{n+s} across the flip
    assert rep.symmetry_violation == pytest.approx(1.01 ** 2.5 - 1, rel=0.2)


def test_limit_gauge_trend_reported():
    base = euclidean_gauge(2)

    def gauge_at(s):
        return QuasiNorm(2, lambda v, s=s: base.gauge(v) * (1 + (1 - s) * 0.1), tau=1.2)

    fam = KernelFamily(2, gauge_at, base, c=1.5)
    rep = validate_hypotheses(fam, [0.5], fibonacci_directions(2, 16), tol=1e-6)
    devs = [d for _, d in rep.limit_deviation_trend]
    assert devs[0] > devs[-1]
    assert devs[-1] == pytest.approx(0.1 * (1 - 0.999), rel=1e-6)


def test_expression_gauge_and_validation():
    g = gauge_from_expression("r*(1 + 0.3*cos(4*arctan2(x1, x0))**2)", 2, tau=1.3, label="star")
    fam = constant_family(g)
    rep = validate_hypotheses(fam, [0.4, 0.8], fibonacci_directions(2, 48), tol=1e-9)
    assert rep.passed
