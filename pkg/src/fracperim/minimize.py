"""Discrete local minimization of the fractional perimeter on voxel grids.

Occupancies are boolean arrays over a box that contains the optimization
domain; voxels outside the domain mask are fixed exterior data.  Pair
weights are translation invariant, so the full interaction is a stencil:
exact cell-pair integrals in 1-D, a polar-exact near field plus tensor
Gauss collocation far field in 2-D, and subdivided collocation beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .geometry import VoxelGrid, sphere_surface
from .kernels import KernelFamily

__all__ = [
    "VoxelProblem",
    "MinimizeTrace",
    "voxel_problem",
    "discrete_energy",
    "discrete_p1",
    "flip_deltas",
    "local_minimize",
    "brute_force_minimum",
    "is_one_flip_stable",
    "minimizer_convergence_study",
    "voxel_perimeter_estimate",
    "occupancy_to_text",
    "occupancy_from_text",
]


# ---------------------------------------------------------------------------
# pair-weight stencils

def _pair_weight_1d(delta: int, h: float, s: float) -> float:
    """Exact integral of |x-y|^{-1-s} over two cells at offset delta."""
    if delta == 0:
        return 0.0
    d = abs(delta)
    g = lambda t: t ** (1.0 - s) if t > 0 else 0.0
    return (2.0 * g(d * h) - g((d - 1) * h) - g((d + 1) * h)) / (s * (1.0 - s))


def _pair_weight_polar_2d(delta, h: float, gauge, s: float, n_angles: int = 2048) -> float:
    """Exact-in-radius integral of the kernel against the cell correlation.

    The interaction of two cells at offset delta equals the integral of
    tent(z1 - d1) * tent(z2 - d2) * k(z) over the offset box; in polar
    coordinates the radial part is piecewise quadratic times r^{-1-s} and
    integrates in closed form, which captures the full near-diagonal mass
    for offsets touching the origin.
    """
    d1, d2 = delta[0] * h, delta[1] * h
    lo1, hi1 = d1 - h, d1 + h
    lo2, hi2 = d2 - h, d2 + h
    corners = [(x, y) for x in (lo1, hi1) for y in (lo2, hi2)]
    # angular window containing the box as seen from the origin
    angles = [math.atan2(y, x) for x, y in corners if (x, y) != (0.0, 0.0)]
    base = angles[0]
    rel = [((a - base + math.pi) % (2 * math.pi)) - math.pi for a in angles]
    th_lo = base + min(rel)
    th_hi = base + max(rel)
    if th_hi - th_lo > math.pi:  # box surrounds the origin direction-wise
        th_lo, th_hi = 0.0, 2 * math.pi
    breaks1 = (lo1, d1, hi1)
    breaks2 = (lo2, d2, hi2)
    exp = 2.0 + s

    def radial(theta: float) -> float:
        c, sn = math.cos(theta), math.sin(theta)
        rs = [0.0]
        for b in breaks1:
            if abs(c) > 1e-14:
                r = b / c
                if r > 0:
                    rs.append(r)
        for b in breaks2:
            if abs(sn) > 1e-14:
                r = b / sn
                if r > 0:
                    rs.append(r)
        rs = sorted(set(rs))
        total = 0.0
        for ra, rb in zip(rs[:-1], rs[1:]):
            rm = 0.5 * (ra + rb)
            z1, z2 = rm * c, rm * sn
            if not (lo1 < z1 < hi1 and lo2 < z2 < hi2):
                continue
            s1 = 1.0 if z1 >= d1 else -1.0
            s2 = 1.0 if z2 >= d2 else -1.0
            a1, b1 = h + s1 * d1, -s1 * c
            a2, b2 = h + s2 * d2, -s2 * sn
            A = a1 * a2
            B = a1 * b2 + a2 * b1
            C = b1 * b2
            if ra == 0.0:
                if abs(A) > 1e-12 * h * h:
                    raise ValueError("singular cell pair: offset box contains the origin")
                termA = 0.0
                ra_s = 0.0
            else:
                termA = A * (ra ** (-s) - rb ** (-s)) / s
                ra_s = ra
            total += termA
            total += B * (rb ** (1 - s) - ra_s ** (1 - s)) / (1 - s)
            total += C * (rb ** (2 - s) - ra_s ** (2 - s)) / (2 - s)
        return total

    M = 512
    prev = None
    while True:
        th = th_lo + (np.arange(M) + 0.5) * (th_hi - th_lo) / M
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        gvals = np.asarray(gauge(dirs), dtype=float) ** (-exp)
        vals = np.array([radial(t) for t in th])
        est = float(np.sum(gvals * vals)) * (th_hi - th_lo) / M
        if prev is not None and (abs(est - prev) <= 1e-9 * abs(est) + 1e-300 or M >= n_angles * 8):
            return est
        prev = est
        M *= 2


def _stencil(fam: KernelFamily, s: float, shape, h) -> np.ndarray:
    """Full pair-weight array indexed by offset + (shape - 1)."""
    n = fam.dim
    if len(shape) != n:
        raise ValueError("grid rank must match kernel dimension")
    if n == 1:
        m = shape[0]
        W = np.zeros(2 * m - 1)
        for d in range(1, m):
            w = _pair_weight_1d(d, h[0], s)
            W[m - 1 + d] = w
            W[m - 1 - d] = w
        return W
    if len(set(np.round(np.asarray(h), 15))) != 1:
        raise ValueError("pair weights require cubic voxels")
    hh = float(h[0])
    gauge = fam.gauge_at(s)
    if n == 2:
        m0, m1 = shape
        W = np.zeros((2 * m0 - 1, 2 * m1 - 1))
        # far field: tensor 2-point Gauss on each cell via the difference law
        d0 = np.arange(-(m0 - 1), m0)
        d1 = np.arange(-(m1 - 1), m1)
        D0, D1 = np.meshgrid(d0, d1, indexing="ij")
        centers = np.stack([D0 * hh, D1 * hh], axis=-1).reshape(-1, 2)
        a = hh / math.sqrt(3.0)
        shifts = [(-a, 0.25), (0.0, 0.5), (a, 0.25)]
        far = np.zeros(len(centers))
        for sx, wx in shifts:
            for sy, wy in shifts:
                z = centers + np.array([sx, sy])
                r = np.linalg.norm(z, axis=1)
                vals = np.zeros(len(z))
                ok = r > 1e-12 * hh
                vals[ok] = gauge(z[ok]) ** (-(2.0 + s))
                far += wx * wy * vals
        W[:, :] = (far * hh**4).reshape(W.shape)
        for dd0 in (-1, 0, 1):
            for dd1 in (-1, 0, 1):
                if dd0 == 0 and dd1 == 0:
                    W[m0 - 1, m1 - 1] = 0.0
                    continue
                w = _pair_weight_polar_2d((dd0, dd1), hh, gauge, s)
                W[m0 - 1 + dd0, m1 - 1 + dd1] = w
        return W
    raise ValueError("pair weights implemented for grids of rank 1 and 2")


# ---------------------------------------------------------------------------
# problem and energy

@dataclass
class VoxelProblem:
    """Discrete energy data: grid geometry, domain mask, fixed exterior."""

    grid: VoxelGrid
    omega_mask: np.ndarray
    exterior_data: np.ndarray
    s: float
    fam: KernelFamily
    stencil: np.ndarray = field(repr=False, default=None)
    tail_bound: float = math.inf

    @property
    def shape(self):
        return self.grid.shape

    def free_indices(self):
        return np.argwhere(self.omega_mask)

    def full_occupancy(self, inside_values: np.ndarray) -> np.ndarray:
        occ = np.where(self.omega_mask, inside_values, self.exterior_data)
        return occ.astype(bool)

    def check_exterior(self, occ: np.ndarray):
        if np.any(occ[~self.omega_mask] != self.exterior_data[~self.omega_mask]):
            raise ValueError("occupancy modifies fixed exterior data")


def voxel_problem(lo, hi, shape, omega_mask, exterior_data, s: float, fam: KernelFamily) -> VoxelProblem:
    """Assemble a voxel problem with its pair-weight stencil and tail bound."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    omega = np.asarray(omega_mask, dtype=bool).reshape(shape)
    ext = np.asarray(exterior_data, dtype=bool).reshape(shape)
    grid = VoxelGrid(lo, hi, shape, ext)
    h = grid.voxel_size()
    W = _stencil(fam, s, tuple(shape), h)
    # neglected interaction of domain voxels with space beyond the box
    n = fam.dim
    centers = grid.centers()[omega.ravel()]
    if len(centers) == 0:
        dist = math.inf
    else:
        lo_arr, hi_arr = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        dist = float(min(np.min(centers - lo_arr), np.min(hi_arr - centers)))
    if dist <= 0 or not math.isfinite(dist):
        tail = math.inf
    else:
        vol_omega = float(np.sum(omega)) * float(np.prod(h))
        tail = fam.c * vol_omega * sphere_surface(n) * dist ** (-s) / s
    return VoxelProblem(grid, omega, ext, s, fam, stencil=W, tail_bound=tail)


def _correlate(W: np.ndarray, occ: np.ndarray) -> np.ndarray:
    """(W * occ)(i) = sum_j occ(j) W[i - j]; W is symmetric, full-size."""
    out = fftconvolve(occ.astype(float), W, mode="valid")
    return out


def _potentials(problem: VoxelProblem, occ: np.ndarray):
    W = problem.stencil
    U = _correlate(W, occ)
    T = _correlate(W, np.ones_like(occ, dtype=float))
    X = _correlate(W, (occ & ~problem.omega_mask).astype(float))
    return U, T, X


def discrete_energy(problem: VoxelProblem, occ: np.ndarray) -> float:
    """P1 + P2 energy: ordered pairs (E cap Omega, E^c anywhere) plus
    (E^c cap Omega, E cap Omega^c), each unordered pair counted once."""
    occ = np.asarray(occ, dtype=bool).reshape(problem.shape)
    problem.check_exterior(occ)
    U, T, X = _potentials(problem, occ)
    om = problem.omega_mask
    inside = occ & om
    empty = ~occ & om
    return float(np.sum((T - U)[inside]) + np.sum(X[empty]))


def discrete_p1(problem: VoxelProblem, occ: np.ndarray, mask: np.ndarray) -> float:
    """Interaction of E and E^c restricted to the masked voxels."""
    occ = np.asarray(occ, dtype=bool).reshape(problem.shape)
    mask = np.asarray(mask, dtype=bool).reshape(problem.shape)
    V = _correlate(problem.stencil, ((~occ) & mask).astype(float))
    return float(np.sum(V[occ & mask]))


def flip_deltas(problem: VoxelProblem, occ: np.ndarray, U=None, T=None) -> np.ndarray:
    """Energy change of flipping each voxel: delta * (T - 2U), with
    delta = +1 for off voxels and -1 for on voxels."""
    occ = np.asarray(occ, dtype=bool).reshape(problem.shape)
    if U is None or T is None:
        U, T, _ = _potentials(problem, occ)
    sign = np.where(occ, -1.0, 1.0)
    return sign * (T - 2.0 * U)


def _stencil_patch(W, shape, v):
    """View of the stencil aligned so patch[i] = W[i - v]."""
    slices = tuple(
        slice(m - 1 - vi, 2 * m - 1 - vi) for m, vi in zip(shape, v)
    )
    return W[slices]


@dataclass
class MinimizeTrace:
    energies: list
    final_occupancy: np.ndarray
    flips: int
    converged: bool
    seed: int

    def to_dict(self):
        return {
            "energies": [float(e) for e in self.energies],
            "flips": self.flips,
            "converged": self.converged,
            "seed": self.seed,
        }


def local_minimize(
    problem: VoxelProblem,
    init_occupancy: np.ndarray,
    seed: int = 0,
    anneal_steps: int = 0,
    anneal_t0: float = 0.0,
    max_sweeps: int = 10_000,
) -> MinimizeTrace:
    """Greedy single-voxel descent, optionally preceded by annealing.

    Candidate flips are scanned in row-major order; each improving flip is
    applied immediately with its delta re-evaluated against the current
    state, so the trajectory is deterministic and the energy sequence is
    non-increasing.  The result is one-flip stable by construction.
    """
    occ = np.asarray(init_occupancy, dtype=bool).reshape(problem.shape).copy()
    problem.check_exterior(occ)
    shape = problem.shape
    W = problem.stencil
    U, T, _ = _potentials(problem, occ)
    energy = discrete_energy(problem, occ)
    energies = [energy]
    flips = 0
    tol = 1e-12 * max(1.0, abs(energy))
    free = [tuple(v) for v in np.argwhere(problem.omega_mask)]

    if anneal_steps > 0 and anneal_t0 > 0:
        rng = np.random.Generator(np.random.Philox(key=[np.uint64(seed), np.uint64(0)]))
        for step in range(anneal_steps):
            temp = anneal_t0 * (1.0 - step / anneal_steps)
            v = free[int(rng.integers(len(free)))]
            delta = -1.0 if occ[v] else 1.0
            dE = delta * (T[v] - 2.0 * U[v])
            if dE < 0 or (temp > 0 and rng.random() < math.exp(-dE / temp)):
                occ[v] = ~occ[v]
                U += delta * _stencil_patch(W, shape, v)
                energy += dE
                flips += 1
        energies.append(energy)

    converged = False
    for _ in range(max_sweeps):
        deltas = flip_deltas(problem, occ, U=U, T=T)
        candidates = [v for v in free if deltas[v] < -tol]
        made = 0
        for v in candidates:
            delta = -1.0 if occ[v] else 1.0
            dE = delta * (T[v] - 2.0 * U[v])
            if dE < -tol:
                occ[v] = ~occ[v]
                U += delta * _stencil_patch(W, shape, v)
                energy += dE
                flips += 1
                made += 1
        energies.append(energy)
        if made == 0:
            converged = True
            break
    # guard against float drift in the incremental energy
    energy_check = discrete_energy(problem, occ)
    energies[-1] = energy_check
    return MinimizeTrace(energies, occ, flips, converged, seed)


def is_one_flip_stable(problem: VoxelProblem, occ: np.ndarray, tol: float = 1e-9) -> bool:
    deltas = flip_deltas(problem, occ)
    return bool(np.all(deltas[problem.omega_mask] >= -tol * max(1.0, float(np.max(np.abs(deltas))))))


def brute_force_minimum(problem: VoxelProblem, max_free: int = 20):
    """Exhaustive minimum over all occupancies of the free voxels.

    Uses the reduced quadratic form E(S) = E0 + sum_v a_v - sum_{v,w in S}
    W_vw (each unordered pair once), enumerated over all subsets.
    """
    free = [tuple(v) for v in np.argwhere(problem.omega_mask)]
    m = len(free)
    if m > max_free:
        raise ValueError(f"too many free voxels for brute force ({m} > {max_free})")
    base = problem.full_occupancy(np.zeros(problem.shape, dtype=bool))
    U0, T, _ = _potentials(problem, base)
    E0 = discrete_energy(problem, base)
    a = np.array([T[v] - 2.0 * U0[v] for v in free])
    Wf = np.zeros((m, m))
    for i, v in enumerate(free):
        for j, w in enumerate(free):
            if i != j:
                off = tuple(mi - 1 + (wv - vv) for mi, wv, vv in zip(problem.shape, w, v))
                Wf[i, j] = problem.stencil[off]
    codes = np.arange(2**m, dtype=np.uint64)
    X = ((codes[:, None] >> np.arange(m, dtype=np.uint64)) & 1).astype(float)
    # x^T Wf x counts each unordered pair twice, matching -2 sum_{v<w} W_vw
    energies = E0 + X @ a - np.einsum("ij,jk,ik->i", X, Wf, X)
    best = int(np.argmin(energies))
    occ = base.copy()
    for i, v in enumerate(free):
        occ[v] = bool((best >> i) & 1)
    return float(energies[best]), occ


def minimizer_convergence_study(
    lo,
    hi,
    shape,
    omega_mask,
    exterior_region,
    s_list,
    fam: KernelFamily,
    seed: int = 0,
    omega_prime_frac: float = 0.75,
) -> dict:
    """Track minimizers across s: rescaled energies on a compactly
    contained subdomain and symmetric differences of successive minimizers.

    The initial occupancy at each s continues the exterior data through the
    domain; each run then descends to a one-flip-stable configuration.
    """
    shape = tuple(int(v) for v in shape)
    omega = np.asarray(omega_mask, dtype=bool).reshape(shape)
    probe = VoxelGrid(lo, hi, shape, np.zeros(shape, dtype=bool))
    centers = probe.centers()
    continuation = np.asarray(exterior_region.contains(centers), dtype=bool).reshape(shape)
    # concentric subdomain at omega_prime_frac of the domain extent
    idx = np.argwhere(omega)
    lo_idx = idx.min(axis=0)
    hi_idx = idx.max(axis=0)
    center_idx = (lo_idx + hi_idx) / 2.0
    half = (hi_idx - lo_idx + 1) * omega_prime_frac / 2.0
    omega_prime = np.zeros(shape, dtype=bool)
    for v in idx:
        if np.all(np.abs(v - center_idx) <= half):
            omega_prime[tuple(v)] = True

    runs = []
    prev_occ = None
    h_vol = float(np.prod(VoxelGrid(lo, hi, shape, np.zeros(shape, bool)).voxel_size()))
    for i, s in enumerate(sorted(s_list)):
        problem = voxel_problem(lo, hi, shape, omega, continuation, s, fam)
        trace = local_minimize(problem, continuation, seed=seed + i)
        occ = trace.final_occupancy
        prob_prime = voxel_problem(lo, hi, shape, omega_prime, continuation, s, fam)
        occ_prime = np.where(omega_prime, occ, continuation)
        restricted = discrete_energy(prob_prime, occ_prime)
        p1_restricted = discrete_p1(problem, occ, omega_prime)
        sym_diff = None
        if prev_occ is not None:
            sym_diff = float(np.sum(occ != prev_occ) * h_vol)
        runs.append(
            {
                "s": s,
                "energy": trace.energies[-1],
                "rescaled_restricted": (1 - s) * restricted,
                "rescaled_p1_restricted": (1 - s) * p1_restricted,
                "sym_diff_to_previous": sym_diff,
                "flips": trace.flips,
                "converged": trace.converged,
                "occupancy": occ,
            }
        )
        prev_occ = occ
    return {"runs": runs, "omega_prime": omega_prime}


def voxel_perimeter_estimate(grid: VoxelGrid) -> float:
    """Interface area of the occupancy: count of mismatched neighbor faces
    times the face measure (boundary faces of the box are not counted)."""
    occ = grid.occupancy
    h = grid.voxel_size()
    total = 0.0
    n = grid.dim
    for axis in range(n):
        face = float(np.prod([hv for i, hv in enumerate(h) if i != axis]))
        a = np.swapaxes(occ, 0, axis)
        total += float(np.sum(a[1:] != a[:-1])) * face
    return total


def occupancy_to_text(occ: np.ndarray) -> str:
    occ = np.asarray(occ, dtype=bool)
    if occ.ndim == 1:
        return "".join("1" if v else "0" for v in occ) + "\n"
    if occ.ndim == 2:
        return "\n".join("".join("1" if v else "0" for v in row) for row in occ) + "\n"
    raise ValueError("text grids support 1-D and 2-D occupancies")


def occupancy_from_text(text: str) -> np.ndarray:
    rows = [line for line in text.strip().splitlines() if line]
    arr = np.array([[ch == "1" for ch in row] for row in rows], dtype=bool)
    return arr[0] if arr.shape[0] == 1 else arr
