"""Numerical checks of the asymptotic structure of the annular ends.

Everything is measured in the normalized coordinate ``w = z + c`` in which
the Gauss map reads ``g = e^{iw + f(w)}`` with ``f(inf) = 0``:

    c = rotation - i log t   (NonVerticalFlux),    c = rotation   (otherwise).

The pole of dh moves to ``mu_w = mu + c``.  The normalized immersion is the
base-point immersion translated so that the two axis rays are symmetric
about the x3-axis and so that ``x3 = Re w + lam log|w - mu_w|``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .periods import period_residual_and_flux
from .surface import (MeshGrid, base_point, grid_triangles, horizontal, horizontal_jacobian)
from .wdata import HELICOID, NONVERTICAL, VERTICAL, WeierstrassFamily, eval_dh, eval_g, eval_x3

NEWTON_TOL = 1e-9
AXIS_RMAX = 1e4
# families with the 180 degree symmetry (the helicoid is the b = 0 member)
SYMMETRIC_VARIANTS = (VERTICAL, HELICOID)


class ExtractionError(RuntimeError):
    """Newton from the asymptotic seed did not converge."""

    def __init__(self, message: str, seed, last):
        super().__init__(f"{message} (seed={seed!r}, last={last!r})")
        self.seed = seed
        self.last = last


def canonical_shift(family: WeierstrassFamily) -> complex:
    c = complex(family.rotation)
    if family.variant == NONVERTICAL:
        c -= 1j * math.log(family.t)
    return c


# ---------------------------------------------------------------------------
# axis rays


def _pair_average(values: np.ndarray, levels: int = 2) -> complex:
    """Repeated averaging of consecutive partial sums of an alternating tail."""
    v = np.asarray(values)
    for _ in range(levels):
        v = 0.5 * (v[1:] + v[:-1])
    return complex(v[-1])


def axis_limits(family: WeierstrassFamily, rMax: float = AXIS_RMAX) -> tuple[complex, complex]:
    """Horizontal limits of the rays w = +r and w = -r, relative to the base point.

    Evaluated at w = +-pi m, where the tails alternate, and accelerated by
    two levels of consecutive-pair averaging.
    """
    c = canonical_shift(family)
    m0 = int(math.ceil((family.rprime + abs(c) + 1.0) / math.pi))
    m1 = int(rMax // math.pi)
    if m1 < m0 + 3:
        raise ValueError(f"rMax={rMax} too small for this family (need > {math.pi * (m0 + 3):.1f})")
    w = math.pi * np.arange(m0, m1 + 1)
    top = horizontal(family, w - c)
    bottom = horizontal(family, -w - c)
    return _pair_average(top), _pair_average(bottom)


def axis_offset(family: WeierstrassFamily, rMax: float = AXIS_RMAX) -> complex:
    """Limit of (x1 + i x2)(r) - (x1 + i x2)(-r); expected -i a/2."""
    top, bottom = axis_limits(family, rMax)
    return top - bottom


@dataclass(frozen=True)
class Normalization:
    shift: complex
    translation: complex
    heightOffset: float
    axisTop: complex
    axisBottom: complex

    @property
    def muW(self) -> complex:
        return self._mu + self.shift

    _mu: complex = 0j


def normalization(family: WeierstrassFamily, rMax: float = AXIS_RMAX) -> Normalization:
    c = canonical_shift(family)
    top, bottom = axis_limits(family, rMax)
    T = -0.5 * (top + bottom)
    z0 = base_point(family)
    h0 = z0.real + c.real + (family.lam * math.log(abs(z0 - family.mu)) if family.lam else 0.0)
    return Normalization(c, T, h0, top + T, bottom + T, family.mu)


def normalized_immersion(family: WeierstrassFamily, w, norm: Normalization) -> np.ndarray:
    """Normalized X at w (shape w.shape + (3,))."""
    z = np.asarray(w, dtype=complex) - norm.shift
    hz = np.asarray(horizontal(family, z)) + norm.translation
    x3 = np.asarray(eval_x3(family, z, base_point(family))) + norm.heightOffset
    return np.stack([hz.real, hz.imag, x3], axis=-1)


# ---------------------------------------------------------------------------
# multivalued graphs


@dataclass(frozen=True)
class MultigraphSample:
    r: float
    theta: float
    branch: int
    z: complex
    u: float


def _seed(r: float, theta, branch: int):
    L = math.log(2.0 * r)
    if branch == 1:
        return (np.asarray(theta) + 0.5 * math.pi) + 1j * L
    return (np.asarray(theta) - 0.5 * math.pi) - 1j * L


def extract_many(family: WeierstrassFamily, r: float, thetas, branch: int,
                 norm: Normalization, maxIter: int = 60) -> np.ndarray:
    """Solve (x1 + i x2)(w) = r e^{i theta} near the branch seed; returns w.

    Vectorized damped Newton.  Convergence means a horizontal residual below
    NEWTON_TOL * max(1, r): the primitives carry relative rounding error, so
    an absolute bound would be meaningless at r ~ 1e5.
    """
    if branch not in (1, 2):
        raise ValueError("branch is 1 or 2")
    th = np.atleast_1d(np.asarray(thetas, dtype=float))
    target = r * np.exp(1j * th)
    w = _seed(r, th, branch).astype(complex)
    seed = w.copy()
    tol = NEWTON_TOL * max(1.0, r)
    done = np.zeros(th.shape, dtype=bool)
    for _ in range(maxIter):
        z = w - norm.shift
        F = np.asarray(horizontal(family, z)) + norm.translation - target
        done = np.abs(F) <= tol
        if np.all(done):
            break
        Jx, Jy = horizontal_jacobian(family, z)
        det = Jx.real * Jy.imag - Jy.real * Jx.imag
        dx = -(F.real * Jy.imag - Jy.real * F.imag) / det
        dy = -(Jx.real * F.imag - F.real * Jx.imag) / det
        step = dx + 1j * dy
        big = np.abs(step) > 1.0
        step[big] /= np.abs(step[big])
        w = np.where(done, w, w + step)
    if not np.all(done):
        k = int(np.argmin(done))
        raise ExtractionError(f"Newton failed at r={r}, theta={th[k]}, branch={branch}", seed[k], w[k])
    sgn = np.sign(w.imag)
    if np.any(sgn != (1 if branch == 1 else -1)):
        k = int(np.argmax(sgn != (1 if branch == 1 else -1)))
        raise ExtractionError(f"branch {branch} landed on the wrong half-plane", seed[k], w[k])
    return w


def graph_heights(family: WeierstrassFamily, w, norm: Normalization) -> np.ndarray:
    z = np.asarray(w) - norm.shift
    return np.asarray(eval_x3(family, z, base_point(family))) + norm.heightOffset


def extract_multigraph(family: WeierstrassFamily, r: float, theta: float, branch: int,
                       norm: Normalization | None = None) -> MultigraphSample:
    norm = normalization(family) if norm is None else norm
    w = extract_many(family, r, [theta], branch, norm)
    return MultigraphSample(float(r), float(theta), branch, complex(w[0] - norm.shift),
                            float(graph_heights(family, w, norm)[0]))


def hole_clearance(family: WeierstrassFamily, norm: Normalization) -> float:
    """theta beyond which both branch seeds stay outside the excluded disk at every r."""
    return family.rprime + abs(norm.shift) + 0.5 * math.pi + 1.0


def theta_window(family: WeierstrassFamily, norm: Normalization, rMax: float,
                 samples: int = 33, turns: float = 1.0) -> np.ndarray:
    """Fixed sampling window used for comparisons across radii.

    It starts past the excluded disk and past theta = 2 log(2 rMax), beyond
    which the leading 1/w corrections no longer swap sign as r varies.
    """
    t0 = max(hole_clearance(family, norm), 2.0 * math.log(2.0 * rMax))
    return t0 + np.linspace(0.0, 2.0 * math.pi * turns, samples)


def diagonal_windows(family: WeierstrassFamily, norm: Normalization, rList,
                     samples: int = 33) -> list[tuple[float, np.ndarray]]:
    """(r_k, theta window) pairs with the window start doubling as r steps up.

    Follows r + |theta| -> infinity jointly, as in the separation limit.
    """
    t0 = hole_clearance(family, norm)
    out = []
    for k, r in enumerate(sorted(float(v) for v in rList)):
        start = max(t0, 2.0 * math.log(2.0 * r)) * 2.0 ** k
        out.append((r, start + np.linspace(0.0, 2.0 * math.pi, samples)))
    return out


def model_graph(r, theta, branch: int, lam: float):
    """v_1 (branch 1) or v_2 (branch 2)."""
    s = np.asarray(theta) + (0.5 * math.pi if branch == 1 else -0.5 * math.pi)
    L = np.log(2.0 * np.asarray(r))
    return s + lam * 0.5 * np.log(s * s + L * L)


def compare_model_graphs(family: WeierstrassFamily, rList, thetaList,
                         norm: Normalization | None = None) -> list[tuple[float, float]]:
    norm = normalization(family) if norm is None else norm
    th = np.asarray(thetaList, dtype=float)
    out = []
    for r in sorted(float(v) for v in rList):
        dev = 0.0
        for branch in (1, 2):
            u = graph_heights(family, extract_many(family, r, th, branch, norm), norm)
            dev = max(dev, float(np.max(np.abs(u - model_graph(r, th, branch, family.lam)))))
        out.append((r, dev))
    return out


def separation_values(family: WeierstrassFamily, r: float, thetaList,
                      norm: Normalization) -> np.ndarray:
    th = np.asarray(thetaList, dtype=float)
    u1 = graph_heights(family, extract_many(family, r, th, 1, norm), norm)
    u2 = graph_heights(family, extract_many(family, r, th, 2, norm), norm)
    return u1 - u2


def separation(family: WeierstrassFamily, rList, thetaList,
               norm: Normalization | None = None) -> tuple[list[tuple[float, float]], float]:
    """Per radius max |w - pi|, and the smallest w seen (must stay positive)."""
    norm = normalization(family) if norm is None else norm
    out, wmin = [], math.inf
    for r in sorted(float(v) for v in rList):
        w = separation_values(family, r, thetaList, norm)
        wmin = min(wmin, float(np.min(w)))
        out.append((r, float(np.max(np.abs(w - math.pi)))))
    return out, wmin


def same_flux_difference(first: WeierstrassFamily, second: WeierstrassFamily, r: float, thetaList,
                         norms: tuple[Normalization, Normalization] | None = None) -> float:
    """sup over theta and branch of |u_i - u'_i| for two normalized families at radius r."""
    n1, n2 = norms if norms is not None else (normalization(first), normalization(second))
    th = np.asarray(thetaList, dtype=float)
    d = 0.0
    for branch in (1, 2):
        u1 = graph_heights(first, extract_many(first, r, th, branch, n1), n1)
        u2 = graph_heights(second, extract_many(second, r, th, branch, n2), n2)
        d = max(d, float(np.max(np.abs(u1 - u2))))
    return d


# ---------------------------------------------------------------------------
# helicoid limits


def helicoid_point_distance(q: np.ndarray, axis: complex, phase: float) -> np.ndarray:
    """Distance from points q (..., 3) to the right-handed unit helicoid

        {axis + s (sin(h - phase), -cos(h - phase)), h}.
    """
    X = q[..., 0] - axis.real
    Y = q[..., 1] - axis.imag
    q3 = q[..., 2]

    def parts(h):
        # components of (X, Y) along the helicoid line at height h and across it
        a = h - phase
        return X * np.sin(a) - Y * np.cos(a), X * np.cos(a) + Y * np.sin(a)

    # the nearest point is within half a turn in height
    grid = np.linspace(-0.5 * math.pi, 0.5 * math.pi, 129)
    hh = q3[..., None] + grid
    a = hh - phase
    across = X[..., None] * np.cos(a) + Y[..., None] * np.sin(a)
    D = across * across + grid * grid
    h = np.take_along_axis(hh, np.argmin(D, axis=-1)[..., None], axis=-1)[..., 0]
    for _ in range(6):
        along, across = parts(h)
        d1 = -2 * along * across - 2 * (q3 - h)
        d2 = np.maximum(2 * (along * along - across * across) + 2, 1e-3)
        h = h - d1 / d2
    _, across = parts(h)
    return np.hypot(across, q3 - h)


@dataclass(frozen=True)
class HelicoidFit:
    n: int
    end: str
    axis: complex
    phase: float
    distance: float
    samples: int


def _window_samples(family: WeierstrassFamily, center: float, norm: Normalization,
                    radius: float, nx: int, ny: int) -> tuple[np.ndarray, np.ndarray]:
    ymax = math.asinh(radius) + 0.1
    x = np.linspace(-math.pi, math.pi, nx)
    y = np.linspace(-ymax, ymax, ny)
    w = center + x[None, :] + 1j * y[:, None]
    pts = normalized_immersion(family, w, norm).reshape(-1, 3)
    axis_pts = normalized_immersion(family, center + x, norm)
    return pts, axis_pts


def helicoid_distance(family: WeierstrassFamily, n: int, radius: float = 5.0, end: str = "top",
                      norm: Normalization | None = None, nx: int = 41, ny: int = 41) -> HelicoidFit:
    """Max distance from the translated end to its limit helicoid in a cylinder window.

    Samples w = +-2 pi n + zeta with |Re zeta| <= pi, translates by
    -(0, 0, 2 pi n + lam log n) (top) or +(0, 0, 2 pi n - lam log n)
    (bottom), fits the axis from the images of the real segment and the
    phase by least squares, and reports the largest point-to-helicoid
    distance among samples within ``radius`` of the fitted axis.
    """
    from scipy.optimize import minimize_scalar

    if end not in ("top", "bottom"):
        raise ValueError("end is 'top' or 'bottom'")
    norm = normalization(family) if norm is None else norm
    center = 2 * math.pi * n if end == "top" else -2 * math.pi * n
    if abs(center) - math.pi - abs(norm.shift) - 3.0 < family.rprime:
        raise ValueError(f"n={n} too small: window reaches the excluded disk")
    pts, axis_pts = _window_samples(family, center, norm, radius, nx, ny)
    dz = -(2 * math.pi * n + family.lam * math.log(n)) if end == "top" else 2 * math.pi * n - family.lam * math.log(n)
    pts[:, 2] += dz
    axis = complex(np.mean(axis_pts[:, 0]), np.mean(axis_pts[:, 1]))
    keep = np.hypot(pts[:, 0] - axis.real, pts[:, 1] - axis.imag) <= radius
    if not np.any(keep):
        raise ValueError("window contains no samples")
    pts = pts[keep]
    guess = family.lam * math.log(2 * math.pi)
    res = minimize_scalar(lambda p: float(np.sum(helicoid_point_distance(pts, axis, p) ** 2)),
                          bounds=(guess - 1.0, guess + 1.0), method="bounded",
                          options={"xatol": 1e-10})
    phase = float(res.x)
    d = float(np.max(helicoid_point_distance(pts, axis, phase)))
    return HelicoidFit(n, end, axis, phase, d, int(pts.shape[0]))


# ---------------------------------------------------------------------------
# graph region and sheet meshes


def estimate_RE(family: WeierstrassFamily, thetaList, norm: Normalization | None = None,
                rStart: float = 2.0, rCap: float = 1e9) -> float:
    """Smallest radius where Newton from the seeds converges on both branches
    for every sampled theta with positive separation (geometric scan, then
    bisection in log r)."""
    norm = normalization(family) if norm is None else norm

    def ok(r: float) -> bool:
        try:
            return bool(np.all(separation_values(family, r, thetaList, norm) > 0))
        except ExtractionError:
            return False

    lo, hi = None, rStart
    while not ok(hi):
        lo, hi = hi, hi * 1.5
        if hi > rCap:
            raise ExtractionError("no graph region below the radius cap", rStart, hi)
    if lo is None:
        return hi
    for _ in range(12):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sheet_grid(family: WeierstrassFamily, branch: int, rValues, thetaValues,
               norm: Normalization | None = None) -> MeshGrid:
    """The multigraph Sigma_branch sampled as (r e^{i theta}, u) on a polar grid."""
    norm = normalization(family) if norm is None else norm
    r = np.asarray(rValues, dtype=float)
    th = np.asarray(thetaValues, dtype=float)
    pts = np.empty((len(r), len(th), 3))
    zs = np.empty((len(r), len(th)), dtype=complex)
    for i, rv in enumerate(r):
        w = extract_many(family, float(rv), th, branch, norm)
        pts[i, :, 0] = rv * np.cos(th)
        pts[i, :, 1] = rv * np.sin(th)
        pts[i, :, 2] = graph_heights(family, w, norm)
        zs[i] = w - norm.shift
    return MeshGrid(r, th, pts, zs, branch, 0.0, {"kind": "multigraph"})


# ---------------------------------------------------------------------------
# embeddedness


def _segments_hit(a: np.ndarray, b: np.ndarray, T: np.ndarray, eps: float) -> np.ndarray:
    """Segments a->b against triangles T (all (m, 3)-shaped), Moller-Trumbore."""
    e1 = T[:, 1] - T[:, 0]
    e2 = T[:, 2] - T[:, 0]
    d = b - a
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1) * np.linalg.norm(d, axis=1)
    good = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300)
    inv = np.where(good, 1.0 / np.where(good, det, 1.0), 0.0)
    s = a - T[:, 0]
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = np.einsum("ij,ij->i", d, q) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    return good & (u >= -eps) & (v >= -eps) & (u + v <= 1 + eps) & (t >= -eps) & (t <= 1 + eps)


def _coplanar_overlap(P: np.ndarray, Q: np.ndarray, eps: float) -> np.ndarray:
    """Overlap of coplanar triangle pairs, tested in the dominant projection plane."""
    n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    drop = np.argmax(np.abs(n), axis=1)
    keep = np.array([[1, 2], [0, 2], [0, 1]])[drop]
    p2 = np.take_along_axis(P, keep[:, None, :], axis=2)
    q2 = np.take_along_axis(Q, keep[:, None, :], axis=2)

    def inside(pt, tri):
        def side(a, b):
            return (b[:, 0] - a[:, 0]) * (pt[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (pt[:, 0] - a[:, 0])
        s0, s1, s2 = side(tri[:, 0], tri[:, 1]), side(tri[:, 1], tri[:, 2]), side(tri[:, 2], tri[:, 0])
        return ((s0 >= -eps) & (s1 >= -eps) & (s2 >= -eps)) | ((s0 <= eps) & (s1 <= eps) & (s2 <= eps))

    def cross2(u, v):
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    hit = np.zeros(len(P), dtype=bool)
    for k in range(3):
        hit |= inside(p2[:, k], q2) | inside(q2[:, k], p2)
        for m in range(3):
            a, b = p2[:, k], p2[:, (k + 1) % 3]
            c, d = q2[:, m], q2[:, (m + 1) % 3]
            d1, d2 = cross2(b - a, c - a), cross2(b - a, d - a)
            d3, d4 = cross2(d - c, a - c), cross2(d - c, b - c)
            hit |= (d1 * d2 < 0) & (d3 * d4 < 0)
    return hit


def triangles_intersect(P: np.ndarray, Q: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Vectorized exact-arithmetic-style test for triangle pairs P[i], Q[i]."""
    hit = np.zeros(len(P), dtype=bool)
    for k in range(3):
        hit |= _segments_hit(P[:, k], P[:, (k + 1) % 3], Q, eps)
        hit |= _segments_hit(Q[:, k], Q[:, (k + 1) % 3], P, eps)
    n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    nn = np.linalg.norm(n, axis=1)
    size = np.max(np.abs(np.concatenate([P, Q], axis=1) - P[:, :1]).reshape(len(P), -1), axis=1)
    off = np.abs(np.einsum("ikj,ij->ik", Q - P[:, :1], n)) / np.maximum(nn, 1e-300)[:, None]
    coplanar = np.all(off <= 1e-12 * np.maximum(size, 1.0)[:, None], axis=1) & (nn > 0)
    if np.any(coplanar & ~hit):
        sel = coplanar & ~hit
        hit[sel] = _coplanar_overlap(P[sel], Q[sel], eps)
    return hit


@dataclass(frozen=True)
class EmbeddingReport:
    embedded: bool
    triangles: int
    skipped: int
    candidatePairs: int
    intersections: int


def _candidate_pairs(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Pairs of boxes sharing a spatial-hash cell, then filtered by box overlap."""
    ext = np.max(hi - lo, axis=1)
    cell = max(float(np.quantile(ext, 0.9)), 1e-9)
    a = np.floor(lo / cell).astype(np.int64)
    b = np.floor(hi / cell).astype(np.int64)
    span = b - a + 1
    keys, owners = [], []
    big = span.prod(axis=1) > 64
    for tri in np.flatnonzero(~big):
        gx, gy, gz = np.meshgrid(*(np.arange(a[tri, k], b[tri, k] + 1) for k in range(3)), indexing="ij")
        keys.append(np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1))
        owners.append(np.full(gx.size, tri))
    pairs = []
    if keys:
        K = np.concatenate(keys)
        O = np.concatenate(owners)
        _, inv = np.unique(K, axis=0, return_inverse=True)
        order = np.argsort(inv, kind="stable")
        inv, O = inv.ravel()[order], O[order]
        starts = np.flatnonzero(np.r_[True, inv[1:] != inv[:-1]])
        ends = np.r_[starts[1:], len(inv)]
        for s0, s1 in zip(starts, ends):
            if s1 - s0 > 1:
                grp = O[s0:s1]
                i, j = np.triu_indices(len(grp), 1)
                pairs.append(np.stack([grp[i], grp[j]], axis=1))
    # oversized boxes are checked against everything
    for tri in np.flatnonzero(big):
        other = np.delete(np.arange(len(lo)), tri)
        pairs.append(np.stack([np.full(len(other), tri), other], axis=1))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    P = np.sort(np.concatenate(pairs), axis=1)
    P = np.unique(P, axis=0)
    P = P[P[:, 0] != P[:, 1]]
    overlap = np.all((lo[P[:, 0]] <= hi[P[:, 1]]) & (lo[P[:, 1]] <= hi[P[:, 0]]), axis=1)
    return P[overlap]


def check_embedded(grids) -> EmbeddingReport:
    """True iff no two non-adjacent triangles of the given grids intersect.

    Triangles are adjacent when they share a vertex of the same grid; grids
    never share vertices, so a copy of a grid overlaps its original.
    """
    if isinstance(grids, MeshGrid):
        grids = [grids]
    verts, faces, skipped = [], [], 0
    offset = 0
    for g in grids:
        f, sk = grid_triangles(g)
        skipped += sk
        verts.append(g.points.reshape(-1, 3))
        faces.append(f + offset)
        offset += verts[-1].shape[0]
    V = np.concatenate(verts)
    F = np.concatenate(faces)
    T = V[F]
    pairs = _candidate_pairs(T.min(axis=1), T.max(axis=1))
    if len(pairs):
        share = np.zeros(len(pairs), dtype=bool)
        for k in range(3):
            for m in range(3):
                share |= F[pairs[:, 0], k] == F[pairs[:, 1], m]
        pairs = pairs[~share]
    hits = 0
    for s0 in range(0, len(pairs), 200000):
        blk = pairs[s0:s0 + 200000]
        hits += int(np.count_nonzero(triangles_intersect(T[blk[:, 0]], T[blk[:, 1]])))
    return EmbeddingReport(hits == 0, int(len(F)), skipped, int(len(pairs)), hits)


# ---------------------------------------------------------------------------
# symmetry, curvature, gradients


def symmetry_defect(family: WeierstrassFamily, radii=None, ntheta: int = 256) -> float:
    """max |g(conj z) conj g(z) - 1| + max |h(conj z) - conj h(z)| over sampled rings."""
    if family.variant not in SYMMETRIC_VARIANTS:
        raise ValueError(f"symmetry_defect needs VerticalFlux data, got {family.variant}")
    radii = [family.rprime * k for k in (1.0, 1.5, 2.0, 4.0)] if radii is None else radii
    th = np.linspace(0.0, 2 * math.pi, ntheta, endpoint=False)
    z = np.concatenate([r * np.exp(1j * th) for r in radii])
    # keep |g| moderate so the product is not dominated by overflow-scale rounding
    z = z[np.abs(z.imag) <= 30.0]
    zb = np.conj(z)
    dg = np.max(np.abs(eval_g(family, zb) * np.conj(eval_g(family, z)) - 1.0))
    dh = np.max(np.abs(eval_dh(family, zb) - np.conj(eval_dh(family, z))))
    return float(dg + dh)


def paired_point_defect(family: WeierstrassFamily, xmax: float = 60.0, ymax: float = 8.0,
                        nx: int = 61, ny: int = 17) -> float:
    """max |X(conj z) - Rot_pi X(z)| for the base-point immersion (axis through X(rprime))."""
    from .surface import immerse_fast

    x = np.linspace(-xmax, xmax, nx)
    y = np.linspace(-ymax, ymax, ny)
    z = (x[None, :] + 1j * y[:, None]).ravel()
    z = z[np.abs(z) >= family.rprime]
    X = immerse_fast(family, z)
    Xb = immerse_fast(family, np.conj(z))
    rot = X * np.array([-1.0, -1.0, 1.0])
    return float(np.max(np.abs(Xb - rot)))


def ring_curvature_sup(family: WeierstrassFamily, radii, ntheta: int = 720) -> list[tuple[float, float]]:
    """sup |K| along each ring |w| = r (grid maximum refined by a bounded 1-D search)."""
    from scipy.optimize import minimize_scalar
    from .surface import gauss_curvature

    c = canonical_shift(family)
    out = []
    for r in sorted(float(v) for v in radii):
        th = np.linspace(0.0, 2 * math.pi, ntheta, endpoint=False)

        def absK(t):
            return np.abs(gauss_curvature(family, r * np.exp(1j * np.asarray(t)) - c))

        vals = absK(th)
        best = float(np.max(vals))
        for k in np.argsort(vals)[-2:]:
            dt = th[1] - th[0]
            res = minimize_scalar(lambda t: -float(absK(t)), bounds=(th[k] - dt, th[k] + dt),
                                  method="bounded", options={"xatol": 1e-12})
            best = max(best, -float(res.fun))
        out.append((r, best))
    return out


def gradient_profile(family: WeierstrassFamily, radii, thetaList,
                     norm: Normalization | None = None, rel: float = 1e-3) -> list[tuple[float, float]]:
    """max over theta and branch of |grad u_i| (flat metric), central differences."""
    norm = normalization(family) if norm is None else norm
    th = np.asarray(thetaList, dtype=float)
    dth = 1e-3
    out = []
    for r in sorted(float(v) for v in radii):
        g = 0.0
        for branch in (1, 2):
            def u(rr, tt):
                return graph_heights(family, extract_many(family, rr, tt, branch, norm), norm)
            ur = (u(r * (1 + rel), th) - u(r * (1 - rel), th)) / (2 * r * rel)
            ut = (u(r, th + dth) - u(r, th - dth)) / (2 * dth)
            g = max(g, float(np.max(np.hypot(ur, ut / r))))
        out.append((r, g))
    return out


@dataclass(frozen=True)
class FluxInvariants:
    """Measured (axis offset, vertical flux) with estimation tolerances."""

    axisOffset: complex
    axisTol: float
    verticalFlux: float
    fluxTol: float


def flux_invariants(family: WeierstrassFamily, rMax: float = AXIS_RMAX) -> FluxInvariants:
    a1 = axis_offset(family, rMax)
    a0 = axis_offset(family, rMax / 10.0)
    rep = period_residual_and_flux(family)
    return FluxInvariants(a1, max(abs(a1 - a0), 1e-9), float(rep.flux[2]),
                          max(rep.periodResidual, 1e-12))


def invariants_distinct(p: FluxInvariants, q: FluxInvariants, factor: float = 3.0) -> bool:
    return (abs(p.axisOffset - q.axisOffset) > factor * (p.axisTol + q.axisTol)
            or abs(p.verticalFlux - q.verticalFlux) > factor * (p.fluxTol + q.fluxTol))


# ---------------------------------------------------------------------------
# report


def _c(v: complex) -> list[float]:
    return [float(v.real), float(v.imag)]


@dataclass
class AsymptoticsReport:
    axisTop: complex = 0j
    axisBottom: complex = 0j
    axisOffsetError: float = 0.0
    graphDeviation: list = field(default_factory=list)
    separationStats: list = field(default_factory=list)
    helicoidDistance: list = field(default_factory=list)
    symmetryDefect: float | None = None
    embedded: bool | None = None
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "axisTop": _c(self.axisTop),
            "axisBottom": _c(self.axisBottom),
            "axisOffsetError": self.axisOffsetError,
            "graphDeviation": [list(map(float, p)) for p in sorted(self.graphDeviation)],
            "separationStats": [list(map(float, p)) for p in sorted(self.separationStats)],
            "helicoidDistance": [list(map(float, p)) for p in sorted(self.helicoidDistance)],
            "symmetryDefect": self.symmetryDefect,
            "embedded": self.embedded,
            "extras": self.extras,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["quantity", "key", "value"])
        wr.writerow(["axisTop.re", "", repr(float(self.axisTop.real))])
        wr.writerow(["axisTop.im", "", repr(float(self.axisTop.imag))])
        wr.writerow(["axisBottom.re", "", repr(float(self.axisBottom.real))])
        wr.writerow(["axisBottom.im", "", repr(float(self.axisBottom.imag))])
        wr.writerow(["axisOffsetError", "", repr(float(self.axisOffsetError))])
        for name in ("graphDeviation", "separationStats", "helicoidDistance"):
            for k, v in sorted(getattr(self, name)):
                wr.writerow([name, repr(float(k)), repr(float(v))])
        if self.symmetryDefect is not None:
            wr.writerow(["symmetryDefect", "", repr(float(self.symmetryDefect))])
        if self.embedded is not None:
            wr.writerow(["embedded", "", str(bool(self.embedded)).lower()])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# verification suite

CHECKS = ("flux", "axis", "graphs", "separation", "helicoid", "symmetry", "embedded", "curvature")

DEFAULT_TOLERANCES = {
    "period": 1e-9,       # period residual certificate
    "flux": 1e-6,         # componentwise flux error
    "axis": 0.02,         # times (1 + a)
    "graphs": 0.1,
    "separation": 0.05,
    "helicoid": 0.05,
    "symmetry": 1e-12,
    "paired": 1e-6,
    "curvature": 2e-2,
}

VERIFY_RADII = (1e2, 1e3, 1e4, 1e5)
VERIFY_TURNS = (50, 100, 200)
CURVATURE_RADII = (1e2, 1e3, 1e4)


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str
    skipped: bool = False


def _verify_one(name: str, family: WeierstrassFamily, tol: dict, report: AsymptoticsReport,
                ctx: dict) -> CheckOutcome:
    a = ctx["a"]
    if name == "flux":
        rep = period_residual_and_flux(family)
        f = rep.flux
        ok = rep.periodResidual <= tol["period"] and abs(f[1]) <= tol["flux"] and f[0] >= -tol["flux"]
        if ctx.get("target") is not None:
            ta, tb = ctx["target"]
            ok = ok and max(abs(f[0] - ta), abs(f[1]), abs(f[2] + tb)) <= tol["flux"]
        report.extras["flux"] = [float(v) for v in f]
        report.extras["periodResidual"] = float(rep.periodResidual)
        return CheckOutcome(name, ok, f"periodResidual={rep.periodResidual:.3e} flux={list(f)}")
    if name == "axis":
        off = report.axisTop - report.axisBottom
        err = abs(off + 0.5j * a)
        report.axisOffsetError = float(err)
        return CheckOutcome(name, err <= tol["axis"] * (1 + a), f"offset={off!r} error={err:.3e}")
    norm = ctx["norm"]
    if name == "graphs":
        rows = []
        for r, th in diagonal_windows(family, norm, VERIFY_RADII):
            rows += compare_model_graphs(family, [r], th, norm)
        report.graphDeviation = rows
        ok = rows[-1][1] < tol["graphs"] and rows[-1][1] < rows[0][1] + 1e-12
        return CheckOutcome(name, ok, f"deviation={[round(v, 6) for _, v in rows]}")
    if name == "separation":
        rows, wmin = [], math.inf
        for r, th in diagonal_windows(family, norm, VERIFY_RADII):
            s, m = separation(family, [r], th, norm)
            rows += s
            wmin = min(wmin, m)
        report.separationStats = rows
        report.extras["separationMin"] = wmin
        ok = wmin > 0 and rows[-1][1] < tol["separation"] and rows[-1][1] <= rows[0][1] + 1e-12
        return CheckOutcome(name, ok, f"max|w-pi|={[round(v, 6) for _, v in rows]} min w={wmin:.4f}")
    if name == "helicoid":
        rows, ok, axes = [], True, {}
        for end in ("top", "bottom"):
            ds = []
            for n in VERIFY_TURNS:
                fit = helicoid_distance(family, n, end=end, norm=norm)
                ds.append(fit.distance)
                axes[end] = fit.axis
                rows.append((n if end == "top" else -n, fit.distance))
            ok = ok and ds[-1] < tol["helicoid"] and all(y <= x + 1e-9 for x, y in zip(ds, ds[1:]))
        shift = axes["bottom"] - axes["top"]
        ok = ok and abs(shift - 0.5j * a) <= tol["axis"] * (1 + a)
        report.helicoidDistance = rows
        report.extras["helicoidAxisShift"] = _c(shift)
        return CheckOutcome(name, ok, f"d_n={[round(v, 6) for _, v in rows]} H_B-H_T={shift!r}")
    if name == "symmetry":
        if family.variant not in SYMMETRIC_VARIANTS:
            return CheckOutcome(name, True, f"not applicable to {family.variant}", skipped=True)
        d = symmetry_defect(family)
        p = paired_point_defect(family)
        report.symmetryDefect = d
        report.extras["pairedPointDefect"] = p
        return CheckOutcome(name, d < tol["symmetry"] and p < tol["paired"], f"defect={d:.3e} paired={p:.3e}")
    if name == "embedded":
        th = hole_clearance(family, norm) + np.linspace(0.0, 6 * math.pi, 193)
        RE = estimate_RE(family, th, norm)
        r = np.geomspace(RE, 10 * RE, 12)
        emb = check_embedded([sheet_grid(family, k, r, th, norm) for k in (1, 2)])
        report.embedded = emb.embedded
        report.extras["RE"] = RE
        return CheckOutcome(name, emb.embedded, f"RE={RE:.4g} triangles={emb.triangles} hits={emb.intersections}")
    if name == "curvature":
        rows = ring_curvature_sup(family, CURVATURE_RADII)
        report.extras["curvatureSup"] = [[r, v] for r, v in rows]
        dev = [abs(v - 1) for _, v in rows]
        ok = dev[-1] < tol["curvature"] and dev[-1] <= dev[0] + 1e-12
        return CheckOutcome(name, ok, f"sup|K|={[round(v, 8) for _, v in rows]}")
    raise ValueError(f"unknown check {name!r}")


def verify_family(family: WeierstrassFamily, checks=CHECKS, tolerances: dict | None = None,
                  target: tuple[float, float] | None = None) -> tuple[AsymptoticsReport, list[CheckOutcome]]:
    """Run the selected checks; a check that raises is recorded as failed."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {CHECKS}")
    rep = period_residual_and_flux(family)
    a, b = max(rep.flux[0], 0.0), -rep.flux[2]
    if target is not None:
        a, b = target
    report = AsymptoticsReport()
    ctx = {"a": a, "b": b, "target": target}
    outcomes = []
    try:
        norm = normalization(family)
        ctx["norm"] = norm
        report.axisTop, report.axisBottom = norm.axisTop, norm.axisBottom
    except Exception as exc:  # not period-closed, or quadrature failure
        ctx["norm"] = None
        report.extras["normalizationError"] = str(exc)
    for name in [c for c in CHECKS if c in checks]:
        if name != "flux" and ctx["norm"] is None and name not in ("symmetry", "curvature"):
            outcomes.append(CheckOutcome(name, False, "normalization failed"))
            continue
        try:
            outcomes.append(_verify_one(name, family, tol, report, ctx))
        except Exception as exc:
            outcomes.append(CheckOutcome(name, False, f"{type(exc).__name__}: {exc}"))
    report.extras["checks"] = {o.name: {"passed": o.passed, "skipped": o.skipped, "detail": o.detail}
                               for o in outcomes}
    return report, outcomes
