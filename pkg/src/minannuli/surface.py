"""The minimal immersion X of a Weierstrass family, curvature and meshes.

The horizontal part of X is

    (x1 + i x2)(z) = 1/2 (conj P(z) - Q(z)),   P = int dh/g,  Q = int g dh

and the height is the closed form ``eval_x3``.  Two independent routes
evaluate P and Q:

* path quadrature (circular arc at the base radius, then a radial leg),
  which works for every variant, and
* exact antiderivatives built from the exponential integral, available
  whenever g dh and dh/g are ``e^{+-iz}`` times a rational function
  (all variants except GenericExp with a nonzero Laurent tail).

The base point is ``z0 = rprime`` on the positive real axis.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import exp1

from .wdata import (GENERIC, HELICOID, NONVERTICAL, VERTICAL, WeierstrassFamily,
                    check_domain, eval_dh, eval_g, eval_log_deriv_g, eval_x3, log_g)

QUAD_TOL = 1e-11


class SurfaceError(RuntimeError):
    pass


def base_point(family: WeierstrassFamily) -> complex:
    return complex(family.rprime, 0.0)


# ---------------------------------------------------------------------------
# integrands


def forms(family: WeierstrassFamily, z):
    """Coefficients of the one-forms ``dh/g`` and ``g dh`` at z."""
    g = eval_g(family, z)
    h = eval_dh(family, z)
    return h / g, g * h


def phi(family: WeierstrassFamily, z) -> np.ndarray:
    """The vector (1/2 (1/g - g), i/2 (1/g + g), 1) h(z); X = Re int phi dz."""
    g = eval_g(family, z)
    h = eval_dh(family, z)
    return np.stack([0.5 * (1 / g - g) * h, 0.5j * (1 / g + g) * h, h * np.ones_like(g)], axis=-1)


# ---------------------------------------------------------------------------
# exact antiderivatives


@dataclass(frozen=True)
class _ExpRational:
    """scale * e^{s i z} * (c0 + sum a/(z - p) + sum b/(z - p)^2)."""

    s: int
    scale: complex
    c0: complex
    simple: tuple[tuple[complex, complex], ...] = ()
    double: tuple[tuple[complex, complex], ...] = ()


def _exp_rational_forms(family: WeierstrassFamily) -> tuple[_ExpRational, _ExpRational] | None:
    """(dh/g, g dh) in exp-rational form, or None when no closed form exists."""
    rot = complex(math.cos(family.rotation), math.sin(family.rotation))
    v = family.variant
    if v == HELICOID:
        return _ExpRational(-1, 1 / rot, 1), _ExpRational(1, rot, 1)
    if v == NONVERTICAL:
        t, A, B = family.t, family.A, family.B
        P = _ExpRational(-1, 1 / (rot * t), 1, ((A, A + B),))
        Q = _ExpRational(1, rot * t, 1, ((0j, B - A),), ((0j, -A * B),))
        return P, Q
    if v == VERTICAL:
        A, B = family.A, family.B
        Ab = A.conjugate()
        P = _ExpRational(-1, 1 / rot, 1, ((0j, Ab * B / A), (A, (A - Ab) * (A + B) / A)))
        Q = _ExpRational(1, rot, 1, ((0j, A * B / Ab), (Ab, (Ab - A) * (Ab + B) / Ab)))
        return P, Q
    if v == GENERIC and not family.laurent:
        poles = ((family.mu, complex(family.lam)),) if family.lam else ()
        return _ExpRational(-1, 1 / rot, 1, poles), _ExpRational(1, rot, 1, poles)
    return None


def _exp_log_primitive(s: int, p: complex, z: np.ndarray) -> np.ndarray:
    """Antiderivative of e^{s i (z - p)} / (z - p) on |z| > |p|.

    Equals -E1(-s i (z - p)) with the logarithm branch replaced by
    Log z + log1p(-p/z); every pole therefore shares the single cut
    along the negative real axis.
    """
    w = -s * 1j * (z - p)
    principal = np.log(w)
    wanted = -s * 0.5j * math.pi + np.log(z) + np.log1p(-p / z)
    k = np.round((wanted - principal).imag / (2 * math.pi))
    return -exp1(w) + 2j * math.pi * k


def _primitive(form: _ExpRational, z: np.ndarray) -> np.ndarray:
    s = form.s
    e = np.exp(s * 1j * z)
    out = form.c0 * e / (s * 1j)
    for p, a in form.simple:
        out = out + a * np.exp(s * 1j * p) * _exp_log_primitive(s, p, z)
    for p, b in form.double:
        log_part = np.exp(s * 1j * p) * _exp_log_primitive(s, p, z)
        out = out + b * (-e / (z - p) + s * 1j * log_part)
    return form.scale * out


def _period_closed(family: WeierstrassFamily, tol: float = 1e-9) -> bool:
    from .periods import QuadratureError, period_residual_and_flux
    try:
        return period_residual_and_flux(family).periodResidual < tol
    except QuadratureError:
        return False


def has_exact_primitives(family: WeierstrassFamily) -> bool:
    return _exp_rational_forms(family) is not None


def primitives(family: WeierstrassFamily, z):
    """Exact (P, Q) antiderivatives of (dh/g, g dh), up to constants."""
    fr = _exp_rational_forms(family)
    if fr is None:
        raise SurfaceError(f"no exact primitive for {family.variant} with Laurent tail")
    check_domain(family, z)
    zz = np.asarray(z, dtype=complex)
    return _primitive(fr[0], zz), _primitive(fr[1], zz)


# ---------------------------------------------------------------------------
# path quadrature


def _leg(family: WeierstrassFamily, path, dpath) -> np.ndarray:
    def integrand(tau):
        zeta = path(tau)
        dhg, gdh = forms(family, zeta)
        return np.array([dhg, gdh]) * dpath(tau)

    # size of the integrand along the leg: the integral itself can cancel
    probe = np.abs(np.array([integrand(s) for s in np.linspace(0.0, 1.0, 33)]))
    scale = max(1.0, float(np.max(probe)))
    val, err = quad_vec(integrand, 0.0, 1.0, epsabs=QUAD_TOL * scale, epsrel=QUAD_TOL, limit=4000)
    if err > 1e3 * QUAD_TOL * scale:
        raise SurfaceError(f"path quadrature did not converge (err={err:.2e})")
    return val


def path_integrals(family: WeierstrassFamily, z: complex, z0: complex | None = None,
                   turns: int = 0) -> tuple[complex, complex]:
    """(int dh/g, int g dh) from z0 to z: arc at radius |z0|, then radial leg.

    The arc runs at the smallest radius so the path never visits integrand
    values much larger than those at its endpoints.  ``turns`` adds full
    windings to the arc (universal cover sheet).
    """
    z = complex(z)
    z0 = base_point(family) if z0 is None else complex(z0)
    check_domain(family, z)
    check_domain(family, z0)
    r0, r1 = abs(z0), abs(z)
    if r0 == 0:
        # only reachable for pole-free data: straight segment
        return tuple(complex(v) for v in _leg(family, lambda s: z * s, lambda s: z))
    a0 = math.atan2(z0.imag, z0.real)
    a1 = a0 + math.remainder(math.atan2(z.imag, z.real) - a0, 2 * math.pi) + 2 * math.pi * turns
    total = np.zeros(2, dtype=complex)
    if a1 != a0:
        total += _leg(family,
                      lambda s: r0 * np.exp(1j * (a0 + (a1 - a0) * s)),
                      lambda s: 1j * (a1 - a0) * r0 * np.exp(1j * (a0 + (a1 - a0) * s)))
    if r1 != r0:
        u = complex(math.cos(a1), math.sin(a1))
        total += _leg(family, lambda s: (r0 + (r1 - r0) * s) * u, lambda s: (r1 - r0) * u)
    return complex(total[0]), complex(total[1])


def immerse(family: WeierstrassFamily, z: complex, z0: complex | None = None,
            turns: int = 0) -> np.ndarray:
    """X(z) - X(z0) by path quadrature; the height uses the closed form."""
    z0 = base_point(family) if z0 is None else complex(z0)
    P, Q = path_integrals(family, z, z0, turns)
    horiz = 0.5 * (P.conjugate() - Q)
    return np.array([horiz.real, horiz.imag, float(eval_x3(family, z, z0))])


def horizontal(family: WeierstrassFamily, z, z0: complex | None = None):
    """(x1 + i x2)(z) - (x1 + i x2)(z0), exact primitives when available."""
    z0 = base_point(family) if z0 is None else complex(z0)
    if has_exact_primitives(family):
        P, Q = primitives(family, z)
        P0, Q0 = primitives(family, z0)
        return 0.5 * (np.conj(P - P0) - (Q - Q0))
    zz = np.asarray(z, dtype=complex)
    flat = np.array([0.5 * (p.conjugate() - q) for p, q in
                     (path_integrals(family, complex(v), z0) for v in zz.ravel())])
    out = flat.reshape(zz.shape)
    return out[()] if out.ndim == 0 else out


def immerse_fast(family: WeierstrassFamily, z, z0: complex | None = None) -> np.ndarray:
    """Vectorized X(z) - X(z0); shape ``z.shape + (3,)``."""
    z0 = base_point(family) if z0 is None else complex(z0)
    hz = np.asarray(horizontal(family, z, z0))
    x3 = np.asarray(eval_x3(family, z, z0))
    return np.stack([hz.real, hz.imag, x3], axis=-1)


def horizontal_jacobian(family: WeierstrassFamily, z):
    """Partial derivatives of x1 + i x2 with respect to Re z and Im z."""
    dhg, gdh = forms(family, z)
    return 0.5 * (np.conj(dhg) - gdh), 0.5 * (-1j * np.conj(dhg) - 1j * gdh)


# ---------------------------------------------------------------------------
# curvature


def gauss_curvature(family: WeierstrassFamily, z):
    """K = -16/(|g| + 1/|g|)^4 |dg/g|^2 / |dh|^2 (never positive)."""
    lg = np.real(log_g(family, check_domain(family, z)))
    dlog = eval_log_deriv_g(family, z)
    h = eval_dh(family, z)
    # 1/cosh^4 written to underflow quietly instead of overflowing cosh
    e = np.exp(-np.abs(lg))
    sech = 2.0 * e / (1.0 + e * e)
    out = -(np.abs(dlog) ** 2 / np.abs(h) ** 2) * sech ** 4
    return out[()] if np.ndim(out) == 0 else out


def conformal_factor(family: WeierstrassFamily, z):
    """Length element 1/2 (|g| + 1/|g|) |h| of the induced metric."""
    lg = np.real(log_g(family, z))
    return np.cosh(lg) * np.abs(eval_dh(family, z))


# ---------------------------------------------------------------------------
# meshes

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _segment_integrals(family: WeierstrassFamily, z_of, dz_of, n_pieces: int) -> np.ndarray:
    """Integrate (dh/g, g dh) along many parametrised edges at once.

    ``z_of(s)`` maps an array of parameters in [0, 1] (last axis) to points.
    Returns array (..., 2).
    """
    edges = np.linspace(0.0, 1.0, n_pieces + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    zeta = z_of(s)
    dz = dz_of(s)
    dhg, gdh = forms(family, zeta)
    return np.stack([np.sum(dhg * dz * w, axis=-1), np.sum(gdh * dz * w, axis=-1)], axis=-1)


@dataclass
class MeshGrid:
    rValues: np.ndarray
    thetaValues: np.ndarray
    points: np.ndarray            # (nr, ntheta, 3)
    z: np.ndarray                 # (nr, ntheta) domain points
    sheet: int | None = None
    closure_defect: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.points.shape[0], self.points.shape[1]

    def to_json(self) -> dict:
        return {
            "rValues": [float(v) for v in self.rValues],
            "thetaValues": [float(v) for v in self.thetaValues],
            "sheet": self.sheet,
            "closureDefect": self.closure_defect,
            "positions": [float(v) for v in self.points.reshape(-1)],
            "z": [[float(v.real), float(v.imag)] for v in self.z.reshape(-1)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MeshGrid":
        r = np.asarray(doc["rValues"], dtype=float)
        th = np.asarray(doc["thetaValues"], dtype=float)
        pts = np.asarray(doc["positions"], dtype=float).reshape(len(r), len(th), 3)
        z = np.array([complex(a, b) for a, b in doc["z"]]).reshape(len(r), len(th))
        return cls(r, th, pts, z, doc.get("sheet"), float(doc.get("closureDefect", 0.0)))


def sample_mesh(family: WeierstrassFamily, rMin: float, rMax: float, nr: int, ntheta: int,
                thetaSpan: float, thetaStart: float = 0.0) -> MeshGrid:
    """Immersion on the conformal grid z = r e^{i theta}.

    Every grid edge is integrated with composite Gauss-Legendre rules.  The
    per-cell closure defect is the loop sum of the four edge integrals
    divided by the sum of their moduli (scale free: near |Im z| ~ rMax the
    integrand is ~e^{rMax} and no absolute bound survives double rounding).

    Vertex positions come from the exact primitives when the family has them
    and is period-closed; otherwise edge integrals are accumulated along the
    innermost ring and then outward along each spoke.
    """
    if nr < 2 or ntheta < 2:
        raise ValueError("need nr, ntheta >= 2")
    if not (family.rprime * (1 - 1e-12) <= rMin < rMax):
        raise ValueError("need rprime <= rMin < rMax")
    r = np.linspace(rMin, rMax, nr)
    th = thetaStart + np.linspace(0.0, thetaSpan, ntheta)
    z = r[:, None] * np.exp(1j * th[None, :])
    z0 = base_point(family)
    pieces = lambda length: max(1, int(math.ceil(length / 0.5)))  # noqa: E731

    # radial edges (nr-1, ntheta)
    ra, rb = r[:-1, None, None], r[1:, None, None]
    u = np.exp(1j * th)[None, :, None]
    rad = _segment_integrals(
        family, lambda s: (ra + (rb - ra) * s) * u, lambda s: (rb - ra) * u * np.ones_like(s),
        pieces(float(np.max(np.diff(r)))))
    # ring edges (nr, ntheta-1)
    ta, tb = th[None, :-1, None], th[None, 1:, None]
    rr = r[:, None, None]
    arc = _segment_integrals(
        family, lambda s: rr * np.exp(1j * (ta + (tb - ta) * s)),
        lambda s: 1j * (tb - ta) * rr * np.exp(1j * (ta + (tb - ta) * s)),
        pieces(float(rMax * np.max(np.abs(np.diff(th))))))
    loop = rad[:, :-1] + arc[1:] - rad[:, 1:] - arc[:-1]
    size = np.abs(rad[:, :-1]) + np.abs(arc[1:]) + np.abs(rad[:, 1:]) + np.abs(arc[:-1])
    closure = float(np.max(np.abs(loop) / np.maximum(size, 1e-300)))

    if has_exact_primitives(family) and _period_closed(family):
        horiz = horizontal(family, z, z0)
        route = "exact"
    else:
        P0, Q0 = path_integrals(family, z[0, 0], z0) if z[0, 0] != z0 else (0j, 0j)
        acc = np.zeros((nr, ntheta, 2), dtype=complex)
        acc[0, 0] = (P0, Q0)
        acc[0, 1:] = acc[0, 0] + np.cumsum(arc[0], axis=0)
        acc[1:] = acc[:1] + np.cumsum(rad, axis=0)
        horiz = 0.5 * (np.conj(acc[..., 0]) - acc[..., 1])
        route = "edges"
    x3 = eval_x3(family, z, z0)
    pts = np.stack([horiz.real, horiz.imag, x3], axis=-1)
    if not np.all(np.isfinite(pts)):
        bad = np.argwhere(~np.isfinite(pts))[0]
        raise SurfaceError(f"non-finite immersion at grid index {tuple(bad[:2])}")
    return MeshGrid(r, th, pts, z, None, closure, {"route": route})


class ExportedMesh(NamedTuple):
    data: bytes
    vertices: int
    triangles: int
    skipped: int


def grid_triangles(grid: MeshGrid) -> tuple[np.ndarray, int]:
    """Two triangles per grid cell, degenerate ones dropped; returns (faces, skipped)."""
    nr, nt = grid.shape
    idx = np.arange(nr * nt).reshape(nr, nt)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    faces = np.empty((2 * a.size, 3), dtype=np.int64)
    faces[0::2] = np.stack([a, b, c], axis=1)
    faces[1::2] = np.stack([a, c, d], axis=1)
    v = grid.points.reshape(-1, 3)
    area = 0.5 * np.linalg.norm(np.cross(v[faces[:, 1]] - v[faces[:, 0]], v[faces[:, 2]] - v[faces[:, 0]]), axis=1)
    keep = area >= 1e-14
    return faces[keep], int(np.count_nonzero(~keep))


def export_mesh(grid: MeshGrid, fmt: str = "obj", comment: str = "minannuli mesh") -> ExportedMesh:
    """ASCII OBJ or PLY, vertices row-major over (r, theta)."""
    fmt = fmt.lower()
    if fmt not in ("obj", "ply"):
        raise ValueError("format must be obj or ply")
    verts = grid.points.reshape(-1, 3)
    if verts.shape[0] == 0:
        raise ValueError("empty grid")
    faces, skipped = grid_triangles(grid)
    out = io.StringIO()
    if fmt == "obj":
        out.write(f"# {comment}\n")
        for x, y, zc in verts:
            out.write(f"v {x:.17g} {y:.17g} {zc:.17g}\n")
        for f in faces:
            out.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
    else:
        out.write(f"ply\nformat ascii 1.0\ncomment {comment}\n")
        out.write(f"element vertex {len(verts)}\nproperty double x\nproperty double y\nproperty double z\n")
        out.write(f"element face {len(faces)}\nproperty list uchar int vertex_indices\nend_header\n")
        for x, y, zc in verts:
            out.write(f"{x:.17g} {y:.17g} {zc:.17g}\n")
        for f in faces:
            out.write(f"3 {f[0]} {f[1]} {f[2]}\n")
    return ExportedMesh(out.getvalue().encode("ascii"), len(verts), len(faces), skipped)


def parse_obj(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    for line in data.decode("ascii").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(verts), np.array(faces, dtype=np.int64)


def parse_ply(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    lines = data.decode("ascii").splitlines()
    nv = nf = 0
    i = 0
    for i, line in enumerate(lines):
        if line.startswith("element vertex"):
            nv = int(line.split()[-1])
        elif line.startswith("element face"):
            nf = int(line.split()[-1])
        elif line == "end_header":
            break
    body = lines[i + 1:]
    verts = np.array([[float(p) for p in body[k].split()] for k in range(nv)])
    faces = np.array([[int(p) for p in body[nv + k].split()[1:]] for k in range(nf)], dtype=np.int64)
    return verts, faces


def dump_grid(grid: MeshGrid) -> str:
    return json.dumps(grid.to_json(), sort_keys=True)
