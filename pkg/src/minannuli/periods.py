"""Boundary integrals of the Weierstrass forms, period residual and flux.

Circles are oriented as the boundary of the exterior disk, i.e. clockwise
around the origin.  Closed forms come from residues inside the circle; the
trapezoid rule on the circle is the independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .wdata import GENERIC, HELICOID, NONVERTICAL, VERTICAL, WeierstrassFamily, _laurent

INTEGRANDS = ("gdh", "dh/g", "dh")

# exterior-boundary orientation: clockwise
EXTERIOR = -1


class QuadratureError(RuntimeError):
    """Sample doubling hit the cap before two iterates agreed."""

    def __init__(self, message: str, last: complex, previous: complex):
        super().__init__(f"{message} (last={last!r}, previous={previous!r})")
        self.last = last
        self.previous = previous


@dataclass(frozen=True)
class ContourSpec:
    radius: float
    samples: int = 64
    orientation: int = EXTERIOR
    max_samples: int = 1 << 16

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        n = self.samples
        if n < 64 or n & (n - 1):
            raise ValueError("samples must be a power of two >= 64")
        if self.orientation not in (-1, 1):
            raise ValueError("orientation is -1 (exterior boundary) or +1")


@dataclass(frozen=True)
class PeriodReport:
    intGdh: complex
    intDhOverG: complex
    intDh: complex

    @property
    def periodResidual(self) -> float:
        return abs(self.intGdh.conjugate() - self.intDhOverG) + abs(self.intDh.real)

    @property
    def flux(self) -> tuple[float, float, float]:
        horiz = 1j * self.intGdh
        # + 0.0 turns negative zeros into zeros
        return (horiz.real + 0.0, horiz.imag + 0.0, self.intDh.imag + 0.0)

    def to_json(self) -> dict:
        c = lambda w: [w.real, w.imag]  # noqa: E731
        return {
            "intGdh": c(self.intGdh),
            "intDhOverG": c(self.intDhOverG),
            "intDh": c(self.intDh),
            "periodResidual": self.periodResidual,
            "flux": list(self.flux),
        }


def _integrand_ld(family: WeierstrassFamily, which: str, z: np.ndarray) -> np.ndarray:
    """Integrand evaluated in extended precision (z is clongdouble)."""
    one = np.longdouble(1)
    h = one + (family.lam / (z - family.mu) if family.lam else 0)
    if which == "dh":
        return h * np.ones_like(z)
    e = np.exp(1j * z)
    v = family.variant
    if v == HELICOID:
        g = e
    elif v == NONVERTICAL:
        g = family.t * e * (z - family.A) / z
    elif v == VERTICAL:
        g = e * (z - family.A) / (z - np.conj(family.A))
    else:
        # finite Laurent tail, evaluated in double then promoted
        f, _ = _laurent(family.laurent, z.astype(complex))
        g = e * np.exp(f.astype(np.clongdouble))
    g = g * np.exp(np.clongdouble(1j * family.rotation))
    return g * h if which == "gdh" else h / g


def _trapezoid(family: WeierstrassFamily, which: str, radius: float, n: int, orientation: int):
    pi = np.longdouble("3.14159265358979323846264338327950288")
    phi = orientation * 2 * pi * np.arange(n, dtype=np.longdouble) / n
    z = np.longdouble(radius) * (np.cos(phi) + 1j * np.sin(phi)).astype(np.clongdouble)
    dz = 1j * orientation * z * (2 * pi / n)
    terms = _integrand_ld(family, which, z) * dz
    value = np.sum(terms)
    # rounding floor: argument error ~ eps*radius amplifies every term
    noise = 8 * np.finfo(np.longdouble).eps * (1 + radius) * np.sqrt(np.sum(np.abs(terms) ** 2))
    return complex(value), float(noise)


def contour_integral(family: WeierstrassFamily, integrand: str, spec: ContourSpec) -> complex:
    """Trapezoid rule on ``|z| = spec.radius`` with sample doubling."""
    if integrand not in INTEGRANDS:
        raise ValueError(f"integrand must be one of {INTEGRANDS}")
    if spec.radius < family.rprime * (1 - 1e-12):
        raise ValueError(f"radius {spec.radius} is inside the excluded disk (rprime={family.rprime})")
    n = spec.samples
    prev, _ = _trapezoid(family, integrand, spec.radius, n, spec.orientation)
    cur = prev
    while n < spec.max_samples:
        n *= 2
        cur, noise = _trapezoid(family, integrand, spec.radius, n, spec.orientation)
        if abs(cur - prev) < max(1e-11, noise):
            if noise > 1e-7 * (1 + abs(cur)):
                raise QuadratureError(
                    f"rounding floor {noise:.2e} too large at radius {spec.radius}", cur, prev)
            return cur
        prev = cur
    raise QuadratureError(f"no convergence with {n} samples at radius {spec.radius}", cur, prev)


def closed_form_periods(family: WeierstrassFamily) -> PeriodReport:
    """Exact residue values of the three boundary integrals."""
    v = family.variant
    rot = complex(math.cos(family.rotation), math.sin(family.rotation))
    two_pi_i = 2j * math.pi
    if v == HELICOID:
        return PeriodReport(0j, 0j, 0j)
    if v == GENERIC:
        raise NotImplementedError("no closed form for GenericExp; use contour_integral")
    A, B = family.A, family.B
    if v == NONVERTICAL:
        t = family.t
        gdh = two_pi_i * t * (A - B + 1j * A * B)
        dhg = -two_pi_i * (A + B) / (t * np.exp(1j * A))
    else:
        Ab = A.conjugate()
        s = np.exp(1j * Ab) * (Ab - A + B - A * B / Ab) + A * B / Ab
        gdh = -two_pi_i * s
        dhg = -two_pi_i * complex(s).conjugate()
    return PeriodReport(complex(rot * gdh), complex(dhg / rot), complex(-two_pi_i * B))


def quadrature_periods(family: WeierstrassFamily, radius: float | None = None) -> PeriodReport:
    # the smallest admissible circle: integrands grow like e^{radius} while
    # the periods stay O(1), so every extra unit of radius costs digits
    spec = ContourSpec(radius=radius if radius is not None else max(family.rprime, 1.0))
    return PeriodReport(*(contour_integral(family, w, spec) for w in INTEGRANDS))


def period_residual_and_flux(family: WeierstrassFamily) -> PeriodReport:
    if family.has_closed_form:
        return closed_form_periods(family)
    return quadrature_periods(family)
