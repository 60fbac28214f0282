"""Explicit Weierstrass data for the annular ends.

Every family lives on the exterior disk ``|z| >= rprime`` and has the shape

    g(z) = e^{i rotation} e^{iz + f(z)},    dh = (1 + lam / (z - mu)) dz

with ``f`` holomorphic at infinity and ``f(inf) = 0``.  The four variants are

* ``Helicoid``         f = 0, lam = 0
* ``NonVerticalFlux``  g = t e^{iz} (z - A) / z,          dh = (1 + B/z) dz
* ``VerticalFlux``     g = e^{iz} (z - A) / (z - conj A),  dh = (1 + B/z) dz
* ``GenericExp``       f(z) = sum_k c_k z^{-k},            dh = (1 + lam/(z - mu)) dz

All evaluators accept Python complex scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

HELICOID = "Helicoid"
NONVERTICAL = "NonVerticalFlux"
VERTICAL = "VerticalFlux"
GENERIC = "GenericExp"
VARIANTS = (HELICOID, NONVERTICAL, VERTICAL, GENERIC)

# relative slack when testing |z| >= rprime, so that points placed exactly on
# the boundary circle by trigonometric evaluation are not rejected
_DOMAIN_SLACK = 1e-12


class DomainError(ValueError):
    """A point lies inside the excluded disk ``|z| < rprime``."""


def default_rprime(A: complex = 0j, mu: complex = 0j, B: float = 0.0) -> float:
    """Domain radius rule ``2 max(|A|, |mu|, B, 1) + 1``."""
    return 2.0 * max(abs(A), abs(mu), abs(B), 1.0) + 1.0


def _finite_complex(value: Any, name: str) -> complex:
    c = complex(value)
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return c


def _finite_real(value: Any, name: str) -> float:
    x = float(value)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return x


@dataclass(frozen=True)
class WeierstrassFamily:
    """Immutable parameter record for one explicit (g, dh) family.

    Use the ``helicoid``/``nonvertical``/``vertical``/``generic``
    constructors; they fill in the default domain radius.
    """

    variant: str
    t: float = 1.0
    A: complex = 0j
    B: float = 0.0
    laurent: tuple[complex, ...] = ()
    lam: float = 0.0
    mu: complex = 0j
    rotation: float = 0.0
    rprime: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        set_ = object.__setattr__
        set_(self, "t", _finite_real(self.t, "t"))
        set_(self, "A", _finite_complex(self.A, "A"))
        set_(self, "B", _finite_real(self.B, "B"))
        set_(self, "mu", _finite_complex(self.mu, "mu"))
        set_(self, "lam", _finite_real(self.lam, "lam"))
        set_(self, "rotation", _finite_real(self.rotation, "rotation"))
        set_(self, "laurent", tuple(_finite_complex(c, "laurent coefficient") for c in self.laurent))

        v = self.variant
        if v == HELICOID:
            set_(self, "t", 1.0)
            set_(self, "A", 0j)
            set_(self, "B", 0.0)
            set_(self, "laurent", ())
            set_(self, "lam", 0.0)
            set_(self, "mu", 0j)
        elif v == NONVERTICAL:
            if self.t <= 0:
                raise ValueError("NonVerticalFlux needs t > 0")
            if self.A == 0:
                raise ValueError("NonVerticalFlux needs A != 0")
            if self.B < 0:
                raise ValueError("NonVerticalFlux needs B >= 0")
            set_(self, "lam", self.B)
            set_(self, "mu", 0j)
            set_(self, "laurent", ())
        elif v == VERTICAL:
            if self.A.imag <= 0:
                raise ValueError("VerticalFlux needs Im A > 0")
            if self.B <= 0:
                raise ValueError("VerticalFlux needs B > 0")
            set_(self, "t", 1.0)
            set_(self, "lam", self.B)
            set_(self, "mu", 0j)
            set_(self, "laurent", ())
        else:
            if self.lam < 0:
                raise ValueError("GenericExp needs lambda >= 0")
            set_(self, "t", 1.0)
            set_(self, "A", 0j)
            set_(self, "B", self.lam)

        rp = self.rprime
        if rp is None or (isinstance(rp, float) and math.isnan(rp)):
            rp = default_rprime(self.A, self.mu, self.B)
        rp = _finite_real(rp, "rprime")
        if rp < 0:
            raise ValueError("rprime must be nonnegative")
        # poles/zeros of g and dh must stay inside the excluded disk
        singular = []
        if v in (NONVERTICAL, VERTICAL):
            singular += [0.0, abs(self.A)]
        if self.laurent:
            singular.append(0.0)
        if self.lam > 0:
            singular += [abs(self.mu), abs(self.mu - self.lam)]
        if singular and rp <= max(singular):
            raise ValueError(f"rprime={rp} must exceed every pole/zero modulus {max(singular)}")
        set_(self, "rprime", rp)

    # constructors -------------------------------------------------------
    @classmethod
    def helicoid(cls, rprime: float | None = None, rotation: float = 0.0) -> "WeierstrassFamily":
        return cls(HELICOID, rotation=rotation, rprime=3.0 if rprime is None else rprime)

    @classmethod
    def nonvertical(cls, t: float, A: complex, B: float, rotation: float = 0.0,
                    rprime: float | None = None) -> "WeierstrassFamily":
        return cls(NONVERTICAL, t=t, A=A, B=B, rotation=rotation,
                   rprime=float("nan") if rprime is None else rprime)

    @classmethod
    def vertical(cls, A: complex, B: float, rotation: float = 0.0,
                 rprime: float | None = None) -> "WeierstrassFamily":
        return cls(VERTICAL, A=A, B=B, rotation=rotation,
                   rprime=float("nan") if rprime is None else rprime)

    @classmethod
    def generic(cls, laurent: Sequence[complex] = (), lam: float = 0.0, mu: complex = 0j,
                rotation: float = 0.0, rprime: float | None = None) -> "WeierstrassFamily":
        return cls(GENERIC, laurent=tuple(laurent), lam=lam, mu=mu, rotation=rotation,
                   rprime=float("nan") if rprime is None else rprime)

    def with_rotation(self, alpha: float) -> "WeierstrassFamily":
        return replace(self, rotation=float(alpha))

    # serialization ------------------------------------------------------
    def to_json(self) -> dict:
        doc: dict[str, Any] = {"variant": self.variant}
        if self.variant == NONVERTICAL:
            doc["t"] = self.t
        if self.variant in (NONVERTICAL, VERTICAL):
            doc["A"] = [self.A.real, self.A.imag]
            doc["B"] = self.B
        if self.variant == GENERIC:
            doc["laurentF"] = [[c.real, c.imag] for c in self.laurent]
        doc["lambda"] = self.lam
        doc["mu"] = [self.mu.real, self.mu.imag]
        doc["rotation"] = self.rotation
        doc["Rprime"] = self.rprime
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "WeierstrassFamily":
        def cplx(v: Any) -> complex:
            if isinstance(v, (list, tuple)):
                if len(v) != 2:
                    raise ValueError(f"complex value must be [re, im], got {v!r}")
                return complex(float(v[0]), float(v[1]))
            return complex(v)

        variant = doc.get("variant")
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        kwargs: dict[str, Any] = {
            "rotation": float(doc.get("rotation", 0.0)),
            "rprime": float(doc["Rprime"]) if doc.get("Rprime") is not None else float("nan"),
        }
        if variant == NONVERTICAL:
            kwargs.update(t=float(doc["t"]), A=cplx(doc["A"]), B=float(doc["B"]))
        elif variant == VERTICAL:
            kwargs.update(A=cplx(doc["A"]), B=float(doc["B"]))
        elif variant == GENERIC:
            kwargs.update(laurent=tuple(cplx(c) for c in doc.get("laurentF", [])),
                          lam=float(doc.get("lambda", 0.0)), mu=cplx(doc.get("mu", 0.0)))
        elif variant == HELICOID and doc.get("Rprime") is None:
            kwargs["rprime"] = 3.0
        return cls(variant, **kwargs)

    @property
    def has_closed_form(self) -> bool:
        return self.variant != GENERIC


# ---------------------------------------------------------------------------
# evaluation


def check_domain(family: WeierstrassFamily, z) -> np.ndarray | complex:
    za = np.asarray(z, dtype=complex)
    if np.any(np.abs(za) < family.rprime * (1.0 - _DOMAIN_SLACK)):
        bad = za[np.abs(za) < family.rprime * (1.0 - _DOMAIN_SLACK)] if za.ndim else za
        raise DomainError(f"|z| < rprime={family.rprime} at z={np.ravel(bad)[0]!r}")
    return z


def _laurent(coeffs: tuple[complex, ...], z):
    """f(z) and f'(z) for f = sum_k c_k z^{-k}."""
    f = np.zeros_like(np.asarray(z, dtype=complex))
    df = np.zeros_like(f)
    if coeffs:
        w = 1.0 / np.asarray(z, dtype=complex)
        p = np.ones_like(f)
        for k, c in enumerate(coeffs, start=1):
            df = df - k * c * p * w * w
            p = p * w
            f = f + c * p
    return f, df


def log_g(family: WeierstrassFamily, z):
    """A (branch-free along the domain) logarithm of g: ``log t + i rotation + iz + f(z)``.

    For the rational variants ``f`` is taken as ``log1p(-A/z)`` etc., which is
    single valued on ``|z| > |A|``.
    """
    z = np.asarray(z, dtype=complex)
    base = 1j * family.rotation + 1j * z
    v = family.variant
    if v == HELICOID:
        out = base
    elif v == NONVERTICAL:
        out = base + math.log(family.t) + np.log1p(-family.A / z)
    elif v == VERTICAL:
        out = base + np.log1p(-family.A / z) - np.log1p(-np.conj(family.A) / z)
    else:
        out = base + _laurent(family.laurent, z)[0]
    return out[()] if out.ndim == 0 else out


def eval_g(family: WeierstrassFamily, z):
    check_domain(family, z)
    zz = np.asarray(z, dtype=complex)
    rot = np.exp(1j * family.rotation)
    v = family.variant
    if v == HELICOID:
        out = rot * np.exp(1j * zz)
    elif v == NONVERTICAL:
        out = rot * family.t * np.exp(1j * zz) * (zz - family.A) / zz
    elif v == VERTICAL:
        out = rot * np.exp(1j * zz) * (zz - family.A) / (zz - np.conj(family.A))
    else:
        out = rot * np.exp(1j * zz + _laurent(family.laurent, zz)[0])
    return out[()] if out.ndim == 0 else out


def eval_dh(family: WeierstrassFamily, z):
    """Coefficient h(z) of dh = h(z) dz."""
    check_domain(family, z)
    zz = np.asarray(z, dtype=complex)
    out = 1.0 + family.lam / (zz - family.mu) if family.lam else np.ones_like(zz)
    return out[()] if out.ndim == 0 else out


def eval_log_deriv_g(family: WeierstrassFamily, z):
    """(dg/g)/dz = i + f'(z)."""
    check_domain(family, z)
    zz = np.asarray(z, dtype=complex)
    v = family.variant
    if v == HELICOID:
        out = np.full_like(zz, 1j)
    elif v == NONVERTICAL:
        A = family.A
        out = 1j + A / (zz * (zz - A))
    elif v == VERTICAL:
        A = family.A
        Ab = np.conj(A)
        # d/dz log((z - A)/(z - conj A))
        out = 1j + (A - Ab) / ((zz - A) * (zz - Ab))
    else:
        out = 1j + _laurent(family.laurent, zz)[1]
    return out[()] if out.ndim == 0 else out


def eval_x3(family: WeierstrassFamily, z, z0):
    """Height Re(z - z0) + lam log|(z - mu)/(z0 - mu)|; exact, path independent."""
    check_domain(family, z)
    check_domain(family, z0)
    zz = np.asarray(z, dtype=complex)
    z0 = complex(z0)
    out = (zz - z0).real
    if family.lam:
        out = out + family.lam * (np.log(np.abs(zz - family.mu)) - math.log(abs(z0 - family.mu)))
    return out[()] if np.ndim(out) == 0 else out
