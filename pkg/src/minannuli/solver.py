"""Period problem and flux targets.

Non-vertical flux (a > 0) uses the family ``t e^{iz}(z - A)/z`` with
``A = x1 + iy``: for fixed ``(B, y)`` the real part ``x1`` matches the
arguments of both sides of the period equation, ``t`` then matches the
moduli, and finally ``y`` is tuned until the horizontal flux has length
``a``.  Vertical flux (a = 0, b > 0) uses ``e^{iz}(z - A)/(z - conj A)``
and a nested solve in ``(x, y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from .periods import PeriodReport, period_residual_and_flux
from .wdata import WeierstrassFamily

TWO_PI = 2.0 * math.pi

ARG_TOL = 1e-10
PERIOD_TOL = 1e-9
FLUX_TOL = 1e-6

# samples per 2*pi window when scanning for the first sign change
_SCAN_SAMPLES = 64
_MAX_WINDOWS = 4
_MAX_DOUBLINGS = 40


class SolverError(RuntimeError):
    def __init__(self, message: str, trace: Any = None):
        super().__init__(message if trace is None else f"{message}; trace={trace}")
        self.trace = trace


@dataclass(frozen=True)
class SolveTarget:
    a: float
    b: float

    def __post_init__(self) -> None:
        for name in ("a", "b"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite nonnegative real, got {v}")
            object.__setattr__(self, name, v)

    @property
    def B(self) -> float:
        return self.b / TWO_PI


@dataclass(frozen=True)
class ThetaPair:
    thetaL: float
    thetaR: float


@dataclass
class SolveResult:
    family: WeierstrassFamily
    achievedFlux: tuple[float, float, float]
    periodResidual: float
    rotationAngle: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "family": self.family.to_json(),
            "achievedFlux": list(self.achievedFlux),
            "periodResidual": self.periodResidual,
            "rotationAngle": self.rotationAngle,
            "diagnostics": dict(self.diagnostics),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SolveResult":
        return cls(
            family=WeierstrassFamily.from_json(doc["family"]),
            achievedFlux=tuple(float(v) for v in doc["achievedFlux"]),
            periodResidual=float(doc["periodResidual"]),
            rotationAngle=float(doc["rotationAngle"]),
            diagnostics=dict(doc.get("diagnostics", {})),
        )


# ---------------------------------------------------------------------------
# Case 1: arguments of L(x) and R(x)


def L_curve(B: float, y: float, x):
    return (x - B * y - B) + 1j * (B * x + y)


def R_curve(B: float, y: float, x):
    return ((x + B) - 1j * y) * np.exp(1j * x)


def _check_x(B: float, x) -> None:
    if np.any(np.asarray(x) <= B / (1.0 + B * B)):
        raise ValueError(f"x must exceed B/(1+B^2) = {B / (1 + B * B)}")


def _theta_L(B, y, x):
    # L never enters the closed third quadrant here, so the principal
    # argument is already continuous in x
    return np.arctan2(B * x + y, x - B * y - B)


def _theta_R(B, y, x):
    return x + np.arctan2(-y, x + B)


def theta_pair(B: float, y: float, x: float) -> ThetaPair:
    """Continuous arguments of L(x) and R(x)."""
    if B < 0:
        raise ValueError("B must be nonnegative")
    _check_x(B, x)
    return ThetaPair(float(_theta_L(B, y, x)), float(_theta_R(B, y, x)))


def scan_start(B: float) -> float:
    # theta_R - theta_L is strictly increasing for x >= pi whatever B >= 0
    return max(B / (1.0 + B * B) + 1.0, math.pi)


def _find_x1(B: float, y: float, branch: int = 1) -> tuple[float, int]:
    """Root of theta_R - theta_L = 2 pi branch; returns (x1, window index)."""
    if B < 0:
        raise ValueError("B must be nonnegative")
    if branch < 1:
        raise ValueError("branch must be >= 1")
    x_start = scan_start(B)
    target = TWO_PI * branch

    def gap(x):
        return _theta_R(B, y, x) - _theta_L(B, y, x) - target

    g0 = gap(x_start)
    if g0 == 0.0:
        return x_start, 0
    trace = []
    # windows are counted from the first 2*pi period containing the branch
    first = max(0, int(math.floor((target - math.pi - x_start) / TWO_PI)))
    for j in range(first, first + _MAX_WINDOWS):
        xs = x_start + TWO_PI * (j + np.linspace(0.0, 1.0, _SCAN_SAMPLES + 1))
        gs = gap(xs)
        trace.append((float(xs[0]), float(gs[0]), float(gs[-1])))
        idx = np.nonzero((gs[:-1] < 0) & (gs[1:] >= 0))[0]
        if idx.size:
            lo, hi = float(xs[idx[0]]), float(xs[idx[0] + 1])
            while hi - lo > 1e-12:
                mid = 0.5 * (lo + hi)
                if gap(mid) < 0:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi), j - first
    raise SolverError(f"no argument match for B={B}, y={y}", trace)


def find_x1(B: float, y: float, branch: int = 1) -> float:
    return _find_x1(B, y, branch)[0]


def solve_t(B: float, y: float, x1: float) -> float:
    """Scale t matching the moduli of both sides of the period equation."""
    _check_x(B, x1)
    L = abs(L_curve(B, y, x1))
    R = abs(R_curve(B, y, x1))
    if L == 0:
        raise SolverError("L(x1) vanishes")
    return math.sqrt(math.exp(y) * R / L)


def period_equation_residual(B: float, y: float, x1: float, t: float) -> float:
    """|t^2 e^{-y} L - R| / max(1, |R|)."""
    R = R_curve(B, y, x1)
    return abs(t * t * math.exp(-y) * L_curve(B, y, x1) - R) / max(1.0, abs(R))


def log_flux_length(B: float, y: float, branch: int = 1) -> float:
    x1 = find_x1(B, y, branch)
    L = abs(L_curve(B, y, x1))
    R = abs(R_curve(B, y, x1))
    # log of 2 pi t |L| with t^2 = e^y |R| / |L|, overflow-free
    return math.log(TWO_PI) + 0.5 * (y + math.log(R) + math.log(L))


def flux_length(B: float, y: float, branch: int = 1) -> float:
    """Length F(B, y) of the horizontal flux of the Case 1 family."""
    return math.exp(log_flux_length(B, y, branch))


def nonvertical_family(B: float, y: float, branch: int = 1) -> WeierstrassFamily:
    x1 = find_x1(B, y, branch)
    return WeierstrassFamily.nonvertical(t=solve_t(B, y, x1), A=complex(x1, y), B=B)


def _bracket(fn, start: float = 0.0) -> tuple[float, float]:
    """Expand from ``start`` by +-2^k until fn changes sign (fn increasing trend)."""
    f0 = fn(start)
    if f0 == 0:
        return start, start
    direction = -1.0 if f0 > 0 else 1.0
    prev = start
    trace = []
    for k in range(_MAX_DOUBLINGS + 1):
        y = start + direction * 2.0**k
        fy = fn(y)
        trace.append((y, fy))
        if (fy > 0) != (f0 > 0) or fy == 0:
            return (y, prev) if direction < 0 else (prev, y)
        prev = y
    raise SolverError("no bracket found", trace[-5:])


# ---------------------------------------------------------------------------
# rotation and result assembly


def normalize_rotation(family: WeierstrassFamily) -> WeierstrassFamily:
    """Rotate about the x3-axis so the horizontal flux points along +x1."""
    rep = period_residual_and_flux(family)
    horiz = 1j * rep.intGdh
    if abs(horiz) <= PERIOD_TOL:
        return family
    alpha = math.remainder(family.rotation - math.atan2(horiz.imag, horiz.real), TWO_PI)
    return family.with_rotation(alpha)


def _result(family: WeierstrassFamily, target: SolveTarget, diagnostics: dict) -> SolveResult:
    rep: PeriodReport = period_residual_and_flux(family)
    res = SolveResult(family, tuple(float(v) for v in rep.flux), float(rep.periodResidual),
                      family.rotation, diagnostics)
    if res.periodResidual >= PERIOD_TOL:
        raise SolverError(f"period residual {res.periodResidual:.3e} above {PERIOD_TOL}", diagnostics)
    want = (target.a, 0.0, -target.b)
    err = max(abs(u - v) for u, v in zip(res.achievedFlux, want))
    if err >= FLUX_TOL:
        raise SolverError(f"flux error {err:.3e} above {FLUX_TOL}", diagnostics)
    return res


def solve_nonvertical(target: SolveTarget, branch: int = 1) -> SolveResult:
    if not target.a > 0:
        raise ValueError("solve_nonvertical needs a > 0")
    B = target.B
    log_a = math.log(target.a)

    def mismatch(y):
        return log_flux_length(B, y, branch) - log_a

    lo, hi = _bracket(mismatch)
    y = lo if lo == hi else brentq(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    x1, window = _find_x1(B, y, branch)
    t = solve_t(B, y, x1)
    fam = normalize_rotation(WeierstrassFamily.nonvertical(t=t, A=complex(x1, y), B=B))
    diag = {"x1": x1, "y": y, "t": t, "windowIndex": window, "branch": branch,
            "argResidual": period_equation_residual(B, y, x1, t)}
    return _result(fam, target, diag)


# ---------------------------------------------------------------------------
# Case 2: vertical flux

J_WINDOW = (1.5 * math.pi, 2.5 * math.pi)


def _vertical_eq(B: float, x: float, y: float) -> complex:
    """2 y e^y e^{ix} (y + i(x + B)) - B (x + i y)."""
    return 2 * y * math.exp(y) * complex(math.cos(x), math.sin(x)) * complex(y, x + B) - B * complex(x, y)


def vertical_x_of_y(B: float, y: float) -> float:
    """Argument match x(y) in the window J for the vertical-flux equation."""
    if not y > 0:
        raise ValueError("y must be positive")

    def gap(x):
        return x + math.atan2(x + B, y) - TWO_PI - math.atan2(y, x)

    lo, hi = J_WINDOW
    if not (gap(lo) < 0 < gap(hi)):
        raise SolverError("no argument match in J", (B, y, gap(lo), gap(hi)))
    return brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _vertical_modulus_gap(B: float, y: float) -> float:
    x = vertical_x_of_y(B, y)
    return (math.log(2 * y) + y + math.log(abs(complex(y, x + B)))) - math.log(B * abs(complex(x, y)))


def _newton_polish_vertical(B: float, x: float, y: float, steps: int = 4) -> tuple[float, float]:
    for _ in range(steps):
        F = _vertical_eq(B, x, y)
        e = 2 * y * math.exp(y) * complex(math.cos(x), math.sin(x))
        Fx = e * complex(-(x + B), y + 1) - B
        Fy = 2 * complex(math.cos(x), math.sin(x)) * math.exp(y) * ((1 + y) * complex(y, x + B) + y) - 1j * B
        jac = np.array([[Fx.real, Fy.real], [Fx.imag, Fy.imag]])
        dx, dy = np.linalg.solve(jac, [-F.real, -F.imag])
        if not (J_WINDOW[0] < x + dx < J_WINDOW[1] and y + dy > 0):
            break
        x, y = x + dx, y + dy
    return x, y


def solve_vertical(b: float) -> SolveResult:
    if not b > 0:
        raise ValueError("solve_vertical needs b > 0")
    target = SolveTarget(0.0, b)
    B = target.B

    def gap(y):
        return _vertical_modulus_gap(B, y)

    # bracket on (0, inf): gap -> -inf at 0+, +inf at infinity
    lo = hi = 1.0
    trace = []
    for _ in range(_MAX_DOUBLINGS):
        if gap(lo) < 0:
            break
        lo *= 0.5
        trace.append(("lo", lo))
    else:
        raise SolverError("lower bracket failed", trace)
    for _ in range(_MAX_DOUBLINGS):
        if gap(hi) > 0:
            break
        lo_candidate = hi
        hi *= 2.0
        trace.append(("hi", hi))
        lo = lo_candidate if gap(lo_candidate) < 0 else lo
    else:
        raise SolverError("upper bracket failed", trace)
    y = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    x = vertical_x_of_y(B, y)
    x, y = _newton_polish_vertical(B, x, y)
    fam = WeierstrassFamily.vertical(A=complex(x, y), B=B)
    diag = {"x": x, "y": y, "equationResidual": abs(_vertical_eq(B, x, y))}
    return _result(fam, target, diag)


def solve(target: SolveTarget, branch: int = 1) -> SolveResult:
    if target.a == 0 and target.b == 0:
        fam = WeierstrassFamily.helicoid()
        return _result(fam, target, {})
    if target.a == 0:
        return solve_vertical(target.b)
    return solve_nonvertical(target, branch)

