import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minannuli.periods import (ContourSpec, PeriodReport, QuadratureError, closed_form_periods,
                               contour_integral, period_residual_and_flux, quadrature_periods)
from minannuli.wdata import WeierstrassFamily

finite = dict(allow_nan=False, allow_infinity=False)
TWO_PI_I = 2j * math.pi


def random_families(seed: int, n: int = 20):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        # |A|, B <= 1.5 keeps 4 R' below 18, where e^{|z|} still leaves
        # long double enough digits for a 1e-8 comparison
        A = cmath.rect(rng.uniform(0.2, 1.5), rng.uniform(-math.pi, math.pi))
        out.append(WeierstrassFamily.nonvertical(
            t=rng.uniform(0.3, 2.0), A=A, B=rng.uniform(0, 1.5),
            rotation=rng.uniform(-math.pi, math.pi)))
        A = cmath.rect(rng.uniform(0.2, 1.5), rng.uniform(0.05, math.pi - 0.05))
        out.append(WeierstrassFamily.vertical(
            A=A, B=rng.uniform(0.05, 1.5),
            rotation=rng.uniform(-math.pi, math.pi)))
    return out


def test_helicoid_dh_loop():
    assert abs(contour_integral(WeierstrassFamily.helicoid(), "dh", ContourSpec(5.0))) < 1e-12


def test_orientation_pinned():
    fam = WeierstrassFamily.nonvertical(1.0, 1.0, 0.0)
    val = contour_integral(fam, "gdh", ContourSpec(10.0))
    assert abs(val - TWO_PI_I) < 1e-9


def test_vertical_closed_form_against_quadrature():
    fam = WeierstrassFamily.vertical(2 * math.pi + 1j, 1.0)
    ref = closed_form_periods(fam)
    spec = ContourSpec(20.0)
    assert abs(contour_integral(fam, "gdh", spec) - ref.intGdh) < 1e-8
    assert abs(contour_integral(fam, "dh/g", spec) - ref.intDhOverG) < 1e-8
    assert abs(contour_integral(fam, "dh", spec) - ref.intDh) < 1e-8


def test_closed_form_examples():
    assert closed_form_periods(WeierstrassFamily.helicoid()) == PeriodReport(0j, 0j, 0j)
    assert closed_form_periods(WeierstrassFamily.helicoid()).flux == (0.0, 0.0, 0.0)
    rep = closed_form_periods(WeierstrassFamily.nonvertical(1.0, 2 * math.pi, 0.0))
    assert abs(rep.intGdh - 4j * math.pi ** 2) < 1e-12
    f = rep.flux
    assert abs(f[0] + 4 * math.pi ** 2) < 1e-12 and abs(f[1]) < 1e-12 and f[2] == 0
    rep = closed_form_periods(WeierstrassFamily.nonvertical(1.0, 1 + 1j, 2.0))
    assert abs(rep.intGdh - TWO_PI_I * (-3 + 3j)) < 1e-12
    q = quadrature_periods(WeierstrassFamily.nonvertical(1.0, 1 + 1j, 2.0))
    assert abs(q.intGdh - rep.intGdh) < 1e-8


def test_generic_has_no_closed_form():
    with pytest.raises(NotImplementedError):
        closed_form_periods(WeierstrassFamily.generic([1j]))
    rep = period_residual_and_flux(WeierstrassFamily.generic([0.5], lam=1.0))
    assert abs(rep.flux[2] + 2 * math.pi) < 1e-12


def test_oracle_agreement_random_draws():
    for fam in random_families(20240611):
        ref = closed_form_periods(fam)
        for radius in (2 * fam.rprime, 4 * fam.rprime):
            q = quadrature_periods(fam, radius)
            assert abs(q.intGdh - ref.intGdh) < 1e-8
            assert abs(q.intDhOverG - ref.intDhOverG) < 1e-8
            assert abs(q.intDh - ref.intDh) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 3, **finite), st.floats(-3, 3, **finite), st.floats(-2, 2, **finite),
       st.floats(0, 2, **finite), st.floats(-math.pi, math.pi, **finite))
def test_rotation_covariance(t, ar, ai, B, alpha):
    A = complex(ar, ai)
    if abs(A) < 1e-2:
        return
    fam = WeierstrassFamily.nonvertical(t, A, B)
    p, q = closed_form_periods(fam), closed_form_periods(fam.with_rotation(alpha))
    rot = cmath.exp(1j * alpha)
    assert abs(q.intGdh - rot * p.intGdh) <= 1e-12 * (1 + abs(p.intGdh))
    assert abs(q.intDhOverG - p.intDhOverG / rot) <= 1e-12 * (1 + abs(p.intDhOverG))
    assert abs(q.periodResidual - p.periodResidual) <= 1e-12 * (1 + p.periodResidual)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 5, **finite), st.floats(0.2, 3, **finite))
def test_vertical_flux_is_minus_two_pi_B(B, t):
    fam = WeierstrassFamily.nonvertical(t, 1 + 1j, B)
    assert abs(period_residual_and_flux(fam).flux[2] + 2 * math.pi * B) < 1e-12
    q = contour_integral(fam, "dh", ContourSpec(fam.rprime * 1.5))
    assert abs(q.imag + 2 * math.pi * B) < 1e-12 * (1 + B) * 100


@pytest.mark.parametrize("which", ["gdh", "dh/g", "dh"])
def test_orientation_reversal_negates(which):
    fam = WeierstrassFamily.vertical(3 + 0.5j, 0.7)
    r = 1.5 * fam.rprime
    a = contour_integral(fam, which, ContourSpec(r, orientation=-1))
    b = contour_integral(fam, which, ContourSpec(r, orientation=1))
    assert abs(a + b) < 1e-10 * (1 + abs(a))


def test_spec_validation():
    with pytest.raises(ValueError):
        ContourSpec(1.0, samples=100)
    with pytest.raises(ValueError):
        ContourSpec(-1.0)
    fam = WeierstrassFamily.nonvertical(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        contour_integral(fam, "dh", ContourSpec(0.5 * fam.rprime))
    with pytest.raises(ValueError):
        contour_integral(fam, "g", ContourSpec(fam.rprime))


def test_quadrature_failure_reports_iterates():
    fam = WeierstrassFamily.nonvertical(1.0, 1.0, 0.0)
    with pytest.raises(QuadratureError) as exc:
        contour_integral(fam, "gdh", ContourSpec(40.0, max_samples=64))
    assert exc.value.last is not None and exc.value.previous is not None


def test_report_json_fields():
    doc = closed_form_periods(WeierstrassFamily.nonvertical(1.0, 1.0, 1.0)).to_json()
    assert set(doc) == {"intGdh", "intDhOverG", "intDh", "periodResidual", "flux"}
    assert len(doc["flux"]) == 3 and len(doc["intGdh"]) == 2
