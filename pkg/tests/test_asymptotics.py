import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minannuli.asymptotics import (AsymptoticsReport, ExtractionError, axis_limits, axis_offset,
                                   check_embedded, compare_model_graphs, diagonal_windows,
                                   estimate_RE, extract_many, extract_multigraph, flux_invariants,
                                   gradient_profile, helicoid_distance, helicoid_point_distance,
                                   hole_clearance, invariants_distinct, model_graph, normalization,
                                   normalized_immersion, paired_point_defect, ring_curvature_sup,
                                   same_flux_difference, separation, separation_values, sheet_grid,
                                   symmetry_defect, theta_window, triangles_intersect, verify_family)
from minannuli.surface import horizontal, sample_mesh
from minannuli.wdata import WeierstrassFamily

from conftest import TWO_PI, solved, solved_norm

finite = dict(allow_nan=False, allow_infinity=False)
HEL = WeierstrassFamily.helicoid()


# --- axis rays -----------------------------------------------------------------

def test_helicoid_axis_offset_zero():
    assert abs(axis_offset(HEL)) < 1e-12


@pytest.mark.parametrize("a,b", [(1.0, 0.0), (1.0, TWO_PI), (4 * math.pi ** 2, 0.0), (0.5, 1.0)])
def test_axis_offset(a, b):
    off = axis_offset(solved(a, b).family)
    assert abs(off + 0.5j * a) < 0.02 * (1 + a)


def test_axis_rays_are_cauchy():
    fam = solved(1.0, 0.0).family
    t3, b3 = axis_limits(fam, 1e3)
    t4, b4 = axis_limits(fam, 1e4)
    assert abs(t4 - t3) < 1e-3 and abs(b4 - b3) < 1e-3


def test_axis_limits_need_room():
    with pytest.raises(ValueError):
        axis_limits(solved(1.0, 0.0).family, 30.0)


def test_normalization_centres_axes():
    norm = solved_norm(1.0, 0.0)
    assert abs(norm.axisTop + norm.axisBottom) < 1e-12
    assert abs(norm.axisTop - norm.axisBottom + 0.5j) < 0.04


# --- multigraphs ------------------------------------------------------------

def test_helicoid_extraction():
    s = extract_multigraph(HEL, 100.0, 0.0, 1)
    assert abs(s.u - math.pi / 2) < 0.02
    assert s.z.imag > 0
    s2 = extract_multigraph(HEL, 100.0, 0.0, 2)
    assert s2.z.imag < 0


@pytest.mark.parametrize("ab", [(1.0, 0.0), (0.0, TWO_PI), (1.0, TWO_PI)])
def test_extraction_reimmerses(ab):
    fam = solved(*ab).family
    norm = solved_norm(*ab)
    th = theta_window(fam, norm, 1e3, samples=9)
    for branch in (1, 2):
        w = extract_many(fam, 1e3, th, branch, norm)
        back = normalized_immersion(fam, w, norm)
        assert np.max(np.abs(back[:, 0] + 1j * back[:, 1] - 1e3 * np.exp(1j * th))) < 1e-8 * 1e3
        assert np.all(np.sign(w.imag) == (1 if branch == 1 else -1))


def test_extraction_failure_reports_seed():
    fam = solved(1.0, 0.0).family
    norm = solved_norm(1.0, 0.0)
    with pytest.raises((ExtractionError, ValueError)) as exc:
        extract_many(fam, 1e3, [0.0], 1, norm, maxIter=1)
    if isinstance(exc.value, ExtractionError):
        assert exc.value.seed is not None and exc.value.last is not None


def test_helicoid_model_graphs():
    rows = compare_model_graphs(HEL, [1e2, 1e3], np.linspace(5.0, 5.0 + TWO_PI, 17))
    assert rows[1][1] < 0.02 and rows[1][1] <= rows[0][1]


def test_helicoid_separation_is_pi():
    th = np.linspace(5.0, 5.0 + TWO_PI, 17)
    rows, wmin = separation(HEL, [1e3], th)
    assert rows[0][1] < 1e-6 and wmin > 0


def test_model_graphs_vertical_flux():
    fam = solved(0.0, TWO_PI).family
    norm = solved_norm(0.0, TWO_PI)
    rows = compare_model_graphs(fam, [1e2, 1e3, 1e4, 1e5], theta_window(fam, norm, 1e5), norm)
    dev = [d for _, d in rows]
    assert dev[-1] < 0.1
    assert all(y < x for x, y in zip(dev, dev[1:]))


def test_model_graph_formula():
    assert model_graph(1e3, 0.0, 1, 0.0) == pytest.approx(math.pi / 2)
    assert model_graph(1e3, 0.0, 2, 0.0) == pytest.approx(-math.pi / 2)
    s, L = math.pi / 2, math.log(2e3)
    assert model_graph(1e3, 0.0, 1, 1.0) == pytest.approx(s + 0.5 * math.log(s * s + L * L))


def _leading_separation(A, r, th):
    # u_1 - u_2 - pi from the 1/w term of f(w) = log(1 - A/z) ~ -A/w
    L = math.log(2 * r)
    q = th ** 2 + L ** 2
    return -2 * A.real * L / q + math.pi * A.imag * (L * L - th ** 2) / q ** 2


@pytest.mark.parametrize("ab", [(1.0, 0.0), (2.0, 0.0)])
def test_separation_follows_leading_order(ab):
    """The 1/w correction predicts the separation defect, and in a fixed
    theta window with theta > log 2r that defect grows with r."""
    fam = solved(*ab).family
    norm = solved_norm(*ab)
    th = theta_window(fam, norm, 1e5, samples=17)
    defects, misfit = [], []
    for r in (1e2, 1e3, 1e4, 1e5):
        d = separation_values(fam, r, th, norm) - math.pi
        p = _leading_separation(fam.A, r, th)
        defects.append(np.max(np.abs(d)))
        misfit.append(np.max(np.abs(d - p)) / np.max(np.abs(p)))
    assert misfit[-1] < 0.1
    assert all(y < x for x, y in zip(misfit, misfit[1:]))
    assert all(y > x for x, y in zip(defects, defects[1:]))


@pytest.mark.parametrize("ab", [(1.0, 0.0), (1.0, TWO_PI), (4 * math.pi ** 2, 0.0)])
def test_separation_along_diagonal(ab):
    fam = solved(*ab).family
    norm = solved_norm(*ab)
    rows, wmin = [], math.inf
    for r, th in diagonal_windows(fam, norm, [1e2, 1e3, 1e4, 1e5]):
        s, m = separation(fam, [r], th, norm)
        rows += s
        wmin = min(wmin, m)
    assert wmin > 0
    assert rows[-1][1] < 0.05 and rows[-1][1] < rows[0][1]


def test_gradient_decay():
    fam = solved(1.0, TWO_PI).family
    norm = solved_norm(1.0, TWO_PI)
    th = theta_window(fam, norm, 1e4, samples=9)
    rows = gradient_profile(fam, [1e2, 1e4], th, norm)
    assert rows[1][1] < rows[0][1]


@pytest.mark.parametrize("ab", [(1.0, 0.0), (1.0, TWO_PI), (2.0, 0.0)])
def test_same_flux_representatives_are_asymptotic(ab):
    first, second = solved(*ab).family, solved(*ab, 2).family
    norms = (solved_norm(*ab), normalization(second))
    assert abs(first.A - second.A) > 1.0
    base = max(hole_clearance(first, norms[0]), hole_clearance(second, norms[1]), 2 * math.log(2e4))
    # the difference decays like C/theta (C ~ difference of the 1/w terms)
    diffs = [same_flux_difference(first, second, 1e4, k * base + np.linspace(0, TWO_PI, 17), norms)
             for k in (2, 4, 8)]
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[-1] < 0.05


# --- helicoid limits ----------------------------------------------------------

def test_helicoid_point_distance_exact():
    rng = np.random.default_rng(1)
    s = rng.uniform(-5, 5, 200)
    h = rng.uniform(-20, 20, 200)
    phase, axis = 0.7, 0.3 - 0.2j
    q = np.stack([axis.real + s * np.sin(h - phase), axis.imag - s * np.cos(h - phase), h], axis=1)
    assert np.max(helicoid_point_distance(q, axis, phase)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(-4, 4, **finite), st.floats(-4, 4, **finite), st.floats(-10, 10, **finite))
def test_helicoid_point_distance_brute_force(x, y, h):
    q = np.array([[x, y, h]])
    d = helicoid_point_distance(q, 0j, 0.0)[0]
    s = np.linspace(-12, 12, 2401)
    hh = h + np.linspace(-3.5, 3.5, 1401)
    S, H = np.meshgrid(s, hh)
    brute = np.min(np.sqrt((x - S * np.sin(H)) ** 2 + (y + S * np.cos(H)) ** 2 + (h - H) ** 2))
    assert d <= brute + 1e-9
    assert d >= brute - 0.02


def test_helicoid_is_its_own_limit():
    for end in ("top", "bottom"):
        assert helicoid_distance(HEL, 50, end=end).distance < 1e-8


@pytest.mark.parametrize("ab", [(0.0, TWO_PI), (1.0, 0.0)])
def test_helicoid_convergence(ab):
    fam = solved(*ab).family
    norm = solved_norm(*ab)
    d = [helicoid_distance(fam, n, norm=norm).distance for n in (50, 100, 200)]
    assert d[0] > d[1] > d[2] and d[2] < 0.05


def test_helicoid_axes_shift_by_half_a():
    fam = solved(1.0, 0.0).family
    norm = solved_norm(1.0, 0.0)
    top = helicoid_distance(fam, 200, end="top", norm=norm)
    bottom = helicoid_distance(fam, 200, end="bottom", norm=norm)
    assert abs((bottom.axis - top.axis) - 0.5j) < 0.02


def test_helicoid_window_validation():
    with pytest.raises(ValueError):
        helicoid_distance(solved(1.0, 0.0).family, 1)
    with pytest.raises(ValueError):
        helicoid_distance(HEL, 50, end="side")


# --- symmetry ------------------------------------------------------------------

def test_symmetry_defect_vertical():
    assert symmetry_defect(WeierstrassFamily.vertical(TWO_PI + 1j, 1.0)) < 1e-12
    for b in (1.0, TWO_PI):
        fam = solved(0.0, b).family
        assert symmetry_defect(fam) < 1e-12
        assert paired_point_defect(fam) < 1e-6


def test_symmetry_defect_rejects_other_variants():
    with pytest.raises(ValueError):
        symmetry_defect(solved(1.0, 0.0).family)


def test_paired_point_breaks_without_symmetry():
    assert paired_point_defect(solved(1.0, 0.0).family) > 1e-3


# --- curvature --------------------------------------------------------------

def test_ring_curvature_sup_helicoid():
    rows = ring_curvature_sup(HEL, [1e2, 1e3, 1e4])
    assert all(abs(v - 1) < 1e-6 for _, v in rows)


@pytest.mark.parametrize("ab", [(1.0, 0.0), (0.0, TWO_PI)])
def test_ring_curvature_sup_tends_to_one(ab):
    rows = ring_curvature_sup(solved(*ab).family, [1e2, 1e3, 1e4])
    dev = [abs(v - 1) for _, v in rows]
    assert dev[-1] < 2e-2 and dev[-1] <= dev[0]


# --- embeddedness -----------------------------------------------------------

def test_triangle_intersection_primitives():
    P = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], dtype=float)
    crossing = np.array([[[0.2, 0.2, -1], [0.2, 0.2, 1], [0.3, 0.25, 1]]], dtype=float)
    apart = crossing + np.array([0, 0, 5.0])
    coplanar = np.array([[[0.1, 0.1, 0], [0.6, 0.1, 0], [0.1, 0.6, 0]]], dtype=float)
    assert triangles_intersect(P, crossing)[0]
    assert not triangles_intersect(P, apart)[0]
    assert triangles_intersect(P, coplanar)[0]


def test_helicoid_grids_embedded():
    norm = normalization(HEL)
    th = hole_clearance(HEL, norm) + np.linspace(0.0, 3 * TWO_PI, 97)
    r = np.geomspace(5.0, 50.0, 8)
    assert check_embedded([sheet_grid(HEL, k, r, th, norm) for k in (1, 2)]).embedded


def test_self_copy_sentinel():
    # a patch near the axis, fine enough that the facets follow the surface
    g = sample_mesh(HEL, 3.0, 6.0, 17, 17, 1.2, thetaStart=-0.6)
    assert check_embedded([g]).embedded
    assert not check_embedded([g, g]).embedded


@pytest.mark.parametrize("ab", [(1.0, TWO_PI), (0.0, TWO_PI)])
def test_sheets_embedded(ab):
    fam = solved(*ab).family
    norm = solved_norm(*ab)
    th = hole_clearance(fam, norm) + np.linspace(0.0, 3 * TWO_PI, 193)
    RE = estimate_RE(fam, th, norm)
    r = np.geomspace(RE, 10 * RE, 12)
    rep = check_embedded([sheet_grid(fam, k, r, th, norm) for k in (1, 2)])
    assert rep.embedded and rep.triangles > 0


# --- flux distinctness ---------------------------------------------------------

def test_flux_invariants_distinct():
    inv = {ab: flux_invariants(solved(*ab).family) for ab in [(1.0, 0.0), (1.0, TWO_PI), (2.0, 0.0)]}
    keys = list(inv)
    for i in range(3):
        for j in range(i + 1, 3):
            assert invariants_distinct(inv[keys[i]], inv[keys[j]])
    assert not invariants_distinct(inv[keys[0]], inv[keys[0]])


# --- report and verification ------------------------------------------------

def test_report_serialization_deterministic():
    rep = AsymptoticsReport(axisTop=0.25j, axisBottom=-0.25j, separationStats=[(1e3, 0.1), (1e2, 0.2)])
    assert rep.dumps() == AsymptoticsReport(**rep.__dict__).dumps()
    lines = rep.to_csv().splitlines()
    assert lines[0] == "quantity,key,value"
    assert lines.index("separationStats,100.0,0.2") < lines.index("separationStats,1000.0,0.1")


def test_verify_helicoid_all_checks():
    report, outcomes = verify_family(HEL, target=(0.0, 0.0))
    assert all(o.passed for o in outcomes), [o for o in outcomes if not o.passed]


def test_verify_detects_tampered_family():
    fam = solved(1.0, TWO_PI).family
    bad = WeierstrassFamily.nonvertical(fam.t * (1 + 1e-3), fam.A, fam.B, rotation=fam.rotation)
    _, outcomes = verify_family(bad, checks=("flux",), target=(1.0, TWO_PI))
    assert not outcomes[0].passed
    _, outcomes = verify_family(fam, checks=("flux", "axis", "separation"), target=(1.0, TWO_PI))
    assert all(o.passed for o in outcomes)


def test_verify_rejects_unknown_check():
    with pytest.raises(ValueError):
        verify_family(HEL, checks=("wobble",))


def test_horizontal_consistency_with_normalized():
    fam = solved(1.0, 0.0).family
    norm = solved_norm(1.0, 0.0)
    w = np.array([40.0 + 3j, -50.0 - 2j])
    X = normalized_immersion(fam, w, norm)
    h = horizontal(fam, w - norm.shift) + norm.translation
    assert np.allclose(X[:, 0] + 1j * X[:, 1], h, rtol=0, atol=1e-12)
