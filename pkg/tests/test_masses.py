import numpy as np
import pytest

from geotool import masses, scenarios as sc
from geotool.errors import NonpositiveH, NonpositiveH0, ZeroNormMeanCurvature
from geotool.surface import (SurfaceGeometry, comparison_H0, null_expansions,
                             trace_sigma_K)

M = 1.0


def sphere_bundle(data, radius, res=96):
    surf = sc.make_surface("coordinate_sphere", {"radius": radius}, data, [res, res])
    geo = SurfaceGeometry(surf)
    trk = trace_sigma_K(geo, data.extrinsic)
    nef = null_expansions(geo.mean_curvature, trk, geo.cap_mask)
    return surf, geo, nef


def schwarzschild_sphere(radius, res=96):
    chart = sc.shell_chart(0.55, max(3.0, 1.2 * radius), [5, 8, 16])
    data = sc.make_data("schwarzschild", {"mass": M}, chart)
    surf, geo, nef = sphere_bundle(data, radius, res)
    u = 1 + M / (2 * radius)
    comp = sc.make_comparison("round_sphere", {"radius": radius * u ** 2}, surf)
    H0, defect, _ = comparison_H0(surf, comp)
    return geo, nef, H0


def test_brown_york_closed_forms():
    # flat identity sphere: zero
    data = sc.make_data("flat", {}, sc.box_chart([(-3, 3)] * 3, [5, 5, 5]))
    surf, geo, nef = sphere_bundle(data, 1.5)
    H0, _, _ = comparison_H0(surf, sc.make_comparison("identity", {}, surf))
    assert abs(masses.brown_york(nef.mean_curvature_H, H0, geo)) < 1e-12

    # Schwarzschild sphere: m_BY = M u (areal-radius closed form R(1 - sqrt(1-2M/R)))
    r0 = 2.0
    geo, nef, H0 = schwarzschild_sphere(r0)
    got = masses.brown_york(nef.mean_curvature_H, H0, geo)
    want = masses.schwarzschild_brown_york(M, r0)
    R_areal = r0 * (1 + M / (2 * r0)) ** 2
    assert abs(want - R_areal * (1 - np.sqrt(1 - 2 * M / R_areal))) < 1e-12
    assert abs(got - want) < 1e-7 * want

    # linearity: H0 = H + eps on the unit sphere adds eps/2
    data = sc.make_data("flat", {}, sc.box_chart([(-3, 3)] * 3, [5, 5, 5]))
    surf, geo, nef = sphere_bundle(data, 1.0)
    eps = 0.37
    got = masses.brown_york(nef.mean_curvature_H, nef.mean_curvature_H + eps, geo)
    assert abs(got - eps / 2) < 1e-7 * eps


def test_lam_mass_closed_forms():
    data = sc.make_data("flat", {}, sc.box_chart([(-3, 3)] * 3, [5, 5, 5]))
    surf, geo, nef = sphere_bundle(data, 1.5)
    H = nef.mean_curvature_H
    assert abs(masses.lam_mass(H, H, geo)) < 1e-12

    # minimal-surface value: H = 0 with round image of radius rho gives rho/2,
    # the horizon area value sqrt(A/16 pi)
    rho = 1.5
    H0 = np.full_like(H, 2 / rho)
    got = masses.lam_mass(np.zeros_like(H), H0, geo)
    area = geo.area()
    assert abs(got - rho / 2) < 1e-7
    assert abs(got - np.sqrt(area / (16 * np.pi))) < 1e-6

    # Schwarzschild: m_L = M for every radius (graph-mass closed form)
    for r0 in (1.0, 2.0, 5.0):
        geo_s, nef_s, H0_s = schwarzschild_sphere(r0)
        got = masses.lam_mass(nef_s.mean_curvature_H, H0_s, geo_s)
        assert abs(got - M) < 1e-7


def test_lam_mass_scaling():
    # (H, H0) -> (lam H, lam H0) on the 1/lam-scaled sphere: m_L -> m_L / lam
    data = sc.make_data("flat", {}, sc.box_chart([(-6, 6)] * 3, [5, 5, 5]))
    lam = 2.0
    surf1, geo1, nef1 = sphere_bundle(data, 1.5)
    surf2, geo2, nef2 = sphere_bundle(data, 1.5 / lam)
    H0_1 = np.full_like(nef1.mean_curvature_H, 1.1 * 2 / 1.5)
    m1 = masses.lam_mass(nef1.mean_curvature_H, H0_1, geo1)
    m2 = masses.lam_mass(nef2.mean_curvature_H, lam * H0_1, geo2)
    assert abs(m2 - m1 / lam) < 1e-8


def test_hmr_profile_and_monotonicity():
    for r0 in (1.0, 2.0, 5.0, 10.0):
        geo, nef, H0 = schwarzschild_sphere(r0, res=128)
        got = masses.hmr_mass(nef.mean_curvature_H, H0, geo)
        want = masses.schwarzschild_profile(M, r0)
        assert abs(got - want) < 1e-6 * want
    # closed-form derivative is negative for all r > M/2
    r = np.linspace(0.6, 50, 200)
    prof = masses.schwarzschild_profile(M, r)
    assert np.all(np.diff(prof) < 0)


def test_equality_detection():
    data = sc.make_data("flat", {}, sc.box_chart([(-3, 3)] * 3, [5, 5, 5]))
    surf, geo, nef = sphere_bundle(data, 1.5)
    H = nef.mean_curvature_H
    rep = masses.mass_report(nef, H, geo)
    area = rep.area
    for val in (rep.m_BY, rep.m_L, rep.m_HMR):
        assert abs(val) < 1e-10 * area
    assert abs(rep.liu_yau_margin) < 1e-10 * area
    assert abs(rep.hmr_margin) < 1e-10 * area


def test_cauchy_schwarz_chain_on_random_positive_fields():
    data = sc.make_data("flat", {}, sc.box_chart([(-3, 3)] * 3, [5, 5, 5]))
    surf, geo, nef = sphere_bundle(data, 1.0, res=48)
    rng = np.random.default_rng(11)
    th = geo.params[..., 0]
    ph = geo.params[..., 1]
    for _ in range(25):
        a, b, c = rng.uniform(-0.2, 0.2, size=3)
        H = 1.0 + a * np.cos(th) + b * np.sin(th) * np.cos(ph)
        H0 = 1.0 + c * np.cos(2 * th) + 0.1 * np.sin(th) * np.sin(ph)
        m_by = masses.brown_york(H, H0, geo)
        m_l = masses.lam_mass(H, H0, geo)
        m_h = masses.hmr_mass(H, H0, geo)
        tol = 10 * 1e-9 * geo.area()
        assert m_h >= m_by - tol
        assert m_by >= m_l - tol


def test_constant_trace_margin_closed_form():
    box = sc.box_chart([(-3, 3)] * 3, [5, 5, 5])
    r0, c = 1.5, 0.4
    data = sc.make_data("constant_trace", {"c": c}, box)
    surf, geo, nef = sphere_bundle(data, r0, res=128)
    H0, _, _ = comparison_H0(surf, sc.make_comparison("identity", {}, surf))
    res = masses.liu_yau_checks(nef, H0, geo)
    h0 = 2 / r0
    q = np.sqrt(h0 ** 2 - 4 * c ** 2)
    want = 4 * np.pi * r0 ** 2 * (4 * c ** 2) / q  # hand algebra
    assert abs(res["hmr_margin"] - want) < 1e-6 * want
    assert res["classic_margin"] > 0
    # classic margin >= 0 implies the quotient margin >= 0 on each scenario
    assert res["hmr_margin"] >= 0


def test_denominator_guards():
    data = sc.make_data("flat", {}, sc.box_chart([(-3, 3)] * 3, [5, 5, 5]))
    surf, geo, nef = sphere_bundle(data, 1.5, res=24)
    H = nef.mean_curvature_H
    with pytest.raises(NonpositiveH):
        masses.hmr_mass(np.zeros_like(H), H, geo)
    with pytest.raises(NonpositiveH0):
        masses.lam_mass(H, np.zeros_like(H), geo)
    marginal = null_expansions(H, H, geo.cap_mask)  # trK = H: |Hvec| = 0
    with pytest.raises(ZeroNormMeanCurvature):
        masses.liu_yau_checks(marginal, H, geo)


def test_adm_limit_rate():
    for r0 in (100.0, 1000.0):
        geo, nef, H0 = schwarzschild_sphere(r0, res=96)
        got = masses.hmr_mass(nef.mean_curvature_H, H0, geo)
        assert abs(got - M) <= 2 * M ** 2 / r0


def test_sweep_rows_format():
    rows = [{"r": 1.0, "m_BY": 1.5, "m_L": 1.0, "m_HMR": 3.0,
             "closed_form": 3.0, "rel_err": 0.0}]
    csv = masses.sweep_rows(rows)
    lines = csv.strip().split("\n")
    assert lines[0] == "r,m_BY,m_L,m_HMR,closed_form,rel_err"
    assert len(lines) == 2
    assert lines[1].split(",")[0] == "%.12e" % 1.0
