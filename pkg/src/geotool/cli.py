"""Batch front door: run scenario files through the module pipelines.

Commands

    geotool constraints <scenario.json>   mu, J and the energy-condition report
    geotool surface     <scenario.json>   classification / dichotomy report
    geotool jang        <scenario.json>   deformation solve + boundary report
    geotool masses      <scenario.json>   mass functionals and margins
    geotool dirac       <scenario.json>   reduced spectra and eigenvalue bounds
    geotool verify      <scenario.json>   every applicable inequality check
    geotool sweep       <scenario.json> --sweep r=1:50:25   radius family CSV

Artifacts land in --out (default .): <name>.report.json, <name>.table.csv,
<name>.solution.bin.  JSON/CSV artifacts are byte-stable for identical inputs
(sorted keys, repr floats, fixed %.12e table formatting, fixed summation
order); determinism is guaranteed at --threads 1.

Exit codes: 0 all asserted inequalities hold, 1 check failed, 2 usage or
parse error, 3 solver failure, 4 scenario infeasible for the command.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys

import numpy as np

from . import masses as masses_mod
from . import spin
from .errors import (GeotoolError, NewtonDiverged, NotConverged,
                     ScenarioInfeasible, ScenarioParseError, SingularJacobian)
from .initial_data import dominant_energy_report
from .jang import (JangOptions, boundary_function_report,
                   scalar_condition_report, solve_jang)
from .scenarios import Scenario, load_scenario, shell_chart
from .surface import (SurfaceGeometry, classify, null_expansions,
                      surface_report, trace_sigma_K)

_EXIT_OK = 0
_EXIT_FAIL = 1
_EXIT_USAGE = 2
_EXIT_SOLVER = 3
_EXIT_INFEASIBLE = 4


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(payload, sort_keys=True, indent=2))
        handle.write("\n")


def _write_solution_bin(path, arrays, meta):
    """Deterministic binary dump: magic, JSON header, raw little-endian data."""
    header = {"meta": meta, "fields": []}
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        header["fields"].append({"name": name, "shape": list(arr.shape), "dtype": "<f8"})
        blobs.append(arr.tobytes())
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(b"GTSOL1\n")
        handle.write(struct.pack("<Q", len(head)))
        handle.write(head)
        for blob in blobs:
            handle.write(blob)


def read_solution_bin(path):
    with open(path, "rb") as handle:
        magic = handle.read(7)
        if magic != b"GTSOL1\n":
            raise GeotoolError(f"{path}: not a solution dump")
        (n,) = struct.unpack("<Q", handle.read(8))
        header = json.loads(handle.read(n).decode("utf-8"))
        arrays = {}
        for fieldspec in header["fields"]:
            shape = tuple(fieldspec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = handle.read(8 * count)
            arrays[fieldspec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape)
    return header["meta"], arrays


def _surface_bundle(sc: Scenario, args):
    data = sc.build_data()
    if args.resolution:
        sc.surface = dict(sc.surface or {})
        sc.surface["resolution"] = [args.resolution, args.resolution]
    surf = sc.build_surface(data)
    geo = SurfaceGeometry(surf, mode="exact")
    trk = trace_sigma_K(geo, data.extrinsic)
    nef = null_expansions(geo.mean_curvature, trk, geo.cap_mask)
    return data, surf, geo, nef


def _tolerance(sc: Scenario, args, default=1e-8):
    if args.tol is not None:
        return float(args.tol)
    return float(sc.numerics.get("tol", default))


def cmd_constraints(sc: Scenario, args, outdir):
    data = sc.build_data()
    rep = dominant_energy_report(data)
    payload = json.loads(rep.to_json())
    _write_json(os.path.join(outdir, f"{sc.name}.report.json"), payload)
    return _EXIT_OK if rep.passed else _EXIT_FAIL


def cmd_surface(sc: Scenario, args, outdir):
    data, surf, geo, nef = _surface_bundle(sc, args)
    defect = None
    comp = sc.build_comparison(surf)
    if comp is not None:
        from .surface import comparison_H0
        _, defect, _ = comparison_H0(surf, comp)
    rep = surface_report(sc.name, geo, nef, isometry_defect=defect)
    _write_json(os.path.join(outdir, f"{sc.name}.report.json"), rep)
    ok = rep["classification"] != "mixed" and rep["dichotomy"] != "violation"
    return _EXIT_OK if ok else _EXIT_FAIL


def _jang_data(sc: Scenario, args):
    dom = sc.domain
    if dom is None:
        raise ScenarioInfeasible("scenario has no jang domain block")
    kind = dom.get("kind", "ball")
    res = [int(n) for n in dom.get("resolution", [33, 32, 32])]
    if args.resolution:
        res = [args.resolution] * 3
    if kind == "ball":
        radius = float(dom.get("radius", 1.0))
        excision = float(dom.get("excision", max(2 * radius / res[0], 0.02 * radius)))
        chart = shell_chart(excision, radius, res)
    elif kind == "box":
        from .scenarios import box_chart
        bounds = dom.get("bounds", [(-1.0, 1.0)] * 3)
        chart = box_chart([(float(a), float(b)) for a, b in bounds], res)
    else:
        raise ScenarioParseError(f"unknown domain kind {kind!r}")
    from .scenarios import make_data
    return make_data(sc.data["family"], sc.data.get("params", {}), chart, label=sc.name)


def _jang_options(sc: Scenario, args):
    num = sc.numerics
    return JangOptions(
        max_newton=int(num.get("max_newton", 30)),
        tol=_tolerance(sc, args, 1e-8),
        continuation_steps=int(num.get("continuation_steps", 2)),
    )


def cmd_jang(sc: Scenario, args, outdir):
    data = _jang_data(sc, args)
    sol = solve_jang(data, _jang_options(sc, args))
    payload = {
        "name": sc.name,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual_norm": sol.residual_norm,
        "tolerance": sol.tolerance,
        "sup_u": float(np.max(np.abs(sol.u))),
    }
    ok = sol.converged
    if data.chart.polar_axis is not None:
        repF = boundary_function_report(sol)
        rep15 = scalar_condition_report(sol)
        payload["boundary"] = {k: repF[k] for k in
                               ("F_min", "F_max", "norm_H_max", "margin_min",
                                "route_agreement_max", "sigma_plus_fraction")}
        payload["scalar_condition"] = rep15
        tol = _tolerance(sc, args, 1e-8)
        guard = 5.0 * max(float(sc.numerics.get("margin_error_estimate", 1e-3)), tol)
        ok = ok and repF["margin_min"] >= -guard and rep15["min_margin"] >= -guard
    _write_json(os.path.join(outdir, f"{sc.name}.report.json"), payload)
    _write_solution_bin(os.path.join(outdir, f"{sc.name}.solution.bin"),
                        {"u": sol.u, "tilt": sol.tilt},
                        {"name": sc.name, "chart_resolution": list(data.chart.resolution),
                         "iterations": sol.iterations, "residual_norm": sol.residual_norm})
    return _EXIT_OK if ok else _EXIT_FAIL


def _require_untrapped(nef, name):
    label, counts = classify(nef)
    if label != "untrapped":
        raise ScenarioInfeasible(
            f"{name}: surface classified {label} (counts {counts}); "
            "mass comparison needs an untrapped surface")


def cmd_masses(sc: Scenario, args, outdir):
    data, surf, geo, nef = _surface_bundle(sc, args)
    _require_untrapped(nef, sc.name)
    comp = sc.build_comparison(surf)
    if comp is None:
        raise ScenarioInfeasible(f"{sc.name}: masses need a comparison immersion")
    from .surface import comparison_H0
    H0, defect, _ = comparison_H0(surf, comp)
    rep = masses_mod.mass_report(nef, H0, geo)
    payload = rep.to_dict()
    payload["name"] = sc.name
    payload["isometry_defect"] = defect
    _write_json(os.path.join(outdir, f"{sc.name}.report.json"), payload)
    tol = _tolerance(sc, args, 1e-8)
    scale = max(1.0, payload["inputs_summary"]["H0_max"] ** 2)
    ok = rep.hmr_margin >= -tol * rep.area * scale
    return _EXIT_OK if ok else _EXIT_FAIL


def _revolution_problem(sc: Scenario, data, surf, grid):
    fam = sc.surface["family"]
    params = sc.surface.get("params", {})
    if fam == "coordinate_sphere":
        radius = float(params["radius"])
        if sc.data["family"] == "schwarzschild":
            u = 1 + float(sc.data["params"]["mass"]) / (2 * radius)
            radius = radius * u * u
        return spin.RevolutionDiracProblem(
            rho=lambda t: radius * np.sin(t / radius),
            ell=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            t_max=np.pi * radius, grid=grid)
    if fam == "spheroid":
        a = float(params["a"])
        c = float(params["c"])
        return spin.RevolutionDiracProblem(
            rho=lambda t: a * np.sin(t),
            ell=lambda t: np.sqrt(a ** 2 * np.cos(t) ** 2 + c ** 2 * np.sin(t) ** 2),
            t_max=np.pi, grid=grid)
    if fam == "torus":
        R = float(params["R"])
        a = float(params["a"])
        return spin.RevolutionDiracProblem(
            rho=lambda t: R + a * np.cos(t),
            ell=lambda t: np.full_like(np.asarray(t, dtype=float), a),
            t_max=2 * np.pi, grid=grid, closed_profile=True)
    raise ScenarioInfeasible(f"{sc.name}: surface family {fam!r} is not rotationally symmetric")


def cmd_dirac(sc: Scenario, args, outdir):
    data, surf, geo, nef = _surface_bundle(sc, args)
    _require_untrapped(nef, sc.name)
    grid = int(sc.numerics.get("dirac_grid", 1000))
    problem = _revolution_problem(sc, data, surf, grid)
    lams, modes = spin.revolution_dirac_spectrum(problem, 24)
    lam1 = float(np.min(np.abs(lams)))
    keep = ~nef.cap_mask
    inf_norm_sq = float(np.min(nef.norm_H_sq[keep]))
    bound_margin = lam1 ** 2 - 0.25 * inf_norm_sq
    payload = {
        "name": sc.name,
        "lambda1": lam1,
        "inf_norm_H_sq": inf_norm_sq,
        "eigenvalue_bound_margin": bound_margin,
        "identities": spin.clifford_identities(spin.CliffordRep(), trials=64),
    }
    conf_margin = None
    if not np.any(data.extrinsic.values(geo.points)):
        # Riemannian case: drift-free comparison function F = H
        chartF = _meridian_interp(geo, problem)
        conf_margin = spin.conformal_bound_check(problem, chartF)
        payload["conformal_margin"] = conf_margin
    _write_json(os.path.join(outdir, f"{sc.name}.report.json"), payload)
    lines = ["mode,index,lambda"]
    for k, (lam, m) in enumerate(zip(lams, modes)):
        lines.append("%s,%d,%.12e" % (("%g" % m), k, lam))
    with open(os.path.join(outdir, f"{sc.name}.table.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    tol = _tolerance(sc, args, 1e-6)
    ok = bound_margin >= -tol and (conf_margin is None or conf_margin >= -max(tol, 1e-4))
    return _EXIT_OK if ok else _EXIT_FAIL


def _meridian_interp(geo, problem):
    """Rotationally symmetric H along a meridian as a profile-coordinate callback."""
    H_col = geo.mean_curvature[:, 0]
    th = geo.param_chart.axis_coords(0)
    lo, hi = geo.param_chart.bounds[0]

    def F(t):
        x = lo + (np.asarray(t, dtype=float) / problem.t_max) * (hi - lo)
        return np.interp(x, th, H_col)

    return F


def cmd_verify(sc: Scenario, args, outdir):
    """Run every check block applicable to the scenario; exit 0 iff all hold."""
    results = {}
    ok = True

    data = sc.build_data()
    dec = dominant_energy_report(data)
    results["constraints"] = {"pass": dec.passed, "min_margin": dec.min_margin}
    ok &= dec.passed

    if sc.surface is not None:
        data2, surf, geo, nef = _surface_bundle(sc, args)
        label, counts = classify(nef)
        from .surface import dichotomy_check
        dich = dichotomy_check(nef.mean_curvature_H, cap_mask=nef.cap_mask)
        surf_ok = label != "mixed"
        if label == "untrapped":
            surf_ok &= dich != "violation"
        results["surface"] = {"classification": label, "dichotomy": dich, "pass": surf_ok}
        ok &= surf_ok

        comp = sc.build_comparison(surf)
        if comp is not None and label == "untrapped":
            from .surface import comparison_H0
            H0, defect, _ = comparison_H0(surf, comp)
            rep = masses_mod.mass_report(nef, H0, geo)
            tol = _tolerance(sc, args, 1e-8)
            scale = max(1.0, float(np.max(np.abs(H0))) ** 2)
            mass_ok = (rep.hmr_margin >= -tol * rep.area * scale
                       and rep.m_HMR >= rep.m_BY - max(1e-10, 10 * tol)
                       and rep.m_BY >= rep.m_L - max(1e-10, 10 * tol))
            results["masses"] = {"pass": mass_ok, "m_BY": rep.m_BY, "m_L": rep.m_L,
                                 "m_HMR": rep.m_HMR, "hmr_margin": rep.hmr_margin,
                                 "isometry_defect": defect}
            ok &= mass_ok

    if sc.domain is not None:
        code = cmd_jang(sc, args, outdir)
        results["jang"] = {"pass": code == _EXIT_OK}
        ok &= code == _EXIT_OK

    if sc.surface is not None and sc.surface["family"] in ("coordinate_sphere", "spheroid", "torus"):
        try:
            code = cmd_dirac(sc, args, outdir)
            results["dirac"] = {"pass": code == _EXIT_OK}
            ok &= code == _EXIT_OK
        except ScenarioInfeasible:
            pass

    results["pass"] = bool(ok)
    _write_json(os.path.join(outdir, f"{sc.name}.report.json"), results)
    return _EXIT_OK if ok else _EXIT_FAIL


def _parse_sweep(spec):
    try:
        key, rng = spec.split("=")
        a, b, n = rng.split(":")
        return key, float(a), float(b), int(n)
    except ValueError as exc:
        raise ScenarioParseError(f"bad sweep spec {spec!r}; want param=a:b:n") from exc


def cmd_sweep(sc: Scenario, args, outdir):
    if not args.sweep:
        raise ScenarioParseError("sweep needs --sweep param=a:b:n")
    key, a, b, n = _parse_sweep(args.sweep)
    if key != "r":
        raise ScenarioParseError("only radius sweeps (r=...) are supported")
    radii = np.linspace(a, b, n)
    family = sc.data["family"]
    mass = float(sc.data.get("params", {}).get("mass", 0.0))
    rows = []
    worst = 0.0
    from .surface import comparison_H0
    from .scenarios import make_comparison, make_surface
    # widen the data chart to cover every swept sphere
    chart_spec = dict(sc.data.get("chart", {}))
    if chart_spec.get("kind", "box") == "shell":
        chart_spec["r_min"] = min(float(chart_spec.get("r_min", 0.5)), 0.5 * radii.min())
        chart_spec["r_max"] = max(float(chart_spec.get("r_max", 2.0)), 1.2 * radii.max())
    else:
        half = 1.2 * radii.max()
        chart_spec["bounds"] = [(-half, half)] * 3
    sc.data = dict(sc.data)
    sc.data["chart"] = chart_spec
    data = sc.build_data()
    res = sc.surface.get("resolution", [128, 128]) if sc.surface else [128, 128]
    if args.resolution:
        res = [args.resolution, args.resolution]
    for r in radii:
        surf = make_surface("coordinate_sphere", {"radius": float(r)}, data,
                            [int(res[0]), int(res[1])])
        geo = SurfaceGeometry(surf, mode="exact")
        trk = trace_sigma_K(geo, data.extrinsic)
        nef = null_expansions(geo.mean_curvature, trk, geo.cap_mask)
        if family == "schwarzschild":
            u = 1 + mass / (2 * r)
            comp = make_comparison("round_sphere", {"radius": r * u * u}, surf)
            closed = masses_mod.schwarzschild_profile(mass, r)
        else:
            comp = make_comparison("identity", {}, surf)
            closed = float("nan")
        H0, _, _ = comparison_H0(surf, comp)
        rep = masses_mod.mass_report(nef, H0, geo)
        rel = abs(rep.m_HMR - closed) / abs(closed) if np.isfinite(closed) else float("nan")
        if np.isfinite(rel):
            worst = max(worst, rel)
        rows.append({"r": float(r), "m_BY": rep.m_BY, "m_L": rep.m_L,
                     "m_HMR": rep.m_HMR, "closed_form": closed, "rel_err": rel})
    csv = masses_mod.sweep_rows(rows)
    with open(os.path.join(outdir, f"{sc.name}.table.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv)
    _write_json(os.path.join(outdir, f"{sc.name}.report.json"),
                {"name": sc.name, "sweep": args.sweep, "rows": len(rows),
                 "worst_rel_err": worst})
    tol = _tolerance(sc, args, 1e-6)
    return _EXIT_OK if (not np.isfinite(worst) or worst <= tol) else _EXIT_FAIL


_COMMANDS = {
    "constraints": cmd_constraints,
    "surface": cmd_surface,
    "jang": cmd_jang,
    "masses": cmd_masses,
    "dirac": cmd_dirac,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="geotool",
        description="Quasi-local mass and spinor-bound verification pipelines.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("scenario", help="scenario JSON file")
    parser.add_argument("--out", default=".", help="artifact directory")
    parser.add_argument("--resolution", type=int, default=None,
                        help="override grid resolution (surface N x N, domain N^3)")
    parser.add_argument("--tol", type=float, default=None, help="override check tolerance")
    parser.add_argument("--threads", type=int, default=1,
                        help="BLAS thread cap; artifacts are byte-stable at 1")
    parser.add_argument("--sweep", default=None, help="sweep spec param=a:b:n")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(args.threads))
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ScenarioParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    command = args.command
    if command == "masses" and args.sweep:
        command = "sweep"
    try:
        code = _COMMANDS[command](scenario, args, args.out)
    except ScenarioInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return _EXIT_INFEASIBLE
    except (NewtonDiverged, NotConverged, SingularJacobian) as exc:
        print(f"solver failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return _EXIT_SOLVER
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except GeotoolError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return _EXIT_FAIL
    golden = os.environ.get("GEOTOOL_GOLDEN_DIR")
    if golden:
        mismatches = _golden_compare(scenario.name, args.out, golden)
        if mismatches:
            print("golden mismatch: " + ", ".join(mismatches), file=sys.stderr)
            return _EXIT_FAIL
    return code


def _golden_compare(name, outdir, golden_dir):
    """Byte-compare produced JSON/CSV artifacts against golden copies."""
    mismatches = []
    for fname in sorted(os.listdir(outdir)):
        if not fname.startswith(name + ".") or fname.endswith(".solution.bin"):
            continue
        ref = os.path.join(golden_dir, fname)
        if not os.path.exists(ref):
            continue
        with open(os.path.join(outdir, fname), "rb") as fh:
            got = fh.read()
        with open(ref, "rb") as fh:
            want = fh.read()
        if got != want:
            mismatches.append(fname)
    return mismatches


if __name__ == "__main__":
    sys.exit(main())
