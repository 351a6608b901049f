import json
import os

import numpy as np
import pytest

from geotool import cli, scenarios as sc
from geotool.errors import ScenarioParseError


FLAT_SPHERE = {
    "schema_version": 1,
    "name": "flat_sphere",
    "units": "geometric",
    "data": {"family": "flat", "params": {},
             "chart": {"kind": "box", "bounds": [["-3.0", "3.0"]] * 3,
                       "resolution": [5, 5, 5]}},
    "surface": {"family": "coordinate_sphere", "params": {"radius": "1.5"},
                "resolution": [64, 64]},
    "comparison": {"family": "identity"},
    "numerics": {"tol": "1e-6"},
}

SCHW = {
    "schema_version": 1,
    "name": "schw",
    "units": "geometric",
    "data": {"family": "schwarzschild", "params": {"mass": "1.0"},
             "chart": {"kind": "shell", "r_min": "0.6", "r_max": "3.5",
                       "resolution": [9, 12, 16]}},
    "surface": {"family": "coordinate_sphere", "params": {"radius": "2.0"},
                "resolution": [96, 96]},
    "comparison": {"family": "round_sphere", "params": {"radius": "3.125"}},
    "numerics": {"tol": "1e-6", "dirac_grid": 600},
}

TRAPPED = {
    "schema_version": 1,
    "name": "trapped_sphere",
    "units": "geometric",
    "data": {"family": "constant_trace", "params": {"c": "-1.3333333333333333"},
             "chart": {"kind": "box", "bounds": [["-3.0", "3.0"]] * 3,
                       "resolution": [5, 5, 5]}},
    "surface": {"family": "coordinate_sphere", "params": {"radius": "1.5"},
                "resolution": [32, 32]},
    "comparison": {"family": "identity"},
}

JANG_BALL = {
    "schema_version": 1,
    "name": "jang_ball",
    "units": "geometric",
    "data": {"family": "constant_trace", "params": {"c": "0.2"}},
    "domain": {"kind": "ball", "radius": "1.0", "excision": "0.04",
               "resolution": [17, 16, 16]},
    "numerics": {"tol": "1e-8", "continuation_steps": 2,
                 "margin_error_estimate": "2e-3"},
}


def write(tmp_path, payload):
    path = tmp_path / f"{payload['name']}.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_parse_and_roundtrip_idempotent(tmp_path):
    path = write(tmp_path, SCHW)
    scn = sc.load_scenario(path)
    assert scn.name == "schw"
    assert scn.data["params"]["mass"] == 1.0  # decimal string decoded
    once = sc.serialize_scenario(scn)
    again = sc.serialize_scenario(sc.parse_scenario(once))
    assert once == again


def test_parse_errors_are_annotated(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x", "data": {,}}', encoding="utf-8")
    with pytest.raises(ScenarioParseError) as err:
        sc.load_scenario(str(path))
    assert "line" in str(err.value) and "column" in str(err.value)

    with pytest.raises(ScenarioParseError, match="unknown top-level"):
        sc.parse_scenario(json.dumps({"name": "x", "data": {"family": "flat"}, "bogus": 1}))

    with pytest.raises(ScenarioParseError, match="schema_version"):
        sc.parse_scenario(json.dumps({"schema_version": 99, "name": "x",
                                      "data": {"family": "flat"}}))


def test_cli_masses_and_determinism(tmp_path):
    path = write(tmp_path, SCHW)
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert cli.main(["masses", path, "--out", str(out1)]) == 0
    assert cli.main(["masses", path, "--out", str(out2)]) == 0
    rep1 = (out1 / "schw.report.json").read_bytes()
    rep2 = (out2 / "schw.report.json").read_bytes()
    assert rep1 == rep2
    payload = json.loads(rep1)
    assert abs(payload["m_HMR"] - 1.0 * (2 + 0.5) / (2 - 0.5)) < 1e-4


def test_cli_verify_flat_sphere_all_margins_zero(tmp_path):
    path = write(tmp_path, FLAT_SPHERE)
    out = tmp_path / "out"
    assert cli.main(["verify", path, "--out", str(out)]) == 0
    payload = json.loads((out / "flat_sphere.report.json").read_text())
    assert payload["pass"] is True
    assert abs(payload["masses"]["hmr_margin"]) < 1e-6
    assert payload["surface"]["classification"] == "untrapped"


def test_cli_trapped_scenario_masses_infeasible(tmp_path, capsys):
    path = write(tmp_path, TRAPPED)
    out = tmp_path / "out"
    code = cli.main(["masses", path, "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 4
    assert "marginally_trapped" in captured.err or "trapped" in captured.err


def test_cli_jang_ball(tmp_path):
    path = write(tmp_path, JANG_BALL)
    out = tmp_path / "out"
    assert cli.main(["jang", path, "--out", str(out)]) == 0
    payload = json.loads((out / "jang_ball.report.json").read_text())
    assert payload["converged"] is True
    assert payload["boundary"]["margin_min"] > -1e-2
    meta, arrays = cli.read_solution_bin(str(out / "jang_ball.solution.bin"))
    assert meta["chart_resolution"] == [17, 16, 16]
    assert arrays["u"].shape == (17, 16, 16)
    assert np.all(arrays["tilt"] <= 1.0)


def test_cli_dirac_schwarzschild(tmp_path):
    path = write(tmp_path, SCHW)
    out = tmp_path / "out"
    assert cli.main(["dirac", path, "--out", str(out)]) == 0
    payload = json.loads((out / "schw.report.json").read_text())
    assert payload["eigenvalue_bound_margin"] > 0
    assert payload["conformal_margin"] > 0
    table = (out / "schw.table.csv").read_text().strip().split("\n")
    assert table[0] == "mode,index,lambda"
    assert len(table) == 25


def test_cli_sweep_matches_closed_form(tmp_path):
    path = write(tmp_path, SCHW)
    out = tmp_path / "out"
    assert cli.main(["sweep", path, "--out", str(out),
                     "--sweep", "r=1:5:3", "--resolution", "192"]) == 0
    rows = (out / "schw.table.csv").read_text().strip().split("\n")
    assert rows[0] == "r,m_BY,m_L,m_HMR,closed_form,rel_err"
    assert len(rows) == 4
    worst = max(float(r.split(",")[-1]) for r in rows[1:])
    assert worst <= 1e-6


def test_cli_parse_failure_exit_code(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert cli.main(["masses", str(path), "--out", str(tmp_path)]) == 2


def test_cli_constraints_exit(tmp_path):
    path = write(tmp_path, FLAT_SPHERE)
    out = tmp_path / "out"
    assert cli.main(["constraints", path, "--out", str(out)]) == 0
    payload = json.loads((out / "flat_sphere.report.json").read_text())
    assert payload["pass"] is True


def test_cli_masses_sweep_alias(tmp_path):
    path = write(tmp_path, SCHW)
    out = tmp_path / "out"
    assert cli.main(["masses", path, "--out", str(out),
                     "--sweep", "r=1:3:2", "--resolution", "128"]) == 0
    rows = (out / "schw.table.csv").read_text().strip().split("\n")
    assert len(rows) == 3


def test_cli_golden_dir_regression(tmp_path, monkeypatch):
    path = write(tmp_path, FLAT_SPHERE)
    golden = tmp_path / "golden"
    out = tmp_path / "out"
    assert cli.main(["masses", path, "--out", str(golden)]) == 0
    monkeypatch.setenv("GEOTOOL_GOLDEN_DIR", str(golden))
    assert cli.main(["masses", path, "--out", str(out)]) == 0
    # perturb the golden copy: the same run must now flag a mismatch
    rep = golden / "flat_sphere.report.json"
    rep.write_text(rep.read_text().replace("flat_sphere", "flat_spherX"))
    assert cli.main(["masses", path, "--out", str(out)]) == 1


def test_cli_surface_report(tmp_path):
    path = write(tmp_path, SCHW)
    out = tmp_path / "out"
    assert cli.main(["surface", path, "--out", str(out)]) == 0
    payload = json.loads((out / "schw.report.json").read_text())
    assert payload["classification"] == "untrapped"
    assert payload["dichotomy"] == "mean_convex"
    assert payload["isometry_defect"] < 1e-9


def test_custom_callback_table_family(tmp_path):
    # grid-sampled data loaded from an npz table behaves like the analytic one
    chart = sc.box_chart([(-1, 1)] * 3, [17, 17, 17])
    c = 0.2
    gvals = np.broadcast_to(np.eye(3), tuple(chart.resolution) + (3, 3)).copy()
    kvals = c * gvals
    table = tmp_path / "table.npz"
    np.savez(table, metric=gvals, extrinsic=kvals)
    data = sc.make_data("custom_callback_table", {"path": str(table)}, chart)
    from geotool.initial_data import dominant_energy_report
    rep = dominant_energy_report(data)
    assert rep.passed
    assert abs(rep.min_margin - 3 * c ** 2) < 1e-8
