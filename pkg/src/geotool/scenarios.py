"""Builtin data sets, surfaces and comparison immersions, plus scenario files.

Data families: ``flat`` (Cartesian box or spherical shell), ``schwarzschild``
(conformally flat time-symmetric slice, u = 1 + M/2r), ``constant_trace``
(flat metric, K = c g) and ``custom_callback_table`` (grid samples from an
npz file).  Builtin families carry exact metric derivative callbacks so the
curvature and mass pipelines are limited by quadrature only.

Scenario files are JSON with ``schema_version`` 1; every number is written as
a decimal string to keep artifacts byte-stable across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .chart import ChartDomain
from .errors import ScenarioParseError
from .fields import MetricField, SymTensorField
from .initial_data import InitialDataSet
from .surface import EuclideanImmersion, SurfaceEmbedding

# ---------------------------------------------------------------------------
# metric constructors


def _eye_fn(p):
    return np.broadcast_to(np.eye(3), p.shape[:-1] + (3, 3)).copy()


def _zeros_fn(shape_tail):
    def fn(p):
        return np.zeros(p.shape[:-1] + shape_tail)
    return fn


def flat_cartesian_metric(chart):
    d = chart.dim
    eye = np.eye(d)
    return MetricField(
        chart,
        fn=lambda p: np.broadcast_to(eye, p.shape[:-1] + (d, d)).copy(),
        dfn=_zeros_fn((d, d, d)),
        d2fn=_zeros_fn((d, d, d, d)),
    )


def _shell_metric_arrays(p, conf):
    """diag(1, r^2, r^2 sin^2 th) times a conformal factor u(r)^4 and partials."""
    r = p[..., 0]
    th = p[..., 1]
    u, up, upp = conf(r)
    u4 = u ** 4
    s = u4 * r ** 2
    sp = 4 * u ** 3 * up * r ** 2 + 2 * u4 * r
    spp = (12 * u ** 2 * up ** 2 + 4 * u ** 3 * upp) * r ** 2 + 16 * u ** 3 * up * r + 2 * u4
    sin2 = np.sin(th) ** 2
    sin2t = np.sin(2 * th)
    cos2t = np.cos(2 * th)

    g = np.zeros(p.shape[:-1] + (3, 3))
    g[..., 0, 0] = u4
    g[..., 1, 1] = s
    g[..., 2, 2] = s * sin2

    dg = np.zeros(p.shape[:-1] + (3, 3, 3))
    dg[..., 0, 0, 0] = 4 * u ** 3 * up
    dg[..., 0, 1, 1] = sp
    dg[..., 0, 2, 2] = sp * sin2
    dg[..., 1, 2, 2] = s * sin2t

    d2g = np.zeros(p.shape[:-1] + (3, 3, 3, 3))
    d2g[..., 0, 0, 0, 0] = 12 * u ** 2 * up ** 2 + 4 * u ** 3 * upp
    d2g[..., 0, 0, 1, 1] = spp
    d2g[..., 0, 0, 2, 2] = spp * sin2
    d2g[..., 0, 1, 2, 2] = sp * sin2t
    d2g[..., 1, 0, 2, 2] = sp * sin2t
    d2g[..., 1, 1, 2, 2] = 2 * s * cos2t
    return g, dg, d2g


def shell_metric(chart, conf=None):
    """Spherical-polar flat (or conformally flat) metric with exact partials."""
    if conf is None:
        def conf(r):
            one = np.ones_like(r)
            return one, 0 * r, 0 * r
    return MetricField(
        chart,
        fn=lambda p: _shell_metric_arrays(p, conf)[0],
        dfn=lambda p: _shell_metric_arrays(p, conf)[1],
        d2fn=lambda p: _shell_metric_arrays(p, conf)[2],
    )


def schwarzschild_conformal(mass):
    def conf(r):
        u = 1 + mass / (2 * r)
        up = -mass / (2 * r ** 2)
        upp = mass / r ** 3
        return u, up, upp
    return conf


def schwarzschild_cartesian_metric(chart, mass):
    def parts(p):
        r = np.linalg.norm(p, axis=-1)
        u = 1 + mass / (2 * r)
        du = (-mass / (2 * r ** 3))[..., None] * p
        d2u = (-mass / 2) * (np.eye(3) / r[..., None, None] ** 3
                             - 3 * p[..., :, None] * p[..., None, :] / r[..., None, None] ** 5)
        return u, du, d2u

    eye = np.eye(3)

    def fn(p):
        u, _, _ = parts(p)
        return u[..., None, None] ** 4 * eye

    def dfn(p):
        u, du, _ = parts(p)
        return (4 * u[..., None] ** 3 * du)[..., :, None, None] * eye

    def d2fn(p):
        u, du, d2u = parts(p)
        fac = (12 * u[..., None, None] ** 2 * du[..., :, None] * du[..., None, :]
               + 4 * u[..., None, None] ** 3 * d2u)
        return fac[..., :, :, None, None] * eye

    return MetricField(chart, fn=fn, dfn=dfn, d2fn=d2fn)


def zero_extrinsic(chart, metric=None):
    d = chart.dim
    return SymTensorField(chart, fn=_zeros_fn((d, d)), dfn=_zeros_fn((d, d, d)),
                          d2fn=_zeros_fn((d, d, d, d)))


def constant_trace_extrinsic(chart, metric, c):
    return SymTensorField(
        chart,
        fn=lambda p: c * metric.fn(p),
        dfn=(None if metric.dfn is None else (lambda p: c * metric.dfn(p))),
        d2fn=(None if metric.d2fn is None else (lambda p: c * metric.d2fn(p))),
    )


# ---------------------------------------------------------------------------
# chart and data factories


def box_chart(bounds, resolution):
    return ChartDomain(bounds=bounds, resolution=resolution)


def shell_chart(r_min, r_max, resolution, cell_centered_r=False):
    return ChartDomain(
        bounds=[(r_min, r_max), (0.0, np.pi), (0.0, 2 * np.pi)],
        resolution=resolution,
        periodic=[False, False, True],
        cell_centered=[cell_centered_r, True, False],
        polar_axis=1,
    )


def make_data(family, params, chart, label=""):
    """Assemble a builtin InitialDataSet on the given chart."""
    kind = "shell" if chart.polar_axis is not None else "box"
    if family == "flat":
        g = shell_metric(chart) if kind == "shell" else flat_cartesian_metric(chart)
        K = zero_extrinsic(chart)
    elif family == "schwarzschild":
        mass = float(params["mass"])
        if kind == "shell":
            g = shell_metric(chart, conf=schwarzschild_conformal(mass))
        else:
            g = schwarzschild_cartesian_metric(chart, mass)
        K = zero_extrinsic(chart)
    elif family == "constant_trace":
        c = float(params["c"])
        g = shell_metric(chart) if kind == "shell" else flat_cartesian_metric(chart)
        K = constant_trace_extrinsic(chart, g, c)
    elif family == "custom_callback_table":
        path = params["path"]
        with np.load(path) as data:
            gvals = data["metric"]
            kvals = data["extrinsic"]
        g = MetricField(chart, grid=gvals)
        K = SymTensorField(chart, grid=kvals)
    else:
        raise ScenarioParseError(f"unknown data family: {family!r}")
    return InitialDataSet(chart=chart, metric=g, extrinsic=K, label=label or family)


# ---------------------------------------------------------------------------
# surface factories


def sphere_param_chart(resolution):
    return ChartDomain(
        bounds=[(0.0, np.pi), (0.0, 2 * np.pi)],
        resolution=resolution,
        periodic=[False, True],
        cell_centered=[True, False],
        polar_axis=0,
    )


def torus_param_chart(resolution):
    return ChartDomain(
        bounds=[(0.0, 2 * np.pi), (0.0, 2 * np.pi)],
        resolution=resolution,
        periodic=[True, True],
    )


def _unit_dir(params):
    th = params[..., 0]
    ph = params[..., 1]
    st, ct = np.sin(th), np.cos(th)
    cp, sp = np.cos(ph), np.sin(ph)
    return np.stack([st * cp, st * sp, ct], axis=-1)


def _sphere_like_maps(ax, ay, az, center=(0.0, 0.0, 0.0)):
    """imap/jac/hess for (ax sin cos, ay sin sin, az cos) type immersions."""
    cx, cy, cz = center

    def imap(params):
        th, ph = params[..., 0], params[..., 1]
        st, ct = np.sin(th), np.cos(th)
        cp, sp = np.cos(ph), np.sin(ph)
        return np.stack([cx + ax * st * cp, cy + ay * st * sp, cz + az * ct], axis=-1)

    def jac(params):
        th, ph = params[..., 0], params[..., 1]
        st, ct = np.sin(th), np.cos(th)
        cp, sp = np.cos(ph), np.sin(ph)
        J = np.zeros(params.shape[:-1] + (3, 2))
        J[..., 0, 0] = ax * ct * cp
        J[..., 1, 0] = ay * ct * sp
        J[..., 2, 0] = -az * st
        J[..., 0, 1] = -ax * st * sp
        J[..., 1, 1] = ay * st * cp
        return J

    def hess(params):
        th, ph = params[..., 0], params[..., 1]
        st, ct = np.sin(th), np.cos(th)
        cp, sp = np.cos(ph), np.sin(ph)
        H = np.zeros(params.shape[:-1] + (3, 2, 2))
        H[..., 0, 0, 0] = -ax * st * cp
        H[..., 1, 0, 0] = -ay * st * sp
        H[..., 2, 0, 0] = -az * ct
        H[..., 0, 0, 1] = H[..., 0, 1, 0] = -ax * ct * sp
        H[..., 1, 0, 1] = H[..., 1, 1, 0] = ay * ct * cp
        H[..., 0, 1, 1] = -ax * st * cp
        H[..., 1, 1, 1] = -ay * st * sp
        return H

    return imap, jac, hess


def _torus_maps(R, a):
    def imap(params):
        v, ph = params[..., 0], params[..., 1]
        w = R + a * np.cos(v)
        return np.stack([w * np.cos(ph), w * np.sin(ph), a * np.sin(v)], axis=-1)

    def jac(params):
        v, ph = params[..., 0], params[..., 1]
        w = R + a * np.cos(v)
        J = np.zeros(params.shape[:-1] + (3, 2))
        J[..., 0, 0] = -a * np.sin(v) * np.cos(ph)
        J[..., 1, 0] = -a * np.sin(v) * np.sin(ph)
        J[..., 2, 0] = a * np.cos(v)
        J[..., 0, 1] = -w * np.sin(ph)
        J[..., 1, 1] = w * np.cos(ph)
        return J

    def hess(params):
        v, ph = params[..., 0], params[..., 1]
        w = R + a * np.cos(v)
        H = np.zeros(params.shape[:-1] + (3, 2, 2))
        H[..., 0, 0, 0] = -a * np.cos(v) * np.cos(ph)
        H[..., 1, 0, 0] = -a * np.cos(v) * np.sin(ph)
        H[..., 2, 0, 0] = -a * np.sin(v)
        H[..., 0, 0, 1] = H[..., 0, 1, 0] = a * np.sin(v) * np.sin(ph)
        H[..., 1, 0, 1] = H[..., 1, 1, 0] = -a * np.sin(v) * np.cos(ph)
        H[..., 0, 1, 1] = -w * np.cos(ph)
        H[..., 1, 1, 1] = -w * np.sin(ph)
        return H

    return imap, jac, hess


_GRAPH_BASIS = (
    lambda n: n[..., 0],
    lambda n: n[..., 1],
    lambda n: n[..., 2],
    lambda n: n[..., 0] * n[..., 1],
    lambda n: n[..., 1] * n[..., 2],
    lambda n: n[..., 0] * n[..., 2],
    lambda n: n[..., 0] ** 2 - n[..., 2] ** 2,
    lambda n: n[..., 1] ** 2 - n[..., 2] ** 2,
)


def _graph_over_sphere_imap(r0, coeffs):
    coeffs = np.asarray(coeffs, dtype=float)

    def imap(params):
        n = _unit_dir(params)
        rho = np.full(n.shape[:-1], 1.0)
        for c, basis in zip(coeffs, _GRAPH_BASIS):
            rho = rho + c * basis(n)
        return (r0 * rho)[..., None] * n

    return imap


def shell_position_field(points):
    out = np.zeros_like(points)
    out[..., 0] = points[..., 0]
    return out


def make_surface(family, params, data: InitialDataSet, resolution,
                 orientation="inner", fd=None):
    """Builtin surface embedded in the data chart."""
    chart = data.chart
    shell = chart.polar_axis is not None
    kw = {}
    if fd is not None:
        kw["fd"] = fd
    if family == "coordinate_sphere":
        radius = float(params["radius"])
        pchart = sphere_param_chart(resolution)
        if shell:
            def imap(p):
                out = np.empty(p.shape[:-1] + (3,))
                out[..., 0] = radius
                out[..., 1] = p[..., 0]
                out[..., 2] = p[..., 1]
                return out

            def jac(p):
                J = np.zeros(p.shape[:-1] + (3, 2))
                J[..., 1, 0] = 1.0
                J[..., 2, 1] = 1.0
                return J

            def hess(p):
                return np.zeros(p.shape[:-1] + (3, 2, 2))

            return SurfaceEmbedding(pchart, imap, data.metric, orientation,
                                    jac=jac, hess=hess,
                                    position_field=shell_position_field, **kw)
        center = tuple(float(c) for c in params.get("center", (0.0, 0.0, 0.0)))
        imap, jac, hess = _sphere_like_maps(radius, radius, radius, center)
        cen = np.asarray(center)
        return SurfaceEmbedding(pchart, imap, data.metric, orientation,
                                jac=jac, hess=hess,
                                position_field=lambda x: x - cen, **kw)
    if family == "spheroid":
        if shell:
            raise ScenarioParseError("spheroid surfaces need a Cartesian chart")
        a = float(params["a"])
        c = float(params["c"])
        imap, jac, hess = _sphere_like_maps(a, a, c)
        return SurfaceEmbedding(sphere_param_chart(resolution), imap, data.metric,
                                orientation, jac=jac, hess=hess, **kw)
    if family == "torus":
        if shell:
            raise ScenarioParseError("torus surfaces need a Cartesian chart")
        R = float(params["R"])
        a = float(params["a"])
        if not R > a > 0:
            raise ScenarioParseError("torus needs R > a > 0")
        imap, jac, hess = _torus_maps(R, a)
        return SurfaceEmbedding(torus_param_chart(resolution), imap, data.metric,
                                orientation, jac=jac, hess=hess, **kw)
    if family == "graph_over_sphere":
        if shell:
            raise ScenarioParseError("graph_over_sphere needs a Cartesian chart")
        r0 = float(params["r0"])
        coeffs = [float(c) for c in params.get("coeffs", [])]
        imap = _graph_over_sphere_imap(r0, coeffs)
        return SurfaceEmbedding(sphere_param_chart(resolution), imap, data.metric,
                                orientation, **kw)
    raise ScenarioParseError(f"unknown surface family: {family!r}")


def make_comparison(family, params, surface: SurfaceEmbedding):
    """Comparison immersion into flat 3-space over the same parameters."""
    if family == "identity":
        return EuclideanImmersion(imap=surface.imap, jac=surface.jac, hess=surface.hess)
    if family == "round_sphere":
        radius = float(params["radius"])
        imap, jac, hess = _sphere_like_maps(radius, radius, radius)
        return EuclideanImmersion(imap=imap, jac=jac, hess=hess)
    raise ScenarioParseError(f"unknown comparison family: {family!r}")


# ---------------------------------------------------------------------------
# scenario files

SCHEMA_VERSION = 1


@dataclass
class Scenario:
    """Parsed scenario file; numeric leaves kept as floats after parsing."""

    name: str
    data: dict
    surface: dict = None
    comparison: dict = None
    domain: dict = None
    numerics: dict = field(default_factory=dict)
    units: str = "geometric"

    def build_data(self):
        spec = self.data
        chart_spec = spec.get("chart", {})
        kind = chart_spec.get("kind", "box")
        resolution = [int(n) for n in chart_spec.get("resolution", [33, 33, 33])]
        if kind == "shell":
            chart = shell_chart(float(chart_spec.get("r_min", 0.5)),
                                float(chart_spec.get("r_max", 2.0)),
                                resolution,
                                cell_centered_r=bool(chart_spec.get("cell_centered_r", False)))
        elif kind == "box":
            bounds = chart_spec.get("bounds")
            if bounds is None:
                bounds = [(-1.0, 1.0)] * 3
            bounds = [(float(a), float(b)) for a, b in bounds]
            chart = box_chart(bounds, resolution)
        else:
            raise ScenarioParseError(f"unknown chart kind: {kind!r}")
        return make_data(spec["family"], spec.get("params", {}), chart, label=self.name)

    def build_surface(self, data):
        if self.surface is None:
            raise ScenarioParseError("scenario has no surface block")
        spec = self.surface
        resolution = [int(n) for n in spec.get("resolution", [96, 96])]
        return make_surface(spec["family"], spec.get("params", {}), data, resolution,
                            orientation=spec.get("orientation", "inner"))

    def build_comparison(self, surface):
        if self.comparison is None:
            return None
        return make_comparison(self.comparison["family"],
                               self.comparison.get("params", {}), surface)


def _decode_numbers(obj):
    """Decimal strings -> floats, recursively; other leaves untouched."""
    if isinstance(obj, str):
        try:
            return float(obj)
        except ValueError:
            return obj
    if isinstance(obj, list):
        return [_decode_numbers(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _decode_numbers(v) for k, v in obj.items()}
    return obj


def _encode_numbers(obj):
    """Floats -> decimal strings (repr round-trip), recursively."""
    if isinstance(obj, float):
        return repr(obj)
    if isinstance(obj, list):
        return [_encode_numbers(v) for v in obj]
    if isinstance(obj, tuple):
        return [_encode_numbers(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _encode_numbers(v) for k, v in obj.items()}
    return obj


def parse_scenario(text, origin="<scenario>"):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(
            f"{origin}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ScenarioParseError(f"{origin}: scenario root must be an object")
    version = raw.get("schema_version")
    if version is not None and int(float(version)) != SCHEMA_VERSION:
        raise ScenarioParseError(f"{origin}: unsupported schema_version {version!r}")
    if "name" not in raw or "data" not in raw:
        raise ScenarioParseError(f"{origin}: scenario needs 'name' and 'data'")
    decoded = _decode_numbers({k: v for k, v in raw.items() if k != "schema_version"})
    known = {"name", "data", "surface", "comparison", "domain", "numerics", "units"}
    unknown = set(decoded) - known
    if unknown:
        raise ScenarioParseError(f"{origin}: unknown top-level keys {sorted(unknown)}")
    return Scenario(**decoded)


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as handle:
        return parse_scenario(handle.read(), origin=str(path))


def serialize_scenario(sc: Scenario):
    payload = {"schema_version": SCHEMA_VERSION, "name": sc.name, "units": sc.units,
               "data": sc.data}
    for key in ("surface", "comparison", "domain"):
        val = getattr(sc, key)
        if val is not None:
            payload[key] = val
    if sc.numerics:
        payload["numerics"] = sc.numerics
    return json.dumps(_encode_numbers(payload), sort_keys=True, indent=2) + "\n"
