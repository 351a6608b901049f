"""Extrinsic geometry of closed parametrized surfaces in a 3-D chart.

Orientation convention: the unit normal is the INNER normal of the enclosed
domain (resolved by a divergence-theorem flux test against a position field),
and the shape operator follows A X = -grad_X N, so Euclidean spheres bounding
balls have H = 2/r > 0 and mean-convex matches positive H.

Two differentiation modes drive the extrinsic quantities:

* ``exact``: immersion jacobian/hessian callbacks (small-step pointwise FD
  fallback); resolution-independent accuracy, used by the mass pipeline.
* ``grid``: parameter-grid stencils of the computed normal field at spacing
  h, O(h^2) accurate; used by the spinor pipeline and convergence tests.

Spherical parameter domains keep the polar angle cell-centered; polar caps of
angular radius 2h are masked out of sup/inf scans (coordinate degeneracy, not
geometric degeneracy) while quadrature keeps every row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .chart import ChartDomain, grid_partial
from .errors import DegenerateImmersion, OrientationUnresolved
from .fields import FDOptions, MetricField, _axis_signs
from .tensor import christoffel, integrate_grid

_DEFAULT_FD = FDOptions()


@dataclass
class SurfaceEmbedding:
    """Closed parametrized 2-surface in a 3-D ambient chart."""

    param_chart: ChartDomain
    imap: object
    ambient_metric: MetricField
    orientation: str = "inner"
    jac: object = None
    hess: object = None
    position_field: object = None
    isospin_immersion_claimed: bool = True
    fd: FDOptions = field(default_factory=FDOptions)

    def __post_init__(self):
        if self.param_chart.dim != 2:
            raise ValueError("parameter domain must be 2-D")
        if self.orientation not in ("inner", "outer"):
            raise ValueError("orientation must be 'inner' or 'outer'")

    @property
    def has_polar_caps(self):
        return self.param_chart.polar_axis is not None


def _fd_jacobian(imap, params, chart, step_scale):
    cols = []
    for a in range(2):
        h = step_scale * chart.width(a)
        pp = np.array(params)
        pm = np.array(params)
        pp[..., a] += h
        pm[..., a] -= h
        cols.append((np.asarray(imap(pp)) - np.asarray(imap(pm))) / (2 * h))
    return np.stack(cols, axis=-1)


def _fd_hessian(imap, params, chart, step_scale):
    x0 = np.asarray(imap(params))
    out = np.zeros(x0.shape + (2, 2))
    hs = [step_scale * chart.width(a) for a in range(2)]
    for a in range(2):
        pp = np.array(params)
        pm = np.array(params)
        pp[..., a] += hs[a]
        pm[..., a] -= hs[a]
        out[..., a, a] = (np.asarray(imap(pp)) - 2 * x0 + np.asarray(imap(pm))) / hs[a] ** 2
    pp = np.array(params)
    pm = np.array(params)
    mp = np.array(params)
    mm = np.array(params)
    pp[..., 0] += hs[0]; pp[..., 1] += hs[1]
    pm[..., 0] += hs[0]; pm[..., 1] -= hs[1]
    mp[..., 0] -= hs[0]; mp[..., 1] += hs[1]
    mm[..., 0] -= hs[0]; mm[..., 1] -= hs[1]
    cross = (np.asarray(imap(pp)) - np.asarray(imap(pm))
             - np.asarray(imap(mp)) + np.asarray(imap(mm))) / (4 * hs[0] * hs[1])
    out[..., 0, 1] = cross
    out[..., 1, 0] = cross
    return out


class SurfaceGeometry:
    """Geometry bundle sampled on the full parameter grid."""

    def __init__(self, surface: SurfaceEmbedding, mode="exact"):
        if mode not in ("exact", "grid"):
            raise ValueError("mode must be 'exact' or 'grid'")
        self.surface = surface
        self.mode = mode
        self.param_chart = surface.param_chart
        self.params = surface.param_chart.grid_points()
        self.points = np.asarray(surface.imap(self.params), dtype=float)
        self._ambient_signs = _axis_signs(surface.ambient_metric.chart)
        self._build()

    # -- masks ---------------------------------------------------------------

    @property
    def cap_mask(self):
        """True on samples excluded from sup/inf scans (polar caps)."""
        chart = self.param_chart
        mask = np.zeros(chart.resolution, dtype=bool)
        pa = chart.polar_axis
        if pa is not None:
            h = chart.spacing(pa)
            t = chart.axis_coords(pa)
            lo, hi = chart.bounds[pa]
            band = (t < lo + 2 * h) | (t > hi - 2 * h)
            shape = [1, 1]
            shape[pa] = len(t)
            mask |= band.reshape(shape)
        return mask

    def masked(self, values):
        return np.ma.masked_array(values, mask=self.cap_mask)

    # -- construction ---------------------------------------------------------

    def _build(self):
        s = self.surface
        chart = self.param_chart
        if self.mode == "exact":
            if s.jac is not None:
                E = np.asarray(s.jac(self.params), dtype=float)
            else:
                E = _fd_jacobian(s.imap, self.params, chart, s.fd.step_scale)
        else:
            cols = [np.stack([grid_partial(self.points[..., i], chart, a, parity=self._ambient_signs[i])
                              for i in range(3)], axis=-1) for a in range(2)]
            E = np.stack(cols, axis=-1)
        self.tangents = E
        g = s.ambient_metric.matrix(self.points)
        self.ambient_g = g
        q = np.einsum("...ia,...ij,...jb->...ab", E, g, E)
        self.induced = q
        det = q[..., 0, 0] * q[..., 1, 1] - q[..., 0, 1] * q[..., 1, 0]
        if np.any(det <= 0) or np.any(q[..., 0, 0] <= 0):
            raise DegenerateImmersion("induced metric not positive definite at a sample")
        self.sqrt_det_q = np.sqrt(det)
        self.induced_inv = np.linalg.inv(q)

        # conormal by the coordinate cross product, raised and normalized
        e1, e2 = E[..., 0], E[..., 1]
        w = np.cross(e1, e2)
        nu_raw = np.einsum("...ij,...j->...i", np.linalg.inv(g), w)
        nrm2 = np.einsum("...i,...i->...", w, nu_raw)
        if np.any(nrm2 <= 0):
            raise DegenerateImmersion("vanishing normal (immersion degenerate)")
        nu = nu_raw / np.sqrt(nrm2)[..., None]
        nu = self._orient(nu)
        self.normal = nu

        gamma = christoffel(s.ambient_metric, self.points)
        if self.mode == "exact":
            if s.hess is not None:
                hess = np.asarray(s.hess(self.params), dtype=float)
            else:
                hess = _fd_hessian(s.imap, self.params, chart, s.fd.second_step_scale)
            sec = hess + np.einsum("...jkl,...ka,...lb->...jab", gamma, E, E)
            A_ab = np.einsum("...i,...ij,...jab->...ab", nu, g, sec)
        else:
            dnu = np.stack(
                [np.stack([grid_partial(nu[..., i], chart, a, parity=self._ambient_signs[i])
                           for i in range(3)], axis=-1) for a in range(2)], axis=-1)
            # dnu[..., j, a] = d nu^j / d xi^a
            covd = dnu + np.einsum("...jik,...ia,...k->...ja", gamma, E, nu)
            A_ab = -np.einsum("...ja,...jl,...lb->...ab", covd, g, E)
        self.second_fundamental = A_ab
        self.shape_operator = np.einsum("...ac,...cb->...ab", self.induced_inv, A_ab)
        self.mean_curvature = np.einsum("...ab,...ab->...", self.induced_inv, A_ab)

    def _orient(self, nu):
        s = self.surface
        if s.position_field is not None:
            P = np.asarray(s.position_field(self.points), dtype=float)
        else:
            P = self.points
        flux_density = np.einsum("...ij,...i,...j->...", self.ambient_g, nu, P)
        flux = integrate_grid(flux_density * self.sqrt_det_q, self.param_chart)
        scale = integrate_grid(np.abs(flux_density) * self.sqrt_det_q, self.param_chart)
        if abs(flux) < 1e-10 * max(scale, 1e-300):
            raise OrientationUnresolved("flux test inconclusive for declared orientation")
        outward = flux > 0
        want_outer = s.orientation == "outer"
        if outward != want_outer:
            nu = -nu
        return nu

    # -- derived fields --------------------------------------------------------

    def area(self):
        return integrate_grid(self.sqrt_det_q, self.param_chart)

    def integrate(self, values):
        """Surface integral of sampled values against the induced area element."""
        return integrate_grid(np.asarray(values) * self.sqrt_det_q, self.param_chart)

    def induced_metric_field(self):
        return MetricField(self.param_chart, grid=self.induced)


def induced_metric(surface: SurfaceEmbedding, mode="exact"):
    """Pullback metric of the immersion as a 2-D grid MetricField."""
    return SurfaceGeometry(surface, mode=mode).induced_metric_field()


def trace_sigma_K(geom: SurfaceGeometry, K, tangential=False):
    """Trace of K over the surface: Tr(K) - K(nu, nu).

    With ``tangential=True`` contracts K against an induced-metric orthonormal
    completion instead (independent cross-check route).
    """
    Kv = K.values(geom.points)
    if tangential:
        E = geom.tangents
        return np.einsum("...ab,...ia,...jb,...ij->...", geom.induced_inv, E, E, Kv)
    ginv = np.linalg.inv(geom.ambient_g)
    trk = np.einsum("...ij,...ij->...", ginv, Kv)
    knn = np.einsum("...ij,...i,...j->...", Kv, geom.normal, geom.normal)
    return trk - knn


@dataclass
class NullExpansionField:
    """Pointwise null expansions theta_pm = tr_K +/- H and |H_vec|^2."""

    theta_plus: np.ndarray
    theta_minus: np.ndarray
    mean_curvature_H: np.ndarray
    trace_sigma_K: np.ndarray
    norm_H_sq: np.ndarray
    cap_mask: np.ndarray


def null_expansions(H, trK, cap_mask=None):
    H = np.asarray(H, dtype=float)
    trK = np.broadcast_to(np.asarray(trK, dtype=float), H.shape)
    if cap_mask is None:
        cap_mask = np.zeros(H.shape, dtype=bool)
    return NullExpansionField(
        theta_plus=trK + H,
        theta_minus=trK - H,
        mean_curvature_H=H,
        trace_sigma_K=trK,
        norm_H_sq=H ** 2 - trK ** 2,
        cap_mask=cap_mask,
    )


def classify(nef: NullExpansionField, tol=None):
    """Causal classification of the mean-curvature vector field.

    Returns (label, counts): per-point labels are ``trapped`` (both expansions
    negative), ``marginal`` (one vanishes within tol), ``untrapped`` (opposite
    signs) or ``past_trapped`` (both positive); the global label is the common
    per-point label, else ``mixed``.  Polar-cap samples are excluded.
    """
    tp = nef.theta_plus
    tm = nef.theta_minus
    if tol is None:
        scale = float(max(np.max(np.abs(tp)), np.max(np.abs(tm)), 1e-300))
        tol = max(1e-12, 1e-9 * scale)
    keep = ~nef.cap_mask
    tp = tp[keep]
    tm = tm[keep]
    marginal = (np.abs(tp) <= tol) | (np.abs(tm) <= tol)
    trapped = (tp < -tol) & (tm < -tol)
    past = (tp > tol) & (tm > tol)
    untrapped = (tp * tm < 0) & ~marginal
    counts = {
        "trapped": int(np.count_nonzero(trapped & ~marginal)),
        "marginally_trapped": int(np.count_nonzero(marginal)),
        "untrapped": int(np.count_nonzero(untrapped)),
        "past_trapped": int(np.count_nonzero(past & ~marginal)),
    }
    total = tp.size
    for label in ("trapped", "marginally_trapped", "untrapped", "past_trapped"):
        if counts[label] == total:
            return label, counts
    return "mixed", counts


def dichotomy_check(H, tol=None, cap_mask=None):
    """Mean-convex / mean-concave dichotomy of an untrapped boundary."""
    H = np.asarray(H, dtype=float)
    if cap_mask is not None:
        H = H[~cap_mask]
    if tol is None:
        tol = max(1e-12, 1e-9 * float(np.max(np.abs(H))))
    if np.all(H > tol):
        return "mean_convex"
    if np.all(H < -tol):
        return "mean_concave"
    return "violation"


@dataclass
class EuclideanImmersion:
    """Comparison immersion of the same parameter domain into flat 3-space."""

    imap: object
    jac: object = None
    hess: object = None

    def chart_for_image(self, params):
        pts = np.asarray(self.imap(params))
        lo = pts.reshape(-1, 3).min(axis=0)
        hi = pts.reshape(-1, 3).max(axis=0)
        pad = 0.5 * (hi - lo).max() + 1.0
        return ChartDomain(bounds=[(float(l - pad), float(h + pad)) for l, h in zip(lo, hi)],
                           resolution=[3, 3, 3])


def comparison_H0(surface: SurfaceEmbedding, immersion: EuclideanImmersion, mode="exact"):
    """Mean curvature H0 of the comparison immersion plus isometry defect.

    H0 is computed with the same inner-normal convention.  The defect is the
    sup over unmasked samples of the induced-metric mismatch, reported (never
    enforced): scenarios may deliberately pass near-isometric immersions.
    """
    geo = SurfaceGeometry(surface, mode=mode)
    params = geo.params
    flat_chart = immersion.chart_for_image(params)
    dim3 = np.eye(3)
    flat = MetricField(flat_chart, fn=lambda p: np.broadcast_to(dim3, p.shape[:-1] + (3, 3)).copy())
    s0 = SurfaceEmbedding(
        param_chart=surface.param_chart,
        imap=immersion.imap,
        ambient_metric=flat,
        orientation=surface.orientation,
        jac=immersion.jac,
        hess=immersion.hess,
        fd=surface.fd,
    )
    geo0 = SurfaceGeometry(s0, mode=mode)
    diff = np.abs(geo0.induced - geo.induced).max(axis=(-1, -2))
    keep = ~geo.cap_mask
    scale = float(np.max(np.abs(geo.induced)))
    defect = float(np.max(diff[keep]) / max(scale, 1e-300))
    return geo0.mean_curvature, defect, geo0


def surface_report(name, geo: SurfaceGeometry, nef: NullExpansionField,
                   isometry_defect=None, tol=None):
    """JSON-serializable per-surface report."""
    keep = ~nef.cap_mask
    label, counts = classify(nef, tol=tol)
    H = nef.mean_curvature_H[keep]
    trk = nef.trace_sigma_K[keep]
    normsq = nef.norm_H_sq[keep]
    dich = None
    if label == "untrapped":
        dich = dichotomy_check(nef.mean_curvature_H, tol=tol, cap_mask=nef.cap_mask)
    rep = {
        "name": name,
        "area": geo.area(),
        "H_min": float(H.min()),
        "H_max": float(H.max()),
        "trK_min": float(trk.min()),
        "trK_max": float(trk.max()),
        "theta_plus_min": float(nef.theta_plus[keep].min()),
        "theta_plus_max": float(nef.theta_plus[keep].max()),
        "theta_minus_min": float(nef.theta_minus[keep].min()),
        "theta_minus_max": float(nef.theta_minus[keep].max()),
        "norm_H_sq_min": float(normsq.min()),
        "norm_H_sq_max": float(normsq.max()),
        "classification": label,
        "point_counts": counts,
        "dichotomy": dich,
        "isometry_defect": isometry_defect,
        "isospin_immersion_claimed": geo.surface.isospin_immersion_claimed,
    }
    return rep


def report_to_json(report):
    return json.dumps(report, sort_keys=True, indent=2)
