"""Chart-level differential geometry: connection, curvature, divergence, quadrature.

The divergence exported here is the negative-divergence convention
``div_neg(X) = -(1/sqrt(det g)) d_i(sqrt(det g) X^i)``, i.e. minus the usual
metric divergence; it is the only divergence in the toolkit, so the momentum
density J = -div_neg-of-(K - Tr(K) g) comes out with the standard sign.
"""

from __future__ import annotations

import numpy as np

from .errors import ResolutionTooCoarse


def christoffel(g, points=None):
    """Levi-Civita connection coefficients Gamma^k_ij, indexed [..., k, i, j]."""
    if points is not None:
        g.chart.require_inside(points)
    gm = g.matrix(points)
    ginv = np.linalg.inv(gm)
    dg = g.partial(points)  # [..., k, i, j] = d_k g_ij
    # C_lij = d_i g_lj + d_j g_li - d_l g_ij
    c = (np.einsum("...ilj->...lij", dg)
         + np.einsum("...jli->...lij", dg)
         - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, c)


def christoffel_partial(g, points=None):
    """d_m Gamma^k_ij from exact/FD metric first and second derivatives."""
    gm = g.matrix(points)
    ginv = np.linalg.inv(gm)
    dg = g.partial(points)
    d2g = g.second_partial(points)  # [..., m, k, i, j] = d_m d_k g_ij
    c = (np.einsum("...ilj->...lij", dg)
         + np.einsum("...jli->...lij", dg)
         - dg)
    dc = (np.einsum("...milj->...mlij", d2g)
          + np.einsum("...mjli->...mlij", d2g)
          - d2g)
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    return (0.5 * np.einsum("...mkl,...lij->...mkij", dginv, c)
            + 0.5 * np.einsum("...kl,...mlij->...mkij", ginv, dc))


def ricci_tensor(g, points=None):
    """Ricci tensor R_ij of the metric."""
    gam = christoffel(g, points)
    dgam = christoffel_partial(g, points)
    term1 = np.einsum("...kkij->...ij", dgam)
    term2 = np.einsum("...ikkj->...ij", dgam)
    term3 = np.einsum("...kkl,...lij->...ij", gam, gam)
    term4 = np.einsum("...kil,...lkj->...ij", gam, gam)
    return term1 - term2 + term3 - term4


def scalar_curvature(g, points=None):
    """Scalar curvature R = g^ij R_ij."""
    ric = ricci_tensor(g, points)
    ginv = np.linalg.inv(g.matrix(points))
    return np.einsum("...ij,...ij->...", ginv, ric)


def divergence_neg(X, g, points=None):
    """Negative divergence of a vector field, -(d_i X^i + Gamma^a_ai X^i)."""
    if points is not None:
        g.chart.require_inside(points)
    dX = X.partial(points)  # [..., k, i] = d_k X^i
    gam = christoffel(g, points)
    div = np.einsum("...ii->...", dX) + np.einsum("...aai,...i->...", gam, X.values(points))
    return -div


def _axis_weights(chart, axis):
    n = chart.resolution[axis]
    h = chart.spacing(axis)
    w = np.full(n, h)
    if not chart.periodic[axis] and not chart.cell_centered[axis]:
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


def _endpoint_correction_1d(f, h, cell_centered):
    """Euler-Maclaurin h^2 endpoint correction for one non-periodic axis."""
    if len(f) < 3:
        raise ResolutionTooCoarse("need at least 3 samples per axis")
    if cell_centered:
        da = (-2.0 * f[0] + 3.0 * f[1] - f[2]) / h
        db = (2.0 * f[-1] - 3.0 * f[-2] + f[-3]) / h
        return h * h / 24.0 * (db - da)
    da = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    db = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return -h * h / 12.0 * (db - da)


def integrate_grid(values, chart, corrected=True):
    """Composite quadrature of grid samples over the chart.

    Trapezoid on node axes, midpoint on cell-centered axes, rectangle rule on
    periodic axes, with Euler-Maclaurin endpoint corrections on non-periodic
    axes (order ~4 on smooth integrands).  Quadrature is applied one axis at a
    time from the last axis inward, which keeps the summation order fixed.
    """
    acc = np.asarray(values, dtype=float)
    if acc.shape != tuple(chart.resolution):
        raise ValueError(f"values shape {acc.shape} != chart resolution {chart.resolution}")
    for axis in range(chart.dim - 1, -1, -1):
        h = chart.spacing(axis)
        w = _axis_weights(chart, axis)
        base = np.tensordot(acc, w, axes=([axis], [0]))
        if corrected and not chart.periodic[axis]:
            corr = np.apply_along_axis(
                _endpoint_correction_1d, axis, acc, h, chart.cell_centered[axis])
            corr = corr.reshape(base.shape)
            base = base + corr
        acc = base
    return float(acc)


def integrate_volume(values, g, chart, corrected=True):
    """Integral of a sampled scalar against the metric volume element."""
    w = g.sqrt_det()
    return integrate_grid(np.asarray(values) * w, chart, corrected=corrected)


def metric_compatibility_residual(g, points):
    """nabla_k g_ij assembled from the computed connection; ~0 up to FD error."""
    dg = g.partial(points)
    gam = christoffel(g, points)
    gm = g.matrix(points)
    down = (np.einsum("...lki,...lj->...kij", gam, gm)
            + np.einsum("...lkj,...il->...kij", gam, gm))
    return dg - down
