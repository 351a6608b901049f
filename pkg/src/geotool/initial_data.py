"""Initial data sets (M, g, K): constraint densities and the energy condition.

Constraint densities of a data set:

    mu  = (R - |K|^2 + Tr(K)^2) / 2
    J_j = div^i (K_ij - Tr(K) g_ij)      (one-form; equals minus the
                                          negative-divergence of K - Tr(K) g)

The dominant energy condition holds when mu >= |J| pointwise, with |J| the
metric norm of the one-form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fields import MetricField, SymTensorField
from .tensor import christoffel, scalar_curvature


@dataclass(frozen=True)
class InitialDataSet:
    """Immutable triplet (chart, g, K); derived densities are pure functions."""

    chart: object
    metric: MetricField
    extrinsic: SymTensorField
    label: str = ""

    def __post_init__(self):
        if self.metric.chart is not self.chart or self.extrinsic.chart is not self.chart:
            raise ValueError("metric and extrinsic curvature must share the chart")


def energy_density(ids: InitialDataSet, points=None):
    """mu = (R - |K|^2 + Tr(K)^2)/2; even under K -> -K."""
    g = ids.metric
    R = scalar_curvature(g, points)
    K = ids.extrinsic.values(points)
    ginv = np.linalg.inv(g.matrix(points))
    ksq = np.einsum("...ik,...jl,...ij,...kl->...", ginv, ginv, K, K)
    trk = np.einsum("...ij,...ij->...", ginv, K)
    return 0.5 * (R - ksq + trk ** 2)


def momentum_density(ids: InitialDataSet, points=None):
    """One-form J_j = grad^i K_ij - d_j Tr(K); flips sign under K -> -K."""
    g = ids.metric
    gm = g.matrix(points)
    ginv = np.linalg.inv(gm)
    K = ids.extrinsic.values(points)
    dK = ids.extrinsic.partial(points)  # [..., k, i, j]
    dg = g.partial(points)
    gam = christoffel(g, points)
    # T_ij = K_ij - Tr(K) g_ij, with Tr(K) = g^ab K_ab
    trk = np.einsum("...ab,...ab->...", ginv, K)
    dginv = -np.einsum("...ia,...kab,...bj->...kij", ginv, dg, ginv)
    dtrk = (np.einsum("...kab,...ab->...k", dginv, K)
            + np.einsum("...ab,...kab->...k", ginv, dK))
    T = K - trk[..., None, None] * gm
    dT = (dK - dtrk[..., :, None, None] * gm[..., None, :, :]
          - trk[..., None, None, None] * dg)
    # nabla_k T_ij = d_k T_ij - Gamma^l_ki T_lj - Gamma^l_kj T_il
    covT = (dT
            - np.einsum("...lki,...lj->...kij", gam, T)
            - np.einsum("...lkj,...il->...kij", gam, T))
    return np.einsum("...ik,...kij->...j", ginv, covT)


def momentum_norm(ids: InitialDataSet, points=None):
    J = momentum_density(ids, points)
    ginv = np.linalg.inv(ids.metric.matrix(points))
    return np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...", ginv, J, J), 0.0))


@dataclass(frozen=True)
class EnergyConditionReport:
    label: str
    min_margin: float
    worst_point: tuple
    passed: bool
    tolerance: float

    def to_json(self):
        return json.dumps(
            {
                "label": self.label,
                "min_margin": self.min_margin,
                "worst_point": list(self.worst_point),
                "pass": self.passed,
                "tolerance": self.tolerance,
            },
            sort_keys=True,
        )


def dominant_energy_report(ids: InitialDataSet, rel_tol=1e-8, abs_floor=1e-12):
    """Full-grid sweep of mu - |J|; passes when the margin is >= -tolerance.

    The tolerance is relative to the data scale, max(1, sup|mu|) * rel_tol,
    floored at ``abs_floor`` so vacuum slices pass with rounding noise.
    """
    pts = ids.chart.grid_points()
    mu = energy_density(ids, pts)
    jn = momentum_norm(ids, pts)
    margin = mu - jn
    flat = margin.reshape(-1)
    k = int(np.argmin(flat))
    worst = pts.reshape(-1, ids.chart.dim)[k]
    tol = max(abs_floor, rel_tol * max(1.0, float(np.max(np.abs(mu)))))
    mmin = float(flat[k])
    return EnergyConditionReport(
        label=ids.label,
        min_margin=mmin,
        worst_point=tuple(float(c) for c in worst),
        passed=bool(mmin >= -tol),
        tolerance=tol,
    )
