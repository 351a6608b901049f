"""Scalar, vector and symmetric-tensor fields on a chart.

Every field carries either an analytic callback (vectorized over trailing
point batches) or grid samples on the chart.  Analytic fields differentiate
by small-step central differences unless exact derivative callbacks are
supplied; grid fields differentiate with the chart's stencils and evaluate
off-node by multilinear interpolation.

Index conventions for derivative arrays: ``partial[..., k, I]`` is the
k-th coordinate derivative of component ``I``; for metrics
``partial[..., k, i, j] = d_k g_ij`` and
``second_partial[..., k, l, i, j] = d_k d_l g_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import ChartDomain, grid_partial, grid_second_partial
from .errors import SingularMetric

# Component parities under the polar reflection (theta -> -theta,
# phi -> phi + pi), indexed by coordinate: +1 except the polar angle.


def _axis_signs(chart):
    s = np.ones(chart.dim)
    if chart.polar_axis is not None:
        s[chart.polar_axis] = -1.0
    return s


@dataclass(frozen=True)
class FDOptions:
    """Steps for analytic-mode finite differences, relative to chart width."""

    step_scale: float = 1e-5
    second_step_scale: float = 3e-4


_DEFAULT_FD = FDOptions()


def _fd_steps(chart, scale):
    return np.array([scale * chart.width(i) for i in range(chart.dim)])


def _shift_points(points, axis, delta):
    shifted = np.array(points, dtype=float)
    shifted[..., axis] += delta
    return shifted


class _FieldBase:
    """Shared analytic/grid plumbing; subclasses fix the component shape."""

    comp_shape = ()

    def __init__(self, chart: ChartDomain, fn=None, grid=None, dfn=None, d2fn=None,
                 fd: FDOptions = _DEFAULT_FD):
        if (fn is None) == (grid is None):
            raise ValueError("exactly one of fn/grid must be given")
        self.chart = chart
        self.fn = fn
        self.dfn = dfn
        self.d2fn = d2fn
        self.fd = fd
        if grid is not None:
            grid = np.asarray(grid, dtype=float)
            want = tuple(chart.resolution) + self.comp_shape
            if grid.shape != want:
                raise ValueError(f"grid shape {grid.shape} != {want}")
        self.grid_values = grid
        self._cache = {}

    @property
    def analytic(self):
        return self.fn is not None

    # -- evaluation ---------------------------------------------------------

    def values(self, points=None):
        """Field values; ``points=None`` evaluates on the full chart grid."""
        if points is None:
            if self.analytic:
                key = "grid"
                if key not in self._cache:
                    self._cache[key] = np.asarray(self.fn(self.chart.grid_points()), dtype=float)
                return self._cache[key]
            return self.grid_values
        points = np.asarray(points, dtype=float)
        if self.analytic:
            return np.asarray(self.fn(points), dtype=float)
        return self._interp(self.grid_values, points)

    def partial(self, points=None):
        """All first partial derivatives, shape batch + (dim,) + comp_shape."""
        if self.analytic:
            if self.dfn is not None:
                pts = self.chart.grid_points() if points is None else np.asarray(points, dtype=float)
                return np.asarray(self.dfn(pts), dtype=float)
            pts = self.chart.grid_points() if points is None else np.asarray(points, dtype=float)
            steps = _fd_steps(self.chart, self.fd.step_scale)
            outs = []
            for k in range(self.chart.dim):
                h = steps[k]
                fp = np.asarray(self.fn(_shift_points(pts, k, +h)), dtype=float)
                fm = np.asarray(self.fn(_shift_points(pts, k, -h)), dtype=float)
                outs.append((fp - fm) / (2.0 * h))
            return np.stack(outs, axis=pts.ndim - 1)
        key = "partial"
        if key not in self._cache:
            self._cache[key] = self._grid_partials()
        grids = self._cache[key]
        if points is None:
            return grids
        return self._interp(grids, points)

    def second_partial(self, points=None):
        """All second partials, batch + (dim, dim) + comp_shape."""
        if self.analytic:
            if self.d2fn is not None:
                pts = self.chart.grid_points() if points is None else np.asarray(points, dtype=float)
                return np.asarray(self.d2fn(pts), dtype=float)
            pts = self.chart.grid_points() if points is None else np.asarray(points, dtype=float)
            steps = _fd_steps(self.chart, self.fd.second_step_scale)
            d = self.chart.dim
            f0 = np.asarray(self.fn(pts), dtype=float)
            rows = []
            for k in range(d):
                row = []
                for l in range(d):
                    if l < k:
                        row.append(rows[l][k])
                        continue
                    hk, hl = steps[k], steps[l]
                    if k == l:
                        fp = np.asarray(self.fn(_shift_points(pts, k, +hk)), dtype=float)
                        fm = np.asarray(self.fn(_shift_points(pts, k, -hk)), dtype=float)
                        row.append((fp - 2.0 * f0 + fm) / (hk * hk))
                    else:
                        fpp = np.asarray(self.fn(_shift_points(_shift_points(pts, k, +hk), l, +hl)), dtype=float)
                        fpm = np.asarray(self.fn(_shift_points(_shift_points(pts, k, +hk), l, -hl)), dtype=float)
                        fmp = np.asarray(self.fn(_shift_points(_shift_points(pts, k, -hk), l, +hl)), dtype=float)
                        fmm = np.asarray(self.fn(_shift_points(_shift_points(pts, k, -hk), l, -hl)), dtype=float)
                        row.append((fpp - fpm - fmp + fmm) / (4.0 * hk * hl))
                rows.append(row)
            pt_nd = pts.ndim - 1
            return np.stack([np.stack(r, axis=pt_nd) for r in rows], axis=pt_nd)
        key = "second_partial"
        if key not in self._cache:
            self._cache[key] = self._grid_second_partials()
        grids = self._cache[key]
        if points is None:
            return grids
        return self._interp(grids, points)

    # -- grid-mode helpers --------------------------------------------------

    def _component_parities(self):
        """Parity of each component under the polar reflection; flat array."""
        return np.ones(int(np.prod(self.comp_shape)) if self.comp_shape else 1)

    def _grid_partials(self):
        d = self.chart.dim
        vals = self.grid_values
        flat = vals.reshape(vals.shape[: d] + (-1,))
        pars = self._component_parities()
        comps = []
        for c in range(flat.shape[-1]):
            comp = flat[..., c]
            comps.append(np.stack([grid_partial(comp, self.chart, k, parity=pars[c])
                                   for k in range(d)], axis=-1))
        out = np.stack(comps, axis=-1)  # grid + (d, ncomp)
        return out.reshape(vals.shape[: d] + (d,) + self.comp_shape)

    def _grid_second_partials(self):
        d = self.chart.dim
        vals = self.grid_values
        flat = vals.reshape(vals.shape[: d] + (-1,))
        pars = self._component_parities()
        comps = []
        for c in range(flat.shape[-1]):
            comp = flat[..., c]
            block = [[grid_second_partial(comp, self.chart, k, l, parity=pars[c])
                      for l in range(d)] for k in range(d)]
            comps.append(np.stack([np.stack(r, axis=-1) for r in block], axis=-2))
        out = np.stack(comps, axis=-1)
        return out.reshape(vals.shape[: d] + (d, d) + self.comp_shape)

    def _interp(self, grids, points):
        """Multilinear interpolation of grid arrays at arbitrary points."""
        chart = self.chart
        d = chart.dim
        pts = np.asarray(points, dtype=float)
        batch = pts.shape[:-1]
        flatp = pts.reshape(-1, d)
        idx0 = []
        frac = []
        for i in range(d):
            coords = chart.axis_coords(i)
            h = chart.spacing(i)
            t = (flatp[:, i] - coords[0]) / h
            n = chart.resolution[i]
            if chart.periodic[i]:
                t = np.mod(t, n)
                i0 = np.floor(t).astype(int)
                fr = t - i0
                i0 = i0 % n
            else:
                t = np.clip(t, 0.0, n - 1.0)
                i0 = np.minimum(np.floor(t).astype(int), n - 2)
                fr = t - i0
            idx0.append(i0)
            frac.append(fr)
        comp = grids.shape[d:]
        acc = np.zeros((flatp.shape[0],) + comp)
        for corner in range(1 << d):
            w = np.ones(flatp.shape[0])
            ix = []
            for i in range(d):
                hi = (corner >> i) & 1
                n = chart.resolution[i]
                ii = idx0[i] + hi
                if chart.periodic[i]:
                    ii = ii % n
                w = w * (frac[i] if hi else (1.0 - frac[i]))
                ix.append(ii)
            acc += w.reshape((-1,) + (1,) * len(comp)) * grids[tuple(ix)]
        return acc.reshape(batch + comp)


class ScalarField(_FieldBase):
    comp_shape = ()


class VectorField(_FieldBase):
    """Contravariant components X^i."""

    comp_shape = None  # set at init

    def __init__(self, chart, **kw):
        self.comp_shape = (chart.dim,)
        super().__init__(chart, **kw)

    def _component_parities(self):
        return _axis_signs(self.chart)


class SymTensorField(_FieldBase):
    """Symmetric covariant 2-tensor K_ij."""

    comp_shape = None

    def __init__(self, chart, **kw):
        self.comp_shape = (chart.dim, chart.dim)
        super().__init__(chart, **kw)
        probe = self._probe_values()
        if not np.array_equal(probe, np.swapaxes(probe, -1, -2)):
            raise ValueError("tensor components are not exactly symmetric")

    def _probe_values(self):
        if self.analytic:
            return self.values(_probe_points(self.chart))
        return self.grid_values

    def _component_parities(self):
        s = _axis_signs(self.chart)
        return np.outer(s, s).reshape(-1)


class MetricField(SymTensorField):
    """Riemannian metric; validates positive-definiteness on a probe grid."""

    def __init__(self, chart, **kw):
        super().__init__(chart, **kw)
        probe = self._probe_values()
        try:
            np.linalg.cholesky(probe)
        except np.linalg.LinAlgError as exc:
            raise SingularMetric("metric not positive definite at a sample point") from exc

    def matrix(self, points=None):
        return self.values(points)

    def inverse(self, points=None):
        g = self.matrix(points)
        try:
            return np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise SingularMetric("metric not invertible") from exc

    def sqrt_det(self, points=None):
        g = self.matrix(points)
        det = np.linalg.det(g)
        if np.any(det <= 0):
            raise SingularMetric("non-positive metric determinant")
        return np.sqrt(det)


def _probe_points(chart, per_axis=4):
    axes = []
    for i in range(chart.dim):
        c = chart.axis_coords(i)
        take = np.linspace(0, len(c) - 1, min(per_axis, len(c))).astype(int)
        axes.append(c[take])
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, chart.dim)
