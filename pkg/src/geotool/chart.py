"""Coordinate charts: structured grids with periodic, cell-centered and polar axes.

A chart is a box in coordinate space sampled on a tensor-product grid.  Axes
come in three flavours:

* node axes: n samples including both interval endpoints,
* periodic axes: n samples covering [lo, hi) with spacing width/n,
* cell-centered axes: n midpoint samples at lo + (k + 1/2) * width/n
  (used for polar angles so that no sample sits on a coordinate pole).

A chart may declare one ``polar_axis``: reflection through that axis boundary
maps a grid line onto the half-period-shifted line of the last (azimuthal)
axis, which must be periodic with even resolution.  Finite differences use
that wrap instead of one-sided stencils at the poles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PointOutsideChart, ResolutionTooCoarse


@dataclass(frozen=True)
class ChartDomain:
    bounds: tuple
    resolution: tuple
    periodic: tuple = None
    cell_centered: tuple = None
    polar_axis: int = None

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        resolution = tuple(int(n) for n in self.resolution)
        d = len(bounds)
        periodic = self.periodic
        if periodic is None:
            periodic = (False,) * d
        periodic = tuple(bool(p) for p in periodic)
        cell = self.cell_centered
        if cell is None:
            cell = (False,) * d
        cell = tuple(bool(c) for c in cell)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "cell_centered", cell)
        if not (len(resolution) == len(periodic) == len(cell) == d):
            raise ValueError("axis descriptor lengths disagree")
        if d not in (1, 2, 3):
            raise ValueError("charts are 1-, 2- or 3-dimensional")
        for i, n in enumerate(resolution):
            if n < 3:
                raise ResolutionTooCoarse(f"axis {i}: resolution {n} < 3")
        for i, (a, b) in enumerate(bounds):
            if not b > a:
                raise ValueError(f"axis {i}: degenerate bounds [{a}, {b}]")
        if self.polar_axis is not None:
            pa = int(self.polar_axis)
            if pa < 0 or pa >= d or pa == d - 1:
                raise ValueError("polar_axis must be an interior-angle axis")
            if not periodic[d - 1] or resolution[d - 1] % 2:
                raise ValueError("polar wrap needs an even-resolution periodic last axis")
            if periodic[pa]:
                raise ValueError("polar axis cannot be periodic")
            object.__setattr__(self, "polar_axis", pa)

    @property
    def dim(self):
        return len(self.bounds)

    def width(self, axis):
        a, b = self.bounds[axis]
        return b - a

    def spacing(self, axis):
        n = self.resolution[axis]
        w = self.width(axis)
        if self.periodic[axis] or self.cell_centered[axis]:
            return w / n
        return w / (n - 1)

    def axis_coords(self, axis):
        a, _ = self.bounds[axis]
        n = self.resolution[axis]
        h = self.spacing(axis)
        if self.periodic[axis]:
            return a + h * np.arange(n)
        if self.cell_centered[axis]:
            return a + h * (np.arange(n) + 0.5)
        return a + h * np.arange(n)

    def grid(self):
        """Meshgrid of sample coordinates, ``ij`` indexing."""
        axes = [self.axis_coords(i) for i in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def grid_points(self):
        """All samples stacked as an array of shape resolution + (dim,)."""
        return np.stack(self.grid(), axis=-1)

    def contains(self, points, margin=0.0):
        points = np.asarray(points, dtype=float)
        ok = np.ones(points.shape[:-1], dtype=bool)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            a, b = self.bounds[i]
            ok &= (points[..., i] >= a - margin) & (points[..., i] <= b + margin)
        return ok

    def require_inside(self, points, margin=0.0):
        ok = self.contains(points, margin=margin)
        if not np.all(ok):
            bad = np.asarray(points, dtype=float)[~ok]
            raise PointOutsideChart(f"{bad.shape[0]} point(s) outside chart, first: {bad.reshape(-1, self.dim)[0]}")


def _reflect_index(idx, n, cell_centered):
    """Map out-of-range indices through a pole located at the axis boundary."""
    if cell_centered:
        idx = np.where(idx < 0, -1 - idx, idx)
        idx = np.where(idx > n - 1, 2 * n - 1 - idx, idx)
    else:
        idx = np.where(idx < 0, -idx, idx)
        idx = np.where(idx > n - 1, 2 * (n - 1) - idx, idx)
    return idx


def shifted(values, chart, axis, offset, parity=1):
    """Neighbor values along one grid axis with the chart's wrap rules.

    ``values`` has shape chart.resolution + component shape.  ``parity`` is
    the sign the sampled quantity picks up under the polar reflection
    (theta -> -theta, phi -> phi + pi); scalars have parity +1, components
    with a single polar-angle index have parity -1.

    Non-periodic edges without a polar wrap are clamped; callers are expected
    to overwrite those slices with one-sided formulas.
    """
    values = np.asarray(values)
    n = chart.resolution[axis]
    idx = np.arange(n) + offset
    if chart.periodic[axis]:
        taken = np.take(values, idx % n, axis=axis)
        return taken
    if axis == chart.polar_axis:
        out_lo = idx < 0
        out_hi = idx > n - 1
        ridx = _reflect_index(idx, n, chart.cell_centered[axis])
        taken = np.take(values, ridx, axis=axis)
        if np.any(out_lo | out_hi):
            nphi = chart.resolution[-1]
            extra = values.ndim - chart.dim
            phi_axis = chart.dim - 1
            rolled = np.roll(taken, nphi // 2, axis=phi_axis)
            sel = out_lo | out_hi
            shape = [1] * taken.ndim
            shape[axis] = n
            sel = sel.reshape(shape)
            taken = np.where(sel, parity * rolled, taken)
        return taken
    cidx = np.clip(idx, 0, n - 1)
    return np.take(values, cidx, axis=axis)


def _edge_slices(values, axis, lo):
    sl = [slice(None)] * values.ndim
    out = []
    for k in range(4):
        s = list(sl)
        s[axis] = k if lo else -1 - k
        out.append(tuple(s))
    return out


def grid_partial(values, chart, axis, parity=1):
    """Second-order partial derivative of a grid-sampled array along one axis.

    Central differences in the interior and across periodic/polar wraps,
    one-sided three-point stencils at plain non-periodic edges.
    """
    values = np.asarray(values, dtype=float) if np.isrealobj(values) else np.asarray(values)
    h = chart.spacing(axis)
    plus = shifted(values, chart, axis, +1, parity)
    minus = shifted(values, chart, axis, -1, parity)
    out = (plus - minus) / (2.0 * h)
    if not chart.periodic[axis] and axis != chart.polar_axis:
        s0, s1, s2, _ = _edge_slices(values, axis, lo=True)
        out[s0] = (-3.0 * values[s0] + 4.0 * values[s1] - values[s2]) / (2.0 * h)
        e0, e1, e2, _ = _edge_slices(values, axis, lo=False)
        out[e0] = (3.0 * values[e0] - 4.0 * values[e1] + values[e2]) / (2.0 * h)
    return out


def grid_second_partial(values, chart, axis_a, axis_b, parity=1, parity_a=None):
    """Second derivative of a grid array; direct stencils, one-sided at edges.

    ``parity`` is the parity of ``values`` itself; ``parity_a`` optionally
    overrides the parity of the intermediate d/d(axis_a) array (it flips when
    axis_a is the polar axis).
    """
    values = np.asarray(values)
    if axis_a == axis_b:
        h = chart.spacing(axis_a)
        plus = shifted(values, chart, axis_a, +1, parity)
        minus = shifted(values, chart, axis_a, -1, parity)
        out = (plus - 2.0 * values + minus) / (h * h)
        if not chart.periodic[axis_a] and axis_a != chart.polar_axis:
            s0, s1, s2, s3 = _edge_slices(values, axis_a, lo=True)
            out[s0] = (2.0 * values[s0] - 5.0 * values[s1] + 4.0 * values[s2] - values[s3]) / (h * h)
            e0, e1, e2, e3 = _edge_slices(values, axis_a, lo=False)
            out[e0] = (2.0 * values[e0] - 5.0 * values[e1] + 4.0 * values[e2] - values[e3]) / (h * h)
        return out
    da = grid_partial(values, chart, axis_a, parity)
    if parity_a is None:
        parity_a = -parity if axis_a == chart.polar_axis else parity
    return grid_partial(da, chart, axis_b, parity_a)
