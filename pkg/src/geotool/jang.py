"""Damped-Newton solver for the graph deformation equation on a 3-D domain.

The unknown u lives on the full structured grid of a box or spherical-shell
chart with Dirichlet data u = 0 on the boundary surface; a spherical shell
additionally carries a symmetry (zero radial slope) condition at the small
excision radius, which is exact for the reflection-symmetric scenarios this
domain type is meant for.  The discrete residual is the second-order stencil
transcription of

    (g^ij - w^i w^j / W) ( (d_i d_j u - Gamma^k_ij d_k u) / sqrt(W) - K_ij )

with w^i = g^ij d_j u and W = 1 + |grad u|^2, and the Newton matrix is the
exact hand-derived Jacobian of that stencil.  Continuation scales K from 0 to
1 so every Newton stage starts close to its solution.

The converged solution is packaged with the deformed metric g + du du, the
graph tilt factor f = 1/sqrt(W), the tangential part of the dual of
-K(., graph normal), and the combined drift field X used by the scalar
curvature condition and the boundary comparison function F.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chart import ChartDomain, grid_partial
from .errors import (BlowUpSuspected, NewtonDiverged, NotConverged,
                     SingularJacobian)
from .fields import MetricField, _axis_signs
from .initial_data import InitialDataSet, energy_density, momentum_norm
from .surface import SurfaceGeometry, trace_sigma_K
from .tensor import christoffel


def jang_residual(ids: InitialDataSet, u_field, points):
    """Pointwise residual of the graph equation for an analytic trial u."""
    g = ids.metric
    ginv = np.linalg.inv(g.matrix(points))
    du = u_field.partial(points)
    d2u = u_field.second_partial(points)
    gam = christoffel(g, points)
    hess = d2u - np.einsum("...kij,...k->...ij", gam, du)
    w = np.einsum("...ij,...j->...i", ginv, du)
    W = 1.0 + np.einsum("...i,...i->...", w, du)
    P = ginv - w[..., :, None] * w[..., None, :] / W[..., None, None]
    K = ids.extrinsic.values(points)
    return np.einsum("...ij,...ij->...", P, hess / np.sqrt(W)[..., None, None] - K)


@dataclass
class JangOptions:
    max_newton: int = 30
    tol: float = 1e-8
    continuation_steps: int = 4
    damping: bool = True
    damping_floor: float = 2.0 ** -20
    grad_cap: float = 1e6
    direct_threshold: int = 6000
    linear_rtol: float = 1e-9


@dataclass
class JangSolution:
    chart: ChartDomain
    data: InitialDataSet
    u: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    tolerance: float
    gradient: np.ndarray = None          # w^i = g^ij d_j u at nodes
    tilt: np.ndarray = None              # f = 1/sqrt(1 + |grad u|^2)
    deformed: MetricField = None
    omega: np.ndarray = None
    drift: np.ndarray = None             # X^i = omega^i - (deformed grad of log f)^i

    def gradient_sup(self):
        du = _nodal_gradient(self.u, self.chart)
        return float(np.max(np.abs(du)))

    # contract aliases
    @property
    def f(self):
        return self.tilt

    @property
    def gradient_u(self):
        return self.gradient

    @property
    def deformed_metric(self):
        return self.deformed

    @property
    def X(self):
        return self.drift


class _Stencil:
    """Flat neighbor-index maps consistent with the chart wrap rules."""

    def __init__(self, chart: ChartDomain):
        self.chart = chart
        self.shape = tuple(chart.resolution)
        self.size = int(np.prod(self.shape))
        base = np.arange(self.size).reshape(self.shape)
        self._maps = {}
        for axis in range(chart.dim):
            for off in (+1, -1):
                self._maps[(axis, off)] = self._build(base, axis, off)

    def _build(self, base, axis, off):
        chart = self.chart
        n = self.shape[axis]
        idx = np.arange(n) + off
        if chart.periodic[axis]:
            out = np.take(base, idx % n, axis=axis)
        elif axis == chart.polar_axis:
            out_of = (idx < 0) | (idx > n - 1)
            if chart.cell_centered[axis]:
                ridx = np.where(idx < 0, -1 - idx, np.where(idx > n - 1, 2 * n - 1 - idx, idx))
            else:
                ridx = np.where(idx < 0, -idx, np.where(idx > n - 1, 2 * (n - 1) - idx, idx))
            out = np.take(base, ridx, axis=axis)
            if np.any(out_of):
                nphi = self.shape[-1]
                rolled = np.roll(out, nphi // 2, axis=chart.dim - 1)
                sel_shape = [1] * chart.dim
                sel_shape[axis] = n
                out = np.where(out_of.reshape(sel_shape), rolled, out)
        else:
            out = np.take(base, np.clip(idx, 0, n - 1), axis=axis)
        return out.reshape(-1)

    def nbr(self, axis, off):
        return self._maps[(axis, off)]

    def nbr2(self, axis_a, off_a, axis_b, off_b):
        return self._maps[(axis_b, off_b)][self._maps[(axis_a, off_a)]]


def _nodal_gradient(u, chart):
    grids = [grid_partial(u, chart, a) for a in range(chart.dim)]
    return np.stack(grids, axis=-1)


class JangSolver:
    """Discretization and Newton loop for one data set on one domain chart."""

    def __init__(self, ids: InitialDataSet, opts: JangOptions = None):
        self.ids = ids
        self.chart = ids.chart
        self.opts = opts or JangOptions()
        chart = self.chart
        if chart.dim != 3:
            raise ValueError("domain chart must be 3-D")
        self.shell = chart.polar_axis is not None
        if self.shell and chart.resolution[-1] % 2:
            raise ValueError("shell domains need even azimuthal resolution")
        self.st = _Stencil(chart)
        self.h = np.array([chart.spacing(a) for a in range(3)])
        pts = chart.grid_points()
        self.g = ids.metric.matrix(pts)
        self.ginv = np.linalg.inv(self.g)
        self.gamma = christoffel(ids.metric, pts)
        self.K = ids.extrinsic.values(pts)
        self._ilu = None
        self._masks()

    def _masks(self):
        shape = self.st.shape
        dirichlet = np.zeros(shape, dtype=bool)
        neumann = np.zeros(shape, dtype=bool)
        if self.shell:
            dirichlet[-1, :, :] = True
            neumann[0, :, :] = True
        else:
            for axis in range(3):
                sl = [slice(None)] * 3
                sl[axis] = 0
                dirichlet[tuple(sl)] = True
                sl[axis] = -1
                dirichlet[tuple(sl)] = True
        self.dirichlet = dirichlet.reshape(-1)
        self.neumann = neumann.reshape(-1)
        self.interior = ~(self.dirichlet | self.neumann)

    # -- discrete residual ----------------------------------------------------

    def _derivatives(self, u):
        st = self.st
        h = self.h
        du = np.empty((st.size, 3))
        d2u = np.empty((st.size, 3, 3))
        up = {}
        for a in range(3):
            upa = u[st.nbr(a, +1)]
            uma = u[st.nbr(a, -1)]
            up[(a, +1)] = upa
            up[(a, -1)] = uma
            du[:, a] = (upa - uma) / (2 * h[a])
            d2u[:, a, a] = (upa - 2 * u + uma) / h[a] ** 2
        for a in range(3):
            for b in range(a + 1, 3):
                mixed = (u[st.nbr2(a, +1, b, +1)] - u[st.nbr2(a, +1, b, -1)]
                         - u[st.nbr2(a, -1, b, +1)] + u[st.nbr2(a, -1, b, -1)]) / (4 * h[a] * h[b])
                d2u[:, a, b] = mixed
                d2u[:, b, a] = mixed
        return du, d2u

    def _core(self, u, s):
        """Residual pieces at every node for continuation parameter s."""
        du, d2u = self._derivatives(u)
        g = self.g.reshape(-1, 3, 3)
        ginv = self.ginv.reshape(-1, 3, 3)
        gam = self.gamma.reshape(-1, 3, 3, 3)
        K = s * self.K.reshape(-1, 3, 3)
        w = np.einsum("nij,nj->ni", ginv, du)
        W = 1.0 + np.einsum("ni,ni->n", w, du)
        sqW = np.sqrt(W)
        B = d2u - np.einsum("nkij,nk->nij", gam, du)
        P = ginv - w[:, :, None] * w[:, None, :] / W[:, None, None]
        T = B / sqW[:, None, None] - K
        r = np.einsum("nij,nij->n", P, T)
        return {"du": du, "w": w, "W": W, "sqW": sqW, "B": B, "P": P, "T": T, "r": r}

    def residual(self, u, s):
        core = self._core(u, s)
        r = core["r"]
        r = np.where(self.dirichlet, u, r)
        if self.shell:
            r = self._apply_neumann_rows(r, u)
        return r

    def _apply_neumann_rows(self, r, u):
        shape = self.st.shape
        u3 = u.reshape(shape)
        h = self.h[0]
        row = (-3.0 * u3[0] + 4.0 * u3[1] - u3[2]) / (2 * h)
        r3 = r.reshape(shape).copy()
        r3[0] = row
        return r3.reshape(-1)

    def jacobian(self, u, s):
        st = self.st
        h = self.h
        core = self._core(u, s)
        w, W, sqW, B, P, T = (core[k] for k in ("w", "W", "sqW", "B", "P", "T"))
        ginv = self.ginv.reshape(-1, 3, 3)
        gam = self.gamma.reshape(-1, 3, 3, 3)

        PB = np.einsum("nij,nij->n", P, B)
        # dr/du_k
        c1 = (-np.einsum("nij,nkij->nk", P, gam) / sqW[:, None]
              - PB[:, None] * w / W[:, None] ** 1.5
              - 2.0 * np.einsum("nik,nj,nij->nk", ginv, w, T) / W[:, None]
              + 2.0 * w * np.einsum("ni,nj,nij->n", w, w, T)[:, None] / W[:, None] ** 2)
        # dr/du_ij (stencil-value coefficients)
        c2 = P / sqW[:, None, None]

        interior = self.interior
        rows = []
        cols = []
        vals = []
        idx = np.arange(st.size)

        center = np.zeros(st.size)
        for a in range(3):
            center += -2.0 * c2[:, a, a] / h[a] ** 2
        rows.append(idx[interior]); cols.append(idx[interior]); vals.append(center[interior])

        for a in range(3):
            for off in (+1, -1):
                coef = c2[:, a, a] / h[a] ** 2 + off * c1[:, a] / (2 * h[a])
                rows.append(idx[interior])
                cols.append(st.nbr(a, off)[interior])
                vals.append(coef[interior])
        for a in range(3):
            for b in range(a + 1, 3):
                for oa in (+1, -1):
                    for ob in (+1, -1):
                        coef = 2.0 * c2[:, a, b] * (oa * ob) / (4 * h[a] * h[b])
                        rows.append(idx[interior])
                        cols.append(st.nbr2(a, oa, b, ob)[interior])
                        vals.append(coef[interior])

        # boundary rows
        d_idx = idx[self.dirichlet]
        rows.append(d_idx); cols.append(d_idx); vals.append(np.ones(d_idx.size))
        if self.shell:
            shape = self.st.shape
            flat3 = idx.reshape(shape)
            n_idx = flat3[0].reshape(-1)
            hr = h[0]
            for layer, coef in ((0, -3.0 / (2 * hr)), (1, 4.0 / (2 * hr)), (2, -1.0 / (2 * hr))):
                rows.append(n_idx)
                cols.append(flat3[layer].reshape(-1))
                vals.append(np.full(n_idx.size, coef))

        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sp.csr_matrix((vals, (rows, cols)), shape=(st.size, st.size))

    # -- linear solve and Newton loop -----------------------------------------

    def _solve_linear(self, J, rhs, fresh=False):
        # row equilibration: the polar-angle rows carry 1/sin^2 factors that
        # otherwise ruin the incomplete factorization
        rmax = np.abs(J).max(axis=1).toarray().ravel()
        rmax[rmax == 0] = 1.0
        Js = (sp.diags(1.0 / rmax) @ J).tocsc()
        rs = rhs / rmax
        if self.st.size <= self.opts.direct_threshold:
            try:
                return spla.spsolve(Js, rs)
            except RuntimeError as exc:
                raise SingularJacobian(str(exc)) from exc
        # the incomplete factorization is reused across Newton iterations as a
        # preconditioner (the Jacobian drifts slowly); refreshed on stall
        if fresh or self._ilu is None:
            self._ilu = self._factor(Js)
        M = spla.LinearOperator(J.shape, self._ilu.solve)
        sol, info = spla.lgmres(Js, rs, M=M, rtol=self.opts.linear_rtol,
                                atol=0.0, maxiter=100)
        if info != 0:
            self._ilu = self._factor(Js)
            M = spla.LinearOperator(J.shape, self._ilu.solve)
            sol, info = spla.lgmres(Js, rs, M=M, rtol=self.opts.linear_rtol,
                                    atol=0.0, maxiter=400)
        if info != 0:
            sol = self._ilu.solve(rs)
            res = np.max(np.abs(Js @ sol - rs)) / max(np.max(np.abs(rs)), 1e-300)
            if res > 1e-6:
                raise SingularJacobian(f"iterative solve stalled (info={info})")
        return sol

    def _factor(self, Js):
        try:
            return spla.spilu(Js, drop_tol=1e-4, fill_factor=10,
                              permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SingularJacobian(f"ILU factorization failed: {exc}") from exc

    def solve(self):
        opts = self.opts
        u = np.zeros(self.st.size)
        r0 = self.residual(u, 1.0)
        scale = max(1.0, float(np.max(np.abs(r0))))
        tol = opts.tol * scale
        total_iters = 0
        svals = np.linspace(1.0 / opts.continuation_steps, 1.0, opts.continuation_steps)
        for s in svals:
            u, iters = self._newton_stage(u, s, tol)
            total_iters += iters
        rn = float(np.max(np.abs(self.residual(u, 1.0))))
        sol = JangSolution(chart=self.chart, data=self.ids, u=u.reshape(self.st.shape),
                           converged=rn < tol, iterations=total_iters,
                           residual_norm=rn, tolerance=tol)
        if not sol.converged:
            raise NotConverged(f"final residual {rn:.3e} > tol {tol:.3e}")
        _attach_deformation(sol)
        return sol

    def _newton_stage(self, u, s, tol):
        opts = self.opts
        r = self.residual(u, s)
        rn = float(np.max(np.abs(r)))
        for it in range(opts.max_newton):
            if rn < tol:
                return u, it
            J = self.jacobian(u, s)
            delta = self._solve_linear(J, -r, fresh=(it == 0))
            alpha = 1.0
            while True:
                u_try = u + alpha * delta
                r_try = self.residual(u_try, s)
                rn_try = float(np.max(np.abs(r_try)))
                if rn_try <= (1.0 - 1e-4 * alpha) * rn or not opts.damping:
                    break
                alpha *= 0.5
                if alpha < opts.damping_floor:
                    raise NewtonDiverged(
                        f"line search failed at stage s={s:.3f} (residual {rn:.3e})")
            u, r, rn = u_try, r_try, rn_try
            du = _nodal_gradient(u.reshape(self.st.shape), self.chart)
            if np.max(np.abs(du)) > opts.grad_cap:
                raise BlowUpSuspected(
                    "gradient cap exceeded; possible apparent horizon in the domain")
        if rn < tol:
            return u, opts.max_newton
        raise NewtonDiverged(f"no convergence in {opts.max_newton} iterations at s={s:.3f}")


def solve_jang(ids: InitialDataSet, opts: JangOptions = None):
    return JangSolver(ids, opts).solve()


# ---------------------------------------------------------------------------
# deformed geometry and derived vector fields


def _attach_deformation(sol: JangSolution):
    chart = sol.chart
    ids = sol.data
    pts = chart.grid_points()
    g = ids.metric.matrix(pts)
    ginv = np.linalg.inv(g)
    K = ids.extrinsic.values(pts)
    du = _nodal_gradient(sol.u, chart)
    w = np.einsum("...ij,...j->...i", ginv, du)
    W = 1.0 + np.einsum("...i,...i->...", w, du)
    f = 1.0 / np.sqrt(W)
    ghat = g + du[..., :, None] * du[..., None, :]
    ghat_inv = ginv - w[..., :, None] * w[..., None, :] / W[..., None, None]
    # tangential part of the dual of -K(., graph normal), in base coordinates
    Kw = np.einsum("...ij,...j->...i", K, w)
    Kw_up = np.einsum("...ij,...j->...i", ginv, Kw)
    Kww = np.einsum("...i,...i->...", Kw, w)
    omega = -Kw_up / np.sqrt(W)[..., None] + Kww[..., None] * w / W[..., None] ** 1.5
    logf = np.log(f)
    dlogf = _nodal_gradient(logf, chart)
    X = omega - np.einsum("...ij,...j->...i", ghat_inv, dlogf)
    sol.gradient = w
    sol.tilt = f
    sol.deformed = MetricField(chart, grid=ghat)
    sol.omega = omega
    sol.drift = X


def jang_vector_field(sol: JangSolution):
    """Drift field X = omega - deformed-gradient of log f, at grid nodes."""
    if sol.drift is None:
        _attach_deformation(sol)
    return sol.drift


def _interior_mask(chart, margin=2):
    shape = tuple(chart.resolution)
    mask = np.ones(shape, dtype=bool)
    for axis in range(chart.dim):
        if chart.periodic[axis]:
            continue
        # polar rows are masked too: curvature contractions near the axis
        # carry 1/sin^2 amplified stencil error
        sl = [slice(None)] * chart.dim
        sl[axis] = slice(0, margin)
        mask[tuple(sl)] = False
        sl[axis] = slice(shape[axis] - margin, shape[axis])
        mask[tuple(sl)] = False
    return mask


def deformed_scalar_curvature(sol: JangSolution):
    """Scalar curvature of the deformed metric via the graph Gauss identity.

    For a graph in the Riemannian product (M x R, g + dt^2) with second
    fundamental form h = (covariant Hessian of u)/sqrt(W),

        R_hat = R - 2 Ric(w, w)/W + (tr_hat h)^2 - |h|^2_hat,

    where w is the raised gradient of u.  The ambient curvature terms come
    from the (exact) data metric callbacks and only the Hessian of u is a
    grid stencil, so the result avoids the amplified cancellation error of
    differentiating the deformed metric samples directly in polar charts.
    """
    from .tensor import ricci_tensor, scalar_curvature

    chart = sol.chart
    ids = sol.data
    if sol.deformed is None:
        _attach_deformation(sol)
    pts = chart.grid_points()
    R = scalar_curvature(ids.metric, pts)
    ric = ricci_tensor(ids.metric, pts)
    g = ids.metric.matrix(pts)
    ginv = np.linalg.inv(g)
    gam = christoffel(ids.metric, pts)
    u = sol.u
    du = _nodal_gradient(u, chart)
    d2u = np.empty(chart.resolution + (3, 3))
    for a in range(3):
        for b in range(a, 3):
            val = _nodal_second(u, chart, a, b)
            d2u[..., a, b] = val
            d2u[..., b, a] = val
    hess = d2u - np.einsum("...kij,...k->...ij", gam, du)
    w = sol.gradient
    W = 1.0 + np.einsum("...i,...i->...", w, du)
    h = hess / np.sqrt(W)[..., None, None]
    ghat_inv = ginv - w[..., :, None] * w[..., None, :] / W[..., None, None]
    trh = np.einsum("...ij,...ij->...", ghat_inv, h)
    hsq = np.einsum("...ik,...jl,...ij,...kl->...", ghat_inv, ghat_inv, h, h)
    ric_ww = np.einsum("...ij,...i,...j->...", ric, w, w)
    return R - 2.0 * ric_ww / W + trh ** 2 - hsq


def _nodal_second(u, chart, a, b):
    from .chart import grid_second_partial

    return grid_second_partial(u, chart, a, b)


def scalar_condition_report(sol: JangSolution, margin=2):
    """Pointwise margin of the deformed-scalar-curvature inequality.

    Checks  2 (mu - |J|) <= R_hat - 2 |X|^2_hat - 2 div_neg_hat(X)  on the
    interior of the domain (a stencil-width band near boundaries and polar
    rows is excluded).  The left side comes from the original data densities;
    the right side uses the graph Gauss identity for R_hat (see
    ``deformed_scalar_curvature``), the deformed volume element
    sqrt(det g_hat) = sqrt(det g) sqrt(W) and the drift field X.
    """
    chart = sol.chart
    ids = sol.data
    if sol.deformed is None:
        _attach_deformation(sol)
    pts = chart.grid_points()
    Rhat = deformed_scalar_curvature(sol)
    ghat = sol.deformed.values()
    X = sol.drift
    Xsq = np.einsum("...ij,...i,...j->...", ghat, X, X)
    sq = np.sqrt(np.linalg.det(ghat))
    signs = _axis_signs(chart)
    div = np.zeros(chart.resolution)
    for i in range(chart.dim):
        div += grid_partial(sq * X[..., i], chart, i, parity=signs[i])
    div_neg = -div / sq
    mu = energy_density(ids, pts)
    jn = momentum_norm(ids, pts)
    lhs = 2.0 * (mu - jn)
    rhs = Rhat - 2.0 * Xsq - 2.0 * div_neg
    mask = _interior_mask(chart, margin)
    diff = (rhs - lhs)[mask]
    k = int(np.argmin(diff))
    return {
        "min_margin": float(diff[k]),
        "min_lhs": float(lhs[mask].min()),
        "worst_point": tuple(float(c) for c in pts[mask].reshape(-1, 3)[k]),
        "rhs_min": float(rhs[mask].min()),
    }


def curvature_route_crosscheck(sol: JangSolution, band=3):
    """Sup difference between tensor-kernel curvature of the deformed grid
    metric and the graph Gauss identity, on the well-conditioned interior
    (polar rows and boundary bands excluded).  Decays at O(h^2) with an
    amplified constant near coordinate degeneracies, which is why the
    inequality report uses the Gauss route."""
    from .tensor import scalar_curvature

    chart = sol.chart
    direct = scalar_curvature(sol.deformed)
    gauss = deformed_scalar_curvature(sol)
    mask = _interior_mask(chart, band)
    if chart.polar_axis is not None:
        n = chart.resolution[chart.polar_axis]
        sl = [slice(None)] * 3
        sl[chart.polar_axis] = slice(n // 4, (3 * n) // 4 + 1)
        band_mask = np.zeros(chart.resolution, dtype=bool)
        band_mask[tuple(sl)] = True
        # also keep a geometry-fixed outer-radius band: the error constant
        # grows like 1/r^2 towards the excised center
        r = chart.axis_coords(0)
        r_keep = r >= 0.5 * (r[0] + r[-1])
        band_mask &= r_keep[:, None, None]
        mask = mask & band_mask
    return float(np.max(np.abs(direct - gauss)[mask]))


def boundary_surface(sol: JangSolution, radius=None):
    """The outer boundary of a shell domain as a coordinate-sphere embedding."""
    from .scenarios import make_surface

    chart = sol.chart
    if chart.polar_axis is None:
        raise ValueError("boundary surface extraction needs a shell domain")
    r_out = chart.bounds[0][1] if radius is None else radius
    res = [chart.resolution[1], chart.resolution[2]]
    return make_surface("coordinate_sphere", {"radius": r_out}, sol.data, res)


def boundary_function_report(sol: JangSolution, tol_scale=5.0):
    """Both evaluations of F on the boundary sphere plus inequality margins.

    Route (a) evaluates F = H_hat + g_hat(X, N_inner) directly on the deformed
    geometry (the comparison function pairs X against the unit OUTWARD normal;
    the surface module's inner convention absorbs the sign flip).  Route (b)
    uses the boundary identity F = H/f - sigma |grad u| tr_K with the sign
    sigma chosen pointwise to match route (a); both routes and the margin
    min(F - |Hvec|) are reported.
    """
    chart = sol.chart
    if sol.deformed is None:
        _attach_deformation(sol)
    surf = boundary_surface(sol)
    geo = SurfaceGeometry(surf, mode="exact")
    trk = trace_sigma_K(geo, sol.data.extrinsic)
    H = geo.mean_curvature
    norm_sq = H ** 2 - trk ** 2

    # deformed-geometry route: same immersion, ambient metric g_hat (grid mode
    # metric; radial derivatives at the boundary are one-sided stencils)
    surf_hat = SurfaceEmbeddingWithMetric(surf, sol.deformed)
    geo_hat = SurfaceGeometry(surf_hat, mode="exact")
    H_hat = geo_hat.mean_curvature

    # boundary slices of the volume fields (outer r face)
    X = sol.drift[-1]          # (ntheta, nphi, 3)
    f = sol.tilt[-1]
    du = _nodal_gradient(sol.u, chart)[-1]
    g_here = sol.data.metric.matrix(geo.points)
    grad_norm = np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...",
                                             np.linalg.inv(g_here), du, du), 0.0))
    ghat_here = sol.deformed.values()[-1]
    F_direct = H_hat + np.einsum("...ij,...i,...j->...", ghat_here, X, geo_hat.normal)

    F_plus = H / f - grad_norm * trk
    F_minus = H / f + grad_norm * trk
    pick_plus = np.abs(F_plus - F_direct) <= np.abs(F_minus - F_direct)
    F_identity = np.where(pick_plus, F_plus, F_minus)
    sigma = np.where(pick_plus, 1.0, -1.0)

    keep = ~geo.cap_mask
    norm = np.sqrt(np.maximum(norm_sq, 0.0))
    margin = (F_direct - norm)[keep]
    agreement = np.abs(F_direct - F_identity)[keep]
    return {
        "F_min": float(F_direct[keep].min()),
        "F_max": float(F_direct[keep].max()),
        "norm_H_max": float(norm[keep].max()),
        "margin_min": float(margin.min()),
        "route_agreement_max": float(agreement.max()),
        "sigma_plus_fraction": float(np.mean(sigma[keep] > 0)),
        "F_direct": F_direct,
        "F_identity": F_identity,
        "norm_H": norm,
        "cap_mask": geo.cap_mask,
    }


def SurfaceEmbeddingWithMetric(surf, metric):
    """Copy of a surface embedding with a different ambient metric."""
    from .surface import SurfaceEmbedding

    return SurfaceEmbedding(
        param_chart=surf.param_chart,
        imap=surf.imap,
        ambient_metric=metric,
        orientation=surf.orientation,
        jac=surf.jac,
        hess=surf.hess,
        position_field=surf.position_field,
        isospin_immersion_claimed=surf.isospin_immersion_claimed,
        fd=surf.fd,
    )
