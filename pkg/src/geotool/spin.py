"""Numerical spinor calculus on flat slices and surfaces of revolution.

The rank-2 complex spinor representation of flat 3-space is fixed by three
anticommuting 2x2 generators (gamma_i gamma_j + gamma_j gamma_i = -2 delta).
Surface spinor fields are given componentwise in the global Cartesian frame,
so the ambient spinor derivative along the surface is the componentwise
directional derivative, and the boundary Dirac operator of a hypersurface is

    D psi = (H/2) psi - gamma(N) sum_a gamma(e_a) grad_{e_a} psi

over an orthonormal tangent frame {e_a}, with N the inner unit normal.

Spectra of the surface Dirac operator on surfaces of revolution come from a
per-azimuthal-mode reduction to a self-adjoint first-order 1-D system,
discretized symmetrically on a staggered mesh.  Genus-0 profiles get a cosine
mesh grading towards the poles, which restores clean second-order eigenvalue
convergence there (the gauged radial solutions behave like sqrt(s) at a pole,
and the grading makes every coefficient function analytic).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .chart import grid_partial
from .errors import (ModeRangeInsufficient, NonpositiveConformalFactor,
                     ProfileDegenerate, ZeroNormMeanCurvature)
from .surface import SurfaceGeometry

_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class CliffordRep:
    """Three anticommuting generators of the flat 3-space Clifford algebra."""

    generators: tuple = field(default_factory=lambda: tuple(-1j * s for s in _SIGMA))

    def __post_init__(self):
        gens = tuple(np.asarray(g, dtype=complex) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        for i in range(3):
            for j in range(3):
                anti = gens[i] @ gens[j] + gens[j] @ gens[i]
                if not np.allclose(anti, -2.0 * (i == j) * np.eye(2), atol=1e-14):
                    raise ValueError("generators do not satisfy the Clifford relations")

    def gamma(self, v):
        """Clifford action of vectors given in the orthonormal frame.

        ``v`` has shape (..., 3); returns matrices of shape (..., 2, 2).
        """
        v = np.asarray(v)
        out = np.zeros(v.shape[:-1] + (2, 2), dtype=complex)
        for j in range(3):
            out += v[..., j, None, None] * self.generators[j]
        return out

    def projections(self, normal):
        """Boundary projections P_pm = (Id +/- i gamma(N)) / 2."""
        gn = self.gamma(normal)
        eye = np.eye(2)
        return 0.5 * (eye + 1j * gn), 0.5 * (eye - 1j * gn)


@dataclass
class SpinorField:
    """Two-component complex field sampled over a surface or chart grid.

    Components live in the global Cartesian spinor frame of the flat ambient,
    so the restriction of a parallel ambient spinor has exactly constant
    components.  ``values`` has shape grid + (2,).
    """

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[-1] != 2:
            raise ValueError("spinor fields have two complex components")

    @classmethod
    def constant(cls, psi0, grid_shape, label="parallel"):
        psi0 = np.asarray(psi0, dtype=complex)
        return cls(np.broadcast_to(psi0, tuple(grid_shape) + (2,)).copy(), label)

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=-1))

    def is_parallel(self, tol=0.0):
        ref = self.values.reshape(-1, 2)[0]
        return bool(np.max(np.abs(self.values - ref)) <= tol)


def _spinor_values(psi):
    return psi.values if isinstance(psi, SpinorField) else np.asarray(psi, dtype=complex)


def _rand_units(rng, shape):
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def clifford_identities(rep: CliffordRep, trials=100, seed=0):
    """Machine-precision checks of the algebraic spinor-bundle identities.

    Covers the anticommutation relations, the norm compatibility
    |gamma(X) psi| = |X| |psi|, the projection algebra of P_pm, the
    skew-commutation of the boundary Dirac symbol with gamma(N) and the
    intertwining relation (Dirac symbol) P_pm = P_mp (Dirac symbol).
    """
    rng = np.random.default_rng(seed)
    report = {}
    worst = 0.0
    for i in range(3):
        for j in range(3):
            anti = rep.generators[i] @ rep.generators[j] + rep.generators[j] @ rep.generators[i]
            worst = max(worst, float(np.abs(anti + 2.0 * (i == j) * np.eye(2)).max()))
    report["anticommutator"] = worst

    X = rng.standard_normal((trials, 3))
    psi = rng.standard_normal((trials, 2)) + 1j * rng.standard_normal((trials, 2))
    phi = rng.standard_normal((trials, 2)) + 1j * rng.standard_normal((trials, 2))
    gx = rep.gamma(X)
    lhs = np.einsum("...ij,...j,...ik,...k->...", np.conj(gx), np.conj(psi), gx, phi)
    rhs = np.einsum("...i,...i,...->...", np.conj(psi), phi, np.sum(X * X, axis=-1))
    report["norm_compatibility"] = float(np.abs(lhs - rhs).max())

    N = _rand_units(rng, (trials, 3))
    pp, pm = rep.projections(N)
    eye = np.eye(2)
    report["projection_sum"] = float(np.abs(pp + pm - eye).max())
    report["projection_idempotent"] = float(max(np.abs(pp @ pp - pp).max(),
                                                np.abs(pm @ pm - pm).max()))
    report["projection_orthogonal"] = float(np.abs(pp @ pm).max())

    # tangent symbol xi: random vector orthogonalized against N
    xi = rng.standard_normal((trials, 3))
    xi = xi - np.sum(xi * N, axis=-1, keepdims=True) * N
    gn = rep.gamma(N)
    sym = rep.gamma(xi) @ gn  # boundary Dirac symbol
    report["dirac_gammaN_skew"] = float(np.abs(sym @ gn + gn @ sym).max())
    report["dirac_projection_swap"] = float(max(np.abs(sym @ pp - pm @ sym).max(),
                                                np.abs(sym @ pm - pp @ sym).max()))
    report["max_defect"] = max(report.values())
    report["trials"] = trials
    return report


# ---------------------------------------------------------------------------
# extrinsic Dirac operator on surfaces in a flat Cartesian slice


def _orthonormal_frame_coeffs(q):
    """Coefficients c[a, b] with e_a = c[a, b] E_b, Gram-Schmidt on (E_1, E_2)."""
    q11 = q[..., 0, 0]
    q12 = q[..., 0, 1]
    q22 = q[..., 1, 1]
    n1 = np.sqrt(q11)
    n2 = np.sqrt(np.maximum(q22 - q12 ** 2 / q11, 0.0))
    c = np.zeros(q.shape[:-2] + (2, 2))
    c[..., 0, 0] = 1.0 / n1
    c[..., 1, 0] = -q12 / (q11 * n2)
    c[..., 1, 1] = 1.0 / n2
    return c


def extrinsic_dirac_on_surface(geo: SurfaceGeometry, psi, rep: CliffordRep = None):
    """Boundary Dirac operator applied to a sampled spinor field.

    ``geo`` must be grid-mode geometry of a surface in a flat Cartesian
    chart; ``psi`` has shape grid + (2,), components in the global Cartesian
    spinor frame.  Derivatives of psi are parameter-grid stencils, so the
    result is second-order accurate in the grid spacing.
    """
    if rep is None:
        rep = CliffordRep()
    psi = _spinor_values(psi)
    chart = geo.param_chart
    dpsi = np.stack([
        np.stack([grid_partial(psi[..., c].real, chart, a) + 1j * grid_partial(psi[..., c].imag, chart, a)
                  for c in range(2)], axis=-1)
        for a in range(2)], axis=-2)  # grid + (a, component)
    cf = _orthonormal_frame_coeffs(geo.induced)
    frame = np.einsum("...ab,...ib->...ai", cf, geo.tangents)  # e_a^i
    grad = np.einsum("...ab,...bc->...ac", cf, dpsi)           # grad_{e_a} psi
    gamma_frame = rep.gamma(frame)                             # (..., a, 2, 2)
    total = np.einsum("...aij,...aj->...i", gamma_frame, grad)
    gn = rep.gamma(geo.normal)
    return (0.5 * geo.mean_curvature[..., None] * psi
            - np.einsum("...ij,...j->...i", gn, total))


def spinor_norm_sq(psi):
    return np.sum(np.abs(_spinor_values(psi)) ** 2, axis=-1)


def hermitian_product(a, b):
    """Pointwise <a, b> with conjugation on the first slot."""
    return np.einsum("...i,...i->...", np.conj(_spinor_values(a)), _spinor_values(b))


# ---------------------------------------------------------------------------
# integrated boundary identity on flat balls


def _spinor_families(rep: CliffordRep):
    g = rep.generators

    def constant(x):
        psi0 = np.array([1.0, 0.5 + 0.5j]) / np.sqrt(1.5)
        return np.broadcast_to(psi0, x.shape[:-1] + (2,)).copy()

    def constant_d(x):
        return np.zeros(x.shape[:-1] + (3, 2), dtype=complex)

    psi1 = np.array([0.6, -0.8j])

    def clifford_linear(x):
        return np.einsum("...ij,j->...i", rep.gamma(x), psi1)

    def clifford_linear_d(x):
        out = np.zeros(x.shape[:-1] + (3, 2), dtype=complex)
        for j in range(3):
            out[..., j, :] = g[j] @ psi1
        return out

    A = np.array([[1.0, 0.3, 0.0], [0.3, -0.5, 0.2], [0.0, 0.2, 0.25]])
    base = np.array([0.2, 1.0 - 0.3j])
    e0 = np.array([1.0, 0.0], dtype=complex)

    def quadratic(x):
        q = np.einsum("...i,ij,...j->...", x, A, x)
        return base + q[..., None] * e0

    def quadratic_d(x):
        dq = 2.0 * np.einsum("ij,...j->...i", A, x)
        return dq[..., :, None] * e0

    return {
        "constant": (constant, constant_d),
        "clifford_linear": (clifford_linear, clifford_linear_d),
        "quadratic": (quadratic, quadratic_d),
    }


def reilly_identity_flat_ball(family, ball_radius, resolution, rep: CliffordRep = None):
    """Both sides of the integrated boundary identity on a flat ball.

    On a flat ball (zero scalar curvature) the boundary integral of
    <D psi, psi> - (H/2)|psi|^2 equals the volume integral of
    |grad psi|^2 - |D_bulk psi|^2.  ``family`` picks a test spinor with exact
    derivative callbacks ('constant', 'clifford_linear', 'quadratic');
    ``resolution`` sets both the ball grid and the boundary-sphere parameter
    grid, and the returned defect decays at second order.
    """
    from .scenarios import make_data, make_surface, shell_chart
    from .tensor import integrate_grid

    if rep is None:
        rep = CliffordRep()
    fams = _spinor_families(rep)
    if family not in fams:
        raise ValueError(f"unknown spinor family {family!r}; have {sorted(fams)}")
    psi_fn, dpsi_fn = fams[family]

    n = int(resolution)
    chart = shell_chart(0.0, ball_radius, [n, n, 2 * n], cell_centered_r=True)
    pts = chart.grid_points()
    r = pts[..., 0]
    th = pts[..., 1]
    ph = pts[..., 2]
    xyz = np.stack([r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph),
                    r * np.cos(th)], axis=-1)
    dpsi = dpsi_fn(xyz)
    grad_sq = np.sum(np.abs(dpsi) ** 2, axis=(-1, -2))
    dirac = np.zeros(dpsi.shape[:-2] + (2,), dtype=complex)
    for j in range(3):
        dirac += np.einsum("ij,...j->...i", rep.generators[j], dpsi[..., j, :])
    vol_integrand = grad_sq - spinor_norm_sq(dirac)
    weight = r ** 2 * np.sin(th)
    rhs = integrate_grid(vol_integrand * weight, chart)

    box_bounds = [(-1.2 * ball_radius, 1.2 * ball_radius)] * 3
    from .scenarios import box_chart
    data = make_data("flat", {}, box_chart(box_bounds, [3, 3, 3]))
    sphere = make_surface("coordinate_sphere", {"radius": ball_radius}, data, [n, 2 * n])
    geo = SurfaceGeometry(sphere, mode="grid")
    psi_b = psi_fn(geo.points)
    dpsi_b = extrinsic_dirac_on_surface(geo, psi_b, rep)
    integrand = (hermitian_product(dpsi_b, psi_b).real
                 - 0.5 * geo.mean_curvature * spinor_norm_sq(psi_b))
    lhs = geo.integrate(integrand)
    return {"lhs": lhs, "rhs": rhs, "defect": abs(lhs - rhs)}


# ---------------------------------------------------------------------------
# Dirac spectra of surfaces of revolution


def sphere_dirac_spectrum(radius, count):
    """Closed-form round-sphere spectrum: +/-(k+1)/r, multiplicity 2(k+1)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    vals = []
    k = 0
    while len(vals) < count:
        lam = (k + 1) / radius
        vals.extend([lam] * (2 * (k + 1)))
        vals.extend([-lam] * (2 * (k + 1)))
        k += 1
    vals.sort(key=lambda x: (abs(x), x))
    return np.array(vals[:count])


@dataclass
class RevolutionDiracProblem:
    """Surface of revolution ds^2 = ell(t)^2 dt^2 + rho(t)^2 dphi^2.

    ``rho``/``ell`` are callbacks on [0, t_max]; genus-0 profiles (closed_profile
    False) must have rho -> 0 at both ends with unit arclength slope (smooth
    caps).  For tori both the azimuthal spin structure (half-integer modes
    when antiperiodic) and the meridian boundary structure are options; the
    structure induced by an embedding in flat 3-space is antiperiodic in both.
    """

    rho: object
    ell: object
    t_max: float
    grid: int = 800
    closed_profile: bool = False
    phi_antiperiodic: bool = True
    profile_antiperiodic: bool = True
    mode_max: float = 4.5

    def modes(self):
        offset = 0.5 if self.phi_antiperiodic else 0.0
        if not self.closed_profile and not self.phi_antiperiodic:
            raise ProfileDegenerate("genus-0 spin structure forces half-integer modes")
        ms = []
        m = offset
        while m <= self.mode_max + 1e-12:
            ms.append(m)
            if m > 0:
                ms.append(-m)
            m += 1.0
        return ms

    def validate(self):
        t_probe = np.linspace(0, self.t_max, 33)
        if not self.closed_profile:
            t_probe = t_probe[1:-1]
        rho = np.asarray(self.rho(t_probe), dtype=float)
        ell = np.asarray(self.ell(t_probe), dtype=float)
        if np.any(rho <= 0) or np.any(ell <= 0):
            raise ProfileDegenerate("profile radius/arclength density not positive")
        if not self.closed_profile:
            eps = 1e-6 * self.t_max
            for t0, sgn in ((0.0, 1.0), (self.t_max, -1.0)):
                r_end = float(self.rho(np.array([t0 + sgn * eps]))[0])
                l_end = float(self.ell(np.array([t0 + sgn * eps]))[0])
                slope = r_end / (eps * l_end)
                if abs(r_end) > 1e-3 * self.t_max and slope < 0.5:
                    raise ProfileDegenerate("genus-0 profile does not close smoothly")


def _mode_spectrum_capped(problem, m):
    """Eigenvalues of one azimuthal mode, graded staggered discretization."""
    n = problem.grid
    h = np.pi / n
    xi_nodes = np.arange(n + 1) * h
    xi_mids = (np.arange(n) + 0.5) * h
    tmax = problem.t_max
    t_n = tmax * (1 - np.cos(xi_nodes)) / 2
    t_m = tmax * (1 - np.cos(xi_mids)) / 2
    dt_n = tmax * np.sin(xi_nodes) / 2
    dt_m = tmax * np.sin(xi_mids) / 2
    ell_n = np.asarray(problem.ell(t_n), dtype=float) * dt_n
    ell_m = np.asarray(problem.ell(t_m), dtype=float) * dt_m
    rho_n = np.asarray(problem.rho(t_n), dtype=float)
    rho_m = np.asarray(problem.rho(t_m), dtype=float)
    size = 2 * n - 1
    diag = np.empty(size)
    diag[0::2] = m / rho_m
    diag[1::2] = -m / rho_n[1:-1]
    b = np.empty(size - 1)
    b[0::2] = 1.0 / (h * np.sqrt(ell_m[:-1] * ell_n[1:-1]))
    b[1::2] = 1.0 / (h * np.sqrt(ell_n[1:-1] * ell_m[1:]))
    return eigh_tridiagonal(diag, -b, eigvals_only=True)


def _mode_spectrum_closed(problem, m):
    """Eigenvalues of one azimuthal mode on a closed (torus) profile."""
    n = problem.grid
    h = problem.t_max / n
    t_n = h * np.arange(n)
    t_m = h * (np.arange(n) + 0.5)
    ell_n = np.asarray(problem.ell(t_n), dtype=float)
    ell_m = np.asarray(problem.ell(t_m), dtype=float)
    rho_n = np.asarray(problem.rho(t_n), dtype=float)
    rho_m = np.asarray(problem.rho(t_m), dtype=float)
    sigma = -1.0 if problem.profile_antiperiodic else 1.0
    size = 2 * n
    A = np.zeros((size, size), dtype=complex)
    # ordering: w1 mids at even positions, w2 nodes at odd positions;
    # node i sits between mid i-1/2 and mid i+1/2
    for i in range(n):
        A[2 * i, 2 * i] = m / rho_m[i]
        A[2 * i + 1, 2 * i + 1] = -m / rho_n[i]
    for i in range(n):
        jn = (i + 1) % n
        phase = sigma if i + 1 == n else 1.0
        c = -1j * phase / (h * np.sqrt(ell_m[i] * ell_n[jn]))
        A[2 * i, 2 * jn + 1] += c
        A[2 * jn + 1, 2 * i] += np.conj(c)
        c2 = 1j / (h * np.sqrt(ell_m[i] * ell_n[i]))
        A[2 * i, 2 * i + 1] += c2
        A[2 * i + 1, 2 * i] += np.conj(c2)
    return np.linalg.eigvalsh(A)


def revolution_dirac_spectrum(problem: RevolutionDiracProblem, count,
                              check_mode_range=True):
    """Union over azimuthal modes of the reduced 1-D spectra, sorted by |lambda|.

    Raises ModeRangeInsufficient when the smallest |lambda| lives only at the
    edge of the mode range; widen ``mode_max`` and retry (``first_eigenvalue``
    automates that).
    """
    problem.validate()
    per_mode = _mode_spectrum_closed if problem.closed_profile else _mode_spectrum_capped
    entries = []
    for m in problem.modes():
        ev = per_mode(problem, m)
        for lam in ev:
            entries.append((abs(lam), lam, m))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    if check_mode_range and entries:
        best_modes = {abs(e[2]) for e in entries[: max(1, 2 * int(count))]
                      if e[0] <= entries[0][0] * (1 + 1e-9)}
        if best_modes and min(best_modes) >= problem.mode_max - 0.5:
            raise ModeRangeInsufficient(
                f"smallest |lambda| only at |m| = {max(best_modes)}; widen mode_max")
    lams = np.array([e[1] for e in entries[: int(count)]])
    modes = np.array([e[2] for e in entries[: int(count)]])
    return lams, modes


def first_eigenvalue(problem: RevolutionDiracProblem):
    """Smallest |lambda| with automatic mode-range widening."""
    for _ in range(4):
        try:
            lams, _ = revolution_dirac_spectrum(problem, 2)
            return float(abs(lams[0]))
        except ModeRangeInsufficient:
            problem.mode_max += 2.0
    raise ModeRangeInsufficient("mode range still insufficient after widening")


def conformal_bound_check(problem: RevolutionDiracProblem, conformal_factor):
    """Margin lambda_1(conformal metric F^2 g) - 1/2 for rotationally symmetric F.

    The conformal surface is again a surface of revolution with profile
    (F ell, F rho); F must be positive.
    """
    t_probe = np.linspace(0, problem.t_max, 65)
    F_probe = np.asarray(conformal_factor(t_probe), dtype=float)
    if np.any(F_probe <= 0):
        raise NonpositiveConformalFactor("conformal factor must be positive")
    scaled = RevolutionDiracProblem(
        rho=lambda t: np.asarray(conformal_factor(t)) * np.asarray(problem.rho(t)),
        ell=lambda t: np.asarray(conformal_factor(t)) * np.asarray(problem.ell(t)),
        t_max=problem.t_max,
        grid=problem.grid,
        closed_profile=problem.closed_profile,
        phi_antiperiodic=problem.phi_antiperiodic,
        profile_antiperiodic=problem.profile_antiperiodic,
        mode_max=problem.mode_max,
    )
    lam1 = first_eigenvalue(scaled)
    return lam1 - 0.5


# ---------------------------------------------------------------------------
# holographic boundary functional


def holographic_functional(geo: SurfaceGeometry, weight, psi, rep: CliffordRep = None):
    """Value of the boundary functional for one test spinor.

    Q(psi) = integral ( |D psi|^2 / w - (w/4) |psi|^2 ) dA with w = |Hvec|.
    """
    weight = np.asarray(weight, dtype=float)
    scale = float(np.max(np.abs(weight)))
    if np.any(weight <= 1e-10 * max(scale, 1e-300)):
        raise ZeroNormMeanCurvature("weight |Hvec| vanishes somewhere on the surface")
    psi = _spinor_values(psi)
    dpsi = extrinsic_dirac_on_surface(geo, psi, rep)
    integrand = spinor_norm_sq(dpsi) / weight - 0.25 * weight * spinor_norm_sq(psi)
    return geo.integrate(integrand)


def holographic_test_spinors(geo: SurfaceGeometry, rep: CliffordRep = None,
                             n_random=8, seed=7, max_degree=2):
    """Deterministic test family: constants, Clifford-linear, random polynomials.

    Random spinors are restrictions of ambient polynomial fields of degree
    <= max_degree (band-limited on the surface, smooth across polar caps).
    """
    if rep is None:
        rep = CliffordRep()
    pts = geo.points
    out = []
    for basis in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
        out.append(("constant", np.broadcast_to(basis, pts.shape[:-1] + (2,)).astype(complex)))
    for basis in (np.array([1.0, 0.0]), np.array([1j, 1.0]) / np.sqrt(2)):
        out.append(("clifford_linear", np.einsum("...ij,j->...i", rep.gamma(pts), basis)))
    rng = np.random.default_rng(seed)
    monomials = [np.ones(pts.shape[:-1])]
    if max_degree >= 1:
        monomials += [pts[..., i] for i in range(3)]
    if max_degree >= 2:
        monomials += [pts[..., i] * pts[..., j] for i in range(3) for j in range(i, 3)]
    scale = max(float(np.max(np.abs(pts))), 1.0)
    for k in range(n_random):
        coeff = rng.standard_normal((len(monomials), 2)) + 1j * rng.standard_normal((len(monomials), 2))
        psi = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
        for mono, cf in zip(monomials, coeff):
            psi += mono[..., None] * cf / scale
        out.append((f"random_poly_{k}", psi))
    return out


def holographic_inequality_check(geo: SurfaceGeometry, weight, spinors=None,
                                 rep: CliffordRep = None):
    """Minimum of the boundary functional over the test-spinor family."""
    if rep is None:
        rep = CliffordRep()
    if spinors is None:
        spinors = holographic_test_spinors(geo, rep)
    values = {}
    for name, psi in spinors:
        values[name] = holographic_functional(geo, weight, psi, rep)
    worst = min(values, key=lambda k: values[k])
    return {"min_value": values[worst], "worst_spinor": worst, "values": values}
