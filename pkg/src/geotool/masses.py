"""Quasi-local mass functionals and the mean-curvature comparison inequalities.

All three functionals compare the slice mean curvature H of a closed surface
with the mean curvature H0 of an isometric immersion into flat 3-space,
integrated against the same area element (geometric units, G = c = 1):

    m_BY  = (1/8pi)  * integral (H0 - H)
    m_L   = (1/16pi) * integral (H0^2 - H^2) / H0
    m_HMR = (1/16pi) * integral (H0^2 - H^2) / H

and the untrapped-surface margins

    classic_margin = integral (H0 - |Hvec|)
    hmr_margin     = integral (H0^2 / |Hvec| - |Hvec|).

Near-zero denominators abort: the quotient masses are undefined on minimal
surfaces and apparent horizons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveH, NonpositiveH0, ZeroNormMeanCurvature
from .surface import NullExpansionField, SurfaceGeometry

_DENOM_REL_FLOOR = 1e-10


def _check_positive(values, scale, exc, what):
    floor = _DENOM_REL_FLOOR * max(scale, 1e-300)
    if np.any(values <= floor):
        raise exc(f"{what} not positive away from {floor:.3e} (min {values.min():.6e})")


def brown_york(H, H0, geom: SurfaceGeometry):
    """(1/8pi) integral of (H0 - H) over the surface."""
    return geom.integrate(np.asarray(H0) - np.asarray(H)) / (8 * np.pi)


def lam_mass(H, H0, geom: SurfaceGeometry):
    """(1/16pi) integral of (H0^2 - H^2)/H0; needs H0 > 0."""
    H = np.asarray(H)
    H0 = np.asarray(H0)
    _check_positive(H0, float(np.max(np.abs(H0))), NonpositiveH0, "comparison mean curvature H0")
    return geom.integrate((H0 ** 2 - H ** 2) / H0) / (16 * np.pi)


def hmr_mass(H, H0, geom: SurfaceGeometry):
    """(1/16pi) integral of (H0^2 - H^2)/H; needs H > 0 (no minimal surfaces)."""
    H = np.asarray(H)
    H0 = np.asarray(H0)
    _check_positive(H, float(np.max(np.abs(H))), NonpositiveH, "mean curvature H")
    return geom.integrate((H0 ** 2 - H ** 2) / H) / (16 * np.pi)


def liu_yau_checks(nef: NullExpansionField, H0, geom: SurfaceGeometry):
    """Margins of the comparison inequalities for an untrapped surface.

    classic_margin is the slack of integral |Hvec| <= integral H0 and
    hmr_margin the slack of integral |Hvec| <= integral H0^2/|Hvec|; the
    second follows from the first by Cauchy-Schwarz whenever both hold.
    """
    normsq = np.asarray(nef.norm_H_sq)
    H0 = np.asarray(H0)
    scale = float(np.max(np.abs(nef.mean_curvature_H))) ** 2
    if np.any(normsq <= _DENOM_REL_FLOOR * max(scale, 1e-300)):
        raise ZeroNormMeanCurvature(
            "mean curvature vector not spacelike away from tolerance "
            f"(min |Hvec|^2 = {normsq.min():.6e})")
    norm = np.sqrt(normsq)
    classic = geom.integrate(H0 - norm)
    hmr = geom.integrate(H0 ** 2 / norm - norm)
    return {"classic_margin": classic, "hmr_margin": hmr}


@dataclass(frozen=True)
class MassReport:
    m_BY: float
    m_L: float
    m_HMR: float
    liu_yau_margin: float
    hmr_margin: float
    area: float
    H_range: tuple
    H0_range: tuple

    def to_dict(self):
        return {
            "m_BY": self.m_BY,
            "m_L": self.m_L,
            "m_HMR": self.m_HMR,
            "liu_yau_margin": self.liu_yau_margin,
            "hmr_margin": self.hmr_margin,
            "inputs_summary": {
                "area": self.area,
                "H_min": self.H_range[0],
                "H_max": self.H_range[1],
                "H0_min": self.H0_range[0],
                "H0_max": self.H0_range[1],
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def mass_report(nef: NullExpansionField, H0, geom: SurfaceGeometry):
    H = np.asarray(nef.mean_curvature_H)
    H0 = np.asarray(H0)
    margins = liu_yau_checks(nef, H0, geom)
    keep = ~geom.cap_mask
    return MassReport(
        m_BY=brown_york(H, H0, geom),
        m_L=lam_mass(H, H0, geom),
        m_HMR=hmr_mass(H, H0, geom),
        liu_yau_margin=margins["classic_margin"],
        hmr_margin=margins["hmr_margin"],
        area=geom.area(),
        H_range=(float(H[keep].min()), float(H[keep].max())),
        H0_range=(float(H0[keep].min()), float(H0[keep].max())),
    )


# ---------------------------------------------------------------------------
# Schwarzschild closed forms (time-symmetric conformally flat slice)


def schwarzschild_profile(mass, r):
    """Closed-form m_HMR of the coordinate sphere S_r: M (r + M/2)/(r - M/2)."""
    r = np.asarray(r, dtype=float)
    return mass * (r + mass / 2) / (r - mass / 2)


def schwarzschild_mean_curvatures(mass, r):
    """(H, H0) of the coordinate sphere: H = u^-2 (2/r + 4 u'/u), H0 = 2/(r u^2)."""
    u = 1 + mass / (2 * r)
    up = -mass / (2 * r ** 2)
    H = u ** -2 * (2 / r + 4 * up / u)
    H0 = 2 / (r * u ** 2)
    return H, H0


def schwarzschild_brown_york(mass, r):
    """Closed-form m_BY of S_r: M u = M (1 + M/2r)."""
    return mass * (1 + mass / (2 * np.asarray(r, dtype=float)))


def sweep_rows(masses_by_radius):
    """CSV rows {r, m_BY, m_L, m_HMR, closed_form, rel_err}; fixed formatting."""
    header = "r,m_BY,m_L,m_HMR,closed_form,rel_err"
    lines = [header]
    for row in masses_by_radius:
        lines.append(",".join("%.12e" % row[k]
                              for k in ("r", "m_BY", "m_L", "m_HMR", "closed_form", "rel_err")))
    return "\n".join(lines) + "\n"
