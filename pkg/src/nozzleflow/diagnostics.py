"""Physical-field recovery and theorem-level numerical checks.

Velocity and vorticity from the stream function, per-column flux
conservation, far-field relaxation toward the shear profiles, the
normalized-energy law zeta(N), and the strip Liouville check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ValidationError
from .minimizer import DiscreteField, discrete_energy, mapped_laplacian
from .profile1d import FlowConstants, build_shear_profile, f_of_psi


@dataclass
class VelocityField:
    u1: np.ndarray             # (ns, nx) horizontal velocity d(psi)/dx2
    u2: np.ndarray             # (ns, nx) vertical velocity -d(psi)/dx1
    vorticity: np.ndarray      # (ns, nx) mapped Laplacian of psi
    wet_mask: np.ndarray
    vorticity_residual_max: float   # max |omega - f(psi)| over the wet set
    stagnation_speed_max: float     # max |u| over the coincidence mask


def velocity_field(fieldobj: DiscreteField, eps_fb=None) -> VelocityField:
    """Recover (u1, u2) = (d(psi)/dx2, -d(psi)/dx1) and the vorticity."""
    grid = fieldobj.grid
    consts = fieldobj.consts
    Q = consts.Q
    if eps_fb is None:
        eps_fb = 1e-6 * Q
    psix, psiy = grid.physical_gradient(fieldobj.values)
    u1 = psiy
    u2 = -psix
    vort = mapped_laplacian(fieldobj)
    v = fieldobj.values
    wet = (v > eps_fb) & (v < Q - eps_fb)
    interior = np.zeros_like(wet)
    interior[2:-2, 2:-2] = True
    wet &= interior
    resid = float(np.max(np.abs(
        vort[wet] - f_of_psi(np.clip(v[wet], 0.0, Q), consts)), initial=0.0))
    # stagnation mask eroded by one node so difference stencils stay inside
    # the coincidence set; otherwise the wet side leaks O(h) velocities in
    stag = (v <= eps_fb)
    er = stag.copy()
    er[1:, :] &= stag[:-1, :]
    er[:-1, :] &= stag[1:, :]
    er[:, 1:] &= stag[:, :-1]
    er[:, :-1] &= stag[:, 1:]
    er[:2, :] = False  # wall-adjacent rows see the wall shear, not dead water
    speed = np.hypot(u1, u2)
    stag_speed = float(np.max(speed[er], initial=0.0))
    return VelocityField(u1=u1, u2=u2, vorticity=vort, wet_mask=wet,
                         vorticity_residual_max=resid,
                         stagnation_speed_max=stag_speed)


def flux_per_column(fieldobj: DiscreteField, vel: VelocityField) -> np.ndarray:
    """Quadrature of u1 over each vertical section; should equal Q.

    Uses Simpson weights: the trapezoid rule applied to central differences
    telescopes to Q identically and would hide discretization error.
    """
    from scipy.integrate import simpson
    grid = fieldobj.grid
    return simpson(vel.u1, x=grid.x2, axis=0)


def strip_liouville_check(fieldobj: DiscreteField) -> float:
    """Max over rows of the x1-variation of psi; requires straight geometry."""
    if fieldobj.grid.geom.name != "straight":
        raise ValidationError("Liouville check applies to the straight preset only")
    v = fieldobj.values
    return float(np.max(v.max(axis=1) - v.min(axis=1)))


@dataclass
class FarFieldReport:
    N_values: np.ndarray
    zeta: np.ndarray                 # normalized energies E_N - N*(J1 + J_{b-a})
    left_deviation: np.ndarray       # per-solve sup-norm deviation, left columns
    right_deviation: np.ndarray
    deviation_profiles: list         # per solve: (x1, per-column sup deviation)
    zeta_nonincreasing: bool
    zeta_tolerance: float


def energy_tolerance(fields) -> float:
    """Quadrature-error scale for comparing energies across an N-sweep."""
    scale = 0.0
    for f in fields:
        g = f.grid
        e = abs(discrete_energy(f))
        scale = max(scale, (g.dx**2 + g.ds**2) * max(e, 1.0))
    return scale


def far_field_report(fields, consts: FlowConstants, geom,
                     edge_margin=2) -> FarFieldReport:
    """Deviation from the asymptotic shear profiles and the zeta(N) law.

    Expects solves on the same geometry at increasing truncations N.  The
    lateral-most `edge_margin` columns are excluded from deviations, which
    otherwise only reflect the clamped boundary data.
    """
    if len(fields) < 2:
        raise ValidationError("need at least two solves for an N-sweep")
    for f in fields:
        if f.grid.geom is not geom and f.grid.geom.name != geom.name:
            raise ValidationError("solves come from different geometries")
    Ns = np.array([f.grid.N for f in fields])
    if np.any(np.diff(Ns) <= 0):
        raise ValidationError("truncations must be strictly increasing")
    d_right = geom.b - geom.a
    J1 = build_shear_profile(1.0, consts).energy
    Jba = build_shear_profile(d_right, consts).energy if d_right < 1.0 else J1

    zeta = []
    left_dev, right_dev, profiles = [], [], []
    for f in fields:
        grid = f.grid
        E = discrete_energy(f)
        zeta.append(E - grid.N * (J1 + Jba))
        target = np.empty_like(f.values)
        nl = grid.x1 <= 0.0
        phi_left = consts.Q * (3.0 * grid.x2**2 - 2.0 * grid.x2**3)
        phi_left = np.clip(phi_left, 0.0, consts.Q)
        if d_right == 1.0:
            phi_right = phi_left
        else:
            prof = build_shear_profile(d_right, consts, n_nodes=257)
            itp = prof.interpolator()
            phi_right = np.empty_like(f.values)
            for i in range(grid.nx):
                y = np.clip(grid.x2[:, i] - geom.a, 0.0, d_right)
                phi_right[:, i] = itp(y)
        target[:, nl] = phi_left[:, nl]
        target[:, ~nl] = (phi_right if d_right < 1.0 else phi_left)[:, ~nl]
        dev = np.max(np.abs(f.values - target), axis=0)
        profiles.append((grid.x1.copy(), dev))
        m = edge_margin
        left_dev.append(float(dev[m]))
        right_dev.append(float(dev[-1 - m]))
    zeta = np.asarray(zeta)
    tol_E = energy_tolerance(fields)
    noninc = bool(np.all(np.diff(zeta) <= tol_E))
    return FarFieldReport(N_values=Ns, zeta=zeta,
                          left_deviation=np.asarray(left_dev),
                          right_deviation=np.asarray(right_dev),
                          deviation_profiles=profiles,
                          zeta_nonincreasing=noninc,
                          zeta_tolerance=tol_E)
