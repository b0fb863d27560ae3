"""Box-constrained energy minimization for the stream function.

Discretizes E(psi) = integral |grad psi|^2/2 + F(psi) over the truncated
nozzle with Q1 elements on the sigma-mapped grid (lumped F-term) and finds
the minimizer subject to 0 <= psi <= Q and Dirichlet data by projected
nonlinear Gauss-Seidel.  Node updates linearize the concave F about the
current iterate, which majorizes the energy and makes every unit-step sweep
monotonically decrease it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import CurvilinearGrid, ValidationError
from .profile1d import FlowConstants, bigF, build_shear_profile, fhat


class ConvergenceError(RuntimeError):
    """Solver hit max_iter; carries the report for inspection."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 50000
    sweep: str = "red-black"          # or "lexicographic"
    omega: float = 1.6
    check_every: int = 10             # sweeps between convergence checks

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.sweep not in ("red-black", "lexicographic"):
            raise ValidationError(f"unknown sweep ordering {self.sweep!r}")
        if not (0.0 < self.omega < 2.0):
            raise ValidationError("omega must lie in (0, 2)")


@dataclass
class SolveReport:
    iterations: int
    energy: float
    pg_norm: float
    energy_trace: np.ndarray
    converged: bool


@dataclass
class EnergySystem:
    """Assembled stiffness matrix and lumped weights for one grid."""

    grid: CurvilinearGrid
    consts: FlowConstants
    K: sp.csr_matrix
    diag: np.ndarray
    w: np.ndarray  # flattened nodal quadrature weights for the F-term


@dataclass
class DiscreteField:
    grid: CurvilinearGrid
    values: np.ndarray              # (ns, nx)
    fixed_mask: np.ndarray          # (ns, nx) bool, True on Dirichlet nodes
    fixed_values: np.ndarray        # (ns, nx), data where fixed_mask
    consts: FlowConstants
    system: Optional[EnergySystem] = field(default=None, repr=False)

    def flat(self):
        return self.values.ravel()


# Q1 reference shape-function derivatives at the 2x2 Gauss points.
_GPTS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _shape_grads(dx, ds):
    """Per-quad-point 4-vectors of d(phi)/dx1 and d(phi)/dsigma."""
    gx, gs = [], []
    for eta in _GPTS:
        for xi in _GPTS:
            dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
            det = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
            gx.append(dxi * 2.0 / dx)
            gs.append(det * 2.0 / ds)
    return np.array(gx), np.array(gs)  # (4, 4) each


def assemble_system(grid: CurvilinearGrid, consts: FlowConstants) -> EnergySystem:
    """Q1 stiffness with mapped coefficients a11=H, a12=-beta, a22=(1+beta^2)/H."""
    nx, ns = grid.nx, grid.ns
    dx, ds = grid.dx, grid.ds
    geom = grid.geom
    gx, gs = _shape_grads(dx, ds)
    detJ = 0.25 * dx * ds

    ii, jj = np.meshgrid(np.arange(nx - 1), np.arange(ns - 1), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    n_cells = ii.size
    # global node ids of the 4 corners, order (i,j),(i+1,j),(i+1,j+1),(i,j+1)
    conn = np.stack([jj * nx + ii, jj * nx + ii + 1,
                     (jj + 1) * nx + ii + 1, (jj + 1) * nx + ii], axis=1)

    Ke = np.zeros((n_cells, 4, 4))
    dh0 = geom.h0.deriv
    dh1 = geom.h1.deriv
    q = 0
    for eta in _GPTS:
        for xi in _GPTS:
            x1q = grid.x1[ii] + 0.5 * dx * (1.0 + xi)
            sq = grid.sigma[jj] + 0.5 * ds * (1.0 + eta)
            Hq = geom.heights(x1q)
            betaq = dh0(x1q) + sq * (dh1(x1q) - dh0(x1q))
            a11 = Hq
            a12 = -betaq
            a22 = (1.0 + betaq**2) / Hq
            Gx = gx[q]
            Gs = gs[q]
            M11 = np.outer(Gx, Gx)
            M12 = np.outer(Gx, Gs) + np.outer(Gs, Gx)
            M22 = np.outer(Gs, Gs)
            Ke += detJ * (a11[:, None, None] * M11[None] +
                          a12[:, None, None] * M12[None] +
                          a22[:, None, None] * M22[None])
            q += 1

    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)),
                      shape=(nx * ns, nx * ns)).tocsr()
    diag = K.diagonal()
    return EnergySystem(grid=grid, consts=consts, K=K, diag=diag,
                        w=grid.weights.ravel().copy())


def make_field(grid, bc_mask, bc_values, consts,
               init="column1d", system=None) -> DiscreteField:
    """Feasible starting field honoring the Dirichlet data.

    init: "column1d" (shear profile of the local column height), "linear"
    (Q * sigma), or "harmonic" (discrete harmonic extension of the data).
    """
    Q = consts.Q
    ns, nx = grid.ns, grid.nx
    if init == "linear":
        v = Q * np.tile(grid.sigma[:, None], (1, nx))
    elif init == "column1d":
        v = np.empty((ns, nx))
        cache = {}
        for i in range(nx):
            H = grid.H[i]
            y = grid.x2[:, i] - grid.h0v[i]
            if H > 1.0:
                x = np.clip(y - 0.5 * (H - 1.0), 0.0, 1.0)
                v[:, i] = Q * (3.0 * x**2 - 2.0 * x**3)
            else:
                key = round(H, 4)
                if key not in cache:
                    prof = build_shear_profile(min(key, 1.0), consts, n_nodes=129)
                    cache[key] = prof.interpolator()
                v[:, i] = cache[key](np.clip(y * min(key, 1.0) / H, 0.0, min(key, 1.0)))
    elif init == "harmonic":
        system = system or assemble_system(grid, consts)
        K = system.K
        free = ~bc_mask.ravel()
        vb = np.where(bc_mask, bc_values, 0.0).ravel()
        rhs = -K[free][:, ~free] @ vb[~free]
        v = vb.copy()
        v[free] = spla.spsolve(K[free][:, free].tocsc(), rhs)
        v = np.clip(v.reshape(ns, nx), 0.0, Q)
    else:
        raise ValidationError(f"unknown initialization {init!r}")
    v = np.where(bc_mask, bc_values, np.clip(v, 0.0, Q))
    return DiscreteField(grid=grid, values=v, fixed_mask=bc_mask.copy(),
                         fixed_values=bc_values.copy(), consts=consts,
                         system=system)


def _system(fieldobj: DiscreteField) -> EnergySystem:
    if fieldobj.system is None:
        fieldobj.system = assemble_system(fieldobj.grid, fieldobj.consts)
    return fieldobj.system


def discrete_energy(fieldobj: DiscreteField) -> float:
    """Quadrature of the mapped gradient energy plus the lumped F-term."""
    sysm = _system(fieldobj)
    v = fieldobj.flat()
    return float(0.5 * v @ (sysm.K @ v) +
                 sysm.w @ bigF(v, fieldobj.consts))


def energy_gradient(fieldobj: DiscreteField) -> np.ndarray:
    """Nodal gradient of the discrete energy; zero rows at Dirichlet nodes."""
    sysm = _system(fieldobj)
    v = fieldobj.flat()
    g = sysm.K @ v + sysm.w * fhat(v, fieldobj.consts)
    g[fieldobj.fixed_mask.ravel()] = 0.0
    return g.reshape(fieldobj.values.shape)


def projected_gradient_norm(fieldobj: DiscreteField) -> float:
    """Max norm of the projected gradient, in residual (Laplacian) units.

    The gradient is zeroed where the box constraint is active and pushes
    outward; entries are scaled by the nodal quadrature weight so the
    stopping threshold is resolution-independent.
    """
    sysm = _system(fieldobj)
    Q = fieldobj.consts.Q
    v = fieldobj.flat()
    g = sysm.K @ v + sysm.w * fhat(v, fieldobj.consts)
    free = ~fieldobj.fixed_mask.ravel()
    g = np.where((v <= 0.0) & (g > 0.0), 0.0, g)
    g = np.where((v >= Q) & (g < 0.0), 0.0, g)
    return float(np.max(np.abs(g[free]) / sysm.w[free], initial=0.0))


def _color_indices(grid, free_flat):
    """4-coloring of the logical grid; Q1 stiffness couples all 8 neighbors,
    so nodes of one color are mutually independent."""
    ns, nx = grid.ns, grid.nx
    jj, ii = np.meshgrid(np.arange(ns), np.arange(nx), indexing="ij")
    color = (ii % 2) + 2 * (jj % 2)
    flat = color.ravel()
    return [np.flatnonzero((flat == cidx) & free_flat) for cidx in range(4)]


def solve_minimizer(grid, bc_mask, bc_values, consts,
                    config: SolverConfig | None = None,
                    init="column1d", system=None,
                    raise_on_failure=False):
    """Minimize the discrete energy over the box constraint.

    Returns (DiscreteField, SolveReport).  When max_iter is exhausted the
    report carries converged=False (or ConvergenceError if requested).
    """
    config = config or SolverConfig()
    sysm = system or assemble_system(grid, consts)
    fieldobj = make_field(grid, bc_mask, bc_values, consts, init=init,
                          system=sysm)
    Q = consts.Q
    v = fieldobj.flat().copy()
    K, diag, w = sysm.K, sysm.diag, sysm.w
    free_flat = ~bc_mask.ravel()
    def energy_of(vec):
        return float(0.5 * vec @ (K @ vec) + w @ bigF(vec, consts))

    if config.sweep == "red-black":
        groups = _color_indices(grid, free_flat)

        def sweep(vec, omega):
            for idx in groups:
                s = K @ vec
                num = s[idx] + w[idx] * fhat(vec[idx], consts)
                vec[idx] = np.clip(vec[idx] - omega * num / diag[idx], 0.0, Q)
            return vec
    else:
        order = np.flatnonzero(free_flat)
        indptr, indices, data = K.indptr, K.indices, K.data
        acos, cos, pi = math.acos, math.cos, math.pi

        def fhat_scalar(t):
            # scalar closed form of the vorticity function; the array
            # version costs too much inside the node-by-node loop.  The
            # zero-extension is strict: at the pinned values themselves the
            # one-sided slopes +-6Q drive nodes off an active constraint
            if t < 0.0 or t > Q:
                return 0.0
            if t == 0.0:
                return 6.0 * Q
            if t == Q:
                return -6.0 * Q
            k = 0.5 + cos((2.0 * pi - acos(1.0 - 2.0 * t / Q)) / 3.0)
            return 6.0 * Q * (1.0 - 2.0 * k)

        def sweep(vec, omega):
            for i in order:
                lo, hi = indptr[i], indptr[i + 1]
                s = data[lo:hi] @ vec[indices[lo:hi]]
                num = s + w[i] * fhat_scalar(vec[i])
                vec[i] = min(max(vec[i] - omega * num / diag[i], 0.0), Q)
            return vec

    energy = energy_of(v)
    trace = [energy]
    pg = np.inf
    it = 0
    converged = False
    while it < config.max_iter:
        it += 1
        v_prev = v.copy()
        v = sweep(v, config.omega)
        new_energy = energy_of(v)
        if new_energy > energy + 1e-13 * (1.0 + abs(energy)):
            # over-relaxed step increased the energy: redo as a plain
            # majorize-minimize sweep, which cannot increase it
            v = sweep(v_prev, 1.0)
            new_energy = energy_of(v)
        energy = min(new_energy, energy)
        trace.append(energy)
        if it % config.check_every == 0 or it == config.max_iter:
            fieldobj.values = v.reshape(grid.ns, grid.nx)
            pg = projected_gradient_norm(fieldobj)
            if pg <= config.tol:
                converged = True
                break

    fieldobj.values = v.reshape(grid.ns, grid.nx)
    pg = projected_gradient_norm(fieldobj)
    report = SolveReport(iterations=it, energy=energy, pg_norm=pg,
                         energy_trace=np.asarray(trace),
                         converged=converged or pg <= config.tol)
    if raise_on_failure and not report.converged:
        raise ConvergenceError(
            f"no convergence in {config.max_iter} sweeps (pg={pg:.3e})", report)
    return fieldobj, report


def mapped_laplacian(fieldobj: DiscreteField) -> np.ndarray:
    """Physical Laplacian via two applications of the mapped gradient."""
    grid = fieldobj.grid
    ux, uy = grid.physical_gradient(fieldobj.values)
    uxx, _ = grid.physical_gradient(ux)
    _, uyy = grid.physical_gradient(uy)
    return uxx + uyy


@dataclass
class ResidualReport:
    residual: np.ndarray     # (ns, nx), NaN off the wet set
    wet_mask: np.ndarray
    max_wet: float
    l2_wet: float
    collar_grad_max: float


def el_residual(fieldobj: DiscreteField, eps_fb=None) -> ResidualReport:
    """Residual of the interior equation Delta psi = f(psi) on the wet set.

    Also reports the largest velocity magnitude on a one-cell collar around
    the coincidence set, which should vanish under refinement.
    """
    from .profile1d import f_of_psi  # local import avoids cycle at module load
    consts = fieldobj.consts
    Q = consts.Q
    grid = fieldobj.grid
    v = fieldobj.values
    if eps_fb is None:
        eps_fb = 1e-6 * Q
    lap = mapped_laplacian(fieldobj)
    wet = (v > eps_fb) & (v < Q - eps_fb)
    interior = np.zeros_like(wet)
    interior[2:-2, 2:-2] = True  # double-stencil needs a 2-node margin
    wet &= interior
    res = np.full_like(v, np.nan)
    res[wet] = lap[wet] - f_of_psi(np.clip(v[wet], 0.0, Q), consts)
    wsum = grid.weights[wet].sum()
    l2 = float(np.sqrt(np.sum(grid.weights[wet] * res[wet] ** 2) / wsum)) if wsum > 0 else 0.0
    mx = float(np.max(np.abs(res[wet]), initial=0.0))

    coincidence = (v <= eps_fb) | (v >= Q - eps_fb)
    near = np.zeros_like(coincidence)
    near[1:, :] |= coincidence[:-1, :]
    near[:-1, :] |= coincidence[1:, :]
    near[:, 1:] |= coincidence[:, :-1]
    near[:, :-1] |= coincidence[:, 1:]
    collar = wet & near
    ux, uy = grid.physical_gradient(v)
    speed = np.hypot(ux, uy)
    cg = float(np.max(speed[collar], initial=0.0))
    return ResidualReport(residual=res, wet_mask=wet, max_wet=mx,
                          l2_wet=l2, collar_grad_max=cg)
