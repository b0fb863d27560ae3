"""Nozzle geometry, boundary-fitted grids, and Dirichlet boundary data.

The nozzle is a vertical-graph channel h0(x1) < x2 < h1(x1), flat with
heights (0, 1) far upstream and (a, b) far downstream.  Truncated domains
are meshed with a sigma-mapping: uniform columns in x1, uniform sigma in
[0, 1] per column with x2 = h0 + sigma * (h1 - h0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .profile1d import FlowConstants, shear_value


class ValidationError(ValueError):
    """A geometry or grid constraint is violated."""


PRESET_NAMES = ("straight", "symmetric-bump", "bottom-bump",
                "top-flat-bottom-bump", "sampled")


def _bump(xi):
    """C^2 cosine window: cos^4(pi*xi/2) on |xi| <= 1, zero outside."""
    xi = np.asarray(xi, dtype=float)
    inside = np.abs(xi) < 1.0
    u = 0.5 * np.pi * np.where(inside, xi, 0.0)
    return np.where(inside, np.cos(u) ** 4, 0.0)


def _bump_d1(xi):
    xi = np.asarray(xi, dtype=float)
    inside = np.abs(xi) < 1.0
    u = 0.5 * np.pi * np.where(inside, xi, 0.0)
    return np.where(inside, -2.0 * np.pi * np.cos(u) ** 3 * np.sin(u), 0.0)


def _bump_d2(xi):
    xi = np.asarray(xi, dtype=float)
    inside = np.abs(xi) < 1.0
    u = 0.5 * np.pi * np.where(inside, xi, 0.0)
    return np.where(inside,
                    np.pi**2 * np.cos(u) ** 2 * (3.0 * np.sin(u) ** 2 - np.cos(u) ** 2),
                    0.0)


#: integral of the cosine window over its support [-1, 1]
BUMP_MASS = 0.75


@dataclass(frozen=True)
class BoundaryCurve:
    """Evaluable boundary curve with first and second derivatives."""

    value: Callable
    deriv: Callable
    deriv2: Callable

    def __call__(self, x):
        return self.value(x)


def _const_curve(level):
    lv = float(level)
    return BoundaryCurve(
        value=lambda x: np.full_like(np.asarray(x, dtype=float), lv),
        deriv=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        deriv2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def _bump_curve(level, amplitude, center, width):
    lv, A, c, w = float(level), float(amplitude), float(center), float(width)
    return BoundaryCurve(
        value=lambda x: lv + A * _bump((np.asarray(x, dtype=float) - c) / w),
        deriv=lambda x: (A / w) * _bump_d1((np.asarray(x, dtype=float) - c) / w),
        deriv2=lambda x: (A / w**2) * _bump_d2((np.asarray(x, dtype=float) - c) / w),
    )


@dataclass(frozen=True)
class NozzleGeometry:
    """Channel bounded by curves h0 < h1, flat outside [underline_L, bar_L]."""

    h0: BoundaryCurve
    h1: BoundaryCurve
    underline_L: float
    bar_L: float
    a: float
    b: float
    name: str = "custom"

    def heights(self, x):
        return self.h1(x) - self.h0(x)

    def validate(self, n_samples=2001):
        """Sampled checks of the structural invariants; raises on failure."""
        if not (0.0 <= self.a < self.b <= 1.0):
            raise ValidationError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")
        if not (self.underline_L < 0.0 < self.bar_L):
            raise ValidationError("flat thresholds must satisfy underline_L < 0 < bar_L")
        span = 1.5 * max(self.bar_L, -self.underline_L)
        xs = np.linspace(-span, span, n_samples)
        lo, hi = self.h0(xs), self.h1(xs)
        bad = hi - lo <= 0
        if np.any(bad):
            raise ValidationError(
                f"h1 <= h0 at x1 = {xs[bad][0]:.6g} (h0={lo[bad][0]:.6g}, h1={hi[bad][0]:.6g})")
        left = xs <= self.underline_L
        right = xs >= self.bar_L
        for mask, target0, target1, side in (
                (left, 0.0, 1.0, "upstream"), (right, self.a, self.b, "downstream")):
            if np.any(np.abs(lo[mask] - target0) > 1e-12) or \
               np.any(np.abs(hi[mask] - target1) > 1e-12):
                raise ValidationError(f"boundaries not flat on the {side} side")
        # C^2 sampling check: divided differences vs analytic derivatives
        h = xs[1] - xs[0]
        for curve in (self.h0, self.h1):
            v = curve(xs)
            dd2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
            if not np.all(np.isfinite(dd2)) or np.max(np.abs(dd2)) > 1e6:
                raise ValidationError("second divided differences unbounded")
        return self


def preset_geometry(name, params=None) -> NozzleGeometry:
    """Build one of the named nozzle configurations.

    straight:              h0 = 0, h1 = 1 everywhere.
    symmetric-bump:        h0 dips by `amplitude`, h1 = 1 - h0.
    bottom-bump:           h0 carries a signed bump, h1 = 1.
    top-flat-bottom-bump:  bottom-bump with default amplitude -0.2.
    sampled:               cubic-spline interpolation of user tables, clamped
                           to the flat tails.
    """
    params = dict(params or {})
    if name not in PRESET_NAMES:
        raise ValidationError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")

    if name == "straight":
        _reject_unknown(params, ())
        geom = NozzleGeometry(_const_curve(0.0), _const_curve(1.0),
                              underline_L=-1.0, bar_L=1.0, a=0.0, b=1.0,
                              name=name)
        return geom.validate()

    if name in ("symmetric-bump", "bottom-bump", "top-flat-bottom-bump"):
        default_amp = 0.2 if name == "symmetric-bump" else -0.2
        _reject_unknown(params, ("amplitude", "center", "width"))
        A = float(params.get("amplitude", default_amp))
        center = float(params.get("center", 0.0))
        width = float(params.get("width", 2.0))
        if width <= 0:
            raise ValidationError("bump width must be positive")
        if name == "symmetric-bump":
            h0 = _bump_curve(0.0, -A, center, width)
            h1 = _bump_curve(1.0, A, center, width)
        else:
            h0 = _bump_curve(0.0, A, center, width)
            h1 = _const_curve(1.0)
        geom = NozzleGeometry(h0, h1,
                              underline_L=min(-1.0, center - width),
                              bar_L=max(1.0, center + width),
                              a=0.0, b=1.0, name=name)
        return geom.validate()

    # sampled tables
    _reject_unknown(params, ("x", "h0", "h1", "a", "b", "underline_L", "bar_L"))
    try:
        xs = np.asarray(params["x"], dtype=float)
        v0 = np.asarray(params["h0"], dtype=float)
        v1 = np.asarray(params["h1"], dtype=float)
    except KeyError as e:
        raise ValidationError(f"sampled preset requires table key {e}")
    a = float(params.get("a", v0[-1]))
    b = float(params.get("b", v1[-1]))
    uL = float(params.get("underline_L", xs[0]))
    bL = float(params.get("bar_L", xs[-1]))
    sp0 = CubicSpline(xs, v0, bc_type="clamped")
    sp1 = CubicSpline(xs, v1, bc_type="clamped")

    def tabbed(sp, lo, hi):
        def value(x):
            x = np.asarray(x, dtype=float)
            return np.where(x <= uL, lo, np.where(x >= bL, hi, sp(np.clip(x, uL, bL))))

        def deriv(x):
            x = np.asarray(x, dtype=float)
            inside = (x > uL) & (x < bL)
            return np.where(inside, sp(np.clip(x, uL, bL), 1), 0.0)

        def deriv2(x):
            x = np.asarray(x, dtype=float)
            inside = (x > uL) & (x < bL)
            return np.where(inside, sp(np.clip(x, uL, bL), 2), 0.0)

        return BoundaryCurve(value, deriv, deriv2)

    geom = NozzleGeometry(tabbed(sp0, 0.0, a), tabbed(sp1, 1.0, b),
                          underline_L=uL, bar_L=bL, a=a, b=b, name=name)
    return geom.validate()


def _reject_unknown(params, allowed):
    unknown = set(params) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown geometry parameter(s): {sorted(unknown)}")


@dataclass(frozen=True)
class CurvilinearGrid:
    """Boundary-fitted structured grid on the truncated domain |x1| < N.

    Nodes are indexed (row j = sigma index, column i = x1 index); flattened
    ordering is j * nx + i.
    """

    geom: NozzleGeometry
    N: float
    nx: int
    ns: int
    x1: np.ndarray          # (nx,)
    sigma: np.ndarray       # (ns,)
    x2: np.ndarray          # (ns, nx) physical heights
    H: np.ndarray           # (nx,) column heights h1 - h0
    h0v: np.ndarray         # (nx,)
    h1v: np.ndarray         # (nx,)
    beta: np.ndarray        # (ns, nx) mapping shear h0' + sigma * H'
    weights: np.ndarray = field(repr=False, default=None)  # (ns, nx)

    @property
    def dx(self):
        return self.x1[1] - self.x1[0]

    @property
    def ds(self):
        return self.sigma[1] - self.sigma[0]

    def area(self):
        """Discrete domain area implied by the quadrature weights' target."""
        return float(np.sum(self.weights))

    def physical_gradient(self, values):
        """Physical (d/dx1, d/dx2) of a nodal array via the sigma-mapping.

        Central differences inside, one-sided at the boundary rows/columns.
        """
        v = np.asarray(values, dtype=float)
        dv_dx1 = np.gradient(v, self.x1, axis=1, edge_order=2)
        dv_dsig = np.gradient(v, self.sigma, axis=0, edge_order=2)
        ux = dv_dx1 - dv_dsig * self.beta / self.H[None, :]
        uy = dv_dsig / self.H[None, :]
        return ux, uy


def build_grid(geom: NozzleGeometry, N, nx, ns) -> CurvilinearGrid:
    """Mesh the truncation |x1| < N with nx columns and ns sigma-rows.

    Requires N >= L0 = max(bar_L, -underline_L) so the lateral sides sit in
    the flat parts of the nozzle.  Quadrature weights integrate the column
    heights exactly (Gauss panels in x1, trapezoid in sigma), so their sum
    matches the domain area to quadrature precision.
    """
    L0 = max(geom.bar_L, -geom.underline_L)
    if N < L0:
        raise ValidationError(f"truncation N = {N} below L0 = {L0}")
    if nx < 8 or ns < 8:
        raise ValidationError("need nx >= 8 and ns >= 8")
    x1 = np.linspace(-N, N, nx)
    sigma = np.linspace(0.0, 1.0, ns)
    h0v = geom.h0(x1)
    h1v = geom.h1(x1)
    H = h1v - h0v
    if np.any(H <= 0):
        raise ValidationError("nonpositive column height on the grid")
    x2 = h0v[None, :] + sigma[:, None] * H[None, :]
    dh0 = geom.h0.deriv(x1)
    dh1 = geom.h1.deriv(x1)
    beta = dh0[None, :] + sigma[:, None] * (dh1 - dh0)[None, :]

    # column weights: exact integral of the hat function times H(x1)
    gq_x, gq_w = np.polynomial.legendre.leggauss(6)
    dx = x1[1] - x1[0]
    Wcol = np.zeros(nx)
    for i in range(nx - 1):
        xm = 0.5 * (x1[i] + x1[i + 1])
        xq = xm + 0.5 * dx * gq_x
        Hq = geom.heights(xq)
        lam = (xq - x1[i]) / dx  # hat weight toward node i+1
        Wcol[i] += 0.5 * dx * np.sum(gq_w * Hq * (1.0 - lam))
        Wcol[i + 1] += 0.5 * dx * np.sum(gq_w * Hq * lam)
    wsig = np.full(ns, sigma[1] - sigma[0])
    wsig[0] *= 0.5
    wsig[-1] *= 0.5
    weights = wsig[:, None] * Wcol[None, :]

    return CurvilinearGrid(geom=geom, N=float(N), nx=nx, ns=ns, x1=x1,
                           sigma=sigma, x2=x2, H=H, h0v=h0v, h1v=h1v,
                           beta=beta, weights=weights)


def boundary_data(geom: NozzleGeometry, grid: CurvilinearGrid,
                  consts: FlowConstants):
    """Dirichlet data on the boundary of the truncated domain.

    0 on the lower wall, Q on the upper wall, shear profiles of the local
    flat heights on the lateral sides.  Returns (mask, values) as (ns, nx)
    arrays; values is 0 off the boundary.
    """
    ns, nx = grid.ns, grid.nx
    mask = np.zeros((ns, nx), dtype=bool)
    vals = np.zeros((ns, nx))
    mask[0, :] = True
    mask[-1, :] = True
    vals[-1, :] = consts.Q
    mask[:, 0] = True
    mask[:, -1] = True
    # lateral heights are (0,1) on the left and (a,b) on the right for N >= L0
    vals[:, 0] = consts.Q * (3.0 * grid.x2[:, 0] ** 2 - 2.0 * grid.x2[:, 0] ** 3)
    d_right = geom.b - geom.a
    vals[:, -1] = shear_value(d_right, consts, grid.x2[:, -1] - geom.a)
    vals[0, 0] = vals[0, -1] = 0.0
    vals[-1, 0] = vals[-1, -1] = consts.Q
    return mask, vals
