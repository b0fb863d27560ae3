"""One-dimensional shear-flow toolkit.

Provides the nonlinearity chain (kappa, f, F) generated by the Poiseuille
profile u1(s) = 6*Q*s*(1-s), and the one-parameter family of shear profiles
phi_d on [0, d] solving phi'' = f(phi), phi(0)=0, phi(d)=Q.  The family is
parameterized either by the interval height d (boundary-value form) or by
the initial slope c (Cauchy form); c_of_d maps between the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


#: absolute slack allowed when clamping psi-values to [0, Q]
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class FlowConstants:
    """Flux Q and the derived Poiseuille shear profile."""

    Q: float = 1.0

    def __post_init__(self):
        if not self.Q > 0:
            raise DomainError(f"flux Q must be positive, got {self.Q}")

    def u1(self, s):
        """Horizontal velocity 6*Q*s*(1-s) of the unit-strip shear flow."""
        s = np.asarray(s, dtype=float)
        return 6.0 * self.Q * s * (1.0 - s)


def _clamp_to_flux(t, Q):
    """Clamp t into [0, Q], rejecting excursions beyond CLAMP_TOL * Q."""
    t = np.asarray(t, dtype=float)
    if np.any(t < -CLAMP_TOL * Q) or np.any(t > Q * (1.0 + CLAMP_TOL)):
        bad = t[(t < -CLAMP_TOL * Q) | (t > Q * (1.0 + CLAMP_TOL))]
        raise DomainError(f"value(s) outside [0, Q]: {np.ravel(bad)[:3]}")
    return np.clip(t, 0.0, Q)


def kappa(t, consts: FlowConstants):
    """Invert Q*(3k^2 - 2k^3) = t for k in [0, 1].

    Uses the trigonometric closed form of the cubic followed by one Newton
    polish step away from the endpoints (where the derivative vanishes).
    """
    Q = consts.Q
    t = _clamp_to_flux(t, Q)
    tau = t / Q
    # 2k^3 - 3k^2 + tau = 0  <=>  4m^3 - 3m = 1 - 2tau with k = 1/2 + m
    theta = np.arccos(np.clip(1.0 - 2.0 * tau, -1.0, 1.0))
    k = 0.5 + np.cos((2.0 * np.pi - theta) / 3.0)
    k = np.clip(k, 0.0, 1.0)
    g = 3.0 * k**2 - 2.0 * k**3 - tau
    gp = 6.0 * k * (1.0 - k)
    safe = gp > 1e-8
    k = np.where(safe, k - np.where(safe, g, 0.0) / np.where(safe, gp, 1.0), k)
    return np.clip(k, 0.0, 1.0)


def f_of_psi(t, consts: FlowConstants):
    """Vorticity nonlinearity 6*Q*(1 - 2*kappa(t)); strictly decreasing."""
    return 6.0 * consts.Q * (1.0 - 2.0 * kappa(t, consts))


def fhat(t, consts: FlowConstants):
    """f extended by zero outside [0, Q] (the a.e. derivative of bigF)."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0.0) & (t <= consts.Q)
    return np.where(inside, 6.0 * consts.Q * (1.0 - 2.0 * kappa(np.clip(t, 0.0, consts.Q), consts)), 0.0)


def bigF(t, consts: FlowConstants):
    """Primitive of fhat: u1(kappa(t))^2 / 2 on [0, Q], zero outside.

    Total function: Lipschitz on all of R, concave on (0, Q).
    """
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, consts.Q)
    inside = (t > 0.0) & (t < consts.Q)
    val = consts.u1(kappa(tc, consts)) ** 2 / 2.0
    return np.where(inside, val, 0.0)


def _height_of_slope(c, consts: FlowConstants, quad_tol=1e-12):
    """d(c) = integral_0^1 u1 / sqrt(u1^2 + c^2) dx2 for c > 0."""
    Q = consts.Q

    def integrand(s):
        u = 6.0 * Q * s * (1.0 - s)
        return u / np.sqrt(u * u + c * c)

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=quad_tol, epsrel=quad_tol)
    return val


def c_of_d(d, consts: FlowConstants):
    """Initial slope c(d) >= 0 of the shear profile of height d.

    Unique root of d = integral_0^1 u1/sqrt(u1^2 + c^2); strictly decreasing
    in d with c(1) = 0 (returned exactly).
    """
    d = float(d)
    if not (0.0 < d <= 1.0):
        raise DomainError(f"height d must lie in (0, 1], got {d}")
    if d == 1.0:
        return 0.0
    Q = consts.Q
    hi = 2.0 * Q / d  # d(hi) <= Q/hi = d/2 < d, so [0, hi] brackets the root
    c = optimize.brentq(lambda c: _height_of_slope(c, consts) - d, 0.0, hi,
                        xtol=1e-14, rtol=8.9e-16)
    return float(c)


@dataclass(frozen=True)
class ShearProfile:
    """Sampled shear-flow profile phi on [0, d] with slope and energy data."""

    Q: float
    d: float
    c: float
    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    energy: float = field(default=float("nan"))
    complete: bool = True  # whether phi reaches Q at the last node

    def interpolator(self):
        """Monotone cubic interpolant of the sampled values."""
        return PchipInterpolator(self.nodes, self.values)

    def slope_interpolator(self):
        return PchipInterpolator(self.nodes, self.slopes)


def _theta_d_increments(ts, c, consts: FlowConstants, quad_tol=1e-12):
    """Panel integrals of u1/sqrt(u1^2 + c^2) between consecutive ts."""
    Q = consts.Q

    def integrand(s):
        u = 6.0 * Q * s * (1.0 - s)
        return u / np.sqrt(u * u + c * c)

    out = np.empty(len(ts) - 1)
    for i in range(len(ts) - 1):
        out[i], _ = integrate.quad(integrand, ts[i], ts[i + 1],
                                   epsabs=quad_tol, epsrel=quad_tol)
    return out


def _family_energy(t_max, c, consts: FlowConstants, quad_tol=1e-12):
    """Energy integral of a family profile, written in the strip parameter.

    With x2 = theta_d(t) the energy density transforms to
    (u1(t)^2 + c^2/2) * u1(t) / sqrt(u1(t)^2 + c^2).
    """
    Q = consts.Q

    def integrand(s):
        u = 6.0 * Q * s * (1.0 - s)
        if c == 0.0:
            return u * u
        return (u * u + 0.5 * c * c) * u / np.sqrt(u * u + c * c)

    val, _ = integrate.quad(integrand, 0.0, t_max, epsabs=quad_tol, epsrel=quad_tol)
    return val


def build_shear_profile(d, consts: FlowConstants, n_nodes=201) -> ShearProfile:
    """Sample the boundary-value profile phi_d on [0, d].

    Node positions come from the change of variables theta_d; values are the
    exact cubic Q*(3t^2 - 2t^3) in the strip parameter, so the energy
    identity phi'^2 - 2F(phi) = c^2 holds to rounding at every node.
    """
    d = float(d)
    if not (0.0 < d <= 1.0):
        raise DomainError(f"height d must lie in (0, 1], got {d}")
    if n_nodes < 3:
        raise DomainError("n_nodes must be at least 3")
    Q = consts.Q
    ts = np.linspace(0.0, 1.0, n_nodes)
    if d == 1.0:
        nodes = ts.copy()
        c = 0.0
    else:
        c = c_of_d(d, consts)
        nodes = np.concatenate([[0.0], np.cumsum(_theta_d_increments(ts, c, consts))])
        if abs(nodes[-1] - d) > 1e-9 * max(d, 1.0):
            raise RuntimeError(f"theta_d(1) = {nodes[-1]} != d = {d}")
        nodes[-1] = d
    values = Q * (3.0 * ts**2 - 2.0 * ts**3)
    values[-1] = Q
    slopes = np.sqrt(consts.u1(ts) ** 2 + c * c)
    energy = _family_energy(1.0, c, consts)
    return ShearProfile(Q=Q, d=d, c=c, nodes=nodes, values=values,
                        slopes=slopes, energy=energy)


def shear_value(d, consts: FlowConstants, x2):
    """Evaluate phi_d at points of [0, d] by inverting theta_d per point."""
    d = float(d)
    if d == 1.0:
        x = np.clip(np.asarray(x2, dtype=float), 0.0, 1.0)
        return consts.Q * (3.0 * x**2 - 2.0 * x**3)
    c = c_of_d(d, consts)
    Q = consts.Q

    def theta(t):
        def integrand(s):
            u = 6.0 * Q * s * (1.0 - s)
            return u / np.sqrt(u * u + c * c)
        val, _ = integrate.quad(integrand, 0.0, t, epsabs=1e-12, epsrel=1e-12)
        return val

    xs = np.atleast_1d(np.asarray(x2, dtype=float))
    out = np.empty_like(xs)
    for i, x in enumerate(xs):
        if x <= 0.0:
            out[i] = 0.0
        elif x >= d:
            out[i] = Q
        else:
            t = optimize.brentq(lambda t: theta(t) - x, 0.0, 1.0, xtol=1e-14)
            out[i] = Q * (3.0 * t**2 - 2.0 * t**3)
    return out if np.ndim(x2) else float(out[0])


def cauchy_solve(c, consts: FlowConstants, step=1e-3, x_max=10.0,
                 tol=1e-12) -> ShearProfile:
    """Integrate the initial-value profile phi_c from phi(0)=0, phi'(0)=c.

    Marches the first-order reduction phi' = sqrt(c^2 + 2F(phi)) with RK4,
    which is exact for solutions of phi'' = f(phi) and avoids the
    non-Lipschitz f at the pinned values.  Near phi = 0 the quadratic Taylor
    branch phi ~ c*x + 3*Q*x^2 is used.  Stops once phi reaches Q (placing
    the final node there exactly) or x exceeds x_max.
    """
    if c < 0:
        raise DomainError(f"initial slope c must be nonnegative, got {c}")
    Q = consts.Q
    if c == 0.0:
        # the solution is the closed cubic, reaching Q at x = 1
        n = max(3, int(np.ceil(1.0 / step)) + 1)
        return build_shear_profile(1.0, consts, n_nodes=n)

    def speed(phi):
        return np.sqrt(c * c + 2.0 * bigF(phi, consts))

    nodes = [0.0]
    values = [0.0]
    # Taylor start past the small-phi region
    eps = 1e-6 * Q
    x0 = min(step, (-c + np.sqrt(c * c + 12.0 * Q * eps)) / (6.0 * Q))
    phi = c * x0 + 3.0 * Q * x0 * x0
    nodes.append(x0)
    values.append(phi)
    x = x0
    complete = False
    while x < x_max:
        if phi >= Q - 1e-6 * Q:
            if phi < Q:
                # finish by integrating dx/dphi = 1/speed up to Q
                # (speed >= c > 0 keeps the integrand bounded)
                dx, _ = integrate.quad(lambda p: 1.0 / speed(p), phi, Q,
                                       epsabs=1e-13, epsrel=1e-13)
                x += dx
                phi = Q
                nodes.append(x)
                values.append(phi)
            complete = True
            break
        h = min(step, x_max - x)
        k1 = speed(phi)
        k2 = speed(min(phi + 0.5 * h * k1, Q))
        k3 = speed(min(phi + 0.5 * h * k2, Q))
        k4 = speed(min(phi + h * k3, Q))
        phi = min(phi + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0, Q)
        x += h
        nodes.append(x)
        values.append(phi)

    nodes = np.asarray(nodes)
    values = np.asarray(values)
    slopes = np.sqrt(c * c + 2.0 * bigF(values, consts))
    t_max = float(kappa(values[-1], consts))
    energy = _family_energy(t_max, c, consts)
    return ShearProfile(Q=Q, d=float(nodes[-1]), c=float(c), nodes=nodes,
                        values=values, slopes=slopes, energy=energy,
                        complete=complete)


def energy_1d(profile: ShearProfile) -> float:
    """1-D energy integral of |phi'|^2/2 + F(phi) over the profile's span.

    Evaluated in the strip parameter via the family change of variables,
    with adaptive quadrature (abs tol 1e-10 relative to Q^2 scale).
    """
    t_max = float(kappa(profile.values[-1], FlowConstants(profile.Q)))
    return _family_energy(t_max, profile.c, FlowConstants(profile.Q))


def intersection_count(p1: ShearProfile, p2: ShearProfile, shift=0.0,
                       n_samples=4001) -> int:
    """Count crossings of phi_{c1}(x - shift) and phi_{c2}(x).

    Only points where both values lie strictly inside (0, Q) are counted;
    the family admits at most one such crossing.
    """
    if p1.Q != p2.Q:
        raise DomainError("profiles carry different flux Q")
    if shift < 0:
        raise DomainError("shift must be nonnegative")
    lo = max(shift, 0.0)
    hi = min(shift + p1.nodes[-1], p2.nodes[-1])
    if hi <= lo:
        return 0
    xs = np.linspace(lo, hi, n_samples)
    v1 = np.interp(xs - shift, p1.nodes, p1.values)
    v2 = np.interp(xs, p2.nodes, p2.values)
    Q = p1.Q
    margin = 1e-9 * Q
    mask = (v1 > margin) & (v1 < Q - margin) & (v2 > margin) & (v2 < Q - margin)
    diff = v1[mask] - v2[mask]
    signs = np.sign(diff)
    signs = signs[signs != 0]
    if len(signs) < 2:
        return 0
    return int(np.count_nonzero(np.diff(signs) != 0))
