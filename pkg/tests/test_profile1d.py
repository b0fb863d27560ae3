"""Tests for the nonlinearity chain and the 1-D shear-flow family."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nozzleflow.profile1d import (
    DomainError, FlowConstants, bigF, build_shear_profile, c_of_d,
    cauchy_solve, energy_1d, f_of_psi, fhat, intersection_count, kappa,
    shear_value,
)

C1 = FlowConstants(1.0)
C3 = FlowConstants(3.0)


class TestKappa:
    def test_endpoints(self):
        assert kappa(0.0, C1) == pytest.approx(0.0, abs=1e-14)
        assert kappa(1.0, C1) == pytest.approx(1.0, abs=1e-14)
        assert kappa(0.5, C1) == pytest.approx(0.5, abs=1e-14)

    def test_inverts_cubic(self):
        t = np.linspace(0.0, 3.0, 257)
        k = kappa(t, C3)
        assert np.max(np.abs(3.0 * (3 * k**2 - 2 * k**3) - t)) < 1e-12

    @given(st.floats(min_value=0.0, max_value=1.0),
           st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=200, deadline=None)
    def test_inverse_property(self, t_frac, Q):
        consts = FlowConstants(Q)
        t = t_frac * Q
        k = kappa(t, consts)
        assert 0.0 <= k <= 1.0
        assert Q * (3 * k**2 - 2 * k**3) == pytest.approx(t, abs=1e-10 * max(Q, 1))

    def test_monotone(self):
        t = np.linspace(0.0, 1.0, 1001)
        assert np.all(np.diff(kappa(t, C1)) > 0)


class TestNonlinearity:
    def test_f_endpoints(self):
        # f(0) = 6Q, f(Q) = -6Q, f(Q/2) = 0
        assert f_of_psi(0.0, C1) == pytest.approx(6.0)
        assert f_of_psi(1.0, C1) == pytest.approx(-6.0)
        assert f_of_psi(0.5, C1) == pytest.approx(0.0, abs=1e-12)
        assert f_of_psi(0.0, C3) == pytest.approx(18.0)

    def test_fhat_extension_by_zero(self):
        assert fhat(-0.5, C1) == 0.0
        assert fhat(1.5, C1) == 0.0
        assert fhat(0.25, C1) == f_of_psi(0.25, C1)

    def test_bigF_midpoint(self):
        # F(Q/2) = (9/8) Q^2
        assert bigF(0.5, C1) == pytest.approx(9.0 / 8.0, rel=1e-12)
        assert bigF(1.5, C3) == pytest.approx(9.0 / 8.0 * 9.0, rel=1e-12)

    def test_bigF_outside_interval(self):
        assert bigF(-1.0, C1) == 0.0
        assert bigF(2.0, C1) == 0.0
        assert bigF(0.0, C1) == 0.0
        assert bigF(1.0, C1) == pytest.approx(0.0, abs=1e-14)

    def test_bigF_is_antiderivative(self):
        # closed form against direct quadrature of f
        from scipy.integrate import quad
        for t in (0.1, 0.37, 0.5, 0.82, 1.0):
            val, _ = quad(lambda s: f_of_psi(s, C1), 0.0, t, limit=200)
            assert bigF(t, C1) == pytest.approx(val, abs=1e-9)

    @given(st.floats(min_value=1e-6, max_value=1.0 - 1e-6))
    @settings(max_examples=100, deadline=None)
    def test_bigF_positive_inside(self, t):
        assert bigF(t, C1) > 0


class TestSlopeFamily:
    def test_full_height_is_zero_slope(self):
        assert c_of_d(1.0, C1) == 0.0

    def test_frozen_half_height(self):
        # independently computed with mpmath quadrature + bisection
        assert c_of_d(0.5, C1) == pytest.approx(1.595469547430641, rel=1e-10)

    def test_monotone_decreasing_in_d(self):
        ds = np.linspace(0.1, 1.0, 10)
        cs = [c_of_d(d, C1) for d in ds]
        assert all(a > b for a, b in zip(cs, cs[1:]))

    def test_thin_strip_asymptotics(self):
        # c(d) * d -> Q as d -> 0: nearly all flux carried at slope c
        d = 1e-3
        assert c_of_d(d, C1) * d == pytest.approx(1.0, rel=1e-5)

    def test_rejects_bad_height(self):
        with pytest.raises(DomainError):
            c_of_d(0.0, C1)
        with pytest.raises(DomainError):
            c_of_d(1.5, C1)


class TestShearProfile:
    def test_boundary_values(self):
        for d in (0.3, 0.7, 1.0):
            p = build_shear_profile(d, C1)
            assert p.values[0] == pytest.approx(0.0, abs=1e-14)
            assert p.values[-1] == pytest.approx(1.0, rel=1e-12)
            assert p.nodes[0] == 0.0
            assert p.nodes[-1] == pytest.approx(d, rel=1e-12)

    def test_energy_identity_at_nodes(self):
        # phi'^2 - 2 F(phi) = c^2 pointwise along the profile
        for d in (0.25, 0.5, 0.9):
            p = build_shear_profile(d, C1)
            resid = p.slopes**2 - 2.0 * bigF(p.values, C1) - p.c**2
            assert np.max(np.abs(resid)) < 1e-10

    def test_full_height_profile_is_cubic(self):
        p = build_shear_profile(1.0, C1)
        x = p.nodes
        assert np.max(np.abs(p.values - (3 * x**2 - 2 * x**3))) < 1e-12

    def test_strictly_increasing(self):
        for d in (0.2, 0.6, 1.0):
            p = build_shear_profile(d, C1)
            assert np.all(np.diff(p.values) > 0)

    def test_symmetry(self):
        # phi_d(d - x) = Q - phi_d(x)
        p = build_shear_profile(0.6, C1)
        itp = p.interpolator()
        x = np.linspace(0.0, 0.6, 101)
        assert np.max(np.abs(itp(0.6 - x) + itp(x) - 1.0)) < 1e-8

    def test_shear_value_matches_nodes(self):
        p = build_shear_profile(0.4, C1)
        mid = p.nodes[1:-1:20]
        vals = shear_value(0.4, C1, mid)
        ref = p.values[1:-1:20]
        assert np.max(np.abs(vals - ref)) < 1e-10

    def test_scaling_in_Q(self):
        # the family scales linearly in Q at fixed d
        p1 = build_shear_profile(0.5, C1)
        p3 = build_shear_profile(0.5, C3)
        assert p3.c == pytest.approx(3.0 * p1.c, rel=1e-10)
        assert np.max(np.abs(p3.values - 3.0 * p1.values)) < 1e-9


class TestEnergy:
    def test_full_height_energy(self):
        # J for the zero-slope profile: 6 Q^2 / 5
        p = build_shear_profile(1.0, C1)
        assert p.energy == pytest.approx(1.2, rel=1e-10)
        assert energy_1d(p) == pytest.approx(1.2, rel=1e-10)
        p3 = build_shear_profile(1.0, C3)
        assert p3.energy == pytest.approx(1.2 * 9.0, rel=1e-10)

    def test_energy_decreasing_in_d(self):
        Js = [build_shear_profile(d, C1).energy for d in (0.3, 0.5, 0.8, 1.0)]
        assert all(a > b for a, b in zip(Js, Js[1:]))

    def test_energy_matches_direct_quadrature(self):
        # integral of (phi'^2 / 2 + F(phi)) against the dense interpolant
        from scipy.integrate import quad
        p = build_shear_profile(0.7, C1)
        itp = p.interpolator()
        ditp = itp.derivative()
        val, _ = quad(lambda x: 0.5 * ditp(x)**2 + bigF(itp(x), C1),
                      0.0, 0.7, limit=200)
        assert p.energy == pytest.approx(val, rel=1e-4)


class TestCauchySolve:
    def test_zero_slope_recovers_cubic(self):
        p = cauchy_solve(0.0, C1)
        x = np.linspace(0.0, 1.0, 64)
        itp = p.interpolator()
        assert np.max(np.abs(itp(x) - (3 * x**2 - 2 * x**3))) < 1e-7

    def test_reaches_Q_at_family_height(self):
        # shooting from (0, c) lands at psi = Q exactly at height d(c)
        d = 0.55
        c = c_of_d(d, C1)
        p = cauchy_solve(c, C1)
        assert p.nodes[-1] == pytest.approx(d, rel=1e-5)
        assert p.values[-1] == pytest.approx(1.0, rel=1e-9)

    def test_agrees_with_family_construction(self):
        d = 0.8
        c = c_of_d(d, C1)
        p_shoot = cauchy_solve(c, C1)
        p_fam = build_shear_profile(d, C1)
        itp = p_fam.interpolator()
        x = p_shoot.nodes[p_shoot.nodes <= d]
        err = np.max(np.abs(p_shoot.interpolator()(x) - itp(x)))
        assert err < 1e-5


class TestIntersectionCount:
    def test_steeper_member_never_crosses_from_common_foot(self):
        # same foot point: the steeper profile stays above
        p_a = build_shear_profile(0.5, C1)
        p_b = build_shear_profile(0.9, C1)
        assert intersection_count(p_a, p_b) == 0

    def test_shifted_steep_member_crosses_once(self):
        p_a = build_shear_profile(0.5, C1)
        p_b = build_shear_profile(0.9, C1)
        assert intersection_count(p_a, p_b, shift=0.2) == 1

    def test_shifted_copy_does_not_cross(self):
        p = build_shear_profile(0.5, C1)
        assert intersection_count(p, p, shift=0.2) == 0
