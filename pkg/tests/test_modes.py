"""Vertical mode solver against the analytic constant-N layer.

Oracles (N = 1, h = pi): K = n omega / sqrt(1 - omega^2),
eigenfunction c sin(n (z + h)) with c = sqrt(2 / (h (N^2 - omega^2))),
dK/domega = n N^2 / (N^2 - omega^2)^{3/2}.
"""

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from iwwake import solve_mode, domega_derivative, ModeCache
from iwwake.modes import (mode_wavenumber, constant_n_wavenumber,
                          constant_n_domega, NoPropagatingModeError)

H = math.pi


class TestEigenvalue:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("omega", np.linspace(0.1, 0.9, 9).tolist())
    def test_constant_n_dispersion(self, const_field, n, omega):
        K = mode_wavenumber(const_field, omega, 0.0, 0.0, n)
        Ka = constant_n_wavenumber(1.0, H, omega, n)
        assert abs(K - Ka) / Ka < 1e-6

    def test_canonical_value(self, const_field):
        sol = solve_mode(const_field, 0.6, 0.0, 0.0, 1)
        assert sol.K == pytest.approx(0.75, rel=1e-8)

    def test_eigenvalues_increase_with_mode_index(self, const_field):
        Ks = [mode_wavenumber(const_field, 0.5, 0.0, 0.0, n) for n in (1, 2, 3, 4)]
        assert all(a < b for a, b in zip(Ks, Ks[1:]))

    def test_omega_above_max_n_rejected(self, const_field):
        with pytest.raises(NoPropagatingModeError):
            solve_mode(const_field, 1.2, 0.0, 0.0, 1)


class TestEigenfunction:
    def test_boundary_conditions(self, const_field):
        sol = solve_mode(const_field, 0.6, 0.0, 0.0, 2)
        assert sol.f_samples[0] == 0.0
        # z = 0 end carries the shooting miss at the converged eigenvalue
        assert abs(sol.f_samples[-1]) < 1e-8

    def test_normalization(self, const_field):
        sol = solve_mode(const_field, 0.6, 0.0, 0.0, 1)
        w = 1.0 - 0.6 ** 2
        integral = simpson(w * sol.f_samples ** 2, x=sol.z_grid)
        assert abs(integral - 1.0) < 1e-8

    def test_shape_matches_analytic_sine(self, const_field):
        sol = solve_mode(const_field, 0.6, 0.0, 0.0, 1)
        c = math.sqrt(2.0 / (H * (1.0 - 0.36)))
        assert c == pytest.approx(0.997356, abs=1e-6)
        exact = c * np.sin(sol.z_grid + H)
        assert np.max(np.abs(sol.f_samples - exact)) < 1e-6

    def test_slope_magnitude_at_source_depth(self, const_field):
        # |df/dz| at z0 = -pi/4 is c cos(pi/4) ~ 0.705240; the sign
        # convention df/dz(-h) > 0 makes the mode decreasing there
        sol = solve_mode(const_field, 0.6, 0.0, 0.0, 1)
        assert abs(sol.df_dz_at(-math.pi / 4)) == pytest.approx(0.705240, abs=1e-5)

    def test_bottom_slope_sign_convention(self, const_field):
        for n in (1, 2, 3):
            sol = solve_mode(const_field, 0.5, 0.0, 0.0, n)
            assert sol.df_dz_at(-H) > 0.0

    def test_interior_zero_count(self, const_field):
        for n in (1, 2, 3, 4):
            sol = solve_mode(const_field, 0.55, 0.0, 0.0, n)
            assert sol.interior_zero_count() == n - 1

    def test_shooting_slope_is_projected_out(self, const_field):
        a = solve_mode(const_field, 0.6, 0.0, 0.0, 1, shoot_slope=1.0)
        b = solve_mode(const_field, 0.6, 0.0, 0.0, 1, shoot_slope=37.5)
        assert a.K == b.K
        assert np.max(np.abs(a.f_samples - b.f_samples)) < 1e-13

    def test_discretized_ode_residual(self, const_field):
        sol = solve_mode(const_field, 0.6, 0.0, 0.0, 1)
        z, f, K = sol.z_grid, sol.f_samples, sol.K
        dz = z[1] - z[0]
        n2 = const_field.n_squared(z, np.zeros_like(z), np.zeros_like(z))
        q = n2 / 0.6 ** 2 - 1.0
        f2 = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dz ** 2
        resid = f2 + K * K * q[1:-1] * f[1:-1]
        assert np.max(np.abs(resid)) < 1e-6 * np.max(np.abs(f2))


class TestDomegaDerivative:
    def test_canonical_value(self, const_field):
        Kw = domega_derivative(const_field, 0.6, 0.0, 0.0, 1)
        assert abs(Kw - 1.953125) / 1.953125 < 1e-6

    def test_low_frequency_limit_trend(self, const_field):
        # K'_omega -> n pi / (h N) = 1 as omega -> 0
        vals = [domega_derivative(const_field, w, 0.0, 0.0, 1)
                for w in (0.15, 0.08, 0.04)]
        limit = 1.0
        assert abs(vals[-1] - limit) < abs(vals[0] - limit)
        assert vals[-1] == pytest.approx(limit, rel=5e-3)

    def test_monotone_in_omega(self, const_field):
        assert (domega_derivative(const_field, 0.7, 0.0, 0.0, 1)
                > domega_derivative(const_field, 0.6, 0.0, 0.0, 1))

    @pytest.mark.parametrize("n", [1, 2])
    @pytest.mark.parametrize("omega", [0.3, 0.6])
    def test_against_analytic(self, const_field, n, omega):
        Kw = domega_derivative(const_field, omega, 0.0, 0.0, n)
        Ka = constant_n_domega(1.0, H, omega, n)
        assert abs(Kw - Ka) / Ka < 1e-6


class TestVaryingProfile:
    def test_thermocline_mode_solves_and_normalizes(self):
        from iwwake import StratificationField
        f = StratificationField.thermocline(0.4, 0.8, -1.5, 0.4, H)
        sol = solve_mode(f, 0.35, 0.0, 0.0, 1)
        assert sol.K > 0
        z = sol.z_grid
        n2 = f.n_squared(z, np.zeros_like(z), np.zeros_like(z))
        integral = simpson((n2 - 0.35 ** 2) * sol.f_samples ** 2, x=z)
        assert abs(integral - 1.0) < 1e-8
        assert sol.interior_zero_count() == 0

    def test_integrand_sign_change_flagged(self):
        # omega above the background N but below the thermocline peak:
        # N^2 - omega^2 changes sign across the layer
        from iwwake import StratificationField
        f = StratificationField.thermocline(0.4, 0.8, -1.5, 0.4, H)
        sol = solve_mode(f, 0.6, 0.0, 0.0, 1)
        assert sol.integrand_sign_change
        sol_low = solve_mode(f, 0.3, 0.0, 0.0, 1)
        assert not sol_low.integrand_sign_change


class TestModeCache:
    def test_cache_returns_same_object(self, const_field):
        cache = ModeCache(const_field, 1, uniform=True)
        a = cache(0.6, 0.0, 0.0)
        b = cache(0.6, 10.0, 5.0)  # uniform: location ignored
        assert a is b
        c = cache(0.7, 0.0, 0.0)
        assert c is not a
