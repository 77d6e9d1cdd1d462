"""Special-function oracles.

The Fresnel profile is checked against brute-force quadrature of its
defining integral Re int_0^inf exp(-i t s - i t^2/2) dt: dense Simpson
on [0, T] plus the two-term integration-by-parts tail
-sin(g(T))/g'(T) + cos(g(T))/g'(T)^3, remainder O(g'(T)^-5).  Airy
values are pinned to Maclaurin closed forms and the defining ODE.
"""

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from iwwake import specfun


def phi_oracle(sigma, T=50.0, n=500_001):
    t = np.linspace(0.0, T, n)
    g = sigma * t + t * t / 2.0
    val = simpson(np.cos(g), x=t)
    gT, dgT = g[-1], sigma + T
    return val + (-math.sin(gT) / dgT + math.cos(gT) / dgT ** 3)


class TestAiry:
    def test_value_at_zero(self):
        exact = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
        assert abs(specfun.airy_ai(0.0) - exact) < 1e-9
        assert abs(specfun.airy_ai(0.0) - 0.355028053887817) < 1e-12

    def test_prime_at_zero(self):
        exact = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)
        assert abs(specfun.airy_ai_prime(0.0) - exact) < 1e-9
        assert abs(specfun.airy_ai_prime(0.0) + 0.258819403792807) < 1e-12

    def test_exponential_decay(self):
        v = specfun.airy_ai(20.0)
        assert 0.0 < v < 1e-17

    def test_prime_negative_on_positive_axis(self):
        for s in (0.5, 2.0, 10.0, 30.0):
            assert specfun.airy_ai_prime(s) < 0.0

    def test_defining_ode_residual(self):
        h = 1e-4
        for s in (-5.0, -1.0, 0.0, 1.0, 5.0):
            fd2 = (specfun.airy_ai(s + h) - 2.0 * specfun.airy_ai(s)
                   + specfun.airy_ai(s - h)) / h ** 2
            assert abs(fd2 - s * specfun.airy_ai(s)) < 1e-6

    def test_ode_residual_tight_at_one(self):
        # step balances truncation against roundoff of the second difference
        h = 5e-4
        fd2 = (specfun.airy_ai(1.0 + h) - 2.0 * specfun.airy_ai(1.0)
               + specfun.airy_ai(1.0 - h)) / h ** 2
        assert abs(fd2 - specfun.airy_ai(1.0)) < 1e-8

    def test_prime_matches_finite_difference(self):
        h = 1e-5
        fd = (specfun.airy_ai(0.5 + h) - specfun.airy_ai(0.5 - h)) / (2 * h)
        assert abs(fd - specfun.airy_ai_prime(0.5)) < 1e-8

    def test_nonfinite_rejected(self):
        for bad in (np.nan, np.inf, -np.inf):
            with pytest.raises(ValueError):
                specfun.airy_ai(bad)
            with pytest.raises(ValueError):
                specfun.airy_ai_prime(bad)


class TestFresnelPhi:
    def test_front_value(self):
        assert abs(specfun.fresnel_phi(0.0) - math.sqrt(math.pi) / 2.0) < 1e-12
        assert abs(specfun.fresnel_phi(0.0) - 0.886226925452758) < 1e-12

    @pytest.mark.parametrize("sigma", [3.0, -5.0])
    def test_against_quadrature_oracle(self, sigma):
        assert abs(specfun.fresnel_phi(sigma) - phi_oracle(sigma)) < 1e-6

    def test_oracle_sweep(self):
        # 201-point sweep lives in the acceptance suite; spot-check here
        for s in np.linspace(-10.0, 10.0, 41):
            assert abs(specfun.fresnel_phi(s) - phi_oracle(s)) < 1e-6

    def test_oscillatory_side_order_one(self):
        v = specfun.fresnel_phi(-5.0)
        assert 0.1 < abs(v) < 3.0

    def test_decay_ahead_of_front(self):
        mags = [abs(specfun.fresnel_phi(s)) for s in (5.0, 10.0, 20.0)]
        assert mags[0] > mags[1] > mags[2]

    def test_prime_matches_finite_difference(self):
        h = 1e-5
        for s in (1.0, 0.0, -4.0):
            fd = (specfun.fresnel_phi(s + h) - specfun.fresnel_phi(s - h)) / (2 * h)
            assert abs(fd - specfun.fresnel_phi_prime(s)) < 1e-7

    def test_prime_at_zero_from_oracle_only(self):
        # pinned by the finite-difference oracle, not hard-coded
        h = 1e-6
        fd = (specfun.fresnel_phi(h) - specfun.fresnel_phi(-h)) / (2 * h)
        assert abs(fd - specfun.fresnel_phi_prime(0.0)) < 1e-7

    def test_nonfinite_rejected(self):
        for bad in (np.nan, np.inf):
            with pytest.raises(ValueError):
                specfun.fresnel_phi(bad)
            with pytest.raises(ValueError):
                specfun.fresnel_phi_prime(bad)


class TestAntiderivativeChain:
    """F'_{m+1} = F_m for both wave families."""

    def test_airy_pair(self):
        h = 1e-5
        for s in (-3.0, -0.7, 0.0, 1.2, 4.0):
            fd = (specfun.airy_ai(s + h) - specfun.airy_ai(s - h)) / (2 * h)
            assert abs(fd - specfun.airy_ai_prime(s)) < 1e-7

    def test_fresnel_pair(self):
        h = 1e-5
        for s in (-3.0, -0.7, 0.0, 1.2, 4.0):
            fd = (specfun.fresnel_phi(s + h) - specfun.fresnel_phi(s - h)) / (2 * h)
            assert abs(fd - specfun.fresnel_phi_prime(s)) < 1e-7


class TestSaturation:
    def test_flag_set_beyond_cap(self):
        for name in ("airy_ai", "airy_ai_prime", "fresnel_phi", "fresnel_phi_prime"):
            r = specfun.evaluate_detail(name, 60.0)
            assert r.saturated
            assert np.isfinite(r.value)
            r_in = specfun.evaluate_detail(name, 10.0)
            assert not r_in.saturated
            assert r_in.abs_error_bound <= 1e-8

    def test_airy_bound_within_contract(self):
        assert specfun.AIRY_ERROR_BOUND <= 1e-9
        assert specfun.PHI_ERROR_BOUND <= 1e-9

    def test_saturated_phi_tracks_asymptote(self):
        v = specfun.fresnel_phi(-60.0)
        asym = math.sqrt(2 * math.pi) * math.cos(60.0 ** 2 / 2.0 - math.pi / 4.0)
        assert abs(v - asym) < 1e-12


class TestAsymptoticForms:
    """Public locally sinusoidal forms used by the WKB oracle."""

    def test_airy_prime_oscillatory(self):
        from scipy.special import airy
        for m in (3, 9, 15):
            zeta = m * math.pi - math.pi / 4.0    # envelope extremum
            x = (1.5 * zeta) ** (2.0 / 3.0)
            exact = airy(-x)[1]
            asym = specfun.airy_ai_prime_asymptotic(-x)
            assert abs(asym / exact - 1.0) < 0.01

    def test_phi_oscillatory(self):
        for m in (5, 20, 60):
            s = -math.sqrt(2 * m * math.pi + math.pi / 2.0)  # cos = +1
            exact = specfun.fresnel_phi(s)
            asym = specfun.fresnel_phi_asymptotic(s)
            assert abs(asym / exact - 1.0) < 0.01
