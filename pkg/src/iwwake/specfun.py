"""Special functions for the global wave shapes.

The two wave families are built from the Airy function Ai and its
derivative, and from the Fresnel-type profile

    Phi(s) = Re int_0^inf exp(-i t s - i t^2 / 2) dt

Phi is evaluated by completing the square in the exponent, which reduces
it exactly to the standard Fresnel cosine/sine integrals with kernel
cos(u^2/2), sin(u^2/2):

    Phi(s) = cos(s^2/2) [sqrt(pi)/2 - C(s)] + sin(s^2/2) [sqrt(pi)/2 - S(s)]

The defining improper oscillatory integral is numerically hostile; the
reduction is exact, so no oscillatory quadrature is performed here (the
test suite keeps an independent quadrature oracle).

Arguments are capped at |s| <= SATURATION_LIMIT; beyond that the leading
large-argument asymptotic is returned and the saturation flag is set in
the *_detail variants.  All functions are pure and accept scalars or
arrays.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SQRT_PI = math.sqrt(math.pi)
HALF_SQRT_PI = SQRT_PI / 2.0

#: arguments beyond this magnitude saturate to the asymptotic limit
SATURATION_LIMIT = 50.0

# documented absolute error bounds over |sigma| <= SATURATION_LIMIT
AIRY_ERROR_BOUND = 1e-10
PHI_ERROR_BOUND = 1e-9
PHI_PRIME_ERROR_BOUND = 1e-8


@dataclass(frozen=True)
class SpecFunValue:
    """One special-function evaluation with its absolute error bound."""

    value: float
    abs_error_bound: float
    saturated: bool = False


def _check_finite(sigma):
    s = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("special-function argument must be finite")
    return s


def _fresnel_halfsq(s):
    """Fresnel integrals with kernel cos(u^2/2), sin(u^2/2) on [0, s].

    scipy's C, S use kernel cos(pi t^2/2); substituting u = t sqrt(pi)
    gives int_0^s cos(u^2/2) du = sqrt(pi) * C(s / sqrt(pi)).
    """
    ssc, csc = special.fresnel(s / SQRT_PI)
    return SQRT_PI * csc, SQRT_PI * ssc


def airy_ai(sigma):
    """Airy function Ai(sigma).

    Parameters
    ----------
    sigma : float or ndarray
        Finite argument; |sigma| > SATURATION_LIMIT saturates.

    Returns
    -------
    float or ndarray
    """
    s = _check_finite(sigma)
    out = special.airy(np.clip(s, -SATURATION_LIMIT, SATURATION_LIMIT))[0]
    sat = np.abs(s) > SATURATION_LIMIT
    if np.any(sat):
        out = np.where(sat, _airy_asymptotic(s, derivative=False), out)
    return float(out) if np.isscalar(sigma) else out


def airy_ai_prime(sigma):
    """Derivative Airy function Ai'(sigma)."""
    s = _check_finite(sigma)
    out = special.airy(np.clip(s, -SATURATION_LIMIT, SATURATION_LIMIT))[1]
    sat = np.abs(s) > SATURATION_LIMIT
    if np.any(sat):
        out = np.where(sat, _airy_asymptotic(s, derivative=True), out)
    return float(out) if np.isscalar(sigma) else out


def fresnel_phi(sigma):
    """Fresnel wave profile Phi(sigma).

    Phi(0) = sqrt(pi)/2.  Decays algebraically for sigma -> +inf (ahead
    of the front) and oscillates with O(1) amplitude for sigma -> -inf.
    """
    s = _check_finite(sigma)
    sc = np.clip(s, -SATURATION_LIMIT, SATURATION_LIMIT)
    ct, st = _fresnel_halfsq(sc)
    half = sc * sc / 2.0
    out = np.cos(half) * (HALF_SQRT_PI - ct) + np.sin(half) * (HALF_SQRT_PI - st)
    sat = np.abs(s) > SATURATION_LIMIT
    if np.any(sat):
        out = np.where(sat, _phi_asymptotic(s), out)
    return float(out) if np.isscalar(sigma) else out


def fresnel_phi_prime(sigma):
    """Derivative dPhi/dsigma via the differentiated closed form.

    Differentiating the reduction and using C'(s) = cos(s^2/2),
    S'(s) = sin(s^2/2) collapses the non-secular terms to -1:

        Phi'(s) = s [cos(s^2/2)(sqrt(pi)/2 - S(s))
                     - sin(s^2/2)(sqrt(pi)/2 - C(s))] - 1
    """
    s = _check_finite(sigma)
    sc = np.clip(s, -SATURATION_LIMIT, SATURATION_LIMIT)
    ct, st = _fresnel_halfsq(sc)
    half = sc * sc / 2.0
    out = sc * (np.cos(half) * (HALF_SQRT_PI - st)
                - np.sin(half) * (HALF_SQRT_PI - ct)) - 1.0
    sat = np.abs(s) > SATURATION_LIMIT
    if np.any(sat):
        out = np.where(sat, _phi_prime_asymptotic(s), out)
    return float(out) if np.isscalar(sigma) else out


def airy_ai_asymptotic(sigma):
    """Leading large-|sigma| form of Ai: oscillatory for sigma < 0,
    exponentially small for sigma > 0.  This is the locally sinusoidal
    shape the WKB limit reduces to."""
    s = np.asarray(np.where(np.asarray(sigma, float) == 0, np.nan, sigma), float)
    a = np.abs(s)
    zeta = (2.0 / 3.0) * a ** 1.5
    osc = a ** -0.25 / SQRT_PI * np.sin(zeta + np.pi / 4.0)
    with np.errstate(over="ignore", under="ignore"):
        decay = np.exp(-zeta) * a ** -0.25 / (2.0 * SQRT_PI)
    out = np.where(s < 0, osc, decay)
    return float(out) if np.isscalar(sigma) else out


def airy_ai_prime_asymptotic(sigma):
    """Leading large-|sigma| form of Ai'."""
    s = np.asarray(np.where(np.asarray(sigma, float) == 0, np.nan, sigma), float)
    a = np.abs(s)
    zeta = (2.0 / 3.0) * a ** 1.5
    osc = -(a ** 0.25) / SQRT_PI * np.cos(zeta + np.pi / 4.0)
    with np.errstate(over="ignore", under="ignore"):
        decay = -np.exp(-zeta) * a ** 0.25 / (2.0 * SQRT_PI)
    out = np.where(s < 0, osc, decay)
    return float(out) if np.isscalar(sigma) else out


def fresnel_phi_asymptotic(sigma):
    """Leading large-|sigma| form of Phi: sqrt(2 pi) cos(s^2/2 - pi/4) on
    the oscillatory side, algebraic -1/s^3 decay ahead of the front."""
    s = np.asarray(np.where(np.asarray(sigma, float) == 0, np.nan, sigma), float)
    osc = math.sqrt(2.0 * math.pi) * np.cos(s * s / 2.0 - np.pi / 4.0)
    decay = -1.0 / s ** 3
    out = np.where(s < 0, osc, decay)
    return float(out) if np.isscalar(sigma) else out


def fresnel_phi_prime_asymptotic(sigma):
    """Leading large-|sigma| form of dPhi/dsigma."""
    s = np.asarray(np.where(np.asarray(sigma, float) == 0, np.nan, sigma), float)
    osc = -math.sqrt(2.0 * math.pi) * s * np.sin(s * s / 2.0 - np.pi / 4.0)
    decay = 3.0 / s ** 4
    out = np.where(s < 0, osc, decay)
    return float(out) if np.isscalar(sigma) else out


def _airy_asymptotic(s, derivative):
    fn = airy_ai_prime_asymptotic if derivative else airy_ai_asymptotic
    return fn(np.asarray(s, float))


def _phi_asymptotic(s):
    return fresnel_phi_asymptotic(np.asarray(s, float))


def _phi_prime_asymptotic(s):
    return fresnel_phi_prime_asymptotic(np.asarray(s, float))


_DETAIL_TABLE = {
    "airy_ai": (airy_ai, AIRY_ERROR_BOUND),
    "airy_ai_prime": (airy_ai_prime, AIRY_ERROR_BOUND),
    "fresnel_phi": (fresnel_phi, PHI_ERROR_BOUND),
    "fresnel_phi_prime": (fresnel_phi_prime, PHI_PRIME_ERROR_BOUND),
}


def evaluate_detail(name, sigma):
    """Evaluate one of the four profile functions with its error bound.

    Returns a SpecFunValue; `saturated` is set when |sigma| exceeds
    SATURATION_LIMIT and the asymptotic limit was substituted.
    """
    fn, bound = _DETAIL_TABLE[name]
    value = fn(float(sigma))
    return SpecFunValue(value=value, abs_error_bound=bound,
                        saturated=abs(float(sigma)) > SATURATION_LIMIT)
