"""Vertical eigenvalue problem at one (omega, x, y).

For each mode index n we solve

    f'' + K^2 (N^2(z, x, y) / omega^2 - 1) f = 0,   f(-h) = f(0) = 0

for the horizontal wavenumber K > 0 (the n-th eigenvalue in increasing
order) and the eigenfunction f, normalized by

    int_{-h}^{0} [N^2 - omega^2] f^2 dz = 1

with the sign fixed by df/dz > 0 at the bottom z = -h.

Method: Numerov shooting from z = -h on a uniform grid.  Eigenvalues are
bracketed with the Sturm oscillation count and refined by bisection on a
monotone past-the-eigenvalue predicate (interior node count, plus the
endpoint sign to resolve the final grid cell).  The eigenvalue is
independent of the shooting slope, so normalization is a pure projection.

Constant-N oracle used throughout the tests:

    K = (n pi / h) * omega / sqrt(N^2 - omega^2)
    dK/domega = (n pi / h) * N^2 / (N^2 - omega^2)^{3/2}
"""

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

DEFAULT_NZ = 2001


class NoPropagatingModeError(ValueError):
    """omega at or above max N: the mode does not propagate."""


class ModeSolverError(RuntimeError):
    """Eigenvalue bracketing or integration failure, with diagnostics."""


class DerivativeError(RuntimeError):
    """Frequency-derivative step underflow near omega -> max N."""


@njit(cache=True, nogil=True)
def _numerov_endpoint(q, K, dz):
    """Shoot f across the grid; return (f_end, interior sign changes).

    q is the coefficient profile N^2/omega^2 - 1 on the uniform grid,
    K the trial eigenvalue.  Initial data f(-h) = 0 with unit slope.
    """
    nz = q.shape[0]
    K2 = K * K
    w12 = dz * dz / 12.0
    cm = 1.0 + w12 * K2 * q[0]
    cc = 1.0 + w12 * K2 * q[1]
    f_prev = 0.0
    f_curr = dz - K2 * q[0] * dz ** 3 / 6.0
    cnt = 0
    for i in range(1, nz - 1):
        cp = 1.0 + w12 * K2 * q[i + 1]
        f_next = ((12.0 - 10.0 * cc) * f_curr - cm * f_prev) / cp
        if i < nz - 2 and f_next * f_curr < 0.0:
            cnt += 1
        f_prev = f_curr
        f_curr = f_next
        cm = cc
        cc = cp
    return f_curr, cnt


@njit(cache=True, nogil=True)
def _numerov_profile(q, K, dz, out):
    """Shoot and store the full (unnormalized) eigenfunction samples."""
    nz = q.shape[0]
    K2 = K * K
    w12 = dz * dz / 12.0
    cm = 1.0 + w12 * K2 * q[0]
    cc = 1.0 + w12 * K2 * q[1]
    out[0] = 0.0
    out[1] = dz - K2 * q[0] * dz ** 3 / 6.0
    for i in range(1, nz - 1):
        cp = 1.0 + w12 * K2 * q[i + 1]
        out[i + 1] = ((12.0 - 10.0 * cc) * out[i] - cm * out[i - 1]) / cp
        cm = cc
        cc = cp


@dataclass
class ModeSolution:
    """One vertical mode at one (omega, x, y).

    f_samples carries the normalized eigenfunction on z_grid (uniform
    from -h to 0); K is the mode wavenumber [rad/m].  df/dz of the
    cubic-spline representation is exposed through df_dz_at.
    """

    n: int
    omega: float
    x: float
    y: float
    K: float
    z_grid: np.ndarray
    f_samples: np.ndarray
    norm_integral: float
    integrand_sign_change: bool

    def __post_init__(self):
        self._spline = CubicSpline(self.z_grid, self.f_samples)
        self._dspline = self._spline.derivative()

    def f_at(self, z):
        return self._spline(z)

    def df_dz_at(self, z):
        """Slope of the normalized eigenfunction at depth z [1/m units]."""
        return self._dspline(z)

    def interior_zero_count(self):
        s = self.f_samples[1:-1]
        return int(np.count_nonzero(s[1:] * s[:-1] < 0))


def _coefficient_profile(field, omega, x, y, nz):
    z = np.linspace(-field.h, 0.0, nz)
    n2 = field.n_squared(z, np.full(nz, float(x)), np.full(nz, float(y)))
    return z, np.asarray(n2, float) / omega ** 2 - 1.0, n2


def _bracket_and_bisect(q, dz, n, omega, x, y, max_expand=70, iters=200):
    """Locate the n-th eigenvalue of the shot problem.

    The predicate past(K) = "K is above the n-th eigenvalue" is monotone:
    it is true when the interior node count reaches n, or when the count
    is n-1 but the endpoint value has already flipped to sign (-1)^n
    (node inside the final grid cell).
    """
    qmax = float(np.max(q))
    if qmax <= 0.0:
        raise NoPropagatingModeError(
            f"no propagating mode: omega={omega:g} at ({x:g},{y:g}) has N <= omega everywhere")
    s = (-1.0) ** (n - 1)

    def past(K):
        f_end, cnt = _numerov_endpoint(q, K, dz)
        if not np.isfinite(f_end):
            raise ModeSolverError(
                f"shooting overflow at K={K:g} (omega={omega:g}, x={x:g}, y={y:g})")
        return cnt >= n or f_end * s <= 0.0

    # Sturm comparison with the constant coefficient qmax gives a lower
    # bound n*pi/(h*sqrt(qmax)); back off slightly and expand upward.
    h_layer = dz * (len(q) - 1)
    K_lo = 0.9 * n * np.pi / (h_layer * np.sqrt(qmax))
    guard = 0
    while past(K_lo):
        K_lo *= 0.5
        guard += 1
        if guard > max_expand:
            raise ModeSolverError(
                f"could not find lower bracket for mode n={n} at omega={omega:g}, ({x:g},{y:g})")
    K_hi = 2.0 * K_lo
    guard = 0
    while not past(K_hi):
        K_hi *= 2.0
        guard += 1
        if guard > max_expand:
            raise ModeSolverError(
                f"could not find upper bracket for mode n={n} at omega={omega:g}, ({x:g},{y:g})")
    lo, hi = K_lo, K_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if past(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def solve_mode(field, omega, x, y, n, nz=DEFAULT_NZ, shoot_slope=1.0):
    """Solve the vertical eigenvalue problem for mode n at (omega, x, y).

    Parameters
    ----------
    field : StratificationField
    omega : float
        Frequency [rad/s], 0 < omega < max_z N(z, x, y).
    x, y : float
        Horizontal location [m].
    n : int
        Mode index, n >= 1 (n-1 interior zeros).
    nz : int
        Uniform z-grid size (default 2001).
    shoot_slope : float
        Initial shooting slope; the result is independent of it
        (normalization is a projection), kept for verification.

    Returns
    -------
    ModeSolution
    """
    if n < 1:
        raise ValueError("mode index must be a positive integer")
    omega = float(omega)
    if omega <= 0:
        raise NoPropagatingModeError(f"omega must be positive, got {omega}")
    nmax = field.max_n(x, y)
    if omega >= nmax:
        raise NoPropagatingModeError(
            f"omega={omega:g} >= max N={nmax:g} at ({x:g},{y:g}): no propagating mode")

    z, q, n2 = _coefficient_profile(field, omega, x, y, nz)
    dz = z[1] - z[0]
    K = _bracket_and_bisect(q, dz, n, omega, x, y)

    f = np.empty(nz)
    _numerov_profile(q, K, dz, f)
    f *= float(shoot_slope)
    # f[-1] is the shooting miss at z = 0, below ~1e-9 at converged K;
    # kept as computed so the samples satisfy the discrete recurrence

    weight = n2 - omega ** 2
    integral = float(simpson(weight * f * f, x=z))
    if integral <= 0.0:
        raise ModeSolverError(
            f"normalization integral non-positive ({integral:g}) for n={n}, omega={omega:g}")
    f /= np.sqrt(integral)
    if f[1] < 0.0:  # enforce df/dz > 0 at z = -h
        f = -f

    return ModeSolution(
        n=n, omega=omega, x=float(x), y=float(y), K=float(K),
        z_grid=z, f_samples=f, norm_integral=integral,
        integrand_sign_change=bool(np.any(weight < 0) and np.any(weight > 0)),
    )


def mode_wavenumber(field, omega, x, y, n, nz=DEFAULT_NZ):
    """Eigenvalue K only (skips eigenfunction assembly); used by sweeps."""
    omega = float(omega)
    if omega <= 0 or omega >= field.max_n(x, y):
        raise NoPropagatingModeError(
            f"omega={omega:g} outside (0, max N) at ({x:g},{y:g})")
    z, q, _ = _coefficient_profile(field, omega, x, y, nz)
    return _bracket_and_bisect(q, z[1] - z[0], n, omega, x, y)


def domega_derivative(field, omega, x, y, n, nz=DEFAULT_NZ):
    """dK/domega by centered differences with one Richardson refinement.

    Step h = max(1e-6, 1e-4 * omega), shrunk if omega + h leaves
    (0, max N); raises DerivativeError when no usable step remains.
    """
    omega = float(omega)
    nmax = field.max_n(x, y)
    h = max(1e-6, 1e-4 * omega)
    h = min(h, 0.45 * (nmax - omega), 0.45 * omega)
    if h < 1e-9 * omega:
        raise DerivativeError(
            f"frequency step underflow near omega={omega:g} (max N={nmax:g})")

    def central(step):
        kp = mode_wavenumber(field, omega + step, x, y, n, nz)
        km = mode_wavenumber(field, omega - step, x, y, n, nz)
        return (kp - km) / (2.0 * step)

    d_full = central(h)
    d_half = central(0.5 * h)
    return (4.0 * d_half - d_full) / 3.0


class ModeCache:
    """Memoized solve_mode front end keyed by (omega, x, y).

    The transport and synthesis stages look modes up repeatedly at the
    same launch and sample points; this keeps each eigen-solve to one.
    For horizontally uniform media pass uniform=True so one solve per
    omega serves every location.
    """

    def __init__(self, field, n, nz=DEFAULT_NZ, uniform=False):
        self.field = field
        self.n = int(n)
        self.nz = int(nz)
        self.uniform = bool(uniform)
        self._store = {}

    def __call__(self, omega, x, y):
        key = (float(omega),) if self.uniform else (float(omega), float(x), float(y))
        sol = self._store.get(key)
        if sol is None:
            sol = solve_mode(self.field, omega, x, y, self.n, self.nz)
            self._store[key] = sol
        return sol


def constant_n_wavenumber(n0, h, omega, n):
    """Analytic constant-N dispersion K = (n pi / h) omega / sqrt(N^2 - omega^2)."""
    return n * np.pi / h * omega / np.sqrt(n0 ** 2 - omega ** 2)


def constant_n_domega(n0, h, omega, n):
    """Analytic dK/domega for the constant-N layer."""
    return n * np.pi / h * n0 ** 2 / (n0 ** 2 - omega ** 2) ** 1.5
