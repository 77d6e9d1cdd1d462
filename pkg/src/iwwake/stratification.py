"""Medium definition: squared Brunt-Vaisala frequency N^2(z, x, y).

Models live on the layer -h <= z <= 0 with slow horizontal variation.
The horizontal slow scale is carried by the model parameters themselves
(modulation scale L); "slow" is enforced by the slowness-ratio check
max |grad_xy N^2| * lambda_ref / N^2 <= slowness_limit, measured on a
sample grid at construction, rather than by an explicit small parameter.

Built-in model families:

* constant-N
* two-layer pycnocline (tanh-blended, C-infinity)
* smooth thermocline (sech^2 peak) with multiplicative horizontal
  modulation 1 + a cos(2 pi x / L) cos(2 pi y / L)
* tabulated z-profile replicated horizontally, same modulation

All built-ins are symmetric in y.  Fields are immutable after
construction and evaluation is pure.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import CubicSpline

DEFAULT_SLOWNESS_LIMIT = 0.1


class DomainError(ValueError):
    """Coordinates outside the declared (z, x, y) domain."""


@dataclass(frozen=True)
class SourceSpec:
    """Moving point-mass source: speed V along +x at depth z0.

    Parameters
    ----------
    speed : float
        V > 0 [m/s].
    depth : float
        Source depth z0, strictly inside (-h, 0) [m].
    t0_grid : array
        Ray departure times [s].
    omega_grid : array
        Launch frequencies, strictly inside (0, max N) [rad/s].
    branches : tuple
        Subset of (+1, -1); sign of the transverse wavenumber q.
    """

    speed: float
    depth: float
    t0_grid: np.ndarray = dc_field(default_factory=lambda: np.array([0.0]))
    omega_grid: np.ndarray = dc_field(default_factory=lambda: np.array([0.5]))
    branches: tuple = (1, -1)

    def __post_init__(self):
        object.__setattr__(self, "t0_grid", np.atleast_1d(np.asarray(self.t0_grid, float)))
        object.__setattr__(self, "omega_grid", np.atleast_1d(np.asarray(self.omega_grid, float)))

    def track_position(self, t0):
        """Source location (x0, y0) = (V t0, 0) at departure time t0."""
        return self.speed * np.asarray(t0, float), 0.0 * np.asarray(t0, float)


class StratificationField:
    """Evaluable N^2(z, x, y) over -h <= z <= 0. Use the classmethod
    constructors (constant_n, two_layer, thermocline, tabulated).

    Attributes
    ----------
    kind : str
        Model family name.
    h : float
        Layer depth [m], h > 0.
    x_bounds, y_bounds : (float, float)
        Declared horizontal domain [m].
    lambda_ref : float
        Reference wavelength for the slowness ratio [m].
    slowness_ratio : float
        Measured max |grad_xy N^2| lambda_ref / N^2 on the sample grid.
    """

    def __init__(self, kind, h, profile_fn, modulation_fn=None,
                 x_bounds=(-1e6, 1e6), y_bounds=(-1e6, 1e6),
                 lambda_ref=None, slowness_limit=DEFAULT_SLOWNESS_LIMIT,
                 params=None):
        if h <= 0:
            raise ValueError(f"layer depth must be positive, got h={h}")
        self.kind = kind
        self.h = float(h)
        self.x_bounds = (float(x_bounds[0]), float(x_bounds[1]))
        self.y_bounds = (float(y_bounds[0]), float(y_bounds[1]))
        self.lambda_ref = float(lambda_ref) if lambda_ref is not None else self.h
        self.slowness_limit = float(slowness_limit)
        self.params = dict(params or {})
        self._profile = profile_fn          # N^2(z), vectorized
        self._modulation = modulation_fn    # m(x, y) multiplicative, or None
        self.slowness_ratio = self._measure_slowness()
        self._check_nonnegative()

    # -- evaluation ----------------------------------------------------

    def n_squared(self, z, x, y):
        """N^2 at (z, x, y) [rad^2/s^2]; raises DomainError outside the box."""
        z = np.asarray(z, float)
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if np.any(z < -self.h - 1e-12) or np.any(z > 1e-12):
            raise DomainError(f"z outside [-h, 0], h={self.h}")
        if (np.any(x < self.x_bounds[0]) or np.any(x > self.x_bounds[1])
                or np.any(y < self.y_bounds[0]) or np.any(y > self.y_bounds[1])):
            raise DomainError("horizontal coordinates outside declared bounds")
        return self._n2_raw(z, x, y)

    def _n2_raw(self, z, x, y):
        out = self._profile(np.asarray(z, float))
        if self._modulation is not None:
            out = out * self._modulation(np.asarray(x, float), np.asarray(y, float))
        else:
            out = out * np.ones(np.broadcast(x, y).shape) if np.ndim(x) or np.ndim(y) else out
        return out

    def max_n(self, x, y, nz=513):
        """max over z of N(z, x, y) [rad/s], by dense scan."""
        zs = np.linspace(-self.h, 0.0, nz)
        n2 = self.n_squared(zs, np.broadcast_to(np.asarray(x, float), zs.shape) if np.ndim(x) == 0 else x,
                            np.broadcast_to(np.asarray(y, float), zs.shape) if np.ndim(y) == 0 else y)
        return float(np.sqrt(np.max(n2)))

    # -- construction-time checks --------------------------------------

    def _sample_grid(self, nz=41, nxy=17):
        zs = np.linspace(-self.h, 0.0, nz)
        xs = np.linspace(self.x_bounds[0], self.x_bounds[1], nxy)
        ys = np.linspace(self.y_bounds[0], self.y_bounds[1], nxy)
        return zs, xs, ys

    def _measure_slowness(self):
        if self._modulation is None:
            return 0.0
        zs, xs, ys = self._sample_grid()
        dx = max((self.x_bounds[1] - self.x_bounds[0]) * 1e-6, 1e-9)
        dy = max((self.y_bounds[1] - self.y_bounds[0]) * 1e-6, 1e-9)
        worst = 0.0
        prof = self._profile(zs)            # (nz,)
        for xv in xs:
            for yv in ys:
                m0 = self._modulation(xv, yv)
                gx = (self._modulation(xv + dx, yv) - self._modulation(xv - dx, yv)) / (2 * dx)
                gy = (self._modulation(xv, yv + dy) - self._modulation(xv, yv - dy)) / (2 * dy)
                n2 = prof * m0
                grad = np.abs(prof) * np.hypot(gx, gy)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(n2 > 0, grad * self.lambda_ref / n2, 0.0)
                worst = max(worst, float(np.max(ratio)))
        return worst

    def _check_nonnegative(self):
        zs, xs, ys = self._sample_grid(nz=101)
        prof = self._profile(zs)
        if np.any(prof < 0):
            raise ValueError("N^2 profile is negative somewhere in the layer")
        if self._modulation is not None:
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            if np.any(self._modulation(X, Y) < 0):
                raise ValueError("horizontal modulation drives N^2 negative")

    # -- built-in model families ---------------------------------------

    @classmethod
    def constant_n(cls, n0, h, **kw):
        """Uniform stratification N = n0 [rad/s]."""
        n0sq = float(n0) ** 2
        return cls("constant", h, lambda z: np.full_like(np.asarray(z, float), n0sq),
                   params={"n0": float(n0), "h": float(h)}, **kw)

    @classmethod
    def two_layer(cls, n_upper, n_lower, pycnocline_depth, pycnocline_width, h, **kw):
        """Two near-uniform layers blended by tanh across the pycnocline.

        pycnocline_depth is negative (inside the layer); width > 0 [m].
        """
        nu2, nl2 = float(n_upper) ** 2, float(n_lower) ** 2
        zp, d = float(pycnocline_depth), float(pycnocline_width)

        def prof(z):
            # upper value for z above zp, lower below, C-infinity blend
            return nl2 + (nu2 - nl2) * 0.5 * (1.0 + np.tanh((np.asarray(z, float) - zp) / d))

        return cls("two_layer", h, prof,
                   params={"n_upper": float(n_upper), "n_lower": float(n_lower),
                           "pycnocline_depth": zp, "pycnocline_width": d, "h": float(h)}, **kw)

    @classmethod
    def thermocline(cls, n0, peak, center, width, h,
                    mod_amplitude=0.0, mod_scale=None, **kw):
        """Background n0 plus a sech^2 thermocline peak, with optional
        horizontal modulation 1 + a cos(2 pi x / L) cos(2 pi y / L).

        Parameters
        ----------
        n0 : float
            Background buoyancy frequency [rad/s].
        peak : float
            Added N^2 at the thermocline center [rad^2/s^2], >= 0.
        center, width : float
            Thermocline center depth (negative) and width [m].
        mod_amplitude : float
            Dimensionless a, |a| < 1; 0 disables modulation.
        mod_scale : float
            Horizontal scale L [m]; required when mod_amplitude != 0.
        """
        n0sq = float(n0) ** 2
        pk, zc, d = float(peak), float(center), float(width)

        def prof(z):
            return n0sq + pk / np.cosh((np.asarray(z, float) - zc) / d) ** 2

        mod = _cosine_modulation(mod_amplitude, mod_scale)
        return cls("thermocline", h, prof, modulation_fn=mod,
                   params={"n0": float(n0), "peak": pk, "center": zc, "width": d,
                           "h": float(h), "mod_amplitude": float(mod_amplitude),
                           "mod_scale": mod_scale}, **kw)

    @classmethod
    def tabulated(cls, z, n2, mod_amplitude=0.0, mod_scale=None, **kw):
        """Tabulated N^2(z) profile replicated horizontally.

        z must be strictly decreasing from 0 to -h (the file convention);
        interpolated with a cubic spline.
        """
        z = np.asarray(z, float)
        n2 = np.asarray(n2, float)
        if z.ndim != 1 or z.shape != n2.shape or len(z) < 4:
            raise ValueError("profile needs matching 1-D z and N^2 arrays, >= 4 rows")
        if abs(z[0]) > 1e-9 or not np.all(np.diff(z) < 0):
            raise ValueError("profile z must be strictly decreasing from 0 to -h")
        h = -z[-1]
        spline = CubicSpline(z[::-1], n2[::-1])
        mod = _cosine_modulation(mod_amplitude, mod_scale)
        return cls("tabulated", h, lambda zz: spline(np.asarray(zz, float)),
                   modulation_fn=mod,
                   params={"n_rows": len(z), "h": float(h),
                           "mod_amplitude": float(mod_amplitude), "mod_scale": mod_scale}, **kw)

    @classmethod
    def from_profile_file(cls, path, **kw):
        """Load the two-column text profile (z [m], N^2 [rad^2/s^2])."""
        data = np.loadtxt(path)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError(f"profile file {path} must have two columns (z, N^2)")
        return cls.tabulated(data[:, 0], data[:, 1], **kw)


def _cosine_modulation(amplitude, scale):
    a = float(amplitude)
    if a == 0.0:
        return None
    if scale is None or scale <= 0:
        raise ValueError("modulation requires a positive horizontal scale")
    if abs(a) >= 1.0:
        raise ValueError("modulation amplitude must satisfy |a| < 1")
    k = 2.0 * np.pi / float(scale)

    def mod(x, y):
        return 1.0 + a * np.cos(k * np.asarray(x, float)) * np.cos(k * np.asarray(y, float))

    return mod


def eval_n2(field, z, x, y):
    """N^2(z, x, y) [rad^2/s^2]. Thin wrapper over field.n_squared."""
    return field.n_squared(z, x, y)


@dataclass
class ValidationReport:
    """Outcome of the medium/source invariant checks."""

    checks: list
    slowness_ratio: float

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def lines(self):
        return [f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
                for name, ok, detail in self.checks]


def validate(field, source):
    """Check the field and source invariants; failures are reported,
    not raised.

    Returns
    -------
    ValidationReport
        checks: list of (name, passed, detail) triples.
    """
    checks = []

    ratio = field.slowness_ratio
    checks.append(("horizontal slowness ratio",
                   ratio <= field.slowness_limit,
                   f"measured {ratio:.3e}, limit {field.slowness_limit:g}"))

    zs = np.linspace(-field.h, 0.0, 101)
    xs = np.linspace(field.x_bounds[0], field.x_bounds[1], 9)
    n2min = min(float(np.min(field.n_squared(zs, np.full_like(zs, xv), np.zeros_like(zs))))
                for xv in xs)
    checks.append(("N^2 >= 0 on sample grid", n2min >= 0.0, f"min {n2min:.3e}"))

    checks.append(("source speed V > 0", source.speed > 0, f"V = {source.speed:g}"))

    in_layer = -field.h < source.depth < 0.0
    checks.append(("source depth inside layer", in_layer,
                   f"z0 = {source.depth:g}, layer (-{field.h:g}, 0)"))

    x0, y0 = source.track_position(source.t0_grid)
    try:
        nmax_track = min(field.max_n(xv, yv) for xv, yv in zip(np.atleast_1d(x0), np.atleast_1d(y0)))
        wlo, whi = float(np.min(source.omega_grid)), float(np.max(source.omega_grid))
        ok = 0.0 < wlo and whi < nmax_track
        checks.append(("omega grid inside (0, max N) on track", ok,
                       f"omega in [{wlo:g}, {whi:g}], max N on track {nmax_track:g}"))
    except DomainError:
        checks.append(("omega grid inside (0, max N) on track", False,
                       "source track leaves the declared horizontal domain"))

    ok_br = len(source.branches) > 0 and set(source.branches) <= {1, -1}
    checks.append(("branch selection", ok_br, f"branches = {source.branches}"))

    return ValidationReport(checks=checks, slowness_ratio=ratio)
