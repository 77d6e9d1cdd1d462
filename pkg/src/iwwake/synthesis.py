"""Observable wave quantities from the traced fan and transport data.

Per-sample assembly of the global wave shapes:

    Airy vertical velocity   w   = w0   f(x,y,z,omega) Ai'(sigma_arg)
    Fresnel rise             eta = eta0 f(x,y,z,omega) Phi(sigma_arg)

    w0   = omega^2 K sigma^{1/4} (df/dz0) / [2 V K'_omega |D| K0^3 v0]^{1/2}
    eta0 = omega (df/dz0) / [2 V K'_omega |D| K0 v0]^{1/2}

where K, K'_omega, sigma are evaluated at the ray's current (x, y), the
launch-point quantities K0, v0 at (x0, y0) = (V t0, 0), and D is the
fan Jacobian.  With sigma = 1 both prefactors coincide with the
conservation-law amplitude psi = sqrt(C / (D P)), which the test suite
checks sample by sample (two-route equivalence).

The special-function argument maps the accumulated eikonal S* >= 0 onto
the oscillatory branch inside the wake:

    Airy:    sigma_arg = -sgn(S*) |3 S* / 2|^{2/3}
    Fresnel: sigma_arg = -sgn(S*) sqrt(2 |S*|)

so the wavefront S* = 0 gives sigma_arg = 0 (finite front values, Phi(0)
= sqrt(pi)/2) and large S* reproduces the locally sinusoidal WKB field,
which wkb_far_field evaluates as an oracle.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import griddata
from scipy.spatial import cKDTree

from . import specfun
from .transport import (WAVE_AIRY, WAVE_FRESNEL, WAVE_EXPONENT,
                        QUALITY_OK, QUALITY_DEAD)

WKB_THRESHOLD = 5.0


class NotApplicableError(ValueError):
    """WKB form requested below its validity threshold |sigma_arg| >= 5."""


def airy_argument(s_star):
    """Signed 2/3-power mapping of the eikonal onto the Ai' argument."""
    s = np.asarray(s_star, float)
    out = -np.sign(s) * np.abs(1.5 * s) ** (2.0 / 3.0)
    return float(out) if np.isscalar(s_star) else out


def fresnel_argument(s_star):
    """Signed sqrt(2 S*) mapping onto the Phi argument."""
    s = np.asarray(s_star, float)
    out = -np.sign(s) * np.sqrt(2.0 * np.abs(s))
    return float(out) if np.isscalar(s_star) else out


def sigma_argument(s_star, wave_kind):
    if wave_kind == WAVE_AIRY:
        return airy_argument(s_star)
    if wave_kind == WAVE_FRESNEL:
        return fresnel_argument(s_star)
    raise ValueError(f"unknown wave kind {wave_kind!r}")


_SHAPE_FN = {WAVE_AIRY: specfun.airy_ai_prime, WAVE_FRESNEL: specfun.fresnel_phi}
_SHAPE_FN_ASYMPTOTIC = {WAVE_AIRY: specfun.airy_ai_prime_asymptotic,
                        WAVE_FRESNEL: specfun.fresnel_phi_asymptotic}


@dataclass
class FieldSample:
    """One synthesized wave quantity at a space-time point.

    value = amplitude * shape(sigma_arg) with shape = Ai' (Airy w, [m/s])
    or Phi (Fresnel eta, [m]); amplitude already contains the
    eigenfunction factor f(x, y, z, omega).
    """

    t: float
    x: float
    y: float
    z: float
    mode: int
    wave_kind: str
    value: float
    sigma_arg: float
    amplitude: float
    s_star: float
    quality: str


def _prefactor(wave_kind, omega, K, Kw, sigma, slope, speed, D, K0, v0):
    """w0 / eta0 denominator assembly; |D| with the phase bookkeeping
    left to the transport layer."""
    if wave_kind == WAVE_AIRY:
        num = omega ** 2 * K * sigma ** 0.25 * slope
        den = 2.0 * speed * Kw * abs(D) * K0 ** 3 * v0
    else:
        num = omega * slope
        den = 2.0 * speed * Kw * abs(D) * K0 * v0
    return num / np.sqrt(den)


def field_sample(fan, tfan, mode_provider, source, surface, idx, z,
                 sigma_fn=None, shape_fn=None):
    """Evaluate one FieldSample at fan index idx = (iw, it0, ib, it).

    Masked transport (caustic, dead ray) propagates into the sample
    quality with value NaN; nothing is silently zeroed.
    """
    iw, it0, ib, it = idx
    wave_kind = tfan.wave_kind
    omega = float(fan.omegas[iw])
    t = float(fan.times[it])
    state = tfan.state_at(iw, it0, ib, it)

    if not fan.alive[iw, it0, ib, it] or state.quality == QUALITY_DEAD:
        return FieldSample(t=t, x=np.nan, y=np.nan, z=float(z), mode=surface.n,
                           wave_kind=wave_kind, value=np.nan, sigma_arg=np.nan,
                           amplitude=np.nan, s_star=np.nan, quality=QUALITY_DEAD)

    x = float(fan.x[iw, it0, ib, it])
    y = float(fan.y[iw, it0, ib, it])
    s_star = float(fan.s_star[iw, it0, ib, it])
    sig_arg = sigma_argument(s_star, wave_kind)

    if state.quality != QUALITY_OK:
        return FieldSample(t=t, x=x, y=y, z=float(z), mode=surface.n,
                           wave_kind=wave_kind, value=np.nan, sigma_arg=sig_arg,
                           amplitude=np.nan, s_star=s_star, quality=state.quality)

    x0, y0 = source.track_position(float(fan.t0s[it0]))
    x0, y0 = float(x0), float(y0)
    K0 = surface.eval_raw(omega, x0, y0)[0]
    v0 = np.sqrt(K0 ** 2 - (omega / source.speed) ** 2)
    K, Kw, _, _ = surface.eval_raw(omega, x, y)
    sigma = 1.0 if sigma_fn is None else float(sigma_fn(omega, x, y))

    slope = float(mode_provider(omega, x0, y0).df_dz_at(source.depth))
    f_here = float(mode_provider(omega, x, y).f_at(z))

    pref = _prefactor(tfan.wave_kind, omega, K, Kw, sigma, slope,
                      source.speed, state.D, K0, v0)
    amplitude = pref * f_here
    shape = (shape_fn or _SHAPE_FN[wave_kind])(sig_arg)
    return FieldSample(t=t, x=x, y=y, z=float(z), mode=surface.n,
                       wave_kind=wave_kind, value=amplitude * float(shape),
                       sigma_arg=sig_arg, amplitude=amplitude, s_star=s_star,
                       quality=state.quality)


def airy_w(fan, tfan, mode_provider, source, surface, idx, z, sigma_fn=None):
    """Vertical velocity of the global Airy wave at one fan sample."""
    if tfan.wave_kind != WAVE_AIRY:
        raise ValueError("transport data was evaluated for a different wave kind")
    return field_sample(fan, tfan, mode_provider, source, surface, idx, z, sigma_fn)


def fresnel_eta(fan, tfan, mode_provider, source, surface, idx, z):
    """Rise of the global Fresnel wave at one fan sample."""
    if tfan.wave_kind != WAVE_FRESNEL:
        raise ValueError("transport data was evaluated for a different wave kind")
    return field_sample(fan, tfan, mode_provider, source, surface, idx, z)


def wkb_far_field(fan, tfan, mode_provider, source, surface, idx, z,
                  sigma_fn=None):
    """Same mode field with the wave shape replaced by its large-argument
    asymptotic (locally sinusoidal on the wave side).  Oracle only.

    Raises NotApplicableError for |sigma_arg| < 5.
    """
    iw, it0, ib, it = idx
    s_star = float(fan.s_star[iw, it0, ib, it])
    sig_arg = sigma_argument(s_star, tfan.wave_kind)
    if not np.isfinite(sig_arg) or abs(sig_arg) < WKB_THRESHOLD:
        raise NotApplicableError(
            f"|sigma_arg| = {abs(sig_arg):.3g} below the WKB threshold {WKB_THRESHOLD:g}")
    return field_sample(fan, tfan, mode_provider, source, surface, idx, z,
                        sigma_fn, shape_fn=_SHAPE_FN_ASYMPTOTIC[tfan.wave_kind])


def horizontal_velocity(fan, tfan, mode_provider, source, surface, idx, z):
    """Horizontal velocity amplitude vector at one fan sample:

        u0 = -psi (df/dz) (S*/a)^{1-a} k / |k|^2,   k = (p, q)

    (physical coordinates, the slow-scale bookkeeping factor absorbed).
    Returns a zero vector at the front S* = 0 since 1 - a > 0.
    """
    iw, it0, ib, it = idx
    state = tfan.state_at(iw, it0, ib, it)
    if state.quality != QUALITY_OK:
        return np.array([np.nan, np.nan])
    a = WAVE_EXPONENT[tfan.wave_kind]
    s_star = float(fan.s_star[iw, it0, ib, it])
    p = float(fan.p[iw, it0, ib, it])
    q = float(fan.q[iw, it0, ib, it])
    x = float(fan.x[iw, it0, ib, it])
    y = float(fan.y[iw, it0, ib, it])
    omega = float(fan.omegas[iw])
    dfdz = float(mode_provider(omega, x, y).df_dz_at(z))
    k2 = p * p + q * q
    scale = -state.psi * dfdz * (abs(s_star) / a) ** (1.0 - a) / k2
    return scale * np.array([p, q])


def collect_samples(fan, tfan, mode_provider, source, surface, z,
                    sigma_fn=None, time_index=None):
    """FieldSamples for every launched ray, default at the final shared
    time (ray endpoints); time_index=None means the last time at which
    each ray is alive is NOT substituted - dead rays yield dead samples.
    """
    it = len(fan.times) - 1 if time_index is None else time_index
    out = []
    nw, nt0, nb, _ = fan.shape
    for iw in range(nw):
        for it0 in range(nt0):
            for ib in range(nb):
                if not np.any(fan.alive[iw, it0, ib]):
                    continue
                out.append(field_sample(fan, tfan, mode_provider, source,
                                        surface, (iw, it0, ib, it), z, sigma_fn))
    return out


@dataclass
class GridResult:
    """Mode-summed field on a regular (x, y) grid at fixed z and t.

    values holds NaN where no requested mode has a nearby ray sample.
    """

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray       # (nx, ny), NaN-masked
    z: float
    t: float
    wave_kind: str
    modes: tuple

    @property
    def mask(self):
        return ~np.isfinite(self.values)


def _grid_one_mode(samples, X, Y, max_gap):
    pts = np.array([(s.x, s.y) for s in samples if s.quality == QUALITY_OK
                    and np.isfinite(s.value)])
    if len(pts) == 0:
        return np.full(X.shape, np.nan)
    vals = np.array([s.value for s in samples if s.quality == QUALITY_OK
                     and np.isfinite(s.value)])
    if len(pts) >= 4:
        grid = griddata(pts, vals, (X, Y), method="linear")
    else:
        grid = griddata(pts, vals, (X, Y), method="nearest")
    tree = cKDTree(pts)
    if max_gap is None:
        if len(pts) > 1:
            d_nn, _ = tree.query(pts, k=2)
            max_gap = 2.0 * float(np.median(d_nn[:, 1]))
        else:
            max_gap = np.inf
    dist, _ = tree.query(np.column_stack([X.ravel(), Y.ravel()]))
    far = dist.reshape(X.shape) > max_gap
    grid = np.where(far, np.nan, grid)
    return grid


def synthesize_grid(samples_by_mode, x_nodes, y_nodes, z, t, wave_kind,
                    max_gap=None):
    """Map scattered per-mode ray samples onto a regular grid and sum the
    modes.  A cell is valid only where every requested mode has a nearby
    sample (triangulated interpolation inside the sample cloud, distance
    mask max_gap outside); masked samples never enter.

    Returns
    -------
    GridResult
    """
    x_nodes = np.asarray(x_nodes, float)
    y_nodes = np.asarray(y_nodes, float)
    X, Y = np.meshgrid(x_nodes, y_nodes, indexing="ij")
    total = np.zeros(X.shape)
    mask = np.zeros(X.shape, dtype=bool)
    any_mode = False
    for mode, samples in samples_by_mode.items():
        g = _grid_one_mode(samples, X, Y, max_gap)
        total = total + np.where(np.isfinite(g), g, 0.0)
        mask |= ~np.isfinite(g)
        any_mode = True
    if not any_mode:
        import warnings
        warnings.warn("empty fan: no samples to synthesize", RuntimeWarning,
                      stacklevel=2)
        mask[:] = True
    values = np.where(mask, np.nan, total)
    return GridResult(x_nodes=x_nodes, y_nodes=y_nodes, values=values,
                      z=float(z), t=float(t), wave_kind=wave_kind,
                      modes=tuple(sorted(samples_by_mode)))


def write_field_csv(samples, path):
    """Scattered dump, columns
    t,x,y,z,mode,wave_kind,S_star,sigma_arg,amplitude,value,quality."""
    with open(path, "w") as fh:
        fh.write("t,x,y,z,mode,wave_kind,S_star,sigma_arg,amplitude,value,quality\n")
        for s in samples:
            fh.write(",".join([_fmt(s.t), _fmt(s.x), _fmt(s.y), _fmt(s.z),
                               str(s.mode), s.wave_kind, _fmt(s.s_star),
                               _fmt(s.sigma_arg), _fmt(s.amplitude),
                               _fmt(s.value), s.quality]) + "\n")


def write_grid_dump(grid, path):
    """Header with the grid spec, then row-major values (rows over x),
    nan marking masked cells."""
    with open(path, "w") as fh:
        fh.write("# iwwake grid dump v1\n")
        fh.write(f"# wave_kind={grid.wave_kind} modes={','.join(str(m) for m in grid.modes)}"
                 f" z={_fmt(grid.z)} t={_fmt(grid.t)}\n")
        fh.write(f"# nx={len(grid.x_nodes)} x0={_fmt(grid.x_nodes[0])}"
                 f" x1={_fmt(grid.x_nodes[-1])}\n")
        fh.write(f"# ny={len(grid.y_nodes)} y0={_fmt(grid.y_nodes[0])}"
                 f" y1={_fmt(grid.y_nodes[-1])}\n")
        for row in grid.values:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    v = float(v)
    return "nan" if not np.isfinite(v) else f"{v:.17g}"
