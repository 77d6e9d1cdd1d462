"""Amplitude transport along the ray fan.

The conservation law along rays,

    D(t, t0, omega) psi^2(t, t0, omega) P(t, t0, omega) = C(omega, t0),

fixes the amplitude factor psi once the source constant C is known:

    Airy:     P = sqrt(sigma) K'_omega / K^2
              C = omega^4 (df/dz0)^2 / (2 V K0^3 v0)
    Fresnel:  P = K'_omega
              C = omega^2 (df/dz0)^2 / (2 V K0 v0)

with K0, v0 at the launch point (x0, y0) = (V t0, 0) and the slope
df/dz0 from the vertical mode there.  The geometric-spreading Jacobian

    D = x'_t0 y'_omega - x'_omega y'_t0

is formed by centered differences across the fan at a common time
(optionally Richardson-refined with the double-offset stencil).  The
quantity I = psi^2 P is the transported adiabatic invariant; the
algebraic form above is used directly, no transport ODE is integrated.

sigma(omega, x, y) is a pluggable medium coefficient (default 1); the
Fresnel branch contains no sigma and carries the quantitative checks.
Caustics (|D| below delta_caustic times the median |D| over the fan at
the same time) are masked, never zeroed, and D sign changes along each
ray are counted without applying a phase correction.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

WAVE_AIRY = "airy"
WAVE_FRESNEL = "fresnel"
WAVE_KINDS = (WAVE_AIRY, WAVE_FRESNEL)

#: wave-front exponents: sigma_arg = (S*/a)^a shapes
WAVE_EXPONENT = {WAVE_AIRY: 2.0 / 3.0, WAVE_FRESNEL: 0.5}

DELTA_CAUSTIC = 1e-3
NEAR_CONE_EPS = 1e-6   # v^2 < eps * K^2 flags a near-cone launch

QUALITY_OK = "ok"
QUALITY_CAUSTIC = "caustic-masked"
QUALITY_NEAR_CONE = "near-cone"
QUALITY_DEAD = "dead-ray"


class NeighborUnavailableError(RuntimeError):
    """A fan neighbor needed for the Jacobian stencil is missing/dead."""


class EvanescentError(ValueError):
    """v^2 = K^2 - omega^2/V^2 <= 0 at the launch point."""


def _fan_value(fan, name, iw, it0, ib, it):
    v = getattr(fan, name)[iw, it0, ib, it]
    if not np.isfinite(v):
        raise NeighborUnavailableError(
            f"ray (omega#{iw}, t0#{it0}, branch#{ib}) has no live sample at t index {it}")
    return v


def _fan_derivatives(fan, iw, it0, ib, it, step):
    """(x'_t0, y'_t0, x'_omega, y'_omega) at one fan sample, offset
    `step` in the index grids; one-sided at the fan edge."""
    nw, nt0 = len(fan.omegas), len(fan.t0s)
    downgraded = False

    def axis_diff(name, axis):
        nonlocal downgraded
        if axis == "t0":
            grid, size, center = fan.t0s, nt0, it0

            def val(j):
                return _fan_value(fan, name, iw, j, ib, it)
        else:
            grid, size, center = fan.omegas, nw, iw

            def val(j):
                return _fan_value(fan, name, j, it0, ib, it)
        lo, hi = center - step, center + step
        if lo >= 0 and hi < size:
            return (val(hi) - val(lo)) / (grid[hi] - grid[lo])
        downgraded = True
        if hi < size:
            return (val(hi) - val(center)) / (grid[hi] - grid[center])
        if lo >= 0:
            return (val(center) - val(lo)) / (grid[center] - grid[lo])
        raise NeighborUnavailableError(
            f"no {axis} neighbors within the fan for index {center} (step {step})")

    x_t0 = axis_diff("x", "t0")
    y_t0 = axis_diff("y", "t0")
    x_w = axis_diff("x", "omega")
    y_w = axis_diff("y", "omega")
    return x_t0, y_t0, x_w, y_w, downgraded


def jacobian(fan, iw, it0, ib, it, refine=False):
    """Geometric-spreading Jacobian D at one fan sample.

    Centered finite differences across the (t0, omega) fan at the common
    time fan.times[it]; falls back to one-sided differences at the fan
    edge.  With refine=True a Richardson combination of the single- and
    double-offset stencils is returned where available.

    Returns
    -------
    (D, downgraded) : (float, bool)
        downgraded marks one-sided (edge) stencils.
    """
    t = fan.times[it]
    t0 = fan.t0s[it0]
    if t <= t0 + 1e-15:
        # all rays of one departure time start at one source point
        return 0.0, False

    x_t0, y_t0, x_w, y_w, downgraded = _fan_derivatives(fan, iw, it0, ib, it, 1)
    d1 = x_t0 * y_w - x_w * y_t0
    if not refine or downgraded:
        return d1, downgraded
    try:
        x_t0, y_t0, x_w, y_w, dg2 = _fan_derivatives(fan, iw, it0, ib, it, 2)
    except NeighborUnavailableError:
        return d1, downgraded
    if dg2:
        return d1, downgraded
    d2 = x_t0 * y_w - x_w * y_t0
    return (4.0 * d1 - d2) / 3.0, False


def p_factor(surface, omega, x, y, wave_kind, sigma_fn=None):
    """Wave-type factor P at the ray's current position.

    Airy: sqrt(sigma(omega,x,y)) K'_omega K^-2; Fresnel: K'_omega.
    """
    K, Kw, _, _ = surface.eval_raw(omega, x, y)
    if wave_kind == WAVE_FRESNEL:
        return Kw
    if wave_kind == WAVE_AIRY:
        sigma = 1.0 if sigma_fn is None else float(sigma_fn(omega, x, y))
        if sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {sigma:g} at "
                             f"({omega:g}, {x:g}, {y:g})")
        return np.sqrt(sigma) * Kw / K ** 2
    raise ValueError(f"unknown wave kind {wave_kind!r}")


def source_constant(surface, mode_at_launch, source, omega, t0, wave_kind):
    """Source constant C(omega, t0) from the locally homogeneous launch.

    mode_at_launch must be the vertical mode solved at the launch point
    (V t0, 0); its eigenfunction slope at the source depth enters
    squared, so the sign convention drops out.

    Returns
    -------
    (C, near_cone) : (float, bool)
        near_cone is set when v^2 < NEAR_CONE_EPS * K^2 (C ~ 1/v blows
        up as omega approaches the Mach-cone frequency).
    """
    x0, y0 = source.track_position(t0)
    K = surface.eval_raw(omega, float(x0), float(y0))[0]
    v2 = K * K - (omega / source.speed) ** 2
    if v2 <= 0.0:
        raise EvanescentError(
            f"evanescent launch: K={K:g} <= omega/V={omega / source.speed:g}")
    v = np.sqrt(v2)
    slope = float(mode_at_launch.df_dz_at(source.depth))
    if wave_kind == WAVE_AIRY:
        C = omega ** 4 * slope ** 2 / (2.0 * source.speed * K ** 3 * v)
    elif wave_kind == WAVE_FRESNEL:
        C = omega ** 2 * slope ** 2 / (2.0 * source.speed * K * v)
    else:
        raise ValueError(f"unknown wave kind {wave_kind!r}")
    return C, v2 < NEAR_CONE_EPS * K * K


def amplitude_psi(D, P, C):
    """psi = sqrt(C / (|D| P)).  The conservation law fixes psi^2 only;
    D < 0 is folded in by magnitude and accounted for by the caller's
    phase-flip counter (no phase correction is applied)."""
    if D == 0.0:
        raise ValueError("Jacobian D must be nonzero to evaluate psi")
    if P <= 0.0:
        raise ValueError(f"P must be positive, got {P:g}")
    if C < 0.0:
        raise ValueError(f"C must be nonnegative, got {C:g}")
    return float(np.sqrt(C / (abs(D) * P)))


@dataclass
class TransportState:
    """Transport data of one fan sample."""

    D: float
    psi: float
    P: float
    C: float
    caustic_flag: bool
    wave_kind: str
    quality: str = QUALITY_OK
    phase_index: int = 0


@dataclass
class TransportFan:
    """Transport quantities over a traced fan (same index layout)."""

    wave_kind: str
    fan: object
    D: np.ndarray              # (nw, nt0, nb, nt), plain centered FD
    D_refined: np.ndarray      # Richardson where available, else = D
    psi: np.ndarray
    P: np.ndarray
    C: np.ndarray              # (nw, nt0, nb)
    near_cone: np.ndarray      # (nw, nt0, nb) bool
    caustic: np.ndarray        # bool, per sample
    edge_stencil: np.ndarray   # bool, per sample (one-sided FD downgrade)
    valid: np.ndarray          # bool, per sample: D and psi evaluated
    phase_flips: np.ndarray    # (nw, nt0, nb) D sign changes along the ray
    delta_caustic: float = DELTA_CAUSTIC
    failures: list = dc_field(default_factory=list)

    def state_at(self, iw, it0, ib, it):
        if self.caustic[iw, it0, ib, it]:
            quality = QUALITY_CAUSTIC
        elif not self.valid[iw, it0, ib, it]:
            quality = QUALITY_DEAD
        elif self.near_cone[iw, it0, ib]:
            quality = QUALITY_NEAR_CONE
        else:
            quality = QUALITY_OK
        return TransportState(
            D=float(self.D[iw, it0, ib, it]), psi=float(self.psi[iw, it0, ib, it]),
            P=float(self.P[iw, it0, ib, it]), C=float(self.C[iw, it0, ib]),
            caustic_flag=bool(self.caustic[iw, it0, ib, it]),
            wave_kind=self.wave_kind, quality=quality,
            phase_index=int(self.phase_flips[iw, it0, ib]))

    def conservation_residual(self):
        """max |D_refined psi^2 P - C| / C over valid non-caustic samples.

        psi is built from the plain centered-difference Jacobian, so this
        residual measures the finite-difference truncation of D.
        """
        ok = self.valid & ~self.caustic
        if not np.any(ok):
            return 0.0
        lhs = np.abs(self.D_refined) * self.psi ** 2 * self.P
        C4 = self.C[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            res = np.abs(lhs - C4) / C4
        return float(np.nanmax(np.where(ok, res, np.nan)))

    def write_csv(self, path):
        """Columns t0,omega,branch,t,D,psi,P,C,caustic_flag, one row per
        evaluated sample."""
        fan = self.fan
        with open(path, "w") as fh:
            fh.write("t0,omega,branch,t,D,psi,P,C,caustic_flag\n")
            for iw in range(len(fan.omegas)):
                for it0 in range(len(fan.t0s)):
                    for ib, br in enumerate(fan.branches):
                        for it in range(len(fan.times)):
                            if not (self.valid[iw, it0, ib, it]
                                    or self.caustic[iw, it0, ib, it]):
                                continue
                            row = (fan.t0s[it0], fan.omegas[iw], br, fan.times[it],
                                   self.D[iw, it0, ib, it], self.psi[iw, it0, ib, it],
                                   self.P[iw, it0, ib, it], self.C[iw, it0, ib])
                            flag = int(bool(self.caustic[iw, it0, ib, it]))
                            fh.write(",".join(_fmt(v) for v in row) + f",{flag}\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def evaluate_transport(fan, surface, source, mode_provider, wave_kind,
                       sigma_fn=None, delta_caustic=DELTA_CAUSTIC,
                       jacobian_fn=None):
    """Evaluate D, P, C, psi over every live fan sample.

    mode_provider(omega, x, y) must return the vertical ModeSolution at
    the launch points (it is consulted once per launched ray).
    jacobian_fn optionally overrides the finite-difference Jacobian
    (verification hook, e.g. the analytic homogeneous D oracle).

    psi uses the plain centered-difference D; D_refined carries the
    Richardson value for the conservation cross-check.
    """
    shape = fan.shape
    nw, nt0, nb, nt = shape
    D = np.full(shape, np.nan)
    D_ref = np.full(shape, np.nan)
    P = np.full(shape, np.nan)
    psi = np.full(shape, np.nan)
    C = np.full(shape[:3], np.nan)
    near = np.zeros(shape[:3], dtype=bool)
    edge = np.zeros(shape, dtype=bool)
    valid = np.zeros(shape, dtype=bool)
    flips = np.zeros(shape[:3], dtype=int)
    failures = []

    for iw in range(nw):
        omega = fan.omegas[iw]
        for it0 in range(nt0):
            t0 = fan.t0s[it0]
            x0, y0 = source.track_position(t0)
            mode = None
            for ib in range(nb):
                if not np.any(fan.alive[iw, it0, ib]):
                    continue
                if mode is None:
                    mode = mode_provider(omega, float(x0), float(y0))
                try:
                    C[iw, it0, ib], near[iw, it0, ib] = source_constant(
                        surface, mode, source, omega, t0, wave_kind)
                except EvanescentError as exc:
                    failures.append((omega, t0, fan.branches[ib], str(exc)))
                    continue
                for it in range(nt):
                    if not fan.alive[iw, it0, ib, it]:
                        continue
                    if jacobian_fn is not None:
                        d1 = jacobian_fn(fan, iw, it0, ib, it)
                        d2, dg = d1, False
                    else:
                        try:
                            d1, dg = jacobian(fan, iw, it0, ib, it, refine=False)
                            d2, _ = jacobian(fan, iw, it0, ib, it, refine=True)
                        except NeighborUnavailableError as exc:
                            failures.append((omega, t0, fan.branches[ib], str(exc)))
                            continue
                    D[iw, it0, ib, it] = d1
                    D_ref[iw, it0, ib, it] = d2
                    edge[iw, it0, ib, it] = dg
                    P[iw, it0, ib, it] = p_factor(
                        surface, omega, fan.x[iw, it0, ib, it],
                        fan.y[iw, it0, ib, it], wave_kind, sigma_fn)
                    valid[iw, it0, ib, it] = True

    # scale-free caustic masking against the fan-wide |D| at each time
    caustic = np.zeros(shape, dtype=bool)
    for it in range(nt):
        di = D[..., it]
        have = valid[..., it] & np.isfinite(di) & (np.abs(di) > 0)
        if not np.any(have):
            continue
        d_ref_scale = float(np.median(np.abs(di[have])))
        caustic[..., it] = valid[..., it] & (np.abs(di) < delta_caustic * d_ref_scale)

    # psi on valid, non-caustic, nonzero-D samples (plain centered D)
    for idx in zip(*np.nonzero(valid & ~caustic)):
        d = D[idx]
        if d == 0.0:
            caustic[idx] = True
            continue
        psi[idx] = amplitude_psi(d, P[idx], C[idx[:3]])

    for iw in range(nw):
        for it0 in range(nt0):
            for ib in range(nb):
                dser = D[iw, it0, ib][valid[iw, it0, ib]]
                if len(dser) > 1:
                    flips[iw, it0, ib] = int(np.count_nonzero(dser[1:] * dser[:-1] < 0))

    return TransportFan(wave_kind=wave_kind, fan=fan, D=D, D_refined=D_ref,
                        psi=psi, P=P, C=C, near_cone=near, caustic=caustic,
                        edge_stencil=edge, valid=valid, phase_flips=flips,
                        delta_caustic=delta_caustic, failures=failures)
