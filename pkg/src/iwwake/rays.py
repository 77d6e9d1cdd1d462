"""Space-time ray tracing for the moving source.

Characteristic system (tau identified with t, the group-velocity form):

    dx/dt = p / (K K'_omega)      dp/dt = K'_x / K'_omega
    dy/dt = q / (K K'_omega)      dq/dt = K'_y / K'_omega
    domega/dt = 0

launched from the source track x0 = V t0, y0 = 0 with

    p0 = omega / V,   q0 = branch * v,   v = sqrt(K^2 - omega^2 / V^2)

(v real requires the radiation condition K > omega / V).  The eikonal is
accumulated alongside:

    S*(t) = omega (t - t0) + int_{t0}^t K / K'_omega dtau,   S*(t0) = 0.

Rays are labeled by the fan coordinates (omega, t0, branch).  Frequency
is never integrated; the eikonal constraint |p^2 + q^2 - K^2| / K^2 is
monitored and optionally re-projected (off by default, so right-hand-side
inconsistencies stay visible).  Rays terminate at the edge of the
dispersion surface's valid region instead of extrapolating.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
DRIFT_WARN = 1e-5

STATUS_OK = "ok"
STATUS_EVANESCENT = "evanescent"
STATUS_OUTSIDE = "launch_outside_region"
STATUS_LEFT = "left_region"
STATUS_FAILED = "integration_failed"


class EvanescentDirectionError(ValueError):
    """Radiation condition K > omega/V violated; the ray is not launched."""


@dataclass
class RayState:
    """Instantaneous ray data.  omega is constant along the ray."""

    t: float
    x: float
    y: float
    p: float
    q: float
    omega: float
    s_star: float = 0.0
    alive: bool = True

    def eikonal_residual(self, surface):
        K = surface.eval_raw(self.omega, self.x, self.y)[0]
        return abs(self.p ** 2 + self.q ** 2 - K * K) / (K * K)


@dataclass
class RayPath:
    """Sampled trajectory of one ray on a uniform output-time grid."""

    omega: float
    t0: float
    branch: int
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    q: np.ndarray
    s_star: np.ndarray
    status: str = STATUS_OK
    max_drift: float = 0.0

    @property
    def n_samples(self):
        return len(self.times)

    def state_at(self, i):
        return RayState(t=float(self.times[i]), x=float(self.x[i]), y=float(self.y[i]),
                        p=float(self.p[i]), q=float(self.q[i]), omega=self.omega,
                        s_star=float(self.s_star[i]), alive=self.status == STATUS_OK)


def radiated_transverse_wavenumber(K, omega, speed):
    """v(omega, x0, y0) = sqrt(K^2 - omega^2 / V^2); raises if evanescent."""
    v2 = K * K - (omega / speed) ** 2
    if v2 <= 0.0:
        raise EvanescentDirectionError(
            f"K={K:g} <= omega/V={omega / speed:g}: direction evanescent")
    return np.sqrt(v2)


def initial_conditions(surface, source, omega, t0, branch):
    """Launch state on the source track at departure time t0.

    branch is +1 or -1 (sign of q); the eikonal constraint
    p^2 + q^2 = K^2 holds by construction, S* starts at zero.
    """
    x0, y0 = source.track_position(t0)
    x0, y0 = float(x0), float(y0)
    K = surface.eval(omega, x0, y0)[0]
    v = radiated_transverse_wavenumber(K, omega, source.speed)
    return RayState(t=float(t0), x=x0, y=y0,
                    p=omega / source.speed, q=branch * v,
                    omega=float(omega), s_star=0.0)


def _rhs(surface, omega):
    def fun(t, s):
        K, Kw, Kx, Ky = surface.eval_raw(omega, s[0], s[1])
        g = 1.0 / (K * Kw)
        return (s[2] * g, s[3] * g, Kx / Kw, Ky / Kw, K / Kw)
    return fun


def _boundary_events(surface):
    bounds = surface.bounds
    if not all(np.isfinite(b) for pair in bounds[1:] for b in pair):
        return []
    events = []
    for i in range(4):
        def ev(t, s, _i=i):
            return surface.boundary_clearances(s[0], s[1])[_i]
        ev.terminal = True
        events.append(ev)
    return events


def integrate_between(surface, state, t_target, t_eval=None,
                      rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, events=None):
    """Integrate the characteristic system from state.t to t_target
    (either direction).  Returns the scipy solution object; state vector
    is (x, y, p, q, S_int) with S_int the accumulated K/K'_omega integral
    relative to state, recovered into S* by the callers."""
    y0 = (state.x, state.y, state.p, state.q, 0.0)
    return solve_ivp(_rhs(surface, state.omega), (state.t, t_target), y0,
                     method="RK45", rtol=rtol, atol=atol, t_eval=t_eval,
                     events=events, dense_output=False)


def trace_ray(surface, state0, t_end, dt_out, rtol=DEFAULT_RTOL,
              atol=DEFAULT_ATOL, renormalize=False):
    """Trace one ray to t_end, sampling at multiples of dt_out.

    The ray terminates early (status "left_region") at the boundary of
    the surface's valid region.  Eikonal drift beyond DRIFT_WARN raises a
    warning; with renormalize=True the wave vector magnitude is
    re-projected onto |k| = K after every output interval (opt-in, since
    projection can mask right-hand-side bugs).
    """
    if t_end < state0.t:
        raise ValueError("t_end must be >= the launch time")
    n_out = int(np.floor((t_end - state0.t) / dt_out + 1e-9)) if dt_out > 0 else 0
    times = state0.t + dt_out * np.arange(n_out + 1)

    if t_end == state0.t or n_out == 0:
        path = RayPath(omega=state0.omega, t0=state0.t, branch=int(np.sign(state0.q) or 1),
                       times=np.array([state0.t]), x=np.array([state0.x]),
                       y=np.array([state0.y]), p=np.array([state0.p]),
                       q=np.array([state0.q]), s_star=np.array([state0.s_star]))
        path.max_drift = state0.eikonal_residual(surface)
        return path

    events = _boundary_events(surface)
    if renormalize:
        sol_t, sol_y, status = _integrate_renormalizing(
            surface, state0, times, rtol, atol, events)
    else:
        sol = integrate_between(surface, state0, times[-1], t_eval=times,
                                rtol=rtol, atol=atol, events=events)
        if sol.status == -1:
            status = STATUS_FAILED
        elif sol.status == 1:
            status = STATUS_LEFT
        else:
            status = STATUS_OK
        sol_t, sol_y = sol.t, sol.y

    s_star = state0.s_star + state0.omega * (sol_t - state0.t) + sol_y[4]
    path = RayPath(omega=state0.omega, t0=state0.t,
                   branch=int(np.sign(state0.q) or 1),
                   times=sol_t, x=sol_y[0], y=sol_y[1], p=sol_y[2], q=sol_y[3],
                   s_star=s_star, status=status)
    path.max_drift = _max_drift(surface, path)
    if path.max_drift > DRIFT_WARN and not renormalize:
        warnings.warn(f"eikonal constraint drift {path.max_drift:.2e} exceeds "
                      f"{DRIFT_WARN:g} on ray omega={state0.omega:g}, t0={state0.t:g}",
                      RuntimeWarning, stacklevel=2)
    return path


def _integrate_renormalizing(surface, state0, times, rtol, atol, events):
    xs = [state0.x]; ys = [state0.y]; ps = [state0.p]; qs = [state0.q]; Ss = [0.0]
    cur = RayState(t=times[0], x=state0.x, y=state0.y, p=state0.p, q=state0.q,
                   omega=state0.omega)
    acc = 0.0
    status = STATUS_OK
    kept = 1
    for t_next in times[1:]:
        sol = integrate_between(surface, cur, t_next, rtol=rtol, atol=atol, events=events)
        if sol.status != 0:
            status = STATUS_FAILED if sol.status == -1 else STATUS_LEFT
            break
        x, y, p, q, ds = sol.y[:, -1]
        K = surface.eval_raw(cur.omega, x, y)[0]
        scale = K / np.hypot(p, q)
        p, q = p * scale, q * scale
        acc += ds
        xs.append(x); ys.append(y); ps.append(p); qs.append(q); Ss.append(acc)
        cur = RayState(t=t_next, x=x, y=y, p=p, q=q, omega=cur.omega)
        kept += 1
    sol_y = np.vstack([xs, ys, ps, qs, Ss])
    return times[:kept], sol_y, status


def _max_drift(surface, path):
    worst = 0.0
    for i in range(path.n_samples):
        K = surface.eval_raw(path.omega, path.x[i], path.y[i])[0]
        worst = max(worst, abs(path.p[i] ** 2 + path.q[i] ** 2 - K * K) / (K * K))
    return worst


@dataclass
class RayFan:
    """Two-parameter ray family on a shared output-time grid.

    Arrays are indexed (i_omega, i_t0, i_branch, i_time) and hold NaN
    where the ray was not launched, not yet launched, or already dead.
    """

    omegas: np.ndarray
    t0s: np.ndarray
    branches: tuple
    times: np.ndarray
    speed: float
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    q: np.ndarray
    s_star: np.ndarray
    alive: np.ndarray          # bool, same shape
    status: np.ndarray         # str, (n_omega, n_t0, n_branch)
    max_drift: float = 0.0
    failures: list = dc_field(default_factory=list)

    @property
    def shape(self):
        return self.x.shape

    def branch_index(self, branch):
        return self.branches.index(branch)

    def ray_alive_at(self, iw, it0, ib, it):
        return bool(self.alive[iw, it0, ib, it])

    def launch_point(self, it0):
        return self.speed * self.t0s[it0], 0.0

    def write_csv(self, path):
        """Dump one row per stored sample, columns
        t0,omega,branch,t,x,y,p,q,S_star,alive (alive=0 flags the last
        sample of a ray that terminated early)."""
        with open(path, "w") as fh:
            fh.write("t0,omega,branch,t,x,y,p,q,S_star,alive\n")
            for iw in range(len(self.omegas)):
                for it0 in range(len(self.t0s)):
                    for ib, br in enumerate(self.branches):
                        valid = np.isfinite(self.x[iw, it0, ib])
                        idx = np.nonzero(valid)[0]
                        died = self.status[iw, it0, ib] in (STATUS_LEFT, STATUS_FAILED)
                        for j, it in enumerate(idx):
                            alive = 0 if (died and j == len(idx) - 1) else 1
                            fh.write(",".join(_fmt(v) for v in (
                                self.t0s[it0], self.omegas[iw], br, self.times[it],
                                self.x[iw, it0, ib, it], self.y[iw, it0, ib, it],
                                self.p[iw, it0, ib, it], self.q[iw, it0, ib, it],
                                self.s_star[iw, it0, ib, it])) + f",{alive}\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def trace_fan(surface, source, t_obs, dt_out=None, rtol=DEFAULT_RTOL,
              atol=DEFAULT_ATOL, workers=1, renormalize=False):
    """Trace the full (omega, t0, branch) fan to the observation time.

    All rays are sampled on the shared grid t0_min + k * dt_out so the
    geometric-spreading Jacobian can be differenced across the fan at
    common times.  Per-ray failures are recorded in fan.status and
    fan.failures; the fan is returned regardless.
    """
    omegas = np.asarray(source.omega_grid, float)
    t0s = np.asarray(source.t0_grid, float)
    branches = tuple(int(b) for b in source.branches)
    if dt_out is None:
        span = t_obs - float(np.max(t0s))
        if span <= 0:
            raise ValueError("t_obs must exceed the last departure time")
        dt_out = span / 32.0
    t_min = float(np.min(t0s))
    n_t = int(np.floor((t_obs - t_min) / dt_out + 1e-9)) + 1
    times = t_min + dt_out * np.arange(n_t)

    shape = (len(omegas), len(t0s), len(branches), n_t)
    arrays = {k: np.full(shape, np.nan) for k in ("x", "y", "p", "q", "s_star")}
    alive = np.zeros(shape, dtype=bool)
    status = np.full(shape[:3], STATUS_OK, dtype=object)
    failures = []

    jobs = [(iw, it0, ib) for iw in range(len(omegas))
            for it0 in range(len(t0s)) for ib in range(len(branches))]

    def run(job):
        iw, it0, ib = job
        omega, t0, br = omegas[iw], t0s[it0], branches[ib]
        x0, y0 = source.track_position(t0)
        if not surface.contains(omega, float(x0), float(y0)):
            return job, None, STATUS_OUTSIDE
        try:
            st0 = initial_conditions(surface, source, omega, t0, br)
        except EvanescentDirectionError:
            return job, None, STATUS_EVANESCENT
        mask = times >= t0 - 1e-12
        t_eval = times[mask]
        if len(t_eval) == 0:
            return job, None, STATUS_OK
        events = _boundary_events(surface)
        if times[-1] - t0 < 1e-12:
            # launched at the observation time itself: single source sample
            sol_t = np.array([t0])
            sol_y = np.array([[st0.x], [st0.y], [st0.p], [st0.q], [0.0]])
            return job, (st0, mask, (sol_t, sol_y)), STATUS_OK
        if renormalize:
            sol_t, sol_y, st = _integrate_renormalizing(
                surface, st0, t_eval, rtol, atol, events)
            return job, (st0, mask, (sol_t, sol_y)), st
        sol = integrate_between(surface, st0, times[-1], t_eval=t_eval,
                                rtol=rtol, atol=atol, events=events)
        if sol.status == -1:
            st = STATUS_FAILED
        elif sol.status == 1:
            st = STATUS_LEFT
        else:
            st = STATUS_OK
        return job, (st0, mask, (sol.t, sol.y)), st

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    worst_drift = 0.0
    for job, payload, st in results:
        iw, it0, ib = job
        status[iw, it0, ib] = st
        if st in (STATUS_EVANESCENT, STATUS_OUTSIDE):
            failures.append((omegas[iw], t0s[it0], branches[ib], st))
            continue
        if payload is None:
            continue
        st0, mask, (sol_t, sol_y) = payload
        offset = np.nonzero(mask)[0][0]
        m = len(sol_t)
        sl = slice(offset, offset + m)
        arrays["x"][iw, it0, ib, sl] = sol_y[0]
        arrays["y"][iw, it0, ib, sl] = sol_y[1]
        arrays["p"][iw, it0, ib, sl] = sol_y[2]
        arrays["q"][iw, it0, ib, sl] = sol_y[3]
        arrays["s_star"][iw, it0, ib, sl] = (
            st0.omega * (sol_t - st0.t) + sol_y[4])
        alive[iw, it0, ib, sl] = True
        if st in (STATUS_LEFT, STATUS_FAILED):
            failures.append((omegas[iw], t0s[it0], branches[ib], st))
        for j in range(m):
            K = surface.eval_raw(st0.omega, sol_y[0][j], sol_y[1][j])[0]
            drift = abs(sol_y[2][j] ** 2 + sol_y[3][j] ** 2 - K * K) / (K * K)
            worst_drift = max(worst_drift, drift)

    return RayFan(omegas=omegas, t0s=t0s, branches=branches, times=times,
                  speed=source.speed, alive=alive, status=status,
                  max_drift=worst_drift, failures=failures, **arrays)
