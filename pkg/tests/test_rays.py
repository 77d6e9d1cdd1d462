"""Ray tracer against the analytic homogeneous-medium solution.

Canonical ray (N = 1, h = pi, n = 1, V = 1, omega = 0.6, t0 = 0):
K = 0.75, v = sqrt(0.5625 - 0.36) = 0.45, launch (p, q) = (0.6, +-0.45),
group speed 1/K'_omega = 0.512 along (0.8, 0.6), and
dS*/dt = omega + K/K'_omega = 0.6 + 0.384 = 0.984.
"""

import math

import numpy as np
import pytest

from iwwake import (SourceSpec, initial_conditions, trace_ray, trace_fan,
                    RayState, EvanescentDirectionError)
from iwwake.rays import integrate_between, STATUS_OK


class TestInitialConditions:
    def test_canonical_launch(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.6, 0.0, 1)
        assert st.p == 0.6
        assert st.q == pytest.approx(0.45, rel=0, abs=1e-12)
        st_m = initial_conditions(analytic_surface, source, 0.6, 0.0, -1)
        assert st_m.q == pytest.approx(-0.45, rel=0, abs=1e-12)

    def test_constraint_by_construction(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.6, 2.0, 1)
        K = analytic_surface.eval(0.6, st.x, st.y)[0]
        assert st.p ** 2 + st.q ** 2 == pytest.approx(K * K, rel=1e-14)
        assert st.p ** 2 + st.q ** 2 == pytest.approx(0.5625, rel=1e-12)

    def test_launch_point_on_track(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.5, 3.0, 1)
        assert st.x == 3.0 * source.speed
        assert st.y == 0.0
        assert st.s_star == 0.0

    def test_cone_boundary_ray_has_zero_q(self):
        # V = 0.5 puts the cone frequency inside (0, N): K(w) = w/V at
        # w = sqrt(3)/2, and the radiating band is the frequencies above
        # it (phase speed below V)
        from iwwake import ConstantNDispersion
        surf = ConstantNDispersion(1.0, math.pi, 1)
        src = SourceSpec(speed=0.5, depth=-1.0, t0_grid=[0.0],
                         omega_grid=[0.9])
        w_cone = math.sqrt(3.0) / 2.0
        K = surf.eval(w_cone, 0.0, 0.0)[0]
        assert K == pytest.approx(w_cone / 0.5, rel=1e-12)
        with pytest.raises(EvanescentDirectionError):
            initial_conditions(surf, src, w_cone, 0.0, 1)
        st = initial_conditions(surf, src, w_cone * (1 + 1e-10), 0.0, 1)
        assert abs(st.q) < 1e-4

    def test_evanescent_direction_rejected(self):
        from iwwake import ConstantNDispersion
        surf = ConstantNDispersion(1.0, math.pi, 1)
        src = SourceSpec(speed=0.5, depth=-1.0, t0_grid=[0.0], omega_grid=[0.5])
        with pytest.raises(EvanescentDirectionError):
            initial_conditions(surf, src, 0.5, 0.0, 1)


class TestTraceRay:
    def test_homogeneous_straight_line(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.6, 0.0, 1)
        path = trace_ray(analytic_surface, st, t_end=50.0, dt_out=2.5)
        assert path.status == STATUS_OK
        ages = path.times - path.t0
        assert np.allclose(path.x, 0.512 * 0.8 * ages, atol=1e-9)
        assert np.allclose(path.y, 0.512 * 0.6 * ages, atol=1e-9)
        speed = np.hypot(np.diff(path.x), np.diff(path.y)) / np.diff(path.times)
        assert np.allclose(speed, 0.512, atol=1e-10)

    def test_wavevector_conserved(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.6, 0.0, -1)
        path = trace_ray(analytic_surface, st, t_end=100.0, dt_out=5.0)
        assert np.max(np.abs(path.p - 0.6)) < 1e-10
        assert np.max(np.abs(path.q + 0.45)) < 1e-10

    def test_eikonal_slope(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.6, 0.0, 1)
        path = trace_ray(analytic_surface, st, t_end=100.0, dt_out=10.0)
        slopes = path.s_star[1:] / (path.times[1:] - path.t0)
        assert np.max(np.abs(slopes - 0.984)) < 1e-9

    def test_s_star_strictly_increasing(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.35, 1.0, 1)
        path = trace_ray(analytic_surface, st, t_end=60.0, dt_out=1.0)
        assert np.all(np.diff(path.s_star) > 0)

    def test_zero_length_trace_returns_initial_state(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.6, 3.0, 1)
        path = trace_ray(analytic_surface, st, t_end=3.0, dt_out=1.0)
        assert path.n_samples == 1
        assert path.times[0] == 3.0
        assert path.x[0] == st.x and path.y[0] == st.y
        assert path.s_star[0] == 0.0

    def test_constraint_drift_homogeneous(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.6, 0.0, 1)
        path = trace_ray(analytic_surface, st, t_end=100.0, dt_out=5.0)
        assert path.max_drift < 1e-6

    def test_time_reversal_closure(self, analytic_surface, source):
        st = initial_conditions(analytic_surface, source, 0.45, 0.0, 1)
        fwd = integrate_between(analytic_surface, st, 40.0)
        xe, ye, pe, qe, _ = fwd.y[:, -1]
        end = RayState(t=40.0, x=xe, y=ye, p=pe, q=qe, omega=0.45)
        back = integrate_between(analytic_surface, end, 0.0)
        xb, yb, pb, qb, _ = back.y[:, -1]
        scale = max(abs(st.x), abs(st.p), 1.0)
        assert abs(xb - st.x) / scale < 1e-7
        assert abs(yb - st.y) / scale < 1e-7
        assert abs(pb - st.p) / scale < 1e-7
        assert abs(qb - st.q) / scale < 1e-7

    def test_termination_at_region_boundary(self, const_surface, source):
        st = initial_conditions(const_surface, source, 0.6, 0.0, 1)
        # y grid tops out at 60; the ray heads to y ~ 0.307 t
        path = trace_ray(const_surface, st, t_end=400.0, dt_out=10.0)
        assert path.status == "left_region"
        assert path.y[-1] <= 60.0 + 1e-6


class TestModulatedMedium:
    def test_drift_slowly_varying(self, modulated_field):
        from iwwake import build_surface
        surf = build_surface(modulated_field, 1, np.linspace(0.3, 0.8, 9),
                             np.linspace(-40, 70, 9), np.linspace(-60, 60, 9))
        src = SourceSpec(speed=1.0, depth=-1.0, t0_grid=[0.0], omega_grid=[0.6])
        st = initial_conditions(surf, src, 0.6, 0.0, 1)
        path = trace_ray(surf, st, t_end=100.0, dt_out=5.0)
        assert path.status == STATUS_OK
        assert path.max_drift < 1e-5

    def test_wavevector_actually_varies(self, modulated_field):
        from iwwake import build_surface
        surf = build_surface(modulated_field, 1, np.linspace(0.3, 0.8, 9),
                             np.linspace(-40, 70, 9), np.linspace(-60, 60, 9))
        src = SourceSpec(speed=1.0, depth=-1.0, t0_grid=[0.0], omega_grid=[0.6])
        st = initial_conditions(surf, src, 0.6, 0.0, 1)
        path = trace_ray(surf, st, t_end=100.0, dt_out=5.0)
        assert np.max(np.abs(path.p - path.p[0])) > 1e-6


@pytest.fixture(scope="module")
def fan(analytic_surface, source):
    return trace_fan(analytic_surface, source, t_obs=24.0, dt_out=1.0)


class TestTraceFan:
    def test_mirror_symmetry(self, fan):
        ib_p = fan.branch_index(1)
        ib_m = fan.branch_index(-1)
        ok = np.isfinite(fan.y[:, :, ib_p]) & np.isfinite(fan.y[:, :, ib_m])
        assert np.any(ok)
        assert np.allclose(fan.y[:, :, ib_p][ok], -fan.y[:, :, ib_m][ok],
                           atol=1e-9)
        assert np.allclose(fan.x[:, :, ib_p][ok], fan.x[:, :, ib_m][ok],
                           atol=1e-9)

    def test_endpoints_behind_source(self, fan):
        t_obs = fan.times[-1]
        xe = fan.x[..., -1]
        assert np.all(xe[np.isfinite(xe)] <= fan.speed * t_obs + 1e-9)

    def test_single_ray_fan_matches_trace_ray(self, analytic_surface):
        src = SourceSpec(speed=1.0, depth=-1.0, t0_grid=[0.0],
                         omega_grid=[0.6], branches=(1,))
        fan = trace_fan(analytic_surface, src, t_obs=10.0, dt_out=0.5)
        st = initial_conditions(analytic_surface, src, 0.6, 0.0, 1)
        path = trace_ray(analytic_surface, st, t_end=10.0, dt_out=0.5)
        assert np.allclose(fan.x[0, 0, 0], path.x, atol=1e-12)
        assert np.allclose(fan.s_star[0, 0, 0], path.s_star, atol=1e-12)

    def test_thread_count_does_not_change_values(self, analytic_surface, source):
        f1 = trace_fan(analytic_surface, source, t_obs=12.0, dt_out=1.0, workers=1)
        f8 = trace_fan(analytic_surface, source, t_obs=12.0, dt_out=1.0, workers=8)
        same = np.isfinite(f1.x)
        assert np.array_equal(same, np.isfinite(f8.x))
        assert np.array_equal(f1.x[same], f8.x[same])
        assert np.array_equal(f1.s_star[same], f8.s_star[same])

    def test_not_yet_launched_samples_are_nan(self, fan):
        # ray departing at t0 = 4 has no samples before t = 4
        it0 = np.argmax(fan.t0s)
        before = fan.times < fan.t0s[it0] - 1e-12
        assert np.all(~np.isfinite(fan.x[0, it0, 0, before]))
        assert not np.any(fan.alive[0, it0, 0, before])

    def test_csv_dump_columns(self, fan, tmp_path):
        path = tmp_path / "rays.csv"
        fan.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t0,omega,branch,t,x,y,p,q,S_star,alive"
        assert len(lines) > 100
        first = lines[1].split(",")
        assert len(first) == 10
