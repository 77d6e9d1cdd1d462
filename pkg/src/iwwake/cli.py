"""Batch front door: JSON run configuration in, CSV data products out.

Subcommands
-----------
selftest    run the special-function and constant-N oracle suites
dispersion  build and cache the dispersion surfaces per mode
field       run the full pipeline and emit ray/transport/field dumps

Exit codes: 0 success, 1 selftest failure, 2 validation error,
3 numerical failure, 4 partial result (more than half the samples
masked).  Outputs are deterministic for a given config and version:
worker count only changes scheduling, never values or write order.
"""

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import specfun
from .stratification import StratificationField, SourceSpec, validate
from .modes import (ModeCache, solve_mode, mode_wavenumber, domega_derivative,
                    constant_n_wavenumber, constant_n_domega)
from .dispersion import (DispersionSurface, DirectDispersion, build_surface,
                         SurfaceBuildError)
from .rays import trace_fan, STATUS_OK
from .transport import evaluate_transport, WAVE_AIRY, WAVE_FRESNEL, QUALITY_OK
from .synthesis import (collect_samples, synthesize_grid, write_field_csv,
                        write_grid_dump)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_SELFTEST_FAIL = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "stratification": {
        "kind": "constant",
        "n0": 1.0,
        "h": math.pi,
        "x_bounds": None,
        "y_bounds": None,
        "lambda_ref": None,
        "slowness_limit": 0.1,
    },
    "source": {"speed": 1.0, "depth": -math.pi / 4},
    "fan": {
        "omega": {"min": 0.15, "max": 0.85, "count": 9, "spacing": "log"},
        "t0": {"min": 0.0, "max": 4.0, "count": 5},
        "branches": "both",
        "t_obs": 24.0,
        "dt_out": None,
    },
    "modes": [1],
    "wave": "both",
    "dispersion": {
        "omega_nodes": 64,
        "x_nodes": 33,
        "y_nodes": 33,
        "omega_bounds": None,
        "x_bounds": None,
        "y_bounds": None,
        "cache_dir": None,
        "on_the_fly": False,
        "z_points": 2001,
    },
    "output": {
        "directory": "out",
        "dumps": ["rays", "transport", "field", "grid"],
        "grid": {"x_nodes": 41, "y_nodes": 41, "z": None, "max_gap": None},
    },
    "numerics": {
        "rtol": 1e-9,
        "atol": 1e-12,
        "z_points": 2001,
        "delta_caustic": 1e-3,
        "renormalize": False,
    },
}


def _merge(defaults, override):
    if not isinstance(override, dict):
        return override
    out = dict(defaults)
    for k, v in override.items():
        if k in out and isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path):
    """Parse and default-materialize the run configuration."""
    with open(path) as fh:
        raw = json.load(fh)
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {raw.get('schema_version')}")
    return _merge(DEFAULTS, raw)


def _axis_values(spec, what):
    if isinstance(spec, (list, tuple)):
        vals = np.asarray(spec, float)
    elif isinstance(spec, dict):
        count = int(spec["count"])
        if count < 1:
            raise ConfigError(f"{what} grid count must be >= 1")
        if spec.get("spacing", "linear") == "log":
            vals = np.geomspace(spec["min"], spec["max"], count)
        else:
            vals = np.linspace(spec["min"], spec["max"], count)
    else:
        raise ConfigError(f"{what} grid must be a list or a min/max/count block")
    if vals.size == 0:
        raise ConfigError(f"{what} grid is empty")
    if vals.size > 1 and np.any(np.diff(vals) <= 0):
        raise ConfigError(f"{what} grid must be strictly increasing")
    return vals


def build_field(cfg):
    s = cfg["stratification"]
    kw = {}
    if s.get("x_bounds"):
        kw["x_bounds"] = tuple(s["x_bounds"])
    if s.get("y_bounds"):
        kw["y_bounds"] = tuple(s["y_bounds"])
    if s.get("lambda_ref"):
        kw["lambda_ref"] = s["lambda_ref"]
    kw["slowness_limit"] = s.get("slowness_limit", 0.1)
    kind = s["kind"]
    if kind == "constant":
        return StratificationField.constant_n(s["n0"], s["h"], **kw)
    if kind == "two_layer":
        return StratificationField.two_layer(
            s["n_upper"], s["n_lower"], s["pycnocline_depth"],
            s["pycnocline_width"], s["h"], **kw)
    if kind == "thermocline":
        return StratificationField.thermocline(
            s["n0"], s.get("peak", 0.0), s.get("center", -s["h"] / 2),
            s.get("width", s["h"] / 10), s["h"],
            mod_amplitude=s.get("mod_amplitude", 0.0),
            mod_scale=s.get("mod_scale"), **kw)
    if kind == "tabulated":
        return StratificationField.from_profile_file(
            s["profile_path"], mod_amplitude=s.get("mod_amplitude", 0.0),
            mod_scale=s.get("mod_scale"), **kw)
    raise ConfigError(f"unknown stratification kind {kind!r}")


def build_source(cfg):
    fan = cfg["fan"]
    branch_sel = fan.get("branches", "both")
    branches = {"both": (1, -1), "+": (1,), "-": (-1,)}.get(branch_sel)
    if branches is None:
        raise ConfigError(f"branches must be '+', '-' or 'both', got {branch_sel!r}")
    return SourceSpec(
        speed=float(cfg["source"]["speed"]), depth=float(cfg["source"]["depth"]),
        t0_grid=_axis_values(fan["t0"], "t0"),
        omega_grid=_axis_values(fan["omega"], "omega"),
        branches=branches)


def _dispersion_grids(cfg, field, source):
    d = cfg["dispersion"]
    t_obs = float(cfg["fan"]["t_obs"])
    wmin, wmax = float(source.omega_grid[0]), float(source.omega_grid[-1])
    if d.get("omega_bounds"):
        w0, w1 = d["omega_bounds"]
    else:
        nmax = min(field.max_n(*source.track_position(t0)) for t0 in source.t0_grid)
        w0 = 0.8 * wmin
        w1 = min(1.1 * wmax, 0.5 * (wmax + nmax))
    if w0 > wmin or w1 < wmax:
        raise ConfigError("dispersion omega bounds do not cover the fan grid")
    omega_nodes = np.geomspace(w0, w1, int(d["omega_nodes"]))

    h = field.h
    t0_min, t0_max = float(source.t0_grid[0]), float(source.t0_grid[-1])
    span = t_obs - t0_min
    if d.get("x_bounds"):
        x0, x1 = d["x_bounds"]
    else:
        x0 = source.speed * t0_min - 0.2 * source.speed * span - h
        x1 = source.speed * t_obs + h
    if d.get("y_bounds"):
        y0, y1 = d["y_bounds"]
    else:
        half = 0.8 * source.speed * span + h
        y0, y1 = -half, half
    x0 = max(x0, field.x_bounds[0]); x1 = min(x1, field.x_bounds[1])
    y0 = max(y0, field.y_bounds[0]); y1 = min(y1, field.y_bounds[1])
    x_nodes = np.linspace(x0, x1, int(d["x_nodes"]))
    y_nodes = np.linspace(y0, y1, int(d["y_nodes"]))
    return omega_nodes, x_nodes, y_nodes


def surface_cache_path(cache_dir, n):
    return Path(cache_dir) / f"surface_mode{n}.npz"


def get_surface(cfg, field, source, n, threads):
    d = cfg["dispersion"]
    if d.get("on_the_fly"):
        w, x, y = _dispersion_grids(cfg, field, source)
        return DirectDispersion(field, n, nz=int(d["z_points"]),
                                bounds=((w[0], w[-1]), (x[0], x[-1]), (y[0], y[-1])))
    if d.get("cache_dir"):
        p = surface_cache_path(d["cache_dir"], n)
        if p.exists():
            return DispersionSurface.load(p)
    w, x, y = _dispersion_grids(cfg, field, source)
    surf = build_surface(field, n, w, x, y, nz=int(d["z_points"]),
                         workers=threads)
    if d.get("cache_dir"):
        Path(d["cache_dir"]).mkdir(parents=True, exist_ok=True)
        surf.save(surface_cache_path(d["cache_dir"], n))
    return surf


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _selftest_checks():
    """(name, default_tolerance, callable -> measured error) registry."""
    gamma = math.gamma

    def airy_zero():
        return abs(specfun.airy_ai(0.0) - 3.0 ** (-2.0 / 3.0) / gamma(2.0 / 3.0))

    def airy_prime_zero():
        return abs(specfun.airy_ai_prime(0.0) + 3.0 ** (-1.0 / 3.0) / gamma(1.0 / 3.0))

    def airy_ode():
        h = 1e-4
        worst = 0.0
        for s in (-5.0, -1.0, 0.0, 1.0, 5.0):
            fd2 = (specfun.airy_ai(s + h) - 2 * specfun.airy_ai(s)
                   + specfun.airy_ai(s - h)) / h ** 2
            worst = max(worst, abs(fd2 - s * specfun.airy_ai(s)))
        return worst

    def phi_front():
        return abs(specfun.fresnel_phi(0.0) - math.sqrt(math.pi) / 2.0)

    def phi_quadrature():
        from scipy.integrate import simpson
        worst = 0.0
        t = np.linspace(0.0, 50.0, 400_001)
        for s in np.linspace(-10.0, 10.0, 41):
            g = s * t + t * t / 2.0
            val = simpson(np.cos(g), x=t)
            gT, dgT = g[-1], s + t[-1]
            val += -math.sin(gT) / dgT + math.cos(gT) / dgT ** 3
            worst = max(worst, abs(specfun.fresnel_phi(s) - val))
        return worst

    def phi_derivative():
        h = 1e-5
        worst = 0.0
        for s in (-4.0, 0.0, 1.0, 3.0):
            fd = (specfun.fresnel_phi(s + h) - specfun.fresnel_phi(s - h)) / (2 * h)
            worst = max(worst, abs(fd - specfun.fresnel_phi_prime(s)))
        return worst

    def constant_n_dispersion():
        field = StratificationField.constant_n(1.0, math.pi)
        worst = 0.0
        for n in (1, 2, 3):
            for w in (0.3, 0.6, 0.9):
                K = mode_wavenumber(field, w, 0.0, 0.0, n)
                Ka = constant_n_wavenumber(1.0, math.pi, w, n)
                worst = max(worst, abs(K - Ka) / Ka)
        return worst

    def constant_n_derivative():
        field = StratificationField.constant_n(1.0, math.pi)
        Kw = domega_derivative(field, 0.6, 0.0, 0.0, 1)
        return abs(Kw - constant_n_domega(1.0, math.pi, 0.6, 1)) / 1.953125

    def mode_normalization():
        from scipy.integrate import simpson
        field = StratificationField.constant_n(1.0, math.pi)
        sol = solve_mode(field, 0.6, 0.0, 0.0, 1)
        w = field.n_squared(sol.z_grid, np.zeros_like(sol.z_grid),
                            np.zeros_like(sol.z_grid)) - 0.6 ** 2
        return abs(simpson(w * sol.f_samples ** 2, x=sol.z_grid) - 1.0)

    return [
        ("airy_zero", 1e-9, airy_zero),
        ("airy_prime_zero", 1e-9, airy_prime_zero),
        ("airy_ode_residual", 1e-6, airy_ode),
        ("phi_front_value", 1e-9, phi_front),
        ("phi_quadrature_oracle", 1e-6, phi_quadrature),
        ("phi_derivative_fd", 1e-7, phi_derivative),
        ("constant_n_dispersion", 1e-6, constant_n_dispersion),
        ("constant_n_domega", 1e-6, constant_n_derivative),
        ("mode_normalization", 1e-8, mode_normalization),
    ]


def cmd_selftest(tolerance_overrides=None, stream=None):
    """Run the oracle suites; returns (exit_code, report dict)."""
    stream = stream or sys.stdout
    overrides = tolerance_overrides or {}
    report = {"checks": [], "passed": True}
    for name, tol, fn in _selftest_checks():
        tol = float(overrides.get(name, tol))
        err = float(fn())
        ok = err <= tol
        report["checks"].append(
            {"name": name, "tolerance": tol, "measured_error": err, "passed": ok})
        report["passed"] &= ok
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: error {err:.3e} "
              f"(tolerance {tol:g})", file=stream)
    print(f"selftest {'passed' if report['passed'] else 'FAILED'}", file=stream)
    return (EXIT_OK if report["passed"] else EXIT_SELFTEST_FAIL), report


# ---------------------------------------------------------------------------
# dispersion / field
# ---------------------------------------------------------------------------

def cmd_dispersion(cfg, threads=1, stream=None):
    """Build and write the surface caches for every requested mode."""
    stream = stream or sys.stdout
    field = build_field(cfg)
    source = build_source(cfg)
    report = validate(field, source)
    if not report.passed:
        for line in report.lines():
            print(line, file=stream)
        return EXIT_VALIDATION
    cache_dir = cfg["dispersion"].get("cache_dir") or cfg["output"]["directory"]
    cfg["dispersion"]["cache_dir"] = cache_dir
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    try:
        for n in cfg["modes"]:
            w, x, y = _dispersion_grids(cfg, field, source)
            surf = build_surface(field, int(n), w, x, y,
                                 nz=int(cfg["dispersion"]["z_points"]),
                                 workers=threads)
            path = surface_cache_path(cache_dir, int(n))
            surf.save(path)
            print(f"mode {n}: {len(w)}x{len(x)}x{len(y)} surface -> {path}",
                  file=stream)
    except SurfaceBuildError as exc:
        print(f"dispersion build failed: {exc}", file=stream)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_field(cfg, threads=1, stream=None):
    """Full pipeline: fans, transport, field synthesis, dumps, report."""
    stream = stream or sys.stdout
    t_start = time.perf_counter()
    timings = {}
    outdir = Path(cfg["output"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)

    field = build_field(cfg)
    source = build_source(cfg)
    vreport = validate(field, source)
    if not vreport.passed:
        for line in vreport.lines():
            print(line, file=stream)
        _write_report(outdir, cfg, {"validation": vreport.lines()},
                      EXIT_VALIDATION)
        return EXIT_VALIDATION

    wave_kinds = {"airy": (WAVE_AIRY,), "fresnel": (WAVE_FRESNEL,),
                  "both": (WAVE_AIRY, WAVE_FRESNEL)}.get(cfg["wave"])
    if wave_kinds is None:
        print(f"unknown wave selection {cfg['wave']!r}", file=stream)
        return EXIT_VALIDATION

    t_obs = float(cfg["fan"]["t_obs"])
    dumps = set(cfg["output"]["dumps"])
    num = cfg["numerics"]
    stats = {"modes": {}, "validation": vreport.lines()}
    z_obs = cfg["output"]["grid"]["z"]
    if z_obs is None:
        z_obs = float(cfg["source"]["depth"])

    total_samples = 0
    masked_samples = 0
    worst_conservation = 0.0
    samples_by_mode = {k: {} for k in wave_kinds}

    try:
        for n in cfg["modes"]:
            n = int(n)
            t0 = time.perf_counter()
            surface = get_surface(cfg, field, source, n, threads)
            timings[f"surface_mode{n}"] = time.perf_counter() - t0

            t0 = time.perf_counter()
            fan = trace_fan(surface, source, t_obs,
                            dt_out=cfg["fan"]["dt_out"], rtol=num["rtol"],
                            atol=num["atol"], workers=threads,
                            renormalize=num["renormalize"])
            timings[f"rays_mode{n}"] = time.perf_counter() - t0
            if "rays" in dumps:
                fan.write_csv(outdir / f"rays_mode{n}.csv")

            launched = int(np.sum(fan.status == STATUS_OK))
            stats["modes"][n] = {
                "rays_total": int(fan.status.size),
                "rays_ok": launched,
                "rays_failed": fan.status.size - launched,
                "max_eikonal_drift": fan.max_drift,
            }

            provider = ModeCache(field, n, nz=int(num["z_points"]),
                                 uniform=field.kind == "constant")
            for wave in wave_kinds:
                t0 = time.perf_counter()
                tfan = evaluate_transport(fan, surface, source, provider, wave,
                                          delta_caustic=num["delta_caustic"])
                timings[f"transport_mode{n}_{wave}"] = time.perf_counter() - t0
                if "transport" in dumps:
                    tfan.write_csv(outdir / f"transport_mode{n}_{wave}.csv")
                worst_conservation = max(worst_conservation,
                                         tfan.conservation_residual())

                t0 = time.perf_counter()
                samples = collect_samples(fan, tfan, provider, source, surface,
                                          z_obs)
                timings[f"field_mode{n}_{wave}"] = time.perf_counter() - t0
                samples_by_mode[wave][n] = samples
                total_samples += len(samples)
                masked_samples += sum(s.quality != QUALITY_OK for s in samples)
    except Exception as exc:  # numerical failure: report and bail with code 3
        print(f"pipeline failure: {exc}", file=stream)
        _write_report(outdir, cfg, {"error": str(exc), "timings": timings},
                      EXIT_NUMERICAL)
        return EXIT_NUMERICAL

    gcfg = cfg["output"]["grid"]
    for wave in wave_kinds:
        all_samples = [s for n in sorted(samples_by_mode[wave])
                       for s in samples_by_mode[wave][n]]
        if "field" in dumps:
            write_field_csv(all_samples, outdir / f"field_{wave}.csv")
        if "grid" in dumps:
            xs, ys = _grid_nodes(cfg, field, source)
            grid = synthesize_grid(samples_by_mode[wave], xs, ys, z_obs, t_obs,
                                   wave, max_gap=gcfg.get("max_gap"))
            write_grid_dump(grid, outdir / f"grid_{wave}.txt")

    frac_masked = masked_samples / total_samples if total_samples else 1.0
    stats.update({
        "samples_total": total_samples,
        "samples_masked": masked_samples,
        "masked_fraction": frac_masked,
        "conservation_worst_residual": worst_conservation,
    })
    timings["total"] = time.perf_counter() - t_start
    code = EXIT_PARTIAL if frac_masked > 0.5 else EXIT_OK
    stats["timings"] = timings
    _write_report(outdir, cfg, stats, code)
    print(f"field run complete: {total_samples} samples "
          f"({masked_samples} masked), worst conservation residual "
          f"{worst_conservation:.3e}", file=stream)
    return code


def _grid_nodes(cfg, field, source):
    g = cfg["output"]["grid"]
    t_obs = float(cfg["fan"]["t_obs"])
    t0_min = float(source.t0_grid[0])
    span = t_obs - t0_min
    x0 = source.speed * t0_min - 0.1 * source.speed * span
    x1 = source.speed * t_obs
    half = 0.8 * source.speed * span
    xs = np.linspace(max(x0, field.x_bounds[0]), min(x1, field.x_bounds[1]),
                     int(g["x_nodes"]))
    ys = np.linspace(max(-half, field.y_bounds[0]), min(half, field.y_bounds[1]),
                     int(g["y_nodes"]))
    return xs, ys


def _write_report(outdir, cfg, extra, exit_code):
    report = {"schema_version": SCHEMA_VERSION, "resolved_config": cfg,
              "exit_code": exit_code}
    report.update(extra)
    with open(Path(outdir) / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parse_tolerances(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--tolerance expects NAME=VALUE, got {item!r}")
        name, val = item.split("=", 1)
        out[name] = float(val)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="iwwake",
        description="Internal-wave wake far field by the ray method")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads, 0 = auto")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; the pipeline is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    p_self = sub.add_parser("selftest", help="run the oracle suites")
    p_self.add_argument("--tolerance", action="append", metavar="NAME=VALUE",
                        help="override a check tolerance (repeatable)")

    p_disp = sub.add_parser("dispersion", help="build dispersion surface caches")
    p_disp.add_argument("--config", required=True)
    p_disp.add_argument("--output", default=None, help="override output directory")

    p_field = sub.add_parser("field", help="run the full pipeline")
    p_field.add_argument("--config", required=True)
    p_field.add_argument("--output", default=None, help="override output directory")

    args = parser.parse_args(argv)
    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)

    try:
        if args.command == "selftest":
            code, _ = cmd_selftest(_parse_tolerances(args.tolerance))
            return code
        cfg = load_config(args.config)
        if args.output:
            cfg["output"]["directory"] = args.output
        if args.command == "dispersion":
            return cmd_dispersion(cfg, threads=threads)
        return cmd_field(cfg, threads=threads)
    except (ConfigError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
