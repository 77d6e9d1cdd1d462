"""Tabulated dispersion surface K_n(omega, x, y) and its partials.

The ray equations need K together with K'_omega, K'_x, K'_y as smooth,
mutually consistent fields.  We tabulate K on a tensor grid by solving
the vertical eigenvalue problem at every node and interpolate with a
tensor-product B-spline (cubic where the axis has >= 4 nodes).  All
partial derivatives are the exact derivatives of that one interpolant,
so the Hamiltonian flow conserves the eikonal constraint to integrator
tolerance.

A direct evaluator (fresh eigen-solve plus finite differences per query)
is provided for verification, and an analytic constant-N surface serves
as the exact oracle in the self-test suite.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline

from .modes import (mode_wavenumber, constant_n_wavenumber,
                    constant_n_domega, DEFAULT_NZ)

CACHE_FORMAT_VERSION = 1


class ExtrapolationError(ValueError):
    """Query outside the valid region; rays must terminate, not extrapolate."""


class SurfaceBuildError(RuntimeError):
    """Node-level solver failure with node coordinates attached."""


def _tensor_bspline(grids, table):
    """Tensor-product interpolating B-spline through table on grids.

    Per-axis degree is min(3, n_axis - 1); interpolation (not smoothing),
    so grid nodes are reproduced exactly.
    """
    c = np.asarray(table, float)
    knots = []
    degrees = []
    for ax, g in enumerate(grids):
        k = min(3, len(g) - 1)
        spl = make_interp_spline(g, np.moveaxis(c, ax, 0), k=k, axis=0)
        c = np.moveaxis(spl.c, 0, ax)
        knots.append(spl.t)
        degrees.append(k)
    return NdBSpline(tuple(knots), c, k=tuple(degrees))


class DispersionSurface:
    """Interpolated K_n(omega, x, y) with exact-derivative evaluation.

    Attributes
    ----------
    n : int
        Mode index.
    omega_grid, x_grid, y_grid : ndarray
        Strictly increasing tabulation grids.
    K_table : ndarray, shape (n_omega, n_x, n_y)
        Mode wavenumbers at the nodes [rad/m].
    """

    def __init__(self, n, omega_grid, x_grid, y_grid, K_table):
        self.n = int(n)
        self.omega_grid = np.asarray(omega_grid, float)
        self.x_grid = np.asarray(x_grid, float)
        self.y_grid = np.asarray(y_grid, float)
        self.K_table = np.asarray(K_table, float)
        for name, g in (("omega", self.omega_grid), ("x", self.x_grid), ("y", self.y_grid)):
            if g.ndim != 1 or len(g) < 2 or np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} grid must be 1-D, strictly increasing, >= 2 nodes")
        if self.K_table.shape != (len(self.omega_grid), len(self.x_grid), len(self.y_grid)):
            raise ValueError("K table shape does not match the grids")
        if np.any(self.K_table <= 0):
            raise ValueError("K table must be strictly positive")
        self._spl = _tensor_bspline(
            (self.omega_grid, self.x_grid, self.y_grid), self.K_table)

    # -- region handling -------------------------------------------------

    @property
    def bounds(self):
        return ((self.omega_grid[0], self.omega_grid[-1]),
                (self.x_grid[0], self.x_grid[-1]),
                (self.y_grid[0], self.y_grid[-1]))

    def contains(self, omega, x, y, margin=0.0):
        (w0, w1), (x0, x1), (y0, y1) = self.bounds
        return (w0 - margin <= omega <= w1 + margin
                and x0 - margin <= x <= x1 + margin
                and y0 - margin <= y <= y1 + margin)

    def boundary_clearances(self, x, y):
        """Signed distances to the four lateral edges (>0 inside)."""
        (_, _), (x0, x1), (y0, y1) = self.bounds
        return (x - x0, x1 - x, y - y0, y1 - y)

    # -- evaluation --------------------------------------------------------

    def eval(self, omega, x, y):
        """(K, K'_omega, K'_x, K'_y) at one point inside the valid region."""
        if not self.contains(omega, x, y):
            raise ExtrapolationError(
                f"({omega:g}, {x:g}, {y:g}) outside the dispersion surface region "
                f"{self.bounds}")
        return self.eval_raw(omega, x, y)

    def eval_raw(self, omega, x, y):
        """eval without the region check (ray RHS fast path; trial steps
        of the integrator may peek marginally outside before the
        termination event fires)."""
        pt = np.array([omega, x, y], float)
        K = float(self._spl(pt))
        Kw = float(self._spl(pt, nu=_NU_W))
        Kx = float(self._spl(pt, nu=_NU_X))
        Ky = float(self._spl(pt, nu=_NU_Y))
        return K, Kw, Kx, Ky

    def eval_many(self, pts):
        """Vectorized (K, K'_omega, K'_x, K'_y) over pts of shape (m, 3)."""
        pts = np.asarray(pts, float)
        return (self._spl(pts), self._spl(pts, nu=_NU_W),
                self._spl(pts, nu=_NU_X), self._spl(pts, nu=_NU_Y))

    # -- persistence --------------------------------------------------------

    def save(self, path):
        """Write the versioned cache (grids + table); round-trip exact."""
        np.savez(path, format_version=CACHE_FORMAT_VERSION, n=self.n,
                 omega_grid=self.omega_grid, x_grid=self.x_grid,
                 y_grid=self.y_grid, K_table=self.K_table)

    @classmethod
    def load(cls, path):
        with np.load(path) as d:
            ver = int(d["format_version"])
            if ver != CACHE_FORMAT_VERSION:
                raise ValueError(f"unsupported surface cache version {ver}")
            return cls(int(d["n"]), d["omega_grid"], d["x_grid"], d["y_grid"],
                       d["K_table"])


_NU_W = np.array([1, 0, 0])
_NU_X = np.array([0, 1, 0])
_NU_Y = np.array([0, 0, 1])


def build_surface(field, n, omega_grid, x_grid, y_grid, nz=DEFAULT_NZ, workers=1):
    """Fill the K table by solving the mode problem at every grid node.

    Preconditions: grids nonempty and strictly increasing; every omega
    lies below min over the spatial grid of max_z N (checked up front, so
    the whole box is a valid region).  Any node-level solver failure is
    re-raised with the node coordinates attached.
    """
    omega_grid = np.asarray(omega_grid, float)
    x_grid = np.asarray(x_grid, float)
    y_grid = np.asarray(y_grid, float)

    nmax_min = min(field.max_n(xv, yv) for xv in x_grid for yv in y_grid)
    if omega_grid[-1] >= nmax_min:
        raise SurfaceBuildError(
            f"omega grid reaches {omega_grid[-1]:g} >= min max_z N = {nmax_min:g}; "
            "no propagating mode at some nodes")

    nodes = [(iw, ix, iy) for iw in range(len(omega_grid))
             for ix in range(len(x_grid)) for iy in range(len(y_grid))]

    def solve_node(idx):
        iw, ix, iy = idx
        try:
            return mode_wavenumber(field, omega_grid[iw], x_grid[ix], y_grid[iy], n, nz)
        except Exception as exc:
            raise SurfaceBuildError(
                f"mode solve failed at node omega={omega_grid[iw]:g}, "
                f"x={x_grid[ix]:g}, y={y_grid[iy]:g}: {exc}") from exc

    table = np.empty((len(omega_grid), len(x_grid), len(y_grid)))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, K in zip(nodes, pool.map(solve_node, nodes)):
                table[idx] = K
    else:
        for idx in nodes:
            table[idx] = solve_node(idx)

    return DispersionSurface(n, omega_grid, x_grid, y_grid, table)


class DirectDispersion:
    """On-the-fly evaluator: fresh eigen-solve plus centered finite
    differences per query.  Slow; used as the interpolation-error oracle.
    """

    def __init__(self, field, n, nz=DEFAULT_NZ, fd_space=None, fd_omega=None,
                 bounds=None):
        self.field = field
        self.n = int(n)
        self.nz = int(nz)
        self.fd_space = fd_space
        self.fd_omega = fd_omega
        self._bounds = bounds

    def eval(self, omega, x, y):
        K = mode_wavenumber(self.field, omega, x, y, self.n, self.nz)
        hw = self.fd_omega or max(1e-6, 1e-4 * omega)
        hs = self.fd_space or max(1e-3, 1e-6 * (abs(x) + abs(y) + 1.0))
        Kw = (mode_wavenumber(self.field, omega + hw, x, y, self.n, self.nz)
              - mode_wavenumber(self.field, omega - hw, x, y, self.n, self.nz)) / (2 * hw)
        Kx = (mode_wavenumber(self.field, omega, x + hs, y, self.n, self.nz)
              - mode_wavenumber(self.field, omega, x - hs, y, self.n, self.nz)) / (2 * hs)
        Ky = (mode_wavenumber(self.field, omega, x, y + hs, self.n, self.nz)
              - mode_wavenumber(self.field, omega, x, y - hs, self.n, self.nz)) / (2 * hs)
        return K, Kw, Kx, Ky

    eval_raw = eval

    def contains(self, omega, x, y, margin=0.0):
        if self._bounds is None:
            return True
        (w0, w1), (x0, x1), (y0, y1) = self._bounds
        return (w0 - margin <= omega <= w1 + margin
                and x0 - margin <= x <= x1 + margin
                and y0 - margin <= y <= y1 + margin)

    def boundary_clearances(self, x, y):
        if self._bounds is None:
            return (1.0, 1.0, 1.0, 1.0)
        (_, _), (x0, x1), (y0, y1) = self._bounds
        return (x - x0, x1 - x, y - y0, y1 - y)

    @property
    def bounds(self):
        if self._bounds is None:
            return ((0.0, np.inf), (-np.inf, np.inf), (-np.inf, np.inf))
        return self._bounds


class ConstantNDispersion:
    """Exact analytic surface for the uniform layer (verification oracle):
    K = (n pi / h) omega / sqrt(N^2 - omega^2), no horizontal dependence.
    """

    def __init__(self, n0, h, n, bounds=None):
        self.n0 = float(n0)
        self.h = float(h)
        self.n = int(n)
        self._bounds = bounds or ((0.0, self.n0), (-np.inf, np.inf), (-np.inf, np.inf))

    def eval(self, omega, x, y):
        if not (0.0 < omega < self.n0):
            raise ExtrapolationError(f"omega={omega:g} outside (0, N)")
        K = constant_n_wavenumber(self.n0, self.h, omega, self.n)
        Kw = constant_n_domega(self.n0, self.h, omega, self.n)
        return float(K), float(Kw), 0.0, 0.0

    eval_raw = eval

    def contains(self, omega, x, y, margin=0.0):
        (w0, w1), (x0, x1), (y0, y1) = self._bounds
        return (w0 - margin <= omega <= w1 + margin
                and x0 - margin <= x <= x1 + margin
                and y0 - margin <= y <= y1 + margin)

    def boundary_clearances(self, x, y):
        (_, _), (x0, x1), (y0, y1) = self._bounds
        return (x - x0, x1 - x, y - y0, y1 - y)

    @property
    def bounds(self):
        return self._bounds
