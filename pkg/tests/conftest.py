"""Shared fixtures: the canonical constant-N configuration (N = 1 rad/s,
h = pi m, mode 1, V = 1 m/s, z0 = -pi/4) used by the analytic oracles,
plus a slowly modulated medium."""

import math

import numpy as np
import pytest

from iwwake import (StratificationField, SourceSpec, ConstantNDispersion,
                    build_surface)

N0 = 1.0
H = math.pi
V = 1.0
Z0 = -math.pi / 4


@pytest.fixture(scope="session")
def const_field():
    return StratificationField.constant_n(N0, H, x_bounds=(-60, 80),
                                          y_bounds=(-60, 60))


@pytest.fixture(scope="session")
def source():
    return SourceSpec(speed=V, depth=Z0, t0_grid=np.linspace(0.0, 4.0, 5),
                      omega_grid=np.linspace(0.2, 0.8, 7), branches=(1, -1))


@pytest.fixture(scope="session")
def analytic_surface():
    """Exact constant-N dispersion, mode 1, with a finite lateral box."""
    return ConstantNDispersion(N0, H, 1, bounds=((0.0, N0), (-60.0, 80.0),
                                                 (-60.0, 60.0)))


@pytest.fixture(scope="session")
def const_surface(const_field):
    """Interpolated surface for the uniform layer; omega grid contains
    0.6 exactly so the canonical oracle values are hit on-node."""
    return build_surface(const_field, 1, np.linspace(0.15, 0.9, 16),
                         np.linspace(-60, 80, 5), np.linspace(-60, 60, 5))


@pytest.fixture(scope="session")
def modulated_field():
    """10% N^2 modulation over L = 50 h, uniform profile in z."""
    L = 50 * H
    return StratificationField.thermocline(
        N0, 0.0, -H / 2, H / 10, H, mod_amplitude=0.1, mod_scale=L,
        x_bounds=(-80, 120), y_bounds=(-90, 90), lambda_ref=2 * np.pi / 0.75)
