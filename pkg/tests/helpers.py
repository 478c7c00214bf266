"""Shared constructions for the test suite."""

import numpy as np
from scipy.linalg import expm

from wienermix import Grid, Kernel2, stream


def skew_shift_kernel(m, seed, scale=1.0):
    """Unitary shift kernel from a random skew generator: dt*k = expm(S) - I."""
    rng = stream(seed, "skew", m)
    a = rng.standard_normal((m, m))
    s = scale * (a - a.T)
    grid = Grid(m)
    return Kernel2(grid, (expm(s) - np.eye(m)) / grid.dt)


def smooth_skew_kernel(m):
    """Shift kernel from the smooth skew generator s(t, u) = sqrt(2) sin(2 pi (t - u))."""
    grid = Grid(m)
    t = grid.mid()
    s = np.sqrt(2.0) * np.sin(2.0 * np.pi * (t[:, None] - t[None, :]))
    return Kernel2(grid, (expm(grid.dt * s) - np.eye(m)) / grid.dt)
