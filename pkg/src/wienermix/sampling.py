"""Path sampling and the basic Gaussian functionals on paths.

Discretized Brownian paths are carried by their increments over the uniform
grid; in the normalized-increment basis the coordinates ``x = sqrt(m) * dw``
are i.i.d. standard normal.  All randomness flows from one master seed through
named counter-based streams, so every consumer can be replayed independently
of evaluation order.
"""

import hashlib

import numpy as np

from . import _accel
from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InputFormatError,
    UnsupportedOrderError,
)
from .hilbert import FLOAT_FMT, Grid, HVector, _as_grid, _read_csv, _write_csv, inner_h

__all__ = [
    "stream",
    "Path",
    "sample_wiener",
    "sample_batch",
    "divergence",
    "divergence_batch",
    "wick_exponential",
    "wick_batch",
    "multiple_integral",
    "multiple_integral_batch",
    "hermite",
    "path_to_csv",
    "path_from_csv",
    "AmplitudeObservable",
    "WickObservable",
]


def _key_word(part):
    """Map one stream-key part to a stable uint32 (strings via sha256)."""
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode()).digest()[:4], "little")
    raise TypeError(f"stream key parts must be int or str, got {type(part).__name__}")


def stream(master_seed, *key):
    """Named, replayable random stream derived from the master seed.

    Parameters
    ----------
    master_seed : int
    *key : int or str
        Stream name, e.g. ``stream(seed, "wiener", rep)``.  Distinct names
        give statistically independent streams; the same name always gives
        the same stream regardless of what else was drawn before.

    Returns
    -------
    numpy.random.Generator backed by the counter-based Philox engine.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(_key_word(p) for p in key))
    return np.random.Generator(np.random.Philox(ss))


class Path:
    """Discretized Wiener path, stored by its m increments."""

    __slots__ = ("grid", "increments")

    def __init__(self, grid, increments):
        grid = _as_grid(grid)
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (grid.m,):
            raise DimensionMismatchError(
                f"increments have shape {increments.shape}, grid expects ({grid.m},)"
            )
        increments = increments.copy()
        increments.setflags(write=False)
        self.grid = grid
        self.increments = increments

    @classmethod
    def from_coordinates(cls, grid, coords):
        """Build from normalized-increment coordinates x (dw = x / sqrt(m))."""
        grid = _as_grid(grid)
        coords = np.asarray(coords, dtype=float)
        return cls(grid, coords / np.sqrt(grid.m))

    @property
    def coordinates(self):
        """Coordinates in the orthonormal basis: sqrt(m) * increments."""
        return self.increments * np.sqrt(self.grid.m)

    def values(self):
        """Path values at the m+1 grid nodes (w(0) = 0)."""
        out = np.empty(self.grid.m + 1)
        out[0] = 0.0
        np.cumsum(self.increments, out=out[1:])
        return out

    def __repr__(self):
        return f"Path(m={self.grid.m})"


def path_to_csv(p, path_or_buf):
    """Write the node values of a path as CSV: ``m`` line, then rows ``t,w``.

    There are m+1 rows, one per grid node, starting at (0, 0).
    """
    nodes = p.grid.nodes()
    vals = p.values()
    rows = [(FLOAT_FMT % t, FLOAT_FMT % w) for t, w in zip(nodes, vals)]
    _write_csv(path_or_buf, ["t", "w"], rows, meta={"m": p.grid.m})


def path_from_csv(path_or_buf):
    meta, rows = _read_csv(path_or_buf, ["t", "w"], meta_keys=["m"])
    grid = Grid(meta["m"])
    if len(rows) != grid.m + 1:
        raise InputFormatError(f"expected {grid.m + 1} node rows, found {len(rows)}")
    w = np.array([float(row["w"]) for row in rows])
    if w[0] != 0.0:
        raise InputFormatError(f"paths start at w(0) = 0, found {w[0]!r}")
    return Path(grid, np.diff(w))


def sample_wiener(grid, rng):
    """One Brownian path: increments ~ N(0, dt), independent."""
    grid = _as_grid(grid)
    return Path(grid, rng.standard_normal(grid.m) * np.sqrt(grid.dt))


def sample_batch(grid, n_paths, rng):
    """Increment matrix of shape (n_paths, m); each row is one path."""
    grid = _as_grid(grid)
    return rng.standard_normal((n_paths, grid.m)) * np.sqrt(grid.dt)


def divergence(h, p):
    """First-order integral of h against the path: sum h'(t_i) dw_i.

    Linear in h; for paths sampled from the Wiener measure it is centered
    Gaussian with variance |h|_H^2.
    """
    if h.grid.m != p.grid.m:
        raise DimensionMismatchError(f"grid mismatch: m={h.grid.m} vs m={p.grid.m}")
    return float(np.dot(h.density, p.increments))


def divergence_batch(h, increments):
    """Divergence of h against each row of an increment matrix."""
    increments = np.asarray(increments, dtype=float)
    if increments.shape[-1] != h.grid.m:
        raise DimensionMismatchError(
            f"increment rows have length {increments.shape[-1]}, expected {h.grid.m}"
        )
    return increments @ h.density


def wick_exponential(h, p):
    """Normalized exponential exp(divergence(h, p) - |h|^2 / 2).

    Has Wiener-measure expectation exactly 1 for every h.
    """
    return float(np.exp(divergence(h, p) - 0.5 * inner_h(h, h)))


def wick_batch(h, increments):
    return np.exp(divergence_batch(h, increments) - 0.5 * inner_h(h, h))


def hermite(n, x):
    """Probabilists' Hermite polynomial He_n (scalar or elementwise)."""
    scalar = np.isscalar(x)
    out = _accel.hermite_batch(np.atleast_1d(np.asarray(x, dtype=float)), int(n))
    return float(out[0]) if scalar else out


def _check_chaos_order(n):
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 3:
        raise UnsupportedOrderError(f"multiple integrals implemented for orders 1..3, got {n!r}")


def multiple_integral(n, h, p, scale=1.0):
    """n-fold integral of the symmetric power of a unit vector, I_n((c h)^{x n}).

    For |h|_H = 1 this equals c^n * He_n(divergence(h, p)); the orthogonality
    E[I_a I_b] = 0 (a != b) and E[I_n^2] = n! c^{2n} follow from the Hermite
    calculus.  ``h`` must be unit -- fold any magnitude into ``scale``.
    """
    _check_chaos_order(n)
    nh = np.sqrt(inner_h(h, h))
    if nh == 0.0:
        raise DegenerateInputError("chaos integrand direction must be nonzero")
    if abs(nh - 1.0) > 1e-8:
        raise DegenerateInputError(
            f"h must have unit H norm (got {nh:.6g}); pass the magnitude via scale="
        )
    return float(scale) ** n * hermite(n, divergence(h, p))


def multiple_integral_batch(n, h, increments, scale=1.0):
    """Vectorized ``multiple_integral`` over an increment matrix."""
    _check_chaos_order(n)
    nh = np.sqrt(inner_h(h, h))
    if nh == 0.0:
        raise DegenerateInputError("chaos integrand direction must be nonzero")
    if abs(nh - 1.0) > 1e-8:
        raise DegenerateInputError(
            f"h must have unit H norm (got {nh:.6g}); pass the magnitude via scale="
        )
    return float(scale) ** n * _accel.hermite_batch(divergence_batch(h, increments), int(n))


def chaos_power_integral(n, h, increments):
    """I_n(h^{x n}) for general (possibly non-unit) h: |h|^n He_n(dh / |h|).

    Internal building block for chaos-drift shifts; ``h = 0`` gives 0.
    """
    _check_chaos_order(n)
    nh = np.sqrt(inner_h(h, h))
    if nh == 0.0:
        return np.zeros(np.asarray(increments).shape[:-1])
    return nh**n * _accel.hermite_batch(divergence_batch(h, increments) / nh, int(n))


class AmplitudeObservable:
    """Modulus of a (possibly complex) first-order integral: p -> |sum v' dw|.

    The direction may be a complex coordinate vector (eigenvectors of
    orthogonal maps come in conjugate pairs); the modulus is real either way.
    """

    __slots__ = ("grid", "density")

    def __init__(self, grid, coords):
        grid = _as_grid(grid)
        coords = np.asarray(coords)
        if coords.shape != (grid.m,):
            raise DimensionMismatchError(
                f"coords have shape {coords.shape}, grid expects ({grid.m},)"
            )
        self.grid = grid
        self.density = (coords * np.sqrt(grid.m)).astype(complex)
        self.density.setflags(write=False)

    @property
    def coords(self):
        return self.density / np.sqrt(self.grid.m)

    def __call__(self, p):
        if p.grid.m != self.grid.m:
            raise DimensionMismatchError(f"grid mismatch: m={self.grid.m} vs m={p.grid.m}")
        return float(np.abs(np.dot(self.density, p.increments)))

    def batch(self, increments):
        return np.abs(np.asarray(increments) @ self.density)

    def as_hvector(self, tol=1e-12):
        """The direction as a real H-vector, when its phase allows one.

        Complex eigen-directions come in conjugate pairs and carry no single
        real density; those raise DegenerateInputError.
        """
        scale = max(float(np.max(np.abs(self.density))), 1.0)
        if float(np.max(np.abs(self.density.imag))) > tol * scale:
            raise DegenerateInputError("direction is genuinely complex; no real density")
        return HVector(self.grid, self.density.real)


class WickObservable:
    """Normalized exponential observable p -> exp(dh(p) - |h|^2/2)."""

    __slots__ = ("h", "_half_norm2")

    def __init__(self, h):
        self.h = h
        self._half_norm2 = 0.5 * inner_h(h, h)

    def __call__(self, p):
        return float(np.exp(divergence(self.h, p) - self._half_norm2))

    def batch(self, increments):
        return np.exp(divergence_batch(self.h, increments) - self._half_norm2)
