"""Matrix-modulated integration of multidimensional paths.

An n-dimensional path bundle dW is modulated interval-by-interval by a
measurable family of real orthogonal matrices: dY_i = gamma(t_i) dW_i.  The
transform preserves the n-dimensional path measure exactly for any such
family.  Its long-run behaviour is decided by the eigenphase branches
psi_j(t): the transform can only lose memory when the level sets
{t : psi_j(t) <= theta} carry no mass concentrations, i.e. when the level
distribution functions F_j are continuous.  Jumps in F_j are mass atoms and
produce explicit invariants; in odd ambient dimension a real orthogonal
matrix always has an eigenvalue at +1 or -1, so one branch is pinned at
phase 2pi or pi and the transform is never in the ergodic regime.

Eigenphases live in (0, 2pi] (eigenvalue +1 at 2pi) and are sorted ascending
within each interval; eigenframes are phase-aligned with the previous
interval where overlaps allow, purely for presentational continuity.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InputFormatError,
    NonUnitaryOperatorError,
)
from .hilbert import FLOAT_FMT, Grid, HVector, _as_grid, _read_csv, _write_csv
from .rotations import TWO_PI, RotationOp, unitary_eigensystem

__all__ = [
    "PathBundle",
    "HBundle",
    "sample_bundle",
    "GammaProcess",
    "build_gamma",
    "gamma_constant",
    "gamma_sweep",
    "gamma_piecewise_planar",
    "gamma_random",
    "apply_gamma",
    "gamma_to_csv",
    "gamma_from_csv",
    "LevelDistribution",
    "level_distribution",
    "level_to_csv",
    "GammaVerdict",
    "gamma_ergodicity",
    "pi_theta_norm",
    "as_block_rotation",
    "flatten_bundle",
]


class PathBundle:
    """n independent discretized Wiener paths, stored as increments (m, n)."""

    __slots__ = ("grid", "n", "increments")

    def __init__(self, grid, increments):
        grid = _as_grid(grid)
        increments = np.asarray(increments, dtype=float)
        if increments.ndim != 2 or increments.shape[0] != grid.m:
            raise DimensionMismatchError(
                f"bundle increments must have shape (m, n) = ({grid.m}, *), got {increments.shape}"
            )
        increments = increments.copy()
        increments.setflags(write=False)
        self.grid = grid
        self.n = increments.shape[1]
        self.increments = increments

    def __repr__(self):
        return f"PathBundle(m={self.grid.m}, n={self.n})"


class HBundle:
    """n-dimensional Cameron-Martin element, stored by its density (m, n)."""

    __slots__ = ("grid", "n", "density")

    def __init__(self, grid, density):
        grid = _as_grid(grid)
        density = np.asarray(density, dtype=float)
        if density.ndim != 2 or density.shape[0] != grid.m:
            raise DimensionMismatchError(
                f"bundle density must have shape (m, n) = ({grid.m}, *), got {density.shape}"
            )
        density = density.copy()
        density.setflags(write=False)
        self.grid = grid
        self.n = density.shape[1]
        self.density = density

    def norm2(self):
        return float(self.grid.dt * np.sum(self.density * self.density))

    @classmethod
    def constant(cls, grid, direction):
        """Density constant in time along a fixed coordinate direction."""
        grid = _as_grid(grid)
        direction = np.asarray(direction, dtype=float)
        return cls(grid, np.tile(direction, (grid.m, 1)))

    def __repr__(self):
        return f"HBundle(m={self.grid.m}, n={self.n}, |h|^2={self.norm2():.6g})"


def sample_bundle(grid, n, rng):
    """One n-dimensional path bundle with independent N(0, dt) increments."""
    grid = _as_grid(grid)
    return PathBundle(grid, rng.standard_normal((grid.m, n)) * math.sqrt(grid.dt))


class GammaProcess:
    """Per-interval orthogonal modulation family with its eigen data.

    Attributes
    ----------
    samples : ndarray (m, n, n)
        gamma evaluated on each subinterval (one real orthogonal matrix per
        interval).
    phases : ndarray (m, n)
        Eigenphases per interval, sorted ascending in (0, 2pi].
    frames : ndarray (m, n, n), complex
        frames[i, :, j] is the unit eigenvector for phases[i, j].
    """

    __slots__ = ("grid", "n", "samples", "phases", "frames")

    def __init__(self, grid, samples, phases, frames):
        self.grid = grid
        self.n = samples.shape[1]
        self.samples = samples
        self.phases = phases
        self.frames = frames

    def __repr__(self):
        return f"GammaProcess(m={self.grid.m}, n={self.n})"


def build_gamma(grid, samples, tol=1e-10):
    """Validate an orthogonal family and compute its per-interval eigen data.

    Parameters
    ----------
    grid : Grid or int
    samples : array_like (m, n, n)
        One real matrix per subinterval; each must be orthogonal within
        ``tol`` (max-abs of gamma^T gamma - I).

    Raises
    ------
    NonUnitaryOperatorError
        Naming the first offending interval.
    """
    grid = _as_grid(grid)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[0] != grid.m or samples.shape[1] != samples.shape[2]:
        raise DimensionMismatchError(
            f"samples must have shape (m, n, n) = ({grid.m}, n, n), got {samples.shape}"
        )
    n = samples.shape[1]
    eye = np.eye(n)
    phases = np.empty((grid.m, n))
    frames = np.empty((grid.m, n, n), dtype=complex)
    for i in range(grid.m):
        g = samples[i]
        residual = float(np.max(np.abs(g.T @ g - eye)))
        if residual > tol:
            raise NonUnitaryOperatorError(
                f"interval {i}: modulation matrix is not orthogonal "
                f"(max |g^T g - I| = {residual:.3e} > {tol:.3e})"
            )
        ph, vec = unitary_eigensystem(g)
        order = np.argsort(ph, kind="stable")
        phases[i] = ph[order]
        frames[i] = vec[:, order]
        if i > 0:
            # presentational continuity: rotate each eigenvector's free phase
            # factor to maximize overlap with the previous interval's frame
            for j in range(n):
                ov = np.vdot(frames[i - 1, :, j], frames[i, :, j])
                if abs(ov) > 1e-12:
                    frames[i, :, j] *= np.conj(ov) / abs(ov)
    samples = samples.copy()
    for arr in (samples, phases, frames):
        arr.setflags(write=False)
    return GammaProcess(grid, samples, phases, frames)


def _planar(angle):
    ca, sa = math.cos(angle), math.sin(angle)
    return np.array([[ca, -sa], [sa, ca]])


def gamma_constant(grid, Q, tol=1e-10):
    """Time-independent modulation by one fixed orthogonal matrix."""
    grid = _as_grid(grid)
    Q = np.asarray(Q, dtype=float)
    return build_gamma(grid, np.tile(Q, (grid.m, 1, 1)), tol=tol)


def gamma_sweep(grid):
    """Planar rotation sweeping a full turn: angle 2 pi t, midpoint-sampled.

    The eigenphase branches 2 pi t and 2 pi - 2 pi t are each uniform, so
    all level distributions are continuous (piecewise linear) and the
    modulated integrator sits in the ergodic regime for the grid.
    """
    grid = _as_grid(grid)
    return build_gamma(grid, np.stack([_planar(TWO_PI * t) for t in grid.mid()]))


def gamma_piecewise_planar(grid, breaks, angles):
    """Piecewise-constant planar modulation.

    ``angles[k]`` applies on subintervals whose midpoint is below
    ``breaks[k]`` (breaks ascending, last one must be >= 1).  Constant pieces
    put point masses on the level distributions: each piece of time-length L
    contributes a jump of size L at its eigenphases.
    """
    grid = _as_grid(grid)
    breaks = list(breaks)
    if sorted(breaks) != breaks or breaks[-1] < 1.0:
        raise DegenerateInputError("breaks must be ascending and cover [0, 1]")
    if len(breaks) != len(angles):
        raise DimensionMismatchError("need exactly one angle per piece")
    mats = []
    for t in grid.mid():
        # midpoints are < 1, so the last break (>= 1) always catches
        k = next(idx for idx, b in enumerate(breaks) if t < b)
        mats.append(_planar(angles[k]))
    return build_gamma(grid, np.stack(mats))


def gamma_random(grid, n, rng):
    """Independent Haar-orthogonal modulation on every subinterval."""
    grid = _as_grid(grid)
    mats = []
    for _ in range(grid.m):
        g = rng.standard_normal((n, n))
        q, r = np.linalg.qr(g)
        mats.append(q * np.sign(np.diag(r)))
    return build_gamma(grid, np.stack(mats))


def apply_gamma(G, bundle):
    """Modulated integral: dY_i = gamma(t_i) dW_i, interval by interval."""
    if bundle.grid.m != G.grid.m or bundle.n != G.n:
        raise DimensionMismatchError(
            f"bundle (m={bundle.grid.m}, n={bundle.n}) does not match "
            f"modulation (m={G.grid.m}, n={G.n})"
        )
    out = np.einsum("ijk,ik->ij", G.samples, bundle.increments)
    return PathBundle(G.grid, out)


def gamma_to_csv(G, path_or_buf):
    """Write the modulation family as CSV: ``m``/``n`` lines, rows ``i,r,c,value``.

    One n x n block per interval, blocks in interval order.
    """
    rows = [
        (i, r, c, FLOAT_FMT % G.samples[i, r, c])
        for i in range(G.grid.m)
        for r in range(G.n)
        for c in range(G.n)
    ]
    _write_csv(path_or_buf, ["i", "r", "c", "value"], rows, meta={"m": G.grid.m, "n": G.n})


def gamma_from_csv(path_or_buf, tol=1e-10):
    """Read a modulation family written by :func:`gamma_to_csv` and validate it."""
    meta, rows = _read_csv(path_or_buf, ["i", "r", "c", "value"], meta_keys=["m", "n"])
    m, n = meta["m"], meta["n"]
    if n < 1:
        raise InputFormatError(f"block size must be >= 1, got n={n}")
    if len(rows) != m * n * n:
        raise InputFormatError(f"expected {m * n * n} rows, found {len(rows)}")
    samples = np.empty((m, n, n))
    for row in rows:
        i, r, c = int(row["i"]), int(row["r"]), int(row["c"])
        if not (0 <= i < m and 0 <= r < n and 0 <= c < n):
            raise InputFormatError(f"index ({i}, {r}, {c}) out of range for m={m}, n={n}")
        samples[i, r, c] = float(row["value"])
    return build_gamma(Grid(m), samples, tol=tol)


@dataclass(frozen=True)
class LevelDistribution:
    """Empirical distribution of one eigenphase branch over time.

    F(theta) = dt * #{intervals with psi_j <= theta}, evaluated at the right
    edges of ``n_bins`` equal theta-bins over (0, 2pi]; F(2pi) = 1 always.
    """

    j: int  # 1-based branch index (branches sorted ascending per interval)
    thetas: np.ndarray
    F: np.ndarray
    jumps: list  # [(theta_bin_right_edge, size), ...]
    threshold: float
    n_bins: int

    def as_dict(self):
        return {
            "branch": self.j,
            "thetas": [float(t) for t in self.thetas],
            "F": [float(f) for f in self.F],
            "jumps": [{"theta": float(t), "size": float(s)} for t, s in self.jumps],
            "threshold": self.threshold,
            "n_bins": self.n_bins,
        }


def level_distribution(G, j, n_bins=None, threshold=None):
    """Level distribution of the j-th sorted eigenphase branch, 1 <= j <= n.

    A jump is flagged wherever F gains more than ``threshold`` across one
    theta-bin; the default threshold 2*dt + bin width tolerates both the
    dt-quantization of F and the smearing of a continuous branch across a
    bin, so only genuine mass atoms fire.
    """
    if not 1 <= j <= G.n:
        raise DimensionMismatchError(f"branch index {j} out of range 1..{G.n}")
    if n_bins is None:
        n_bins = max(64, G.grid.m)
    n_bins = int(n_bins)
    bin_w = TWO_PI / n_bins
    if threshold is None:
        threshold = 2.0 * G.grid.dt + bin_w
    thetas = bin_w * np.arange(1, n_bins + 1)
    counts = np.searchsorted(np.sort(G.phases[:, j - 1]), thetas, side="right")
    F = counts * G.grid.dt
    gains = np.diff(np.concatenate([[0.0], F]))
    jumps = [
        (float(thetas[idx]), float(gains[idx]))
        for idx in np.nonzero(gains > threshold)[0]
    ]
    thetas.setflags(write=False)
    F.setflags(write=False)
    return LevelDistribution(
        j=j, thetas=thetas, F=F, jumps=jumps, threshold=float(threshold), n_bins=n_bins
    )


def level_to_csv(lv, path_or_buf):
    """Write a level distribution as plottable CSV rows ``theta,F``."""
    rows = [(FLOAT_FMT % t, FLOAT_FMT % f) for t, f in zip(lv.thetas, lv.F)]
    _write_csv(path_or_buf, ["theta", "F"], rows)


@dataclass(frozen=True)
class GammaVerdict:
    """Ergodicity verdict for a modulated integrator."""

    verdict: str  # NON-ERGODIC | ERGODIC-LIMIT
    jumps: list  # [(branch, theta, size), ...]
    pinned_jump: tuple | None  # (branch, theta, size) at pi or 2pi for odd n
    jump_tol: float
    n_bins: int
    levels: list = field(default_factory=list)

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "jumps": [
                {"branch": int(b), "theta": float(t), "size": float(s)}
                for b, t, s in self.jumps
            ],
            "pinned_jump": None
            if self.pinned_jump is None
            else {
                "branch": int(self.pinned_jump[0]),
                "theta": float(self.pinned_jump[1]),
                "size": float(self.pinned_jump[2]),
            },
            "jump_tol": self.jump_tol,
            "n_bins": self.n_bins,
            "levels": [lv.as_dict() for lv in self.levels],
        }


def gamma_ergodicity(G, n_bins=None, jump_tol=None):
    """Scan all eigenphase branches for level-distribution atoms.

    Any jump means an invariant of the modulated integrator exists
    (NON-ERGODIC); with none, the family is the discretization of a process
    whose phase level sets are null (ERGODIC-LIMIT).  In odd ambient
    dimension every interval has a real eigenvalue, so at least one branch
    must jump at phase pi or 2pi; that pinned jump is located and reported.
    """
    levels = [
        level_distribution(G, j, n_bins=n_bins, threshold=jump_tol) for j in range(1, G.n + 1)
    ]
    jumps = [(lv.j, t, s) for lv in levels for t, s in lv.jumps]
    verdict = "NON-ERGODIC" if jumps else "ERGODIC-LIMIT"
    pinned = None
    if G.n % 2 == 1:
        bin_w = TWO_PI / levels[0].n_bins
        for b, t, s in jumps:
            if min(abs(t - math.pi), _circ_gap(t)) <= bin_w + 1e-12:
                pinned = (b, t, s)
                break
        if pinned is None:
            raise RuntimeError(
                "odd ambient dimension must pin a branch at phase pi or 2pi; "
                "none found -- eigenphase bookkeeping is inconsistent"
            )
    return GammaVerdict(
        verdict=verdict,
        jumps=jumps,
        pinned_jump=pinned,
        jump_tol=levels[0].threshold,
        n_bins=levels[0].n_bins,
        levels=levels,
    )


def _circ_gap(t):
    """Circular distance of t to 2pi (== 0)."""
    d = t % TWO_PI
    return min(d, TWO_PI - d)


def pi_theta_norm(G, hb, theta):
    """Squared norm of the spectral cut of an H bundle at level theta.

    |Pi_theta h|^2 = dt * sum_i sum_j 1[psi_j(t_i) <= theta]
                      |<a_j(t_i), h'(t_i)>|^2.

    Non-decreasing in theta; equals |h|^2 at theta = 2pi (the per-interval
    frames are orthonormal).  ``theta`` may be a scalar or an array.
    """
    if hb.grid.m != G.grid.m or hb.n != G.n:
        raise DimensionMismatchError(
            f"bundle (m={hb.grid.m}, n={hb.n}) does not match modulation "
            f"(m={G.grid.m}, n={G.n})"
        )
    # w[i, j] = |<frame_j(t_i), h'(t_i)>|^2
    w = np.abs(np.einsum("icj,ic->ij", G.frames.conj(), hb.density)) ** 2
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.empty(theta_arr.shape)
    for idx, th in enumerate(theta_arr):
        out[idx] = G.grid.dt * float(np.sum(w[G.phases <= th]))
    return float(out[0]) if np.isscalar(theta) else out


def as_block_rotation(G, tol=1e-10):
    """The modulated integrator as one rotation of the flattened bundle space.

    Stacking the n components of every interval into a single coordinate
    vector of length n*m turns dY = gamma dW into the block-diagonal
    coordinate map diag(gamma(t_1), ..., gamma(t_m)).  A RotationOp applies
    its matrix transposed (x -> A^T x), so the blocks are stored transposed.
    Spectral atoms of the block rotation at a flattened direction coincide
    with the level masses seen by ``pi_theta_norm``.
    """
    nm = G.n * G.grid.m
    A = np.zeros((nm, nm))
    for i in range(G.grid.m):
        s = i * G.n
        A[s : s + G.n, s : s + G.n] = G.samples[i].T
    return RotationOp(A, tol=tol)


def flatten_bundle(hb):
    """Flatten an H bundle to the HVector seen by ``as_block_rotation``.

    The flattened grid has n*m subintervals, so densities rescale by
    sqrt(n) to keep coordinates (and the H norm) identical.
    """
    nm = hb.n * hb.grid.m
    return HVector(Grid(nm), math.sqrt(hb.n) * hb.density.ravel())
