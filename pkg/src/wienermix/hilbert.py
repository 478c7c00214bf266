"""Discretized Cameron-Martin space and square-integrable kernel operators.

Everything lives on a uniform partition of [0, 1] into ``m`` subintervals of
width ``dt = 1/m``.  An element of the Cameron-Martin space H (absolutely
continuous path, square-integrable derivative) is stored through the values
of its derivative on each subinterval; a kernel operator on L2[0,1] is stored
as the dense array of its kernel values at the grid nodes, acting by
rectangle-rule quadrature.

The normalized-increment functions ``e_i`` (density sqrt(m) on subinterval i,
zero elsewhere) form an exactly orthonormal basis of the discretized H, so
the finite-dimensional identities verified elsewhere hold to round-off rather
than to O(dt).  Coordinates with respect to that basis are
``coords = sqrt(dt) * density``; Euclidean geometry on coordinates coincides
with H geometry on densities.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InputFormatError,
    UnsupportedOrderError,
)

__all__ = [
    "Grid",
    "HVector",
    "Kernel2",
    "ChaosKernel",
    "inner_h",
    "kernel_apply",
    "kernel_compose",
    "hs_norm",
    "hvector_to_csv",
    "hvector_from_csv",
    "kernel_to_csv",
    "kernel_from_csv",
    "square_array_to_csv",
    "square_array_from_csv",
    "hvector_to_json",
    "hvector_from_json",
    "kernel_to_json",
    "kernel_from_json",
]

# Floats are serialized with 17 significant digits: enough for exact
# round-trip of IEEE doubles through text.
FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, 1] into ``m`` subintervals."""

    m: int

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 2:
            raise InputFormatError(f"grid size must be an integer >= 2, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def dt(self):
        return 1.0 / self.m

    def nodes(self):
        """All m+1 partition nodes t_0 = 0, ..., t_m = 1."""
        return np.linspace(0.0, 1.0, self.m + 1)

    def left(self):
        """Left endpoints of the subintervals."""
        return np.arange(self.m) / self.m

    def mid(self):
        """Midpoints of the subintervals."""
        return (np.arange(self.m) + 0.5) / self.m


def _as_grid(grid):
    if isinstance(grid, Grid):
        return grid
    return Grid(grid)


class HVector:
    """Element of the discretized Cameron-Martin space.

    Parameters
    ----------
    grid : Grid
    density : array_like, shape (m,)
        Value of the derivative h' on each subinterval.  The path itself is
        h(t) = integral of the density; it is recovered by ``values()``.

    Notes
    -----
    ``coords`` are the coefficients with respect to the orthonormal
    normalized-increment basis: ``coords = sqrt(dt) * density``.  All inner
    products and norms can equivalently be computed on coordinates with the
    plain Euclidean dot product.
    """

    __slots__ = ("grid", "density")

    def __init__(self, grid, density):
        grid = _as_grid(grid)
        density = np.asarray(density, dtype=float)
        if density.shape != (grid.m,):
            raise DimensionMismatchError(
                f"density has shape {density.shape}, grid expects ({grid.m},)"
            )
        density = density.copy()
        density.setflags(write=False)
        self.grid = grid
        self.density = density

    # -- constructors -------------------------------------------------

    @classmethod
    def basis(cls, grid, i):
        """i-th normalized-increment basis vector (unit H norm)."""
        grid = _as_grid(grid)
        if not 0 <= i < grid.m:
            raise DimensionMismatchError(f"basis index {i} out of range for m={grid.m}")
        d = np.zeros(grid.m)
        d[i] = np.sqrt(grid.m)
        return cls(grid, d)

    @classmethod
    def constant(cls, grid, value=1.0):
        """Linear path h(t) = value * t (constant density)."""
        grid = _as_grid(grid)
        return cls(grid, np.full(grid.m, float(value)))

    @classmethod
    def from_coords(cls, grid, coords):
        """Build from orthonormal-basis coordinates."""
        grid = _as_grid(grid)
        coords = np.asarray(coords, dtype=float)
        return cls(grid, coords * np.sqrt(grid.m))

    # -- geometry -----------------------------------------------------

    @property
    def coords(self):
        """Coordinates in the orthonormal basis, sqrt(dt) * density."""
        return self.density / np.sqrt(self.grid.m)

    def norm(self):
        return float(np.sqrt(inner_h(self, self)))

    def values(self):
        """Path values at all m+1 grid nodes (h(0) = 0)."""
        out = np.empty(self.grid.m + 1)
        out[0] = 0.0
        np.cumsum(self.density * self.grid.dt, out=out[1:])
        return out

    def normalized(self):
        """Same direction, unit H norm."""
        n = self.norm()
        if n == 0.0:
            raise DegenerateInputError("zero vector cannot be normalized")
        return HVector(self.grid, self.density / n)

    # -- arithmetic (pointwise on densities) ---------------------------

    def __add__(self, other):
        _check_same_grid(self, other)
        return HVector(self.grid, self.density + other.density)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return HVector(self.grid, self.density - other.density)

    def __mul__(self, scalar):
        return HVector(self.grid, self.density * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return HVector(self.grid, -self.density)

    def __repr__(self):
        return f"HVector(m={self.grid.m}, |h|={self.norm():.6g})"


def _check_same_grid(a, b):
    if a.grid.m != b.grid.m:
        raise DimensionMismatchError(f"grid mismatch: m={a.grid.m} vs m={b.grid.m}")


def inner_h(u, v):
    """H inner product dt * sum(u' * v').

    Bilinear, symmetric, positive definite; equals the Euclidean dot product
    of the coordinate vectors.
    """
    _check_same_grid(u, v)
    return float(u.grid.dt * np.dot(u.density, v.density))


class Kernel2:
    """Two-variable kernel k(t, s) sampled on the grid.

    Acts on square-integrable functions by rectangle-rule quadrature:
    ``(K f)(t_i) = dt * sum_j k[i, j] f(t_j)``.  The matrix of the induced
    operator in the orthonormal coordinate basis is ``dt * k`` (the same
    matrix represents the operator on derivative densities).
    """

    __slots__ = ("grid", "k")

    def __init__(self, grid, k):
        grid = _as_grid(grid)
        k = np.asarray(k, dtype=float)
        if k.shape != (grid.m, grid.m):
            raise DimensionMismatchError(
                f"kernel has shape {k.shape}, grid expects ({grid.m}, {grid.m})"
            )
        k = k.copy()
        k.setflags(write=False)
        self.grid = grid
        self.k = k

    @classmethod
    def zero(cls, grid):
        grid = _as_grid(grid)
        return cls(grid, np.zeros((grid.m, grid.m)))

    @classmethod
    def rank_one(cls, u, v, scale=1.0):
        """Kernel scale * u'(t) v'(s); the integral operator scale * (v, .) u."""
        _check_same_grid(u, v)
        return cls(u.grid, float(scale) * np.outer(u.density, v.density))

    @classmethod
    def reflection(cls, h):
        """Kernel of the reflection across the hyperplane orthogonal to h.

        For unit h the induced coordinate map is I - 2 h h^T (orthogonal, one
        eigenvalue -1); built as the rank-one kernel -2 h'(t) h'(s) / |h|^2.
        """
        n2 = inner_h(h, h)
        if n2 == 0.0:
            raise DegenerateInputError("cannot reflect across a zero vector")
        return cls.rank_one(h, h, scale=-2.0 / n2)

    @property
    def op_matrix(self):
        """Matrix of the operator in orthonormal coordinates: dt * k."""
        return self.grid.dt * self.k

    def __add__(self, other):
        _check_same_grid(self, other)
        return Kernel2(self.grid, self.k + other.k)

    def __mul__(self, scalar):
        return Kernel2(self.grid, self.k * float(scalar))

    __rmul__ = __mul__

    def transpose(self):
        return Kernel2(self.grid, self.k.T)

    def __repr__(self):
        return f"Kernel2(m={self.grid.m}, hs_norm={hs_norm(self):.6g})"


def kernel_apply(K, f):
    """Apply the integral operator of ``K`` to the density of ``f``.

    Returns an HVector with density ``dt * k @ f.density``.
    """
    _check_same_grid(K, f)
    return HVector(K.grid, K.grid.dt * (K.k @ f.density))


def kernel_compose(K, Q):
    """Kernel of the operator composition (I + Q)(I + K) minus identity.

    The result ``C`` satisfies I + C = (I + Q)(I + K) exactly, i.e.
    C = K + Q + Q K as operators; on kernel values this is
    ``c = k + q + dt * (q @ k)``.  Composition in this order is the kernel of
    first shifting by K, then by Q — see ``shifts.apply_shift``.
    """
    _check_same_grid(K, Q)
    dt = K.grid.dt
    return Kernel2(K.grid, K.k + Q.k + dt * (Q.k @ K.k))


def hs_norm(K):
    """Hilbert-Schmidt norm: sqrt(dt^2 * sum k^2) = Frobenius norm of dt*k."""
    return float(K.grid.dt * np.linalg.norm(K.k, "fro"))


class ChaosKernel:
    """Separable symmetric kernel for a chaos-drift of order n.

    Represents g(t) * h(s_1) ... h(s_n) with n in 1..3: the t-slot carries the
    density added to the path derivative, each s-slot carries one copy of the
    same density h' (which makes the kernel symmetric in the s-variables by
    construction).
    """

    __slots__ = ("order", "g", "h")

    MAX_ORDER = 3

    def __init__(self, order, g, h):
        if not isinstance(order, (int, np.integer)) or not 1 <= order <= self.MAX_ORDER:
            raise UnsupportedOrderError(
                f"chaos order must be an integer in 1..{self.MAX_ORDER}, got {order!r}"
            )
        _check_same_grid(g, h)
        self.order = int(order)
        self.g = g
        self.h = h

    @property
    def grid(self):
        return self.g.grid

    def to_kernel2(self):
        """Reduce an order-1 chaos kernel to its equivalent two-variable kernel.

        The shift induced by an order-1 chaos kernel coincides with the shift
        of the rank-one ``Kernel2`` with values k[a][b] = h'(a) g'(b).  Higher
        orders have no such reduction.
        """
        if self.order != 1:
            raise UnsupportedOrderError("only order-1 chaos kernels reduce to Kernel2")
        return Kernel2.rank_one(self.h, self.g)

    def __repr__(self):
        return f"ChaosKernel(order={self.order}, m={self.grid.m})"


# ----------------------------------------------------------------------
# serialization
#
# CSV: the first line carries the grid size ("m,<m>"), then a header row and
# the data rows; floats are written with 17 significant digits so a
# write/read cycle reproduces the doubles bit-for-bit.  JSON mirrors the
# same payloads for config-style use.
# ----------------------------------------------------------------------


def _fmt(x):
    return FLOAT_FMT % float(x)


def hvector_to_csv(h, path_or_buf):
    """Write an HVector as CSV: ``m`` line, then rows ``index,density``."""
    rows = [(i, _fmt(d)) for i, d in enumerate(h.density)]
    _write_csv(path_or_buf, ["index", "density"], rows, meta={"m": h.grid.m})


def hvector_from_csv(path_or_buf):
    meta, rows = _read_csv(path_or_buf, ["index", "density"], meta_keys=["m"])
    grid = Grid(meta["m"])
    if len(rows) != grid.m:
        raise InputFormatError(f"expected {grid.m} rows, found {len(rows)}")
    d = np.empty(grid.m)
    for row in rows:
        d[int(row["index"])] = float(row["density"])
    return HVector(grid, d)


def square_array_to_csv(a, path_or_buf):
    """Write a square array as CSV: ``m`` line, then rows ``i,j,value``."""
    a = np.asarray(a, dtype=float)
    m = a.shape[0]
    if a.shape != (m, m):
        raise DimensionMismatchError(f"expected a square array, got shape {a.shape}")
    rows = [(i, j, _fmt(a[i, j])) for i in range(m) for j in range(m)]
    _write_csv(path_or_buf, ["i", "j", "value"], rows, meta={"m": m})


def square_array_from_csv(path_or_buf):
    meta, rows = _read_csv(path_or_buf, ["i", "j", "value"], meta_keys=["m"])
    m = meta["m"]
    if m < 2:
        raise InputFormatError(f"array size must be >= 2, got m={m}")
    if len(rows) != m * m:
        raise InputFormatError(f"expected {m * m} rows, found {len(rows)}")
    a = np.empty((m, m))
    for row in rows:
        i, j = int(row["i"]), int(row["j"])
        if not (0 <= i < m and 0 <= j < m):
            raise InputFormatError(f"index ({i}, {j}) out of range for m={m}")
        a[i, j] = float(row["value"])
    return a


def kernel_to_csv(K, path_or_buf):
    """Write a Kernel2 as CSV: ``m`` line, then dense rows ``i,j,value``."""
    square_array_to_csv(K.k, path_or_buf)


def kernel_from_csv(path_or_buf):
    a = square_array_from_csv(path_or_buf)
    return Kernel2(Grid(a.shape[0]), a)


def hvector_to_json(h):
    return {"m": h.grid.m, "density": [float(x) for x in h.density]}


def hvector_from_json(obj):
    try:
        return HVector(Grid(obj["m"]), obj["density"])
    except (KeyError, TypeError) as exc:
        raise InputFormatError(f"bad HVector payload: {exc}") from exc


def kernel_to_json(K):
    return {"m": K.grid.m, "k": [[float(x) for x in row] for row in K.k]}


def kernel_from_json(obj):
    try:
        return Kernel2(Grid(obj["m"]), obj["k"])
    except (KeyError, TypeError) as exc:
        raise InputFormatError(f"bad Kernel2 payload: {exc}") from exc


def dump_json(obj, path):
    """Deterministic JSON dump: sorted keys, repr-exact floats, newline at EOF."""
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: {exc}") from exc


def _write_csv(path_or_buf, header, rows, meta=None):
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh)
        for key, value in (meta or {}).items():
            w.writerow([key, value])
        w.writerow(header)
        w.writerows(rows)
    finally:
        if own:
            fh.close()


def _read_csv(path_or_buf, header, meta_keys=None):
    """Read CSV written by :func:`_write_csv`.

    Returns the list of row dicts, or ``(meta, rows)`` when ``meta_keys``
    names the integer-valued metadata lines expected before the header.
    """
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, newline="") if own else path_or_buf
    try:
        r = csv.reader(fh)
        meta = {}
        for key in meta_keys or []:
            try:
                got = next(r)
            except StopIteration:
                raise InputFormatError(f"missing '{key}' line in CSV input") from None
            if len(got) != 2 or got[0].strip() != key:
                raise InputFormatError(f"expected a '{key},<value>' line, found {got}")
            try:
                meta[key] = int(got[1])
            except ValueError:
                raise InputFormatError(f"'{key}' must be an integer, found {got[1]!r}") from None
        try:
            got = next(r)
        except StopIteration:
            raise InputFormatError("empty CSV input") from None
        if [c.strip() for c in got] != header:
            raise InputFormatError(f"expected header {header}, found {got}")
        out = []
        for line in r:
            if not line:
                continue
            if len(line) != len(header):
                raise InputFormatError(f"malformed CSV row: {line}")
            out.append(dict(zip(header, line)))
        return (meta, out) if meta_keys else out
    except csv.Error as exc:
        raise InputFormatError(f"CSV parse error: {exc}") from exc
    finally:
        if own:
            fh.close()
