"""Rotations of path space induced by orthogonal maps of the derivative space.

An orthogonal matrix A (entries A[i, j] = inner product of the rotated j-th
basis vector with the i-th) acts on a path through its orthonormal
coordinates, x -> A^T x, equivalently on increments dw -> A^T dw.  The
transform preserves the path measure exactly, and every first-order integral
intertwines with the rotation:  dh(T p) = d(A h)(p) pathwise.

Long-run behaviour is governed by the spectral measure of A at a direction h:
the atom positions are the eigenphases (taken in (0, 2pi], with eigenvalue
+1 mapped to phase 2pi) and the atom weights are the squared moduli of the
eigenvector components of h.  Finite-dimensional rotations always carry
atoms, so genuine ergodicity is out of reach on a fixed grid; the classifier
reports how the transform looks at a chosen spectral resolution and exhibits
explicit invariant observables whenever it declares non-ergodicity.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _accel
from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    NonUnitaryOperatorError,
)
from .hilbert import Grid, HVector, inner_h
from .sampling import (
    AmplitudeObservable,
    Path,
    divergence_batch,
    sample_batch,
    stream,
    wick_batch,
)

__all__ = [
    "unitary_eigensystem",
    "RotationOp",
    "rotation_from_matrix",
    "apply_rotation",
    "apply_rotation_batch",
    "SpectralMeasure",
    "spectral_measure",
    "autocorrelation",
    "ClassifyReport",
    "classify",
    "ChaosRep",
    "chaos_pushforward",
    "complementary_phase_pairs",
    "find_invariant_chaos2",
    "birkhoff_average",
    "MixingReport",
    "mixing_correlation",
    "mixing_correlation_truncated",
    "TruncatedBasisShift",
    "basis_shift_operator",
    "truncated_autocorrelation",
    "periodogram_spectrum",
]

TWO_PI = 2.0 * math.pi


def _phase(re, im):
    """Angle of re + i*im folded into (0, 2pi]; +1 lands at 2pi, -1 at pi."""
    th = math.atan2(im, re)
    if th <= 0.0:
        th += TWO_PI
    return th


def unitary_eigensystem(A):
    """Eigenphases and orthonormal eigenvectors of a real orthogonal matrix.

    Uses the real Schur form: standardized 2x2 blocks carry the conjugate
    eigenvalue pairs, and combining the corresponding pair of exactly
    orthonormal Schur columns q_i, q_{i+1} as (q_i +/- i q_{i+1}) / sqrt(2)
    yields eigenvectors that stay exactly orthonormal even when phases are
    degenerate (where a generic eigensolver loses orthogonality).

    Returns
    -------
    phases : ndarray, shape (m,)
        In (0, 2pi]; complex pairs are exactly complementary (th, 2pi - th);
        real eigenvalues give exactly pi (for -1) or 2pi (for +1).
    vectors : ndarray, shape (m, m), complex
        Column k is the eigenvector for exp(i * phases[k]).
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    T, Q = scipy.linalg.schur(A, output="real")
    phases = np.empty(m)
    vectors = np.empty((m, m), dtype=complex)
    i = 0
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    while i < m:
        two_by_two = i + 1 < m and T[i + 1, i] != 0.0
        if two_by_two:
            a = 0.5 * (T[i, i] + T[i + 1, i + 1])
            b = T[i, i + 1]
            c = T[i + 1, i]
            beta = math.sqrt(max(-b * c, 0.0))
            if beta == 0.0:
                two_by_two = False  # defensive: block degenerated to real pair
        if two_by_two:
            th = _phase(a, beta)
            s = 1.0 if b > 0.0 else -1.0
            v = (Q[:, i] + 1j * s * Q[:, i + 1]) * inv_sqrt2
            phases[i] = th
            vectors[:, i] = v
            phases[i + 1] = TWO_PI - th
            vectors[:, i + 1] = np.conj(v)
            i += 2
        else:
            phases[i] = TWO_PI if T[i, i] > 0.0 else math.pi
            vectors[:, i] = Q[:, i]
            i += 1
    return phases, vectors


class RotationOp:
    """Orthogonal coordinate map with its eigensystem precomputed.

    Construct through :func:`rotation_from_matrix` (checks orthogonality) or
    one of the factories.  ``phases``/``vectors`` follow the conventions of
    :func:`unitary_eigensystem`.
    """

    __slots__ = ("grid", "matrix", "phases", "vectors", "orth_residual")

    def __init__(self, matrix, tol=1e-10):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError(f"rotation matrix must be square, got {matrix.shape}")
        m = matrix.shape[0]
        residual = float(np.max(np.abs(matrix.T @ matrix - np.eye(m))))
        if residual > tol:
            raise NonUnitaryOperatorError(
                f"matrix is not orthogonal: max |A^T A - I| = {residual:.3e} > {tol:.3e}"
            )
        matrix = matrix.copy()
        matrix.setflags(write=False)
        self.grid = Grid(m)
        self.matrix = matrix
        self.orth_residual = residual
        self.phases, self.vectors = unitary_eigensystem(matrix)

    @property
    def m(self):
        return self.grid.m

    # -- factories ------------------------------------------------------

    @classmethod
    def identity(cls, m):
        return cls(np.eye(m))

    @classmethod
    def planar(cls, m, angle, axes=(0, 1)):
        """Rotation by ``angle`` in the plane of two basis directions."""
        i, j = axes
        A = np.eye(m)
        ca, sa = math.cos(angle), math.sin(angle)
        A[i, i] = ca
        A[j, j] = ca
        A[i, j] = -sa
        A[j, i] = sa
        return cls(A)

    @classmethod
    def from_angles(cls, m, angles, signs=()):
        """Block-diagonal rotation: one 2x2 block per angle, then +/-1 entries.

        ``2 * len(angles) + len(signs)`` must equal m.
        """
        if 2 * len(angles) + len(signs) != m:
            raise DimensionMismatchError(
                f"2*{len(angles)} + {len(signs)} != m = {m}; blocks must fill the matrix"
            )
        A = np.zeros((m, m))
        pos = 0
        for ang in angles:
            ca, sa = math.cos(ang), math.sin(ang)
            A[pos, pos] = ca
            A[pos + 1, pos + 1] = ca
            A[pos, pos + 1] = -sa
            A[pos + 1, pos] = sa
            pos += 2
        for s in signs:
            A[pos, pos] = float(np.sign(s)) if s else 1.0
            pos += 1
        return cls(A)

    @classmethod
    def equidistributed(cls, m):
        """Eigenphases exactly equidistributed at 2 pi k / m, k = 1..m.

        Planar blocks at angles 2 pi k / m for k = 1..m/2-1 plus eigenvalues
        -1 (phase pi) and +1 (phase 2 pi).  Requires even m >= 4.
        """
        if m < 4 or m % 2:
            raise DimensionMismatchError("equidistributed rotation needs even m >= 4")
        angles = [TWO_PI * k / m for k in range(1, m // 2)]
        return cls.from_angles(m, angles, signs=(-1, +1))

    @classmethod
    def haar(cls, m, rng):
        """Haar-distributed orthogonal matrix (QR with sign-fixed diagonal)."""
        g = rng.standard_normal((m, m))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diag(r))
        return cls(q)

    def __repr__(self):
        return f"RotationOp(m={self.m})"


def rotation_from_matrix(A, tol=1e-10):
    """Validate orthogonality of ``A`` and wrap it as a RotationOp."""
    return RotationOp(A, tol=tol)


def apply_rotation(R, p):
    """Rotate one path: coordinates map by A^T, hence dy = A^T dw."""
    if R.m != p.grid.m:
        raise DimensionMismatchError(f"grid mismatch: m={R.m} vs m={p.grid.m}")
    return Path(p.grid, R.matrix.T @ p.increments)


def apply_rotation_batch(R, increments):
    """Rotate each row of an increment matrix (rows transform by W @ A)."""
    increments = np.asarray(increments, dtype=float)
    if increments.shape[-1] != R.m:
        raise DimensionMismatchError(
            f"increment rows have length {increments.shape[-1]}, expected {R.m}"
        )
    return increments @ R.matrix


def _circ_dist(a, b):
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class SpectralMeasure:
    """Atomic spectral measure of a rotation at one direction.

    ``thetas`` are atom positions in (0, 2pi] sorted ascending; ``weights``
    the (positive) masses.  ``total`` is the squared H norm of the direction;
    the weights sum to it up to the mass dropped below the floor.
    """

    thetas: np.ndarray
    weights: np.ndarray
    total: float
    merge_tol: float
    dropped: float

    def heaviest(self):
        """(theta, weight) of the heaviest atom."""
        i = int(np.argmax(self.weights))
        return float(self.thetas[i]), float(self.weights[i])

    def as_dict(self):
        return {
            "atoms": [
                {"theta": float(t), "weight": float(w)}
                for t, w in zip(self.thetas, self.weights)
            ],
            "total": self.total,
            "merge_tol": self.merge_tol,
            "dropped": self.dropped,
        }


def _probe_coords(R, h):
    if isinstance(h, HVector):
        if h.grid.m != R.m:
            raise DimensionMismatchError(f"grid mismatch: m={R.m} vs m={h.grid.m}")
        return h.coords
    coords = np.asarray(h, dtype=float)
    if coords.shape != (R.m,):
        raise DimensionMismatchError(f"direction has shape {coords.shape}, expected ({R.m},)")
    return coords


def spectral_measure(R, h, merge_tol=1e-9, drop_rel=1e-12):
    """Spectral measure of ``R`` at direction ``h``.

    Raw weights |<v_k, h>|^2 are accumulated per eigenvector, then atoms
    closer than ``merge_tol`` on the circle are merged (weighted mean
    position) and atoms below ``drop_rel`` of the total mass are dropped.
    """
    coords = _probe_coords(R, h)
    raw_w = np.abs(R.vectors.conj().T @ coords) ** 2
    total = float(np.dot(coords, coords))
    order = np.argsort(R.phases, kind="stable")
    th = R.phases[order]
    w = raw_w[order]

    # cluster consecutive phases within merge_tol, circularly
    groups = []
    start = 0
    for i in range(1, len(th)):
        if th[i] - th[i - 1] > merge_tol:
            groups.append((start, i))
            start = i
    groups.append((start, len(th)))
    if len(groups) > 1:
        # wrap-around: first and last clusters may be circular neighbours
        first_lo = th[groups[0][0]]
        last_hi = th[groups[-1][1] - 1]
        if (first_lo + TWO_PI) - last_hi <= merge_tol:
            s0, e0 = groups.pop(0)
            s1, e1 = groups[-1]
            groups[-1] = (s1, e1, (s0, e0))  # merged pair, handled below

    atoms = []
    for g in groups:
        if len(g) == 2:
            s, e = g
            ws = w[s:e]
            ths = th[s:e]
        else:
            s1, e1, (s0, e0) = g
            ws = np.concatenate([w[s1:e1], w[s0:e0]])
            ths = np.concatenate([th[s1:e1], th[s0:e0] + TWO_PI])
        mass = float(np.sum(ws))
        if mass <= 0.0:
            continue
        pos = float(np.dot(ths, ws) / mass)
        pos = pos % TWO_PI
        if pos == 0.0:
            pos = TWO_PI
        atoms.append((pos, mass))

    floor = drop_rel * total
    kept = [(t, m_) for t, m_ in atoms if m_ > floor]
    dropped = float(sum(m_ for _, m_ in atoms) - sum(m_ for _, m_ in kept))
    kept.sort()
    thetas = np.array([t for t, _ in kept])
    weights = np.array([m_ for _, m_ in kept])
    thetas.setflags(write=False)
    weights.setflags(write=False)
    return SpectralMeasure(
        thetas=thetas,
        weights=weights,
        total=total,
        merge_tol=float(merge_tol),
        dropped=dropped,
    )


def autocorrelation(R, h, n_max):
    """a[n] = (R^n h, h)_H for n = 0..n_max, via the spectral representation.

    Equals sum_k w_k cos(n theta_k) with the unmerged eigen-weights; the
    direct matrix-power evaluation agrees to round-off.
    """
    coords = _probe_coords(R, h)
    w = np.abs(R.vectors.conj().T @ coords) ** 2
    ns = np.arange(n_max + 1)
    return (np.exp(1j * np.outer(ns, R.phases)) @ w).real


@dataclass(frozen=True)
class ClassifyReport:
    """Spectral classification of a rotation at a fixed atom resolution."""

    verdict: str  # NON-ERGODIC | MIXING-LIKE | ERGODIC-LIKE
    atom_tol: float
    horizon: int
    corr_sup: float  # sup_{1 <= n <= horizon} |a_n| / a_0 over probes
    max_atom_theta: float
    max_atom_weight: float  # absolute mass at the heaviest atom seen
    max_atom_probe: int
    witness_eigenvalue: complex | None
    witness: AmplitudeObservable | None
    probe_measures: list = field(default_factory=list)
    note: str = ""

    def as_dict(self):
        out = {
            "verdict": self.verdict,
            "atom_tol": self.atom_tol,
            "horizon": self.horizon,
            "corr_sup": self.corr_sup,
            "max_atom": {
                "theta": self.max_atom_theta,
                "weight": self.max_atom_weight,
                "probe": self.max_atom_probe,
            },
            "probe_measures": [sm.as_dict() for sm in self.probe_measures],
            "note": self.note,
        }
        if self.witness is not None:
            out["invariant_witness"] = {
                "eigenvalue": [self.witness_eigenvalue.real, self.witness_eigenvalue.imag],
                "coords_re": [float(x) for x in self.witness.coords.real],
                "coords_im": [float(x) for x in self.witness.coords.imag],
            }
        return out


def classify(R, probes, atom_tol=1e-8, horizon=None, corr_tol=1e-10, merge_tol=1e-9):
    """Classify the rotation by its spectral measures at a probe family.

    Parameters
    ----------
    R : RotationOp
    probes : sequence of HVector
        Must jointly span the coordinate space (rank checked), so an atom of
        the operator's spectral decomposition cannot hide from every probe.
    atom_tol : float
        Resolution: an atom whose weight exceeds this declares NON-ERGODIC
        (a constant-free invariant observable exists and is returned as a
        witness).  Every finite-dimensional rotation has atoms, so the other
        verdicts only appear at coarser resolutions.
    horizon : int
        Lags scanned for the autocorrelation fallback; defaults to m - 1.

    Returns
    -------
    ClassifyReport
        With verdict NON-ERGODIC (dominant atom + invariant witness),
        MIXING-LIKE (autocorrelations vanish at all scanned lags), or
        ERGODIC-LIKE (no dominant atom but correlations persist).
    """
    probes = list(probes)
    if not probes:
        raise DegenerateInputError("need at least one probe")
    coords = np.stack([_probe_coords(R, h) for h in probes])
    if np.linalg.matrix_rank(coords, tol=1e-12) < R.m:
        raise DegenerateInputError(
            f"probes span a subspace of rank {np.linalg.matrix_rank(coords)} < m = {R.m}; "
            "atoms outside their span would be invisible"
        )
    if horizon is None:
        horizon = R.m - 1
    horizon = max(1, int(horizon))

    measures = [spectral_measure(R, h, merge_tol=merge_tol) for h in probes]
    best = (-1.0, 0.0, -1)  # atom weight, theta, probe index
    for pi, sm in enumerate(measures):
        if sm.total == 0.0:
            raise DegenerateInputError(f"probe {pi} is the zero vector")
        t, w = sm.heaviest()
        if w > best[0]:
            best = (w, t, pi)
    atom_w, theta_star, probe_star = best

    corr_sup = 0.0
    for h in probes:
        a = autocorrelation(R, h, horizon)
        corr_sup = max(corr_sup, float(np.max(np.abs(a[1:])) / a[0]))

    if atom_w > atom_tol:
        lam, wit = _atom_witness(R, probes[probe_star], theta_star, merge_tol)
        return ClassifyReport(
            verdict="NON-ERGODIC",
            atom_tol=float(atom_tol),
            horizon=horizon,
            corr_sup=corr_sup,
            max_atom_theta=theta_star,
            max_atom_weight=atom_w,
            max_atom_probe=probe_star,
            witness_eigenvalue=lam,
            witness=wit,
            probe_measures=measures,
            note="dominant spectral atom; |first-order integral along witness| "
            "is invariant pathwise",
        )
    verdict = "MIXING-LIKE" if corr_sup <= corr_tol else "ERGODIC-LIKE"
    return ClassifyReport(
        verdict=verdict,
        atom_tol=float(atom_tol),
        horizon=horizon,
        corr_sup=corr_sup,
        max_atom_theta=theta_star,
        max_atom_weight=atom_w,
        max_atom_probe=probe_star,
        witness_eigenvalue=None,
        witness=None,
        probe_measures=measures,
        note="no atom above resolution; verdict from autocorrelation decay "
        "(finite-dimensional rotations are never genuinely ergodic)",
    )


def _atom_witness(R, probe, theta_star, merge_tol):
    """Single-eigenvector witness at the atom nearest theta_star.

    Using one exact eigenvector (not a blend across a merged cluster) keeps
    the pathwise invariance at round-off level.
    """
    coords = _probe_coords(R, probe)
    overlaps = R.vectors.conj().T @ coords
    near = np.array([_circ_dist(t, theta_star) <= max(merge_tol, 1e-9) for t in R.phases])
    if not np.any(near):
        near[:] = True  # fall back to global best overlap
    idx_local = int(np.argmax(np.abs(overlaps) * near))
    v = R.vectors[:, idx_local]
    lam = complex(np.exp(1j * R.phases[idx_local]))
    return lam, AmplitudeObservable(R.grid, v)


# ----------------------------------------------------------------------
# chaos representations
# ----------------------------------------------------------------------


class ChaosRep:
    """Finite chaos expansion: constant + first-order + second-order terms.

    ``pairs`` is a list of (coeff, (u, v)) with u, v HVectors; the term
    contributes coeff * (du dv - (u, v)_H), which is the two-fold integral
    of the symmetrized product and has Wiener expectation zero.
    """

    __slots__ = ("grid", "constant", "first", "pairs")

    def __init__(self, grid, constant=0.0, first=None, pairs=()):
        self.grid = grid
        self.constant = float(constant)
        self.first = first
        self.pairs = [(float(c), (u, v)) for c, (u, v) in pairs]
        for _, (u, v) in self.pairs:
            if u.grid.m != grid.m or v.grid.m != grid.m:
                raise DimensionMismatchError("chaos term grids must match")
        if first is not None and first.grid.m != grid.m:
            raise DimensionMismatchError("chaos term grids must match")

    def evaluate(self, p):
        return float(self.batch(p.increments[None, :])[0])

    def batch(self, increments):
        increments = np.asarray(increments, dtype=float)
        out = np.full(increments.shape[:-1], self.constant)
        if self.first is not None:
            out = out + divergence_batch(self.first, increments)
        for c, (u, v) in self.pairs:
            du = divergence_batch(u, increments)
            dv = divergence_batch(v, increments)
            out = out + c * (du * dv - inner_h(u, v))
        return out

    def second_moment_matrix(self):
        """Symmetric coordinate matrix of the order-2 part (zero if none)."""
        M = np.zeros((self.grid.m, self.grid.m))
        for c, (u, v) in self.pairs:
            uc, vc = u.coords, v.coords
            M += 0.5 * c * (np.outer(uc, vc) + np.outer(vc, uc))
        return M

    def __repr__(self):
        return (
            f"ChaosRep(m={self.grid.m}, constant={self.constant:.3g}, "
            f"first={'yes' if self.first is not None else 'no'}, pairs={len(self.pairs)})"
        )


def chaos_pushforward(R, F):
    """Composition of a chaos expansion with the rotation transform.

    Every direction is replaced by its rotation; since first-order integrals
    intertwine (dh o T = d(Rh)) and the rotation preserves inner products,
    the returned expansion equals F o T as a function on paths.
    """

    def rot(h):
        return HVector.from_coords(h.grid, R.matrix @ h.coords)

    first = rot(F.first) if F.first is not None else None
    pairs = [(c, (rot(u), rot(v))) for c, (u, v) in F.pairs]
    return ChaosRep(F.grid, constant=F.constant, first=first, pairs=pairs)


def complementary_phase_pairs(phases, tol=1e-9):
    """Index pairs (j, k), j <= k, whose phases sum to 0 mod 2pi within tol.

    These are exactly the slots whose second-order products are fixed by the
    rotation: the product of the two eigenvalues is exp(i (th_j + th_k)) = 1.
    """
    phases = np.asarray(phases, dtype=float)
    out = []
    n = len(phases)
    for j in range(n):
        for k in range(j, n):
            s = (phases[j] + phases[k]) % TWO_PI
            if min(s, TWO_PI - s) <= tol:
                out.append((j, k))
    return out


def find_invariant_chaos2(R, phase_tol=1e-9, drop_tol=1e-12):
    """All real second-order chaos observables invariant under the rotation.

    For each complementary phase pair (j, k) the complex observable
    du_j du_k - sum_i (u_j)_i (u_k)_i is fixed by the transform; its real and
    imaginary parts are returned as real ChaosReps (components whose
    coefficient matrix vanishes are skipped).  Conjugate pairs contribute the
    familiar |first-order integral|^2 - 1 invariant.
    """
    reps = []
    for j, k in complementary_phase_pairs(R.phases, tol=phase_tol):
        u = R.vectors[:, j]
        v = R.vectors[:, k]
        a, b = u.real, u.imag
        c, d = v.real, v.imag
        # real part: I2(a . c) - I2(b . d); imag part: I2(a . d) + I2(b . c)
        for combo in (
            ((1.0, (a, c)), (-1.0, (b, d))),
            ((1.0, (a, d)), (1.0, (b, c))),
        ):
            pairs = [
                (coeff, (HVector.from_coords(R.grid, x), HVector.from_coords(R.grid, y)))
                for coeff, (x, y) in combo
            ]
            rep = ChaosRep(R.grid, constant=0.0, first=None, pairs=pairs)
            if np.max(np.abs(rep.second_moment_matrix())) > drop_tol:
                reps.append(rep)
    return reps


# ----------------------------------------------------------------------
# dynamics diagnostics
# ----------------------------------------------------------------------


def birkhoff_average(transform, observable, p, n_steps, master_seed=None):
    """Average of an observable along the first ``n_steps`` orbit points.

    (1/N) sum_{k=0}^{N-1} F(T^k p), accumulated with compensated summation.
    ``transform`` is a RotationOp, or a TruncatedBasisShift (whose orbit
    consumes fresh noise, so it needs ``master_seed``).
    """
    if n_steps < 1:
        raise DegenerateInputError("need at least one orbit point")
    fresh = None
    if isinstance(transform, TruncatedBasisShift):
        if master_seed is None:
            raise ValueError("truncated-shift orbits need master_seed= for their fresh noise")
        fresh = stream(master_seed, "birkhoff-fresh")
    vals = np.empty(n_steps)
    cur = p
    for kstep in range(n_steps):
        vals[kstep] = _eval_observable(observable, cur)
        if kstep + 1 < n_steps:
            cur = transform.apply(cur, fresh) if fresh is not None else apply_rotation(transform, cur)
    return _accel.neumaier_sum(vals) / n_steps


def _eval_observable(observable, p):
    if isinstance(observable, ChaosRep):
        return observable.evaluate(p)
    return float(observable(p))


@dataclass(frozen=True)
class MixingReport:
    """Monte Carlo correlation decay with its analytic overlay."""

    lags: np.ndarray
    mc: np.ndarray  # mean of the centered products (f(T^n p) - 1)(f(p) - 1)
    se: np.ndarray
    analytic: np.ndarray  # exp(a_n) - 1
    max_abs_z: float
    all_within: bool  # every lag within 3 standard errors

    def as_dict(self):
        return {
            "lags": [int(n) for n in self.lags],
            "mc": [float(x) for x in self.mc],
            "se": [float(x) for x in self.se],
            "analytic": [float(x) for x in self.analytic],
            "max_abs_z": self.max_abs_z,
            "all_within": self.all_within,
        }


def _correlation_report(products_by_lag, analytic):
    mc = np.empty(len(products_by_lag))
    se = np.empty(len(products_by_lag))
    for n, prod in enumerate(products_by_lag):
        cnt, mean, m2, _, _ = _accel.central_moments(prod)
        mc[n] = mean
        se[n] = math.sqrt(m2 / (cnt - 1))
    z = np.abs(mc - analytic) / se
    return MixingReport(
        lags=np.arange(len(mc)),
        mc=mc,
        se=se,
        analytic=np.asarray(analytic, dtype=float),
        max_abs_z=float(np.max(z)),
        all_within=bool(np.all(z <= 3.0)),
    )


def mixing_correlation(R, h, n_max, n_paths, master_seed):
    """Correlation of the normalized exponential observable along the orbit.

    For f = exp(dh - |h|^2/2), a mean-one observable, the exact centered
    correlation at lag n is E[(f(T^n p) - 1)(f(p) - 1)] =
    exp((R^n h, h)_H) - 1, so the Monte Carlo means of the centered products
    are compared to that overlay; a transform loses memory exactly as fast
    as the spectral autocorrelation decays.
    """
    if isinstance(h, HVector) and h.grid.m != R.m:
        raise DimensionMismatchError(f"grid mismatch: m={R.m} vs m={h.grid.m}")
    rng = stream(master_seed, "mixing-mc")
    W = sample_batch(R.grid, n_paths, rng)
    hv = h if isinstance(h, HVector) else HVector.from_coords(R.grid, h)
    f0 = wick_batch(hv, W) - 1.0
    analytic = np.exp(autocorrelation(R, hv, n_max)) - 1.0
    products = []
    Wn = W
    for n in range(n_max + 1):
        fn = f0 if n == 0 else wick_batch(hv, Wn) - 1.0
        products.append(fn * f0)
        if n < n_max:
            Wn = Wn @ R.matrix
    return _correlation_report(products, analytic)


class TruncatedBasisShift:
    """Coordinate shift with truncation: (x_1, ..., x_m) -> (x_2, ..., x_m, g).

    The last slot is refilled with a fresh standard normal, so the transform
    preserves the path measure but is not invertible (it forgets x_1); it is
    the grid version of composing with an isometry of infinite multiplicity.
    Fresh noise comes from a caller-provided generator, keeping orbits
    replayable under named streams.
    """

    invertible = False

    def __init__(self, grid):
        self.grid = grid if isinstance(grid, Grid) else Grid(grid)

    @property
    def m(self):
        return self.grid.m

    def apply(self, p, rng):
        return Path(self.grid, self.apply_batch(p.increments[None, :], rng)[0])

    def apply_batch(self, increments, rng):
        increments = np.asarray(increments, dtype=float)
        if increments.shape[-1] != self.m:
            raise DimensionMismatchError(
                f"increment rows have length {increments.shape[-1]}, expected {self.m}"
            )
        fresh = rng.standard_normal(increments.shape[:-1] + (1,)) * math.sqrt(self.grid.dt)
        return np.concatenate([increments[..., 1:], fresh], axis=-1)

    def isometry_matrix(self):
        """Coordinate matrix S of the adjoint embedding e_i -> e_{i+1}.

        (S^n hhat, hhat) is the exact correlation exponent of the orbit at
        lag n; it vanishes for n >= m, which is how the truncated shift
        mimics mixing on the grid.
        """
        S = np.zeros((self.m, self.m))
        for i in range(self.m - 1):
            S[i + 1, i] = 1.0
        return S


def basis_shift_operator(m):
    """Truncated coordinate shift on the m-point grid (see TruncatedBasisShift)."""
    return TruncatedBasisShift(Grid(m) if not isinstance(m, Grid) else m)


def truncated_autocorrelation(h, n_max):
    """(S^n h, h)_H for the truncated shift: sum_i hhat_i hhat_{i+n}."""
    coords = h.coords if isinstance(h, HVector) else np.asarray(h, dtype=float)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        out[n] = float(np.dot(coords[: len(coords) - n], coords[n:])) if n < len(coords) else 0.0
    return out


def mixing_correlation_truncated(tbs, h, n_max, n_paths, master_seed):
    """Monte Carlo mixing curve for the truncated shift, fresh-noise streams."""
    hv = h if isinstance(h, HVector) else HVector.from_coords(tbs.grid, h)
    W = sample_batch(tbs.grid, n_paths, stream(master_seed, "mixing-mc"))
    f0 = wick_batch(hv, W) - 1.0
    analytic = np.exp(truncated_autocorrelation(hv, n_max)) - 1.0
    products = []
    Wn = W
    for n in range(n_max + 1):
        fn = f0 if n == 0 else wick_batch(hv, Wn) - 1.0
        products.append(fn * f0)
        if n < n_max:
            Wn = tbs.apply_batch(Wn, stream(master_seed, "mixing-fresh", n))
    return _correlation_report(products, analytic)


def periodogram_spectrum(R, h, length, n_paths, master_seed):
    """Averaged periodogram of the stationary sequence d(R^n h) along paths.

    The sequence xi_n = dh(T^n p) is stationary Gaussian with covariance
    a_n = (R^n h, h)_H, so the averaged periodogram concentrates near the
    atoms of the spectral measure (smeared by one frequency bin).

    Returns
    -------
    omegas : ndarray, shape (length,)
        Frequencies 2 pi k / length mapped into (0, 2pi].
    power : ndarray, shape (length,)
        Periodogram |FFT(xi)|^2 / length averaged over paths.
    """
    hv = h if isinstance(h, HVector) else HVector.from_coords(R.grid, h)
    W = sample_batch(R.grid, n_paths, stream(master_seed, "periodogram"))
    X = np.empty((n_paths, length))
    Wn = W
    for n in range(length):
        X[:, n] = divergence_batch(hv, Wn)
        if n + 1 < length:
            Wn = Wn @ R.matrix
    spec = np.abs(np.fft.fft(X, axis=1)) ** 2 / length
    power = spec.mean(axis=0)
    omegas = TWO_PI * np.arange(length) / length
    omegas[0] = TWO_PI  # phase convention: frequency 0 is the +1 eigenvalue slot
    return omegas, power
