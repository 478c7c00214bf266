"""Kernel-driven shifts of path space and their measure-preservation reports.

A two-variable kernel k induces the transform
``(Tw)(t) = w(t) + integral_0^t (K' w)(u) du`` whose increment form is
``dy_i = dw_i + dt * sum_j k[j, i] dw_j``.  In orthonormal coordinates the map
is linear, ``x -> (I + Khat^T) x`` with ``Khat = dt * k``; the transform
preserves the path measure exactly when ``I + Khat`` is orthogonal, which
splits into the algebraic condition

    k + k^T + dt * k^T k = 0                       (quadratic constraint)

together with invertibility of I + Khat (no eigenvalue of Khat at -1).
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    NonUnitaryOperatorError,
    SingularShiftError,
)
from .hilbert import ChaosKernel, Kernel2, hs_norm
from .sampling import AmplitudeObservable, Path, chaos_power_integral

__all__ = [
    "ShiftReport",
    "RadonNikodymReport",
    "check_unitary_shift",
    "apply_shift",
    "apply_shift_batch",
    "apply_chaos_shift",
    "apply_chaos_shift_batch",
    "invert_shift",
    "carleman_det2",
    "carleman_det2_log",
    "log_radon_nikodym",
    "log_radon_nikodym_batch",
    "invariant_observable",
    "shift_coordinate_matrix",
]


@dataclass(frozen=True)
class ShiftReport:
    """Outcome of the unitarity check for one kernel."""

    m: int
    quadratic_residual: float  # max |k + k^T + dt k^T k|
    minus_one_eigen_gap: float  # min |lambda + 1| over eigenvalues of dt*k
    hs_norm: float
    tol: float
    is_unitary: bool

    def as_dict(self):
        return asdict(self)


def check_unitary_shift(K, tol=1e-10):
    """Verify the two measure-preservation conditions for the shift of ``K``.

    The quadratic constraint is checked entrywise on kernel values; the
    spectral condition requires every eigenvalue of dt*k to stay ``tol`` away
    from -1 (for an exactly unitary shift the gap is exactly 1).
    """
    k = K.k
    dt = K.grid.dt
    residual = float(np.max(np.abs(k + k.T + dt * (k.T @ k))))
    eigs = np.linalg.eigvals(K.op_matrix)
    gap = float(np.min(np.abs(eigs + 1.0)))
    return ShiftReport(
        m=K.grid.m,
        quadratic_residual=residual,
        minus_one_eigen_gap=gap,
        hs_norm=hs_norm(K),
        tol=float(tol),
        is_unitary=bool(residual <= tol and gap > tol),
    )


def shift_coordinate_matrix(K):
    """Matrix of the shift on orthonormal coordinates: I + (dt*k)^T."""
    return np.eye(K.grid.m) + K.op_matrix.T


def apply_shift(K, p):
    """Transform one path: dy = dw + dt * k^T dw."""
    if K.grid.m != p.grid.m:
        raise DimensionMismatchError(f"grid mismatch: m={K.grid.m} vs m={p.grid.m}")
    return Path(p.grid, p.increments + K.grid.dt * (p.increments @ K.k))


def apply_shift_batch(K, increments):
    """Transform each row of an increment matrix."""
    increments = np.asarray(increments, dtype=float)
    if increments.shape[-1] != K.grid.m:
        raise DimensionMismatchError(
            f"increment rows have length {increments.shape[-1]}, expected {K.grid.m}"
        )
    return increments + K.grid.dt * (increments @ K.k)


def apply_chaos_shift(kernels, p):
    """Shift by a sum of chaos drifts: dy_i = dw_i + sum_n dt g_n'(i) I_n(h_n)."""
    out = apply_chaos_shift_batch(kernels, p.increments[None, :])
    return Path(p.grid, out[0])


def apply_chaos_shift_batch(kernels, increments):
    if isinstance(kernels, ChaosKernel):
        kernels = [kernels]
    increments = np.asarray(increments, dtype=float)
    out = increments.copy()
    for ck in kernels:
        if ck.grid.m != increments.shape[-1]:
            raise DimensionMismatchError(
                f"increment rows have length {increments.shape[-1]}, expected {ck.grid.m}"
            )
        vals = chaos_power_integral(ck.order, ck.h, increments)
        out = out + ck.grid.dt * np.outer(vals, ck.g.density).reshape(out.shape)
    return out


def invert_shift(K, tol=1e-10):
    """Kernel of the inverse shift: -(I + Khat)^{-1} Khat, rescaled to values.

    Requires the eigen gap at -1; otherwise the shift is singular.  The
    returned kernel Q satisfies compose-with-K == zero kernel exactly up to
    round-off, so applying K then Q round-trips paths.
    """
    khat = K.op_matrix
    gap = float(np.min(np.abs(np.linalg.eigvals(khat) + 1.0)))
    if gap <= tol:
        raise SingularShiftError(f"cannot invert: eigenvalue gap at -1 is {gap:.3e} <= {tol:.3e}")
    m = K.grid.m
    qhat = -np.linalg.solve(np.eye(m) + khat, khat)
    return Kernel2(K.grid, qhat / K.grid.dt)


def carleman_det2_log(K):
    """log-modulus and phase of the renormalized determinant of I + dt*k.

    det2(I + A) = prod (1 + lambda_i) exp(-lambda_i); working in log space
    avoids overflow when many eigenvalues have negative real part.  Returns
    (log_modulus, phase); log_modulus is -inf when -1 is an eigenvalue.
    """
    eigs = np.linalg.eigvals(K.op_matrix)
    one_plus = 1.0 + eigs
    if np.any(one_plus == 0.0):
        return float("-inf"), 0.0
    log_mod = float(np.sum(np.log(np.abs(one_plus)) - eigs.real))
    phase = float(np.sum(np.angle(one_plus) - eigs.imag))
    return log_mod, phase


def carleman_det2(K):
    """Renormalized (second-kind) determinant of I + dt*k, as a complex number."""
    log_mod, phase = carleman_det2_log(K)
    if log_mod == float("-inf"):
        return complex(0.0)
    return complex(np.exp(log_mod) * np.cos(phase), np.exp(log_mod) * np.sin(phase))


@dataclass(frozen=True)
class RadonNikodymReport:
    """Logarithmic density of the path measure under one unitary shift.

    ``log_lambda = log_det2 + stochastic_exponent`` where
    ``stochastic_exponent = -ito_integral - quadratic_energy``: the Ito term
    is the off-diagonal double sum sum_{i != j} k[i,j] dw_i dw_j and the
    energy term is (1/2) * dt * sum_t (sum_s k[s,t] dw_s)^2.  For unitary
    shifts log_det2 equals half the squared Hilbert-Schmidt norm of dt*k, and
    log_lambda -> 0 as the grid refines (the density degenerates to 1 even
    though |det2| itself does not).
    """

    m: int
    log_det2: float
    ito_integral: float
    quadratic_energy: float
    stochastic_exponent: float
    log_lambda: float

    def as_dict(self):
        return asdict(self)


def log_radon_nikodym(K, p, tol=1e-10):
    """Per-path density report for a unitary shift.

    Raises
    ------
    NonUnitaryOperatorError
        If ``check_unitary_shift(K, tol)`` fails; the closed form below is
        only valid on the unitary family.
    """
    rep = check_unitary_shift(K, tol)
    if not rep.is_unitary:
        raise NonUnitaryOperatorError(
            f"shift is not measure-preserving: residual={rep.quadratic_residual:.3e}, "
            f"gap={rep.minus_one_eigen_gap:.3e}, tol={tol:.3e}"
        )
    if K.grid.m != p.grid.m:
        raise DimensionMismatchError(f"grid mismatch: m={K.grid.m} vs m={p.grid.m}")
    dw = p.increments
    k = K.k
    dt = K.grid.dt
    log_det2, _ = carleman_det2_log(K)
    ito = float(dw @ k @ dw - np.dot(np.diag(k), dw * dw))
    g = dw @ k  # g[t] = sum_s k[s, t] dw_s
    quad = 0.5 * dt * float(np.dot(g, g))
    return RadonNikodymReport(
        m=K.grid.m,
        log_det2=log_det2,
        ito_integral=ito,
        quadratic_energy=quad,
        stochastic_exponent=-ito - quad,
        log_lambda=log_det2 - ito - quad,
    )


def log_radon_nikodym_batch(K, increments, tol=1e-10):
    """Per-row RadonNikodymReports for an increment matrix.

    Same quantities as :func:`log_radon_nikodym`, but the unitarity check and
    the determinant are evaluated once for the whole batch.
    """
    rep = check_unitary_shift(K, tol)
    if not rep.is_unitary:
        raise NonUnitaryOperatorError(
            f"shift is not measure-preserving: residual={rep.quadratic_residual:.3e}, "
            f"gap={rep.minus_one_eigen_gap:.3e}, tol={tol:.3e}"
        )
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 2 or increments.shape[1] != K.grid.m:
        raise DimensionMismatchError(
            f"increments must have shape (n, {K.grid.m}), got {increments.shape}"
        )
    k = K.k
    dt = K.grid.dt
    log_det2, _ = carleman_det2_log(K)
    G = increments @ k
    ito = np.einsum("pi,pi->p", increments, G) - (increments * increments) @ np.diag(k)
    quad = 0.5 * dt * np.einsum("pi,pi->p", G, G)
    return [
        RadonNikodymReport(
            m=K.grid.m,
            log_det2=log_det2,
            ito_integral=float(i_),
            quadratic_energy=float(q_),
            stochastic_exponent=float(-i_ - q_),
            log_lambda=float(log_det2 - i_ - q_),
        )
        for i_, q_ in zip(ito, quad)
    ]


def invariant_observable(K, tol=1e-10):
    """Nonconstant observable invariant under the shift of ``K``.

    Picks an eigenpair (lambda, v) of dt*k with maximal |lambda|; since
    I + dt*k is orthogonal, |1 + lambda| = 1 and the modulus of the
    first-order integral along v is preserved pathwise:
    |dv|(T p) = |1 + lambda| |dv|(p) = |dv|(p).

    Returns
    -------
    (eigenvalue, AmplitudeObservable)

    Raises
    ------
    DegenerateInputError
        For the zero kernel (the shift is the identity; every observable is
        invariant and none is a useful witness).
    """
    rep = check_unitary_shift(K, tol)
    if not rep.is_unitary:
        raise NonUnitaryOperatorError(
            f"shift is not measure-preserving: residual={rep.quadratic_residual:.3e}, "
            f"gap={rep.minus_one_eigen_gap:.3e}"
        )
    if rep.hs_norm == 0.0:
        raise DegenerateInputError("zero kernel: identity shift has no distinguished witness")
    eigs, vecs = np.linalg.eig(K.op_matrix)
    idx = int(np.argmax(np.abs(eigs)))
    lam = complex(eigs[idx])
    v = vecs[:, idx]
    return lam, AmplitudeObservable(K.grid, v)
