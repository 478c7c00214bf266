"""Tests for kernel shifts: unitarity, inversion, determinants, densities."""

import numpy as np
import pytest
from helpers import skew_shift_kernel, smooth_skew_kernel

from wienermix import (
    ChaosKernel,
    DegenerateInputError,
    Grid,
    HVector,
    Kernel2,
    NonUnitaryOperatorError,
    Path,
    SingularShiftError,
    apply_chaos_shift,
    apply_chaos_shift_batch,
    apply_shift,
    apply_shift_batch,
    carleman_det2,
    carleman_det2_log,
    check_unitary_shift,
    hs_norm,
    invariant_observable,
    invert_shift,
    kernel_compose,
    log_radon_nikodym,
    log_radon_nikodym_batch,
    sample_batch,
    sample_wiener,
    shift_coordinate_matrix,
    stream,
)


def test_unitary_family_passes_both_conditions():
    for seed in range(5):
        K = skew_shift_kernel(16, seed)
        rep = check_unitary_shift(K)
        assert rep.is_unitary
        assert rep.quadratic_residual <= 1e-12
        # orthogonal coordinate map: every eigenvalue of dt*k sits on the
        # unit circle centred at -1, so the gap is exactly 1
        assert rep.minus_one_eigen_gap == pytest.approx(1.0, abs=1e-12)
        A = shift_coordinate_matrix(K)
        assert np.max(np.abs(A.T @ A - np.eye(16))) <= 1e-13
        assert np.allclose(A, np.eye(16) + K.op_matrix.T, atol=0)


def test_reflection_is_unitary_and_generic_rank_one_is_not():
    grid = Grid(12)
    h = HVector.basis(grid, 1) + 0.5 * HVector.basis(grid, 7)
    rep = check_unitary_shift(Kernel2.reflection(h))
    assert rep.is_unitary
    assert rep.quadratic_residual <= 1e-12

    u = HVector.basis(grid, 0)
    v = HVector.basis(grid, 3)
    bad = check_unitary_shift(Kernel2.rank_one(u, v, scale=0.7))
    assert not bad.is_unitary
    assert bad.quadratic_residual > 1.0


def test_apply_shift_matches_coordinate_matrix():
    K = skew_shift_kernel(10, 3)
    A = shift_coordinate_matrix(K)
    p = sample_wiener(K.grid, stream(3, "p"))
    q = apply_shift(K, p)
    assert np.allclose(q.coordinates, A @ p.coordinates, atol=1e-13)

    W = sample_batch(K.grid, 6, stream(3, "W"))
    Y = apply_shift_batch(K, W)
    for i in range(6):
        assert np.allclose(Y[i], apply_shift(K, Path(K.grid, W[i])).increments, atol=0)


def test_invert_shift_roundtrips_paths_and_kernels():
    K = skew_shift_kernel(14, 8)
    Q = invert_shift(K)
    p = sample_wiener(K.grid, stream(8, "inv"))
    back = apply_shift(Q, apply_shift(K, p))
    assert np.max(np.abs(back.increments - p.increments)) <= 1e-12

    C = kernel_compose(K, Q)
    assert np.max(np.abs(C.k)) * K.grid.dt <= 1e-12
    # operator form of composition: I + C = (I + Q)(I + K)
    lhs = np.eye(14) + C.op_matrix
    rhs = (np.eye(14) + Q.op_matrix) @ (np.eye(14) + K.op_matrix)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_invert_shift_rejects_singular_map():
    grid = Grid(6)
    K = Kernel2(grid, -grid.m * np.eye(6))  # dt*k = -I, the map collapses
    with pytest.raises(SingularShiftError):
        invert_shift(K)


def test_carleman_det2_closed_values():
    grid = Grid(8)
    assert carleman_det2(Kernel2.zero(grid)) == pytest.approx(1.0 + 0.0j, abs=0)
    # reflection: one eigenvalue -2, rest 0 -> det2 = (1 - 2) e^2 = -e^2
    d = carleman_det2(Kernel2.reflection(HVector.constant(grid)))
    assert d.real == pytest.approx(-np.exp(2.0), rel=1e-13)
    assert abs(d.imag) <= 1e-12


def test_log_det2_equals_half_hs_norm_squared_on_unitary_family():
    grid = Grid(8)
    kernels = [skew_shift_kernel(8, s) for s in range(4)]
    kernels.append(Kernel2.reflection(HVector.constant(grid)))
    for K in kernels:
        log_mod, _ = carleman_det2_log(K)
        assert abs(log_mod - 0.5 * hs_norm(K) ** 2) <= 1e-10


def test_log_radon_nikodym_matches_diagonal_closed_form():
    # for an orthogonal coordinate map the bilinear term collapses and the
    # whole density reduces to sum_i k_ii (dw_i^2 - dt)
    K = skew_shift_kernel(16, 5)
    kdiag = np.diag(K.k)
    dt = K.grid.dt
    W = sample_batch(K.grid, 20, stream(5, "rn"))
    for w in W:
        rep = log_radon_nikodym(K, Path(K.grid, w))
        expect = float(np.dot(kdiag, w * w - dt))
        assert rep.log_lambda == pytest.approx(expect, abs=1e-12)
        assert rep.stochastic_exponent == pytest.approx(
            -rep.ito_integral - rep.quadratic_energy, abs=1e-13
        )
        assert rep.log_lambda == pytest.approx(rep.log_det2 + rep.stochastic_exponent, abs=1e-13)


def test_log_radon_nikodym_batch_matches_single():
    K = skew_shift_kernel(12, 9)
    W = sample_batch(K.grid, 8, stream(9, "rnb"))
    reps = log_radon_nikodym_batch(K, W)
    assert len(reps) == 8
    for w, rep in zip(W, reps):
        single = log_radon_nikodym(K, Path(K.grid, w))
        assert rep.log_lambda == pytest.approx(single.log_lambda, abs=1e-13)
        assert rep.ito_integral == pytest.approx(single.ito_integral, abs=1e-13)
        assert rep.quadratic_energy == pytest.approx(single.quadratic_energy, abs=1e-13)


def test_log_radon_nikodym_rejects_non_unitary():
    grid = Grid(8)
    K = Kernel2.rank_one(HVector.basis(grid, 0), HVector.basis(grid, 1), scale=1.0)
    with pytest.raises(NonUnitaryOperatorError):
        log_radon_nikodym(K, sample_wiener(grid, stream(1, "x")))
    with pytest.raises(NonUnitaryOperatorError):
        log_radon_nikodym_batch(K, sample_batch(grid, 3, stream(1, "y")))


def test_density_degenerates_as_grid_refines():
    means = []
    for m in (16, 128):
        K = smooth_skew_kernel(m)
        W = sample_batch(K.grid, 100, stream(2, "refine", m))
        reps = log_radon_nikodym_batch(K, W)
        means.append(np.mean([abs(r.log_lambda) for r in reps]))
    assert means[1] < means[0]


def test_invariant_observable_reflection_witness():
    grid = Grid(8)
    h = HVector.constant(grid)
    lam, obs = invariant_observable(Kernel2.reflection(h))
    assert lam == pytest.approx(-2.0 + 0.0j, abs=1e-12)
    back = obs.as_hvector().normalized()
    assert abs(abs(np.dot(back.coords, h.coords)) - 1.0) <= 1e-12


def test_invariant_observable_is_pathwise_invariant():
    for seed in (0, 4):
        K = skew_shift_kernel(12, seed)
        lam, obs = invariant_observable(K)
        assert abs(abs(1.0 + lam) - 1.0) <= 1e-12
        W = sample_batch(K.grid, 50, stream(seed, "wit"))
        before = obs.batch(W)
        after = obs.batch(apply_shift_batch(K, W))
        assert np.max(np.abs(after - before)) <= 1e-12


def test_invariant_observable_zero_kernel_raises():
    with pytest.raises(DegenerateInputError):
        invariant_observable(Kernel2.zero(Grid(8)))


def test_chaos_shift_order_one_reduces_to_linear():
    grid = Grid(10)
    g = HVector.basis(grid, 2)
    h = HVector.constant(grid)
    ck = ChaosKernel(1, g, h)
    K = Kernel2.rank_one(h, g)  # same drift: dt * divergence(h) * g'
    W = sample_batch(grid, 5, stream(7, "chaos1"))
    assert np.allclose(apply_chaos_shift_batch(ck, W), apply_shift_batch(K, W), atol=1e-14)


def test_chaos_shift_batch_matches_single_and_is_nonlinear():
    grid = Grid(10)
    ck = ChaosKernel(2, HVector.basis(grid, 1), HVector.constant(grid))
    W = sample_batch(grid, 4, stream(7, "chaos2"))
    out = apply_chaos_shift_batch([ck], W)
    for i in range(4):
        p = apply_chaos_shift([ck], Path(grid, W[i]))
        assert np.allclose(out[i], p.increments, atol=0)
    # doubling the input does not double the output drift
    out2 = apply_chaos_shift_batch([ck], 2.0 * W)
    drift1 = out - W
    drift2 = out2 - 2.0 * W
    assert not np.allclose(drift2, 2.0 * drift1, atol=1e-6)
