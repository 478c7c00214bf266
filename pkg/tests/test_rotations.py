"""Tests for rotations: eigensystem, spectral measures, classification, mixing."""

import json
import math

import numpy as np
import pytest

from wienermix import (
    AmplitudeObservable,
    ChaosRep,
    DegenerateInputError,
    DimensionMismatchError,
    Grid,
    HVector,
    NonUnitaryOperatorError,
    Path,
    RotationOp,
    apply_rotation,
    apply_rotation_batch,
    autocorrelation,
    basis_shift_operator,
    birkhoff_average,
    chaos_pushforward,
    classify,
    complementary_phase_pairs,
    find_invariant_chaos2,
    inner_h,
    mixing_correlation,
    mixing_correlation_truncated,
    periodogram_spectrum,
    rotation_from_matrix,
    sample_batch,
    sample_wiener,
    spectral_measure,
    stream,
    truncated_autocorrelation,
    unitary_eigensystem,
)
from wienermix.rotations import TruncatedBasisShift

TWO_PI = 2.0 * math.pi


def basis_probes(m):
    grid = Grid(m)
    return [HVector.basis(grid, i) for i in range(m)]


def test_unitary_eigensystem_is_exactly_orthonormal():
    R = RotationOp.haar(12, stream(0, "haar"))
    phases, V = R.phases, R.vectors
    assert np.all(phases > 0.0) and np.all(phases <= TWO_PI)
    gram = V.conj().T @ V
    assert np.max(np.abs(gram - np.eye(12))) <= 1e-13
    recon = R.matrix @ V - V * np.exp(1j * phases)
    assert np.max(np.abs(recon)) <= 1e-12


def test_eigensystem_phase_conventions():
    alpha = 0.8
    R = RotationOp.from_angles(4, [alpha], signs=(+1, -1))
    got = np.sort(R.phases)
    expect = np.sort([alpha, TWO_PI - alpha, TWO_PI, math.pi])
    assert np.allclose(got, expect, atol=1e-12)
    # conjugate pair sums exactly to 2 pi
    pair = np.sort(R.phases)[:2]
    assert pair[0] + np.sort(R.phases)[2] == pytest.approx(TWO_PI, abs=1e-12)


def test_rotation_op_validates_input():
    with pytest.raises(NonUnitaryOperatorError):
        rotation_from_matrix(1.1 * np.eye(4))
    with pytest.raises(DimensionMismatchError):
        RotationOp(np.zeros((3, 4)))


def test_apply_rotation_matches_matrix_and_preserves_norm():
    R = RotationOp.haar(8, stream(1, "haar"))
    p = sample_wiener(R.grid, stream(1, "p"))
    q = apply_rotation(R, p)
    assert np.allclose(q.increments, R.matrix.T @ p.increments, atol=0)
    assert np.linalg.norm(q.coordinates) == pytest.approx(np.linalg.norm(p.coordinates), abs=1e-13)

    W = sample_batch(R.grid, 5, stream(1, "W"))
    Y = apply_rotation_batch(R, W)
    assert np.allclose(Y, W @ R.matrix, atol=0)
    with pytest.raises(DimensionMismatchError):
        apply_rotation(R, sample_wiener(Grid(4), stream(1, "bad")))


def test_spectral_measure_identity_single_atom():
    R = RotationOp.identity(6)
    h = 2.0 * HVector.basis(Grid(6), 3)
    sm = spectral_measure(R, h)
    assert len(sm.thetas) == 1
    assert sm.thetas[0] == pytest.approx(TWO_PI, abs=0)
    assert sm.weights[0] == pytest.approx(inner_h(h, h), abs=1e-13)


def test_spectral_measure_planar_splits_mass():
    m, alpha = 8, 1.0
    R = RotationOp.planar(m, alpha)
    grid = Grid(m)

    in_plane = spectral_measure(R, HVector.basis(grid, 0))
    assert np.allclose(in_plane.thetas, [alpha, TWO_PI - alpha], atol=1e-12)
    assert np.allclose(in_plane.weights, [0.5, 0.5], atol=1e-12)

    flat = spectral_measure(R, HVector.constant(grid))
    assert np.allclose(flat.thetas, [alpha, TWO_PI - alpha, TWO_PI], atol=1e-12)
    assert np.allclose(flat.weights, [1 / m, 1 / m, (m - 2) / m], atol=1e-12)

    off_plane = spectral_measure(R, HVector.basis(grid, 5))
    assert np.allclose(off_plane.thetas, [TWO_PI], atol=0)
    assert np.allclose(off_plane.weights, [1.0], atol=1e-13)

    for sm in (in_plane, flat, off_plane):
        assert float(np.sum(sm.weights)) + sm.dropped == pytest.approx(sm.total, abs=1e-12)


def test_spectral_measure_merges_near_atoms_across_wraparound():
    # a rotation angle below the merge tolerance collapses the three atoms
    # near theta = 0 (mod 2pi) into one at 2pi without losing mass
    R = RotationOp.planar(4, 1e-12)
    sm = spectral_measure(R, HVector.constant(Grid(4)), merge_tol=1e-9)
    assert len(sm.thetas) == 1
    assert sm.thetas[0] == pytest.approx(TWO_PI, abs=1e-9)
    assert sm.weights[0] == pytest.approx(sm.total, abs=1e-13)


def test_autocorrelation_matches_matrix_powers():
    R = RotationOp.haar(10, stream(2, "haar"))
    h = HVector.constant(Grid(10))
    a = autocorrelation(R, h, 12)
    hc = h.coords
    direct = [float(np.dot(np.linalg.matrix_power(R.matrix, n) @ hc, hc)) for n in range(13)]
    assert np.allclose(a, direct, atol=1e-12)

    alpha = 0.6
    P = RotationOp.planar(6, alpha)
    ap = autocorrelation(P, HVector.basis(Grid(6), 0), 8)
    assert np.allclose(ap, np.cos(alpha * np.arange(9)), atol=1e-12)


def test_classify_identity_is_non_ergodic_with_unit_witness():
    R = RotationOp.identity(6)
    rep = classify(R, basis_probes(6))
    assert rep.verdict == "NON-ERGODIC"
    assert rep.max_atom_weight == pytest.approx(1.0, abs=1e-12)
    assert abs(rep.witness_eigenvalue - 1.0) <= 1e-12
    d = rep.as_dict()
    json.dumps(d)  # must be serializable as emitted
    assert "invariant_witness" in d
    assert set(d["max_atom"]) == {"theta", "weight", "probe"}


def test_classify_rejects_rank_deficient_probes():
    R = RotationOp.identity(4)
    with pytest.raises(DegenerateInputError):
        classify(R, [HVector.basis(Grid(4), 0)])


def test_classify_witness_is_pathwise_invariant():
    R = RotationOp.haar(8, stream(3, "haar"))
    rep = classify(R, basis_probes(8))
    assert rep.verdict == "NON-ERGODIC"  # finite rotations always have atoms
    W = sample_batch(R.grid, 20, stream(3, "paths"))
    before = rep.witness.batch(W)
    after = rep.witness.batch(apply_rotation_batch(R, W))
    assert np.max(np.abs(after - before)) <= 1e-12


def test_classify_verdicts_track_resolution_and_correlation():
    probes = basis_probes(2)
    # quarter turn: both atoms weigh 1/2 and a_1 = cos(pi/2) = 0
    quarter = RotationOp.planar(2, math.pi / 2)
    assert classify(quarter, probes, atom_tol=0.6).verdict == "MIXING-LIKE"
    assert classify(quarter, probes, atom_tol=0.4).verdict == "NON-ERGODIC"
    # generic angle: correlations persist at coarse resolution
    generic = RotationOp.planar(2, 1.0)
    rep = classify(generic, probes, atom_tol=0.6)
    assert rep.verdict == "ERGODIC-LIKE"
    assert rep.corr_sup == pytest.approx(math.cos(1.0), abs=1e-12)
    assert rep.witness is None


def test_complementary_phase_pairs_enumeration():
    assert complementary_phase_pairs([math.pi / 2, math.pi / 2, math.pi]) == [(2, 2)]
    assert complementary_phase_pairs([math.pi / 2, 3 * math.pi / 2]) == [(0, 1)]
    assert complementary_phase_pairs([TWO_PI, TWO_PI]) == [(0, 0), (0, 1), (1, 1)]


def test_find_invariant_chaos2_orbits_are_flat():
    R = RotationOp.planar(4, 0.7)
    reps = find_invariant_chaos2(R)
    assert reps, "expected invariant second-order observables"
    W = sample_batch(R.grid, 20, stream(4, "chaos"))
    WT = apply_rotation_batch(R, W)
    for F in reps:
        assert np.max(np.abs(F.batch(WT) - F.batch(W))) <= 1e-10
        assert np.max(np.abs(F.second_moment_matrix())) > 1e-12


def test_chaos_pushforward_is_composition_with_transform():
    R = RotationOp.haar(6, stream(5, "haar"))
    grid = Grid(6)
    F = ChaosRep(
        grid,
        constant=0.3,
        first=HVector.basis(grid, 2),
        pairs=[(1.5, (HVector.basis(grid, 0), HVector.constant(grid)))],
    )
    G = chaos_pushforward(R, F)
    W = sample_batch(grid, 15, stream(5, "paths"))
    assert np.allclose(G.batch(W), F.batch(apply_rotation_batch(R, W)), atol=1e-12)


def test_birkhoff_average_fixes_invariant_observables():
    R = RotationOp.planar(6, 0.9)
    # modulus along an eigenvector is constant on the orbit
    idx = int(np.argmin(np.abs(R.phases - 0.9)))
    obs = AmplitudeObservable(R.grid, R.vectors[:, idx])
    p = sample_wiener(R.grid, stream(6, "orbit"))
    avg = birkhoff_average(R, obs, p, 25)
    assert avg == pytest.approx(obs(p), abs=1e-12)
    with pytest.raises(DegenerateInputError):
        birkhoff_average(R, obs, p, 0)


def test_birkhoff_truncated_shift_needs_named_noise():
    tbs = basis_shift_operator(8)
    obs = AmplitudeObservable(tbs.grid, HVector.constant(tbs.grid).coords)
    p = sample_wiener(tbs.grid, stream(7, "orbit"))
    with pytest.raises(ValueError):
        birkhoff_average(tbs, obs, p, 10)
    a = birkhoff_average(tbs, obs, p, 10, master_seed=42)
    b = birkhoff_average(tbs, obs, p, 10, master_seed=42)
    assert a == b
    c = birkhoff_average(tbs, obs, p, 10, master_seed=43)
    assert a != c


def test_mixing_correlation_identity_plateau():
    R = RotationOp.identity(8)
    h = HVector.constant(Grid(8))
    rep = mixing_correlation(R, h, n_max=3, n_paths=4000, master_seed=11)
    # f(T^n p) = f(p): every lag repeats the lag-0 centered second moment
    assert np.allclose(rep.analytic, np.e - 1.0, atol=1e-12)
    assert np.allclose(rep.mc, rep.mc[0], atol=1e-12)
    assert rep.all_within


def test_mixing_correlation_planar_tracks_overlay():
    R = RotationOp.planar(8, 1.0)
    h = HVector.basis(Grid(8), 0)  # in the rotation plane
    rep = mixing_correlation(R, h, n_max=6, n_paths=20000, master_seed=12)
    assert np.allclose(rep.analytic, np.exp(np.cos(np.arange(7))) - 1.0, atol=1e-12)
    assert rep.all_within
    assert rep.max_abs_z <= 3.0


def test_truncated_shift_drops_first_coordinate():
    tbs = TruncatedBasisShift(Grid(6))
    W = sample_batch(tbs.grid, 4, stream(8, "w"))
    Y = tbs.apply_batch(W, stream(8, "fresh"))
    assert np.allclose(Y[:, :-1], W[:, 1:], atol=0)
    assert not tbs.invertible

    S = tbs.isometry_matrix()
    h = HVector.constant(tbs.grid)
    a = truncated_autocorrelation(h, 8)
    hc = h.coords
    direct = [float(np.dot(np.linalg.matrix_power(S, n) @ hc, hc)) for n in range(9)]
    assert np.allclose(a, direct, atol=1e-13)
    # constant density: overlap shrinks linearly and dies past the support
    assert np.allclose(a, np.maximum(1.0 - np.arange(9) / 6.0, 0.0), atol=1e-13)


def test_mixing_correlation_truncated_loses_memory():
    tbs = basis_shift_operator(6)
    h = HVector.basis(tbs.grid, 0)  # support of length one: one-step memory
    rep = mixing_correlation_truncated(tbs, h, n_max=4, n_paths=20000, master_seed=13)
    assert rep.analytic[0] == pytest.approx(np.e - 1.0, abs=1e-12)
    assert np.allclose(rep.analytic[1:], 0.0, atol=1e-12)
    assert rep.all_within


def test_periodogram_concentrates_at_rotation_angle():
    length = 32
    alpha = TWO_PI * 5 / length  # on the frequency lattice
    R = RotationOp.planar(8, alpha)
    h = HVector.basis(Grid(8), 0)
    omegas, power = periodogram_spectrum(R, h, length, n_paths=200, master_seed=14)
    peak = omegas[int(np.argmax(power))]
    dist = min(abs(peak - alpha), abs(peak - (TWO_PI - alpha))) % TWO_PI
    assert dist <= TWO_PI / length + 1e-12


def test_basis_shift_operator_accepts_grid_or_int():
    assert basis_shift_operator(5).m == 5
    assert basis_shift_operator(Grid(7)).m == 7
