"""Tests for the statistical harness: gaussianity, ergodic averages, calibration."""

import math

import numpy as np
import pytest

from wienermix import (
    ChaosKernel,
    ChaosRep,
    DegenerateInputError,
    DimensionMismatchError,
    Grid,
    HVector,
    Kernel2,
    RotationOp,
    RunManifest,
    WickObservable,
    as_transform,
    basis_shift_operator,
    calibration_study,
    ergodic_average_study,
    file_sha256,
    gaussianity_suite,
    identity_transform,
    mixing_correlation,
    mixing_decay_study,
    mixing_correlation_truncated,
    stream,
)
from helpers import skew_shift_kernel


def test_identity_suite_passes_and_counts_tests():
    grid = Grid(32)
    suite = gaussianity_suite(identity_transform(), grid, 8000, master_seed=100, alpha=0.01)
    assert suite.passed
    # 8 nodes -> 36 covariance entries, 4 probes -> 12 moments + 6 crossings
    assert suite.n_scalar_tests == 54
    assert suite.correction == "bonferroni"
    assert all(r.passed for r in suite.reports)


def test_reflection_shift_preserves_gaussianity():
    grid = Grid(32)
    K = Kernel2.reflection(HVector.constant(grid))
    suite = gaussianity_suite(K, grid, 8000, master_seed=103, alpha=0.01)
    assert suite.passed


def test_quadratic_drift_breaks_gaussianity_loudly():
    grid = Grid(32)
    ck = ChaosKernel(2, HVector.constant(grid), HVector.constant(grid))
    suite = gaussianity_suite(ck, grid, 5000, master_seed=102, alpha=0.01)
    assert not suite.passed
    failed = [r for r in suite.reports if not r.passed]
    assert any("kurtosis" in r.name or "variance" in r.name for r in failed)
    assert max(abs(r.z) for r in failed) > 5.0


def test_correction_modes_set_the_threshold():
    grid = Grid(8)
    plain = gaussianity_suite(identity_transform(), grid, 200, 1, alpha=0.05, correction="none")
    assert plain.threshold == pytest.approx(1.959964, abs=1e-4)
    bonf = gaussianity_suite(identity_transform(), grid, 200, 1, alpha=0.05)
    assert bonf.threshold > plain.threshold
    with pytest.raises(DegenerateInputError):
        gaussianity_suite(identity_transform(), grid, 200, 1, correction="sidak")


def test_as_transform_adapts_every_operator_kind():
    grid = Grid(8)
    W = np.zeros((3, 8))
    kinds = [
        skew_shift_kernel(8, 0),
        RotationOp.identity(8),
        ChaosKernel(2, HVector.constant(grid), HVector.constant(grid)),
        [ChaosKernel(1, HVector.constant(grid), HVector.constant(grid))],
        lambda W_: W_ + 1.0,
    ]
    for obj in kinds:
        t = as_transform(obj)
        out = t.step(W, stream(0, "noise"))
        assert out.shape == W.shape

    tbs = as_transform(basis_shift_operator(8))
    assert tbs.uses_noise
    assert tbs.step(W, stream(0, "noise")).shape == W.shape

    same = identity_transform()
    assert as_transform(same) is same
    with pytest.raises(DimensionMismatchError):
        as_transform(object())


def test_ergodic_study_keeps_invariant_spread():
    grid = Grid(16)
    rep = ergodic_average_study(
        identity_transform(), WickObservable(HVector.constant(grid)), grid, 500, 32, 200
    )
    assert rep.verdict == "PERSISTENT-SPREAD"
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)


def test_ergodic_study_collapses_for_memory_losing_transform():
    grid = Grid(16)
    tbs = basis_shift_operator(grid.m)
    obs = WickObservable(HVector.constant(grid))
    rep = ergodic_average_study(tbs, obs, grid, 400, 256, 201)
    assert rep.verdict == "VARIANCE-COLLAPSE"
    assert rep.ratio < 0.5
    # at a horizon comparable to the correlation length the verdict stays open
    short = ergodic_average_study(tbs, obs, grid, 400, 32, 201)
    assert short.verdict == "INDETERMINATE"
    assert 0.5 < short.ratio < 0.8


def test_ergodic_study_flags_constant_observables():
    grid = Grid(8)
    rep = ergodic_average_study(identity_transform(), ChaosRep(grid, constant=2.0), grid, 50, 4, 202)
    assert rep.verdict == "ZERO-SPREAD"
    assert rep.spread_raw <= 1e-14
    with pytest.raises(DegenerateInputError):
        ergodic_average_study(identity_transform(), ChaosRep(grid, constant=2.0), grid, 50, 0, 202)


def test_mixing_decay_study_dispatches_on_transform_kind():
    K = skew_shift_kernel(8, 1)
    h = HVector.constant(K.grid)
    via_kernel = mixing_decay_study(K, h, 4, 2000, 300)
    R = RotationOp(np.eye(8) + K.op_matrix)
    via_rotation = mixing_correlation(R, h, 4, 2000, 300)
    assert np.array_equal(via_kernel.mc, via_rotation.mc)
    assert np.array_equal(via_kernel.analytic, via_rotation.analytic)

    tbs = basis_shift_operator(8)
    via_tbs = mixing_decay_study(tbs, HVector.basis(tbs.grid, 0), 3, 2000, 301)
    direct = mixing_correlation_truncated(tbs, HVector.basis(tbs.grid, 0), 3, 2000, 301)
    assert np.array_equal(via_tbs.mc, direct.mc)

    with pytest.raises(DimensionMismatchError):
        mixing_decay_study(object(), h, 3, 100, 302)


def test_calibration_study_holds_its_nominal_level():
    rep = calibration_study(Grid(8), n_paths=500, reps=60, master_seed=400)
    assert rep.passed
    assert rep.n_outside <= rep.allowed_outside
    assert rep.n_positions == 18  # covariance family tracked separately
    assert 0.0 <= rep.pooled_rate <= 0.15
    d = rep.as_dict()
    assert d["count_bounds"][0] <= d["count_bounds"][1]


def test_run_manifest_is_replayable_metadata(tmp_path):
    f = tmp_path / "out.csv"
    f.write_text("m,2\na,b\n1,2\n")
    man = RunManifest(command="demo", master_seed=7, params={"m": 2})
    man.record("out.csv", f)
    d = man.as_dict()
    assert d["command"] == "demo"
    assert d["outputs"]["out.csv"] == file_sha256(f)
    assert "timestamp" not in str(d).lower()
    assert set(d["versions"]) >= {"package", "python", "numpy"}
    # identical inputs give identical manifests
    man2 = RunManifest(command="demo", master_seed=7, params={"m": 2})
    man2.record("out.csv", f)
    assert man2.as_dict() == d
