"""Grid geometry, kernel algebra, and serialization round trips."""

import io
import json
import math

import numpy as np
import pytest

from wienermix.errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InputFormatError,
    UnsupportedOrderError,
)
from wienermix.hilbert import (
    ChaosKernel,
    Grid,
    HVector,
    Kernel2,
    hs_norm,
    hvector_from_csv,
    hvector_to_csv,
    inner_h,
    kernel_apply,
    kernel_compose,
    kernel_from_csv,
    kernel_to_csv,
    square_array_from_csv,
    square_array_to_csv,
)


def test_grid_basics():
    g = Grid(8)
    assert g.dt == 0.125
    assert np.allclose(g.nodes(), np.linspace(0.0, 1.0, 9))
    assert np.allclose(g.mid(), (np.arange(8) + 0.5) / 8)
    with pytest.raises(ValueError):
        Grid(1)
    with pytest.raises(ValueError):
        Grid(0)


def test_basis_vectors_orthonormal():
    g = Grid(6)
    es = [HVector.basis(g, i) for i in range(6)]
    gram = np.array([[inner_h(a, b) for b in es] for a in es])
    assert np.max(np.abs(gram - np.eye(6))) < 1e-14


def test_constant_vector_norm_is_one():
    for m in (2, 5, 64):
        h = HVector.constant(Grid(m))
        assert abs(h.norm() - 1.0) < 1e-14


def test_coords_density_round_trip():
    g = Grid(16)
    rng = np.random.default_rng(0)
    h = HVector(g, rng.standard_normal(16))
    back = HVector.from_coords(g, h.coords)
    assert np.max(np.abs(back.density - h.density)) < 1e-14
    # |h|^2 = sum of squared coordinates
    assert abs(inner_h(h, h) - float(np.dot(h.coords, h.coords))) < 1e-12


def test_hvector_values_are_cumulative():
    g = Grid(4)
    h = HVector(g, np.array([4.0, 0.0, -4.0, 4.0]))
    assert np.allclose(h.values(), [0.0, 1.0, 1.0, 0.0, 1.0])


def test_vector_arithmetic_and_normalize():
    g = Grid(4)
    u = HVector(g, np.array([1.0, 2.0, 3.0, 4.0]))
    v = HVector(g, np.array([1.0, 1.0, 1.0, 1.0]))
    w = u + 2.0 * (-v)
    assert np.allclose(w.density, [-1.0, 0.0, 1.0, 2.0])
    n = (u - u).density
    assert np.all(n == 0.0)
    with pytest.raises(DegenerateInputError):
        (u - u).normalized()
    assert abs(u.normalized().norm() - 1.0) < 1e-14


def test_grid_mismatch_rejected():
    u = HVector.constant(Grid(4))
    v = HVector.constant(Grid(8))
    with pytest.raises(DimensionMismatchError):
        inner_h(u, v)
    with pytest.raises(DimensionMismatchError):
        u + v


def test_kernel_apply_matches_matrix():
    g = Grid(8)
    rng = np.random.default_rng(1)
    k = rng.standard_normal((8, 8))
    K = Kernel2(g, k)
    f = HVector(g, rng.standard_normal(8))
    out = kernel_apply(K, f)
    assert np.allclose(out.density, g.dt * (k @ f.density))
    # op_matrix is the coordinate form: same map expressed on coordinates
    assert np.allclose(K.op_matrix @ f.coords, out.coords)


def test_hs_norm_matches_coordinate_frobenius():
    g = Grid(8)
    rng = np.random.default_rng(2)
    K = Kernel2(g, rng.standard_normal((8, 8)))
    assert abs(hs_norm(K) - np.linalg.norm(K.op_matrix)) < 1e-12


def test_kernel_compose_operator_identity():
    # I + C = (I + Q)(I + K) on coordinates: apply K's shift first, then Q's
    g = Grid(8)
    rng = np.random.default_rng(3)
    K = Kernel2(g, rng.standard_normal((8, 8)))
    Q = Kernel2(g, rng.standard_normal((8, 8)))
    C = kernel_compose(K, Q)
    eye = np.eye(8)
    lhs = eye + C.op_matrix
    rhs = (eye + Q.op_matrix) @ (eye + K.op_matrix)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_compose_with_zero_is_identity_map():
    g = Grid(8)
    rng = np.random.default_rng(4)
    K = Kernel2(g, rng.standard_normal((8, 8)))
    Z = Kernel2.zero(g)
    assert np.max(np.abs(kernel_compose(K, Z).k - K.k)) == 0.0
    assert np.max(np.abs(kernel_compose(Z, K).k - K.k)) == 0.0


def test_rank_one_and_reflection():
    g = Grid(8)
    h = HVector.constant(g)
    R = Kernel2.reflection(h)
    # coordinate map is the Householder flip I - 2 hhat hhat^T
    hhat = h.coords
    expected = -2.0 * np.outer(hhat, hhat)
    assert np.max(np.abs(R.op_matrix - expected)) < 1e-14
    with pytest.raises(DegenerateInputError):
        Kernel2.reflection(HVector(g, np.zeros(8)))


def test_chaos_kernel_validation_and_reduction():
    g = Grid(8)
    h = HVector.constant(g)
    with pytest.raises(UnsupportedOrderError):
        ChaosKernel(0, h, h)
    with pytest.raises(UnsupportedOrderError):
        ChaosKernel(4, h, h)
    ck = ChaosKernel(1, h, h)
    K = ck.to_kernel2()
    assert np.allclose(K.k, np.outer(h.density, h.density))
    with pytest.raises(UnsupportedOrderError):
        ChaosKernel(2, h, h).to_kernel2()


def test_hvector_csv_round_trip_is_bit_exact():
    g = Grid(16)
    rng = np.random.default_rng(5)
    h = HVector(g, rng.standard_normal(16) * 1e3)
    buf = io.StringIO()
    hvector_to_csv(h, buf)
    buf.seek(0)
    assert buf.readline().strip() == "m,16"
    buf.seek(0)
    back = hvector_from_csv(buf)
    assert back.grid.m == 16
    assert np.all(back.density == h.density)


def test_kernel_csv_round_trip_is_bit_exact(tmp_path):
    g = Grid(5)
    rng = np.random.default_rng(6)
    K = Kernel2(g, rng.standard_normal((5, 5)) / 3.0)
    f = tmp_path / "k.csv"
    kernel_to_csv(K, f)
    back = kernel_from_csv(f)
    assert back.grid.m == 5
    assert np.all(back.k == K.k)


def test_square_array_csv_rejects_malformed():
    with pytest.raises(InputFormatError):
        square_array_from_csv(io.StringIO("i,j,value\n0,0,1.0\n"))  # missing m line
    with pytest.raises(InputFormatError):
        square_array_from_csv(io.StringIO("m,x\ni,j,value\n"))  # non-integer m
    with pytest.raises(InputFormatError):
        square_array_from_csv(io.StringIO("m,2\ni,j,value\n0,0,1.0\n"))  # too few rows
    rows = "\n".join(f"{i},{j},1.0" for i in range(2) for j in range(2))
    bad = f"m,2\ni,j,wrong\n{rows}\n"
    with pytest.raises(InputFormatError):
        square_array_from_csv(io.StringIO(bad))


def test_square_array_csv_round_trip():
    a = np.arange(9.0).reshape(3, 3) / 7.0
    buf = io.StringIO()
    square_array_to_csv(a, buf)
    buf.seek(0)
    assert np.all(square_array_from_csv(buf) == a)


def test_density_read_only():
    h = HVector.constant(Grid(4))
    with pytest.raises(ValueError):
        h.density[0] = 2.0
    K = Kernel2.zero(Grid(4))
    with pytest.raises(ValueError):
        K.k[0, 0] = 1.0
