import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_adjoint_of, dense_of
from sparsefix.linops import (
    ConvergenceWarning,
    IdentityOp,
    MatrixOp,
    dct_framelet_operator,
    estimate_spectral_norm,
    first_difference_operator,
    gaussian_kernel_matrix,
    motion_blur_kernel,
    motion_blur_operator,
)


def jacobi_singular_values(A, sweeps=60):
    """One-sided Jacobi SVD: orthogonalize column pairs by plane rotations."""
    U = np.array(A, dtype=float, copy=True)
    n = U.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = U[:, i] @ U[:, i]
                b = U[:, j] @ U[:, j]
                c = U[:, i] @ U[:, j]
                if abs(c) <= 1e-15 * math.sqrt(a * b):
                    continue
                off = max(off, abs(c) / math.sqrt(a * b))
                zeta = (b - a) / (2 * c)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1 + zeta**2))
                cs = 1 / math.sqrt(1 + t**2)
                sn = cs * t
                ui = U[:, i].copy()
                U[:, i] = cs * ui - sn * U[:, j]
                U[:, j] = sn * ui + cs * U[:, j]
        if off < 1e-15:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def all_operators():
    rng = np.random.default_rng(3)
    return {
        "matrix": MatrixOp(rng.standard_normal((5, 7))),
        "identity": IdentityOp(6),
        "kernel": gaussian_kernel_matrix(rng.standard_normal((6, 2)), 1.3),
        "blur": motion_blur_operator(5, 45, 8, 8),
        "blur_wide": motion_blur_operator(7, 20, 12, 9),
        "framelet": dct_framelet_operator(9, 8, 3),
        "difference": first_difference_operator(7, 5),
    }


OPERATORS = all_operators()


# ---------------------------------------------------------------- kernel


def test_kernel_unit_diagonal_and_symmetry(rng):
    K = gaussian_kernel_matrix(rng.standard_normal((9, 4)), 0.7).to_dense()
    assert np.all(np.diag(K) == 1.0)
    assert np.max(np.abs(K - K.T)) == 0.0


def test_kernel_entry_at_distance_sqrt20():
    x = np.zeros(6)
    y = np.zeros(6)
    y[0] = math.sqrt(20.0)
    K = gaussian_kernel_matrix([x, y], math.sqrt(10.0)).to_dense()
    assert K[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert K[0, 1] == pytest.approx(0.367879, abs=1e-6)


def test_kernel_matches_scalar_loop(rng):
    pts = rng.standard_normal((3, 2))
    K = gaussian_kernel_matrix(pts, 1.0).to_dense()
    for j in range(3):
        for k in range(3):
            d2 = sum((pts[j, i] - pts[k, i]) ** 2 for i in range(2))
            assert abs(K[j, k] - math.exp(-d2 / 2.0)) <= 1e-14


def test_kernel_rejects_ragged_points_and_bad_sigma():
    with pytest.raises(ValueError):
        gaussian_kernel_matrix([[0.0, 1.0], [1.0]], 1.0)
    with pytest.raises(ValueError):
        gaussian_kernel_matrix([[0.0], [1.0]], 0.0)
    with pytest.raises(ValueError):
        gaussian_kernel_matrix([[0.0, 1.0]], 1.0, centers=[[0.0, 1.0, 2.0]])


# ---------------------------------------------------------------- motion blur


def test_length_one_blur_is_identity(rng):
    for angle in (0.0, 45.0, 133.0):
        assert np.array_equal(motion_blur_kernel(1, angle), np.array([[1.0]]))
    op = motion_blur_operator(1, 30, 6, 5)
    x = rng.standard_normal(30)
    np.testing.assert_array_equal(op.apply(x), x)
    np.testing.assert_array_equal(op.adjoint(x), x)


@given(st.integers(1, 21), st.floats(0, 360, exclude_max=True, allow_nan=False))
def test_blur_kernel_is_normalized_and_point_symmetric(length, angle):
    k = motion_blur_kernel(length, angle)
    assert abs(k.sum() - 1.0) <= 1e-12
    assert np.all(k >= 0)
    np.testing.assert_allclose(k, k[::-1, ::-1], atol=1e-15)


def test_horizontal_blur_is_box_filter():
    k = motion_blur_kernel(5, 0)
    expected = np.zeros((5, 5))
    expected[2] = 0.2
    np.testing.assert_allclose(k, expected, atol=1e-15)


def test_blur_adjoint_equals_transpose_of_dense_matrix():
    op = motion_blur_operator(5, 45, 8, 8)
    A = dense_of(op)
    At = dense_adjoint_of(op)
    assert np.max(np.abs(At - A.T)) <= 1e-10


def test_blur_preserves_constants():
    # symmetric padding plus unit-sum kernel maps a constant image to itself
    op = motion_blur_operator(9, 45, 16, 16)
    np.testing.assert_allclose(op.apply(np.full(256, 7.0)), 7.0, atol=1e-12)


def test_blur_rejects_bad_arguments():
    with pytest.raises(ValueError):
        motion_blur_operator(9, 45, 8, 16)
    with pytest.raises(ValueError):
        motion_blur_operator(0, 45, 8, 8)
    with pytest.raises(ValueError):
        motion_blur_operator(3, 360, 8, 8)
    with pytest.raises(ValueError):
        motion_blur_operator(3, -1, 8, 8)


# ---------------------------------------------------------------- framelet


def test_framelet_tight_frame(rng):
    D = dct_framelet_operator(16, 16)
    assert D.out_dim == 49 * 256
    for _ in range(10):
        x = rng.standard_normal(256)
        assert np.linalg.norm(D.adjoint(D.apply(x)) - x) <= 1e-10 * np.linalg.norm(x)


def test_framelet_constant_image_only_lowpass():
    D = dct_framelet_operator(16, 16)
    bands = D.subbands(D.apply(np.full(256, 3.0)))
    assert np.max(np.abs(bands[0, 0])) > 0
    high = bands.copy()
    high[0, 0] = 0.0
    assert np.max(np.abs(high)) <= 1e-10


def test_framelet_parseval_block3(rng):
    D = dct_framelet_operator(9, 9, block=3)
    x = rng.standard_normal(81)
    assert abs(np.linalg.norm(D.apply(x)) - np.linalg.norm(x)) <= 1e-10


def test_framelet_rejects_bad_block():
    with pytest.raises(ValueError):
        dct_framelet_operator(16, 16, block=4)
    with pytest.raises(ValueError):
        dct_framelet_operator(16, 16, block=1)
    with pytest.raises(ValueError):
        dct_framelet_operator(5, 16, block=7)


# ---------------------------------------------------------------- differences


def test_difference_of_constant_is_zero():
    op = first_difference_operator(5, 4)
    assert op.out_dim == 40
    assert np.all(op.apply(np.full(20, 2.5)) == 0.0)


def test_difference_single_pixel_has_four_unit_outputs():
    op = first_difference_operator(4, 4)
    x = np.zeros(16)
    x[5] = 1.0
    y = op.apply(x)
    assert np.count_nonzero(y) == 4
    assert set(np.abs(y[y != 0])) == {1.0}


def test_difference_norm_bound(rng):
    assert estimate_spectral_norm(first_difference_operator(8, 8)) <= 2.8285


def test_difference_needs_two_pixels():
    with pytest.raises(ValueError):
        first_difference_operator(1, 5)


# ---------------------------------------------------------------- spectral norm


def test_spectral_norm_diagonal():
    assert estimate_spectral_norm(MatrixOp(np.diag([2.0, 1.0]))) == pytest.approx(2.0, abs=1e-6)


def test_spectral_norm_identity():
    assert estimate_spectral_norm(IdentityOp(17)) == pytest.approx(1.0, abs=1e-12)


def test_spectral_norm_matches_jacobi_svd(rng):
    for _ in range(5):
        A = rng.standard_normal((5, 7))
        s = jacobi_singular_values(A.T)  # 7 x 5: columns are the short side
        assert estimate_spectral_norm(MatrixOp(A)) == pytest.approx(s[0], rel=1e-6)


def test_spectral_norm_is_reproducible():
    op = OPERATORS["blur"]
    assert estimate_spectral_norm(op, tol=1e-6) == estimate_spectral_norm(op, tol=1e-6)


def test_spectral_norm_warns_at_cap():
    A = np.diag([1.0, 0.999999, 0.5])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        val = estimate_spectral_norm(MatrixOp(A), tol=1e-15, max_iter=3)
    assert any(issubclass(w.category, ConvergenceWarning) for w in caught)
    assert 0.5 < val <= 1.0


# ---------------------------------------------------------------- generic contracts


@pytest.mark.parametrize("name", sorted(OPERATORS))
@given(seed=st.integers(0, 2**32 - 1))
def test_adjoint_pairing(name, seed):
    op = OPERATORS[name]
    r = np.random.default_rng(seed)
    x = r.standard_normal(op.in_dim)
    y = r.standard_normal(op.out_dim)
    lhs = op.apply(x) @ y
    rhs = x @ op.adjoint(y)
    assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(x) * np.linalg.norm(y)


@pytest.mark.parametrize("name", sorted(OPERATORS))
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_linearity(name, seed, a, b):
    op = OPERATORS[name]
    r = np.random.default_rng(seed)
    x = r.standard_normal(op.in_dim)
    y = r.standard_normal(op.in_dim)
    lhs = op.apply(a * x + b * y)
    rhs = a * op.apply(x) + b * op.apply(y)
    scale = (abs(a) * np.linalg.norm(x) + abs(b) * np.linalg.norm(y)) * max(1.0, estimate_spectral_norm(op, tol=1e-6))
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(scale, 1.0)


def test_shape_checks():
    op = OPERATORS["matrix"]
    with pytest.raises(ValueError):
        op.apply(np.zeros(5))
    with pytest.raises(ValueError):
        op.adjoint(np.zeros(7))


def test_transpose_view_round_trip(rng):
    op = OPERATORS["blur_wide"]
    x = rng.standard_normal(op.out_dim)
    np.testing.assert_array_equal(op.T.apply(x), op.adjoint(x))
    assert op.T.T is op
