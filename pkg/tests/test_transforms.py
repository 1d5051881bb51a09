import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gencs.transforms import (TransformError, UnitaryOperator, adjoint_apply, apply, dense, dense_matrix,
                              dft1d, dft2d, hadamard, identity, load_matrix, parse_transform,
                              random_orthogonal, row, rows, save_matrix)


def dense_dft(n):
    # direct definition, O(n^2)
    j, l = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * j * l / n) / math.sqrt(n)


def sylvester(n):
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h / math.sqrt(n)


def all_ops():
    return [identity(16), dft1d(16), dft1d(256), dft2d(4, 8), dft2d(16, 16), hadamard(16), hadamard(256),
            random_orthogonal(16, seed=3), dense(dense_dft(12))]


@pytest.mark.parametrize("op", all_ops(), ids=lambda o: f"{o.kind}{o.n}")
def test_parseval(op):
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
        assert abs(np.linalg.norm(apply(op, x)) - np.linalg.norm(x)) <= 1e-12 * np.linalg.norm(x)


@pytest.mark.parametrize("op", all_ops(), ids=lambda o: f"{o.kind}{o.n}")
def test_adjoint_inverts_on_basis(op):
    f = apply(op, np.eye(op.n))  # row i is F e_i, i.e. F transposed
    ff = adjoint_apply(op, f)
    assert np.linalg.norm(ff - np.eye(op.n), 2) <= 1e-10


@pytest.mark.parametrize("op", all_ops(), ids=lambda o: f"{o.kind}{o.n}")
def test_rows_agree_with_apply(op):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(op.n)
    fx = apply(op, x)
    m = dense_matrix(op)
    np.testing.assert_allclose(m @ x, fx, atol=1e-12, rtol=0)
    np.testing.assert_allclose(np.linalg.norm(m, axis=1), 1.0, atol=1e-12)
    for j in rng.integers(0, op.n, 5):
        assert abs(np.vdot(row(op, int(j)), x) - fx[j]) <= 1e-12


def test_identity_is_identity():
    x = np.arange(5.0)
    assert np.array_equal(apply(identity(5), x), x)
    assert np.array_equal(adjoint_apply(identity(5), x), x)
    assert np.array_equal(row(identity(5), 3), np.eye(5)[3])


def test_dft_of_constant_is_first_basis_vector():
    n = 16
    y = apply(dft1d(n), np.ones(n) / math.sqrt(n))
    e = np.zeros(n)
    e[0] = 1.0
    np.testing.assert_allclose(y, e, atol=1e-15)


def test_dft_matches_dense_matrix():
    x = np.random.default_rng(2).standard_normal(8)
    y = apply(dft1d(8), x)
    assert abs(np.linalg.norm(y) - np.linalg.norm(x)) <= 1e-12
    np.testing.assert_allclose(y, dense_dft(8) @ x, atol=1e-12, rtol=0)


def test_dft_adjoint_round_trip():
    rng = np.random.default_rng(3)
    op = dft1d(32)
    for _ in range(50):
        x = rng.standard_normal(32)
        np.testing.assert_allclose(adjoint_apply(op, apply(op, x)), x, atol=1e-12)


def test_random_orthogonal_round_trip():
    op = random_orthogonal(20, seed=0)
    x = np.random.default_rng(0).standard_normal(20)
    np.testing.assert_allclose(adjoint_apply(op, apply(op, x)).real, x, atol=1e-10)
    q = op.matrix
    assert np.all(np.isreal(q))
    np.testing.assert_allclose(q.T @ q, np.eye(20), atol=1e-12)


def test_frequency_zero_row():
    np.testing.assert_allclose(row(dft1d(8), 0), np.full(8, 1 / math.sqrt(8)), atol=1e-15)


def test_second_dft_row_matches_dense_column():
    # CLI row 2 is internal index 1; the DFT matrix is symmetric so column = row
    d = dense_dft(4)
    np.testing.assert_allclose(row(dft1d(4), 1), d[:, 1].conj(), atol=1e-15)


def test_hadamard_matches_sylvester():
    np.testing.assert_allclose(dense_matrix(hadamard(32)).real, sylvester(32), atol=1e-15)


def test_dft2d_separable():
    h, w = 4, 6
    x = np.random.default_rng(4).standard_normal(h * w)
    img = x.reshape(h, w)
    rows_first = np.fft.fft(img, axis=1, norm="ortho")
    both = np.fft.fft(rows_first, axis=0, norm="ortho")
    np.testing.assert_allclose(apply(dft2d(h, w), x), both.ravel(), atol=1e-12)
    k = np.kron(dense_dft(h), dense_dft(w))
    np.testing.assert_allclose(dense_matrix(dft2d(h, w)), k, atol=1e-12)


def test_batch_apply():
    op = dft2d(4, 4)
    xs = np.random.default_rng(5).standard_normal((3, 16))
    ys = apply(op, xs)
    for x, y in zip(xs, ys):
        np.testing.assert_allclose(apply(op, x), y, atol=1e-14)


@pytest.mark.parametrize("bad", [lambda: hadamard(12), lambda: UnitaryOperator("dft2d", 12, shape=(3, 5)),
                                 lambda: UnitaryOperator("fft", 4), lambda: dense(np.ones((3, 3))),
                                 lambda: dense(np.ones((2, 3))), lambda: identity(0)])
def test_invalid_operators(bad):
    with pytest.raises(TransformError):
        bad()


def test_length_checked():
    with pytest.raises(TransformError):
        apply(dft1d(8), np.zeros(7))
    with pytest.raises(TransformError):
        row(dft1d(8), 8)


def test_parse_transform(tmp_path):
    assert parse_transform("dft1d", 8).kind == "dft1d"
    assert parse_transform("dft2d:4x8", 32).shape == (4, 8)
    assert parse_transform("hadamard", 16).n == 16
    q = random_orthogonal(6, seed=1).matrix
    save_matrix(q, tmp_path / "q.txt")
    assert (tmp_path / "q.txt").read_text().startswith("GCSMAT 1 6 6\n")
    op = parse_transform(f"dense:{tmp_path / 'q.txt'}", 6)
    assert np.array_equal(op.matrix, q)
    np.testing.assert_array_equal(load_matrix(tmp_path / "q.txt"), q)
    for spec, n in [("dft2d:4x4", 32), ("dft2d:4", 16), ("wavelet", 8), ("dense:", 8), ("dft1d", None)]:
        with pytest.raises(TransformError):
            parse_transform(spec, n)


@settings(max_examples=30, deadline=None)
@given(log_n=st.integers(0, 8), seed=st.integers(0, 10 ** 6))
def test_hadamard_involution(log_n, seed):
    n = 2 ** log_n
    x = np.random.default_rng(seed).standard_normal(n)
    op = hadamard(n)
    np.testing.assert_allclose(apply(op, apply(op, x)).real, x, atol=1e-12)
