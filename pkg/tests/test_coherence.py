import math

import numpy as np
import pytest

from gencs.coherence import (CoherenceError, CoherenceVector, coherence_exact_pieces, coherence_exact_subspace,
                             coherence_heuristic, load_coherence, orthonormal_basis,
                             piecewise_expansion_properties_check, save_coherence)
from gencs.generative import GenerativeNetwork, enumerate_pieces, forward, random_gaussian_init
from gencs.transforms import dense_matrix, dft1d, hadamard, identity, random_orthogonal


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def projection_oracle(op, basis):
    # ||P_U f_j|| via an explicit projector and the explicit conjugated rows
    f = dense_matrix(op).conj()
    proj = basis @ basis.T
    return np.array([np.linalg.norm(proj @ f[j]) for j in range(op.n)])


def test_identity_on_first_axis():
    e1 = np.zeros((6, 1))
    e1[0] = 1.0
    a = coherence_exact_subspace(identity(6), e1).alpha
    assert np.array_equal(a, [1, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("op", [identity(8), dft1d(8), hadamard(8)], ids=lambda o: o.kind)
def test_full_space_gives_all_ones(op):
    np.testing.assert_allclose(coherence_exact_subspace(op, np.eye(8)).alpha, 1.0, atol=1e-12)


def test_one_dimensional_dft_norm_is_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = unit(rng.standard_normal(8))[:, None]
        cv = coherence_exact_subspace(dft1d(8), u)
        assert abs(cv.norm - 1.0) <= 1e-12
        np.testing.assert_allclose(cv.alpha, np.abs(np.fft.fft(u[:, 0], norm="ortho")), atol=1e-14)


def test_subspace_matches_projector_oracle():
    rng = np.random.default_rng(1)
    q = orthonormal_basis(rng.standard_normal((32, 5)))
    for op in (dft1d(32), hadamard(32), random_orthogonal(32, 2)):
        np.testing.assert_allclose(coherence_exact_subspace(op, q).alpha, projection_oracle(op, q), atol=1e-12)


def test_monotone_in_subspace():
    rng = np.random.default_rng(2)
    big = orthonormal_basis(rng.standard_normal((16, 6)))
    small = big[:, :3]
    a = coherence_exact_subspace(dft1d(16), small).alpha
    b = coherence_exact_subspace(dft1d(16), big).alpha
    assert np.all(a <= b + 1e-12)
    assert np.all((0 <= b) & (b <= 1))
    assert np.linalg.norm(a) >= 1 - 1e-12


def test_real_field_never_exceeds_complex_and_matches_for_real_f():
    rng = np.random.default_rng(3)
    q = orthonormal_basis(rng.standard_normal((16, 3)))
    c = coherence_exact_subspace(dft1d(16), q).alpha
    r = coherence_exact_subspace(dft1d(16), q, field="real").alpha
    assert np.all(r <= c + 1e-12)
    assert np.all(c <= math.sqrt(2) * r + 1e-12)
    np.testing.assert_allclose(coherence_exact_subspace(hadamard(16), q, field="real").alpha,
                               coherence_exact_subspace(hadamard(16), q).alpha, atol=1e-12)


def test_real_field_sup_against_dense_search():
    # sup over real unit x in U of |<f_j, x>| by brute force on a circle (2-D U)
    rng = np.random.default_rng(4)
    q = orthonormal_basis(rng.standard_normal((8, 2)))
    theta = np.linspace(0, np.pi, 200001)
    xs = q @ np.stack([np.cos(theta), np.sin(theta)])
    brute = np.abs(dense_matrix(dft1d(8)) @ xs).max(axis=1)
    np.testing.assert_allclose(coherence_exact_subspace(dft1d(8), q, field="real").alpha, brute, atol=1e-9)


def test_non_orthonormal_basis_rejected():
    with pytest.raises(CoherenceError):
        coherence_exact_subspace(dft1d(4), np.ones((4, 2)))
    with pytest.raises(CoherenceError):
        coherence_exact_subspace(dft1d(4), np.eye(4), field="quaternion")


def test_linear_net_reduces_to_subspace():
    w = np.random.default_rng(5).standard_normal((16, 3))
    net = GenerativeNetwork((3, 16), (w,))
    pieces = enumerate_pieces(net)
    a = coherence_exact_pieces(dft1d(16), pieces).alpha
    b = coherence_exact_subspace(dft1d(16), orthonormal_basis(w)).alpha
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("field", ["complex", "real"])
@pytest.mark.parametrize("seed", [0, 1, 4])
def test_heuristic_below_exact(seed, field):
    net = random_gaussian_init((2, 3, 4), seed=seed)
    op = dft1d(4)
    exact = coherence_exact_pieces(op, enumerate_pieces(net), field=field).alpha
    heur = coherence_heuristic(net, op, 500, seed=0).alpha
    # a difference of range points is a real test vector, so the bound holds in both fields
    assert np.all(heur <= exact + 1e-9)


def test_heuristic_single_pair_exact():
    net = random_gaussian_init((3, 6, 16), seed=2)
    op = dft1d(16)
    cv = coherence_heuristic(net, op, 2, seed=9)
    z = np.random.default_rng(9).standard_normal((2, 3))
    d = forward(net, z[0]) - forward(net, z[1])
    expected = np.abs(dense_matrix(op) @ (d / np.linalg.norm(d)))
    np.testing.assert_allclose(cv.alpha, expected, atol=1e-13)


def test_heuristic_on_a_line():
    u = unit(np.random.default_rng(6).standard_normal(16))
    w = np.outer(u, [1.0, -0.5])  # rank one: the range is the line through u
    net = GenerativeNetwork((2, 16), (w,))
    cv = coherence_heuristic(net, dft1d(16), 100, seed=0)
    np.testing.assert_allclose(cv.alpha, np.abs(np.fft.fft(u, norm="ortho")), atol=1e-6)


def test_heuristic_monotone_in_batch():
    net = random_gaussian_init((3, 8, 32), seed=1)
    prev = np.zeros(32)
    for b in (10, 40, 160):
        a = coherence_heuristic(net, dft1d(32), b, seed=5).alpha
        assert np.all(a >= prev - 1e-15)
        prev = a


def test_heuristic_rejects_bad_input():
    net = random_gaussian_init((2, 3, 4), seed=0)
    with pytest.raises(CoherenceError):
        coherence_heuristic(net, dft1d(4), 1, seed=0)
    with pytest.raises(CoherenceError):
        coherence_heuristic(net, dft1d(8), 10, seed=0)


def test_exact_pieces_contains_a_line():
    net = random_gaussian_init((2, 4, 8), seed=3)
    a = coherence_exact_pieces(dft1d(8), enumerate_pieces(net)).alpha
    assert np.linalg.norm(a) >= 1 - 1e-12
    assert np.all((a >= 0) & (a <= 1))


def test_expansion_check_linear_and_relu():
    w = np.random.default_rng(0).standard_normal((8, 2))
    lin = GenerativeNetwork((2, 8), (w,))
    assert piecewise_expansion_properties_check(lin, enumerate_pieces(lin), 200, seed=0).ok
    net = random_gaussian_init((2, 3, 4, 8), seed=1)
    rep = piecewise_expansion_properties_check(net, enumerate_pieces(net), 10 ** 4, seed=0, tol=1e-8)
    assert rep.ok, (rep.unassigned[:5], rep.difference_violations[:5])


def test_expansion_check_flags_outsider():
    net = random_gaussian_init((2, 3, 16), seed=1)
    pieces = enumerate_pieces(net)
    spans = np.hstack([pc.effective_map for pc in pieces])
    # a vector orthogonal to every piece span
    q, _ = np.linalg.qr(np.hstack([spans, np.random.default_rng(0).standard_normal((16, 1))]))
    outsider = q[:, -1]
    rep = piecewise_expansion_properties_check(net, pieces, 10, seed=0, extra_points=[outsider])
    assert rep.unassigned == ["extra:0"]
    assert not rep.ok


def test_coherence_csv_round_trip(tmp_path):
    cv = CoherenceVector(np.array([0.1, 0.5, 1.0 / 3.0]))
    save_coherence(cv, tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "index,alpha"
    assert np.array_equal(load_coherence(tmp_path / "a.csv").alpha, cv.alpha)
    with pytest.raises(CoherenceError):
        CoherenceVector(np.array([-0.1, 0.2]))
