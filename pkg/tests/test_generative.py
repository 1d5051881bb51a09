import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gencs.generative import (GenerativeNetwork, NetworkError, activation_pattern, effective_map,
                              enumerate_pieces, forward, latent_gradient, load_net, low_frequency_net,
                              piece_count_bound, random_gaussian_init, save_net, validate_widths)


def straight_line_forward(weights, z):
    # independent oracle: explicit loops, no numpy broadcasting tricks
    h = [float(v) for v in z]
    for li, w in enumerate(weights):
        out = []
        for r in range(w.shape[0]):
            s = 0.0
            for c in range(w.shape[1]):
                s += float(w[r, c]) * h[c]
            out.append(s if li == len(weights) - 1 else max(s, 0.0))
        h = out
    return np.array(h)


def test_linear_identity_net_returns_input():
    net = GenerativeNetwork((3, 3), (np.eye(3),))
    z = np.array([-1.0, 0.5, 2.0])
    assert np.array_equal(forward(net, z), z)


def test_two_layer_identity_applies_relu_between_layers():
    net = GenerativeNetwork((2, 2, 2), (np.eye(2), np.eye(2)))
    assert np.array_equal(forward(net, [-1.0, 2.0]), [0.0, 2.0])


def test_forward_matches_straight_line_oracle():
    net = random_gaussian_init((3, 8, 8, 16), seed=11)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = rng.standard_normal(3)
        ref = straight_line_forward(net.weights, z)
        got = forward(net, z)
        assert np.linalg.norm(got - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


def test_forward_batch_matches_rows():
    net = random_gaussian_init((3, 8, 16), seed=1)
    zs = np.random.default_rng(2).standard_normal((5, 3))
    batch = forward(net, zs)
    for z, x in zip(zs, batch):
        np.testing.assert_allclose(forward(net, z), x, rtol=0, atol=1e-13)


def test_bad_latent_shape_rejected():
    net = random_gaussian_init((3, 8, 16), seed=1)
    with pytest.raises(NetworkError):
        forward(net, np.zeros(4))


@pytest.mark.parametrize("widths", [(1, 4), (3,), (4, 3, 8), ()])
def test_invalid_widths(widths):
    with pytest.raises(NetworkError):
        validate_widths(widths)


def test_declared_n_mismatch_rejected():
    with pytest.raises(NetworkError):
        random_gaussian_init((2, 4, 8), seed=0, n=9)


def test_weight_shape_checked():
    with pytest.raises(NetworkError):
        GenerativeNetwork((2, 4), (np.zeros((2, 4)),))


def test_weights_are_read_only():
    net = random_gaussian_init((2, 4, 8), seed=0)
    with pytest.raises(ValueError):
        net.weights[0][0, 0] = 1.0


def test_zero_maps_to_zero():
    net = random_gaussian_init((4, 16, 16, 32), seed=3)
    assert not np.any(forward(net, np.zeros(4)))


def test_positive_homogeneity_random():
    rng = np.random.default_rng(5)
    for trial in range(100):
        k = int(rng.integers(2, 5))
        widths = (k, int(rng.integers(k, 10)), int(rng.integers(k, 20)))
        net = random_gaussian_init(widths, seed=trial)
        z = rng.standard_normal(k)
        t = float(rng.exponential(3.0))
        gz = forward(net, z)
        assert np.linalg.norm(forward(net, t * z) - t * gz) <= 1e-10 * np.linalg.norm(gz) * max(t, 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), t=st.floats(0.0, 1e3))
def test_homogeneity_property(seed, t):
    net = random_gaussian_init((3, 6, 12), seed=seed % 1000)
    z = np.random.default_rng(seed).standard_normal(3)
    gz = forward(net, z)
    assert np.linalg.norm(forward(net, t * z) - t * gz) <= 1e-10 * np.linalg.norm(gz) * max(t, 1.0) + 1e-300


def test_linear_gradient_is_transpose():
    w = np.random.default_rng(0).standard_normal((6, 3))
    net = GenerativeNetwork((3, 6), (w,))
    c = np.random.default_rng(1).standard_normal(6)
    assert np.array_equal(latent_gradient(net, np.ones(3), c), w.T @ c)


def _kink_free(net, z, margin=1e-3):
    h = z
    for w in net.weights[:-1]:
        pre = w @ h
        if np.min(np.abs(pre)) < margin:
            return False
        h = np.maximum(pre, 0.0)
    return True


def test_gradient_matches_finite_differences():
    net = random_gaussian_init((4, 12, 10, 20), seed=9)
    rng = np.random.default_rng(4)
    done = 0
    while done < 20:
        z = rng.standard_normal(4)
        if not _kink_free(net, z):
            continue
        c = rng.standard_normal(20)
        g = latent_gradient(net, z, c)
        fd = np.zeros(4)
        for i in range(4):
            e = np.zeros(4)
            e[i] = 1e-6
            fd[i] = (c @ forward(net, z + e) - c @ forward(net, z - e)) / 2e-6
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)
        done += 1


def test_gradient_at_zero_uses_inactive_units():
    net = random_gaussian_init((3, 5, 8), seed=2)
    c = np.random.default_rng(0).standard_normal(8)
    # sigma'(0) = 0 turns every first-layer unit off, so nothing flows back
    assert np.array_equal(latent_gradient(net, np.zeros(3), c), np.zeros(3))


def test_same_seed_same_weights():
    a = random_gaussian_init((2, 4, 8), seed=7)
    b = random_gaussian_init((2, 4, 8), seed=7)
    for wa, wb in zip(a.weights, b.weights):
        assert wa.tobytes() == wb.tobytes()


def test_init_variance_is_one_over_fan_in():
    draws = np.array([random_gaussian_init((2, 4, 8), seed=s).weights[0][:, 0] for s in range(10000)]).ravel()
    var = draws.var()
    # standard error of a sample variance of Gaussians: sigma^2 sqrt(2/N)
    se = 0.5 * math.sqrt(2.0 / draws.size)
    assert abs(var - 0.5) <= 3 * se


def test_piece_count_bound_values():
    assert piece_count_bound((3, 5)) == 0.0
    assert piece_count_bound((2, 4, 4, 9)) == pytest.approx(4 * math.log(4 * math.e), abs=1e-12)
    # 4 ln(4e) = 4 + 8 ln 2 = 9.54518; exp of it is 256 e^4 = 13977.1
    assert piece_count_bound((2, 4, 4, 9)) == pytest.approx(4.0 + 8.0 * math.log(2.0), abs=1e-12)
    assert piece_count_bound((2, 4, 4, 9)) == pytest.approx(9.5446, abs=1e-3)
    assert math.exp(piece_count_bound((2, 4, 4, 9))) == pytest.approx(256 * math.e ** 4, rel=1e-12)
    assert math.floor(math.exp(piece_count_bound((2, 4, 4, 9)))) == 13977
    assert piece_count_bound((4, 8, 30)) == pytest.approx(4.0 + 8.0 * math.log(2.0), abs=1e-12)


def test_single_layer_has_one_piece():
    net = random_gaussian_init((3, 7), seed=0)
    pieces = enumerate_pieces(net)
    assert len(pieces) == 1
    assert np.array_equal(pieces[0].effective_map, net.weights[0])


def test_pieces_consistent_at_witness_and_cone():
    net = random_gaussian_init((3, 5, 4, 8), seed=4)
    pieces = enumerate_pieces(net)
    assert len(pieces) > 1
    assert [p.pattern for p in pieces] == sorted(p.pattern for p in pieces)
    for pc in pieces:
        for t in (1.0, 0.01, 37.0):
            w = t * pc.witness
            assert activation_pattern(net, w) == pc.pattern
            assert np.linalg.norm(forward(net, w) - pc.effective_map @ w) <= 1e-10 * max(1.0, t)


def test_exhaustive_count_matches_dense_probing():
    net = random_gaussian_init((2, 3, 4), seed=0)
    exact = {p.pattern for p in enumerate_pieces(net)}
    z = np.random.default_rng(1).standard_normal((10 ** 6, 2))
    pre = z @ net.weights[0].T
    probed = {tuple(int(b) for b in row) for row in np.unique(pre > 0, axis=0)}
    assert probed == exact


def test_sampling_mode_subset_of_exhaustive():
    net = random_gaussian_init((3, 5, 5, 8), seed=6)
    exact = {p.pattern for p in enumerate_pieces(net)}
    sampled = {p.pattern for p in enumerate_pieces(net, budget=3000, mode="sampling", seed=1)}
    assert sampled <= exact


def test_budget_and_cap_enforced():
    net = random_gaussian_init((3, 6, 6, 8), seed=0)
    with pytest.raises(NetworkError):
        enumerate_pieces(net, budget=2)
    big = random_gaussian_init((2, 25, 4), seed=0)
    with pytest.raises(NetworkError, match="sampling"):
        enumerate_pieces(big)


def test_piece_count_within_bound_random_tiny_nets():
    rng = np.random.default_rng(0)
    for s in range(10):
        k = int(rng.integers(2, 4))
        widths = (k, *(int(rng.integers(k, 6)) for _ in range(int(rng.integers(1, 3)))), 6)
        net = random_gaussian_init(widths, seed=s)
        assert len(enumerate_pieces(net)) <= math.exp(piece_count_bound(widths)) + 1e-9


def test_effective_map_pattern_length_checked():
    net = random_gaussian_init((2, 3, 4), seed=0)
    with pytest.raises(NetworkError):
        effective_map(net, (1, 0))


def test_low_frequency_net_lives_in_few_dft_rows():
    net = low_frequency_net(64, 4, 16, seed=0)
    x = forward(net, np.random.default_rng(0).standard_normal((50, 4)))
    spec = np.abs(np.fft.fft(x, axis=1))
    support = np.flatnonzero(spec.max(axis=0) > 1e-9 * spec.max())
    assert set(support) <= {0, 1, 2, 3, 32, 61, 62, 63}


def test_net_file_round_trip(tmp_path):
    net = random_gaussian_init((3, 7, 11), seed=2)
    path = tmp_path / "net.txt"
    save_net(net, path)
    back = load_net(path)
    assert back.widths == net.widths
    for a, b in zip(back.weights, net.weights):
        assert np.array_equal(a, b)
    assert path.read_text().splitlines()[:2] == ["GCSNET 1", "2 3 7 11"]


@pytest.mark.parametrize("text", ["GCSNET 2\n1 2 2\n1 0\n0 1\n", "GCSNET 1\n2 2 2\n1 0\n0 1\n",
                                  "GCSNET 1\nx y\n", "GCSNET 1\n1 2 2\n1 0\n0\n", ""])
def test_net_loader_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(NetworkError):
        load_net(path)
