"""Hot loops: latent-space Adam(W) and the pairwise coherence maximum.

Each kernel has a numba version and a numpy version with identical
arithmetic order where practical. ``_accel.HAVE_NUMBA`` picks one;
``GCS_DISABLE_NUMBA=1`` forces numpy.

The recovery kernel works on a collapsed objective. With the last layer
folded into the measurement matrix, K = A W_d, the squared loss in terms of
the last hidden activation h is

    L(h) = h^T M h - 2 c^T h + r,    M = K^T K,  c = K^T b,  r = ||b||^2,

so one iteration costs O(sum k_i k_{i-1} + k_{d-1}^2) no matter how many
measurements there are.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit


def pack_hidden(weights) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten the hidden layers W_1 .. W_{d-1} for the numba kernel."""
    if not weights:
        return np.zeros(0), np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64)
    dims = [weights[0].shape[1]] + [w.shape[0] for w in weights]
    offsets = np.zeros(len(weights) + 1, dtype=np.int64)
    for i, w in enumerate(weights):
        offsets[i + 1] = offsets[i] + w.size
    flat = np.concatenate([np.ascontiguousarray(w, dtype=np.float64).ravel() for w in weights])
    return flat, offsets, np.asarray(dims, dtype=np.int64)


@njit(cache=True, nogil=True)
def _adam_latent_nb(flat, offsets, dims, gram, lin, const, z0, lr, beta1, beta2,
                    weight_decay, eps, iterations, tol):
    n_layers = dims.shape[0] - 1
    k = z0.shape[0]
    maxw = 0
    for i in range(dims.shape[0]):
        if dims[i] > maxw:
            maxw = dims[i]
    acts = np.zeros((n_layers + 1, maxw))
    pres = np.zeros((n_layers + 1, maxw))
    z = z0.copy()
    m = np.zeros(k)
    v = np.zeros(k)
    g_top = np.zeros(maxw)
    g_low = np.zeros(maxw)
    top = dims[n_layers] if n_layers > 0 else k
    b1t = 1.0
    b2t = 1.0
    loss = 0.0
    done = 0
    for it in range(iterations):
        for i in range(k):
            acts[0, i] = z[i]
        for layer in range(n_layers):
            rows_ = dims[layer + 1]
            cols_ = dims[layer]
            base = offsets[layer]
            for r in range(rows_):
                s = 0.0
                for c in range(cols_):
                    s += flat[base + r * cols_ + c] * acts[layer, c]
                pres[layer + 1, r] = s
                acts[layer + 1, r] = s if s > 0.0 else 0.0
        h = acts[n_layers]
        loss = const
        for r in range(top):
            mh = 0.0
            for c in range(top):
                mh += gram[r, c] * h[c]
            loss += h[r] * mh - 2.0 * lin[r] * h[r]
            g_top[r] = 2.0 * (mh - lin[r])
        if tol > 0.0 and loss < tol:
            break
        for layer in range(n_layers - 1, -1, -1):
            rows_ = dims[layer + 1]
            cols_ = dims[layer]
            base = offsets[layer]
            for c in range(cols_):
                g_low[c] = 0.0
            for r in range(rows_):
                if pres[layer + 1, r] > 0.0:
                    gr = g_top[r]
                    for c in range(cols_):
                        g_low[c] += flat[base + r * cols_ + c] * gr
            for c in range(cols_):
                g_top[c] = g_low[c]
        b1t *= beta1
        b2t *= beta2
        for i in range(k):
            g = g_top[i]
            z[i] -= lr * weight_decay * z[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            mhat = m[i] / (1.0 - b1t)
            vhat = v[i] / (1.0 - b2t)
            z[i] -= lr * mhat / (math.sqrt(vhat) + eps)
        done = it + 1
    return z, done


def _adam_latent_np(hidden, gram, lin, const, z0, lr, beta1, beta2, weight_decay, eps,
                    iterations, tol):
    z = z0.copy()
    m = np.zeros_like(z)
    v = np.zeros_like(z)
    b1t = b2t = 1.0
    done = 0
    for it in range(iterations):
        h = z
        masks = []
        for w in hidden:
            pre = w @ h
            masks.append(pre > 0.0)
            h = np.where(masks[-1], pre, 0.0)
        mh = gram @ h
        loss = const + h @ mh - 2.0 * (lin @ h)
        if tol > 0.0 and loss < tol:
            break
        g = 2.0 * (mh - lin)
        for w, mask in zip(reversed(hidden), reversed(masks)):
            g = w.T @ np.where(mask, g, 0.0)
        b1t *= beta1
        b2t *= beta2
        z = z - lr * weight_decay * z
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        z = z - lr * (m / (1.0 - b1t)) / (np.sqrt(v / (1.0 - b2t)) + eps)
        done = it + 1
    return z, done


def adam_latent(hidden, gram, lin, const, z0, *, lr, beta1, beta2, weight_decay=0.0,
                eps=1e-8, iterations, tol=0.0, use_numba: bool | None = None):
    """Run Adam(W) on the collapsed quadratic-through-ReLU objective.

    Returns the final code and the number of steps taken.
    """
    use_numba = _accel.HAVE_NUMBA if use_numba is None else use_numba
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    gram = np.ascontiguousarray(gram, dtype=np.float64)
    lin = np.ascontiguousarray(lin, dtype=np.float64)
    if use_numba:
        flat, offsets, dims = pack_hidden(hidden)
        if not hidden:
            dims = np.array([z0.shape[0]], dtype=np.int64)
        return _adam_latent_nb(flat, offsets, dims, gram, lin, float(const), z0, float(lr),
                               float(beta1), float(beta2), float(weight_decay), float(eps),
                               int(iterations), float(tol))
    return _adam_latent_np(list(hidden), gram, lin, float(const), z0, lr, beta1, beta2,
                           weight_decay, eps, iterations, tol)


@njit(cache=True, nogil=True)
def _pair_max_nb(x, y_re, y_im):
    b, n = x.shape
    out = np.zeros(y_re.shape[1])
    for a in range(b - 1):
        for c in range(a + 1, b):
            s = 0.0
            for i in range(n):
                d = x[a, i] - x[c, i]
                s += d * d
            if s == 0.0:
                continue
            inv = 1.0 / math.sqrt(s)
            for j in range(y_re.shape[1]):
                dr = y_re[a, j] - y_re[c, j]
                di = y_im[a, j] - y_im[c, j]
                val = math.sqrt(dr * dr + di * di) * inv
                if val > out[j]:
                    out[j] = val
    return out


def _pair_max_np(x, y):
    out = np.zeros(y.shape[1])
    for a in range(x.shape[0] - 1):
        dist = np.sqrt(np.sum((x[a + 1:] - x[a]) ** 2, axis=1))
        keep = dist > 0.0
        if not keep.any():
            continue
        diffs = np.abs(y[a + 1:][keep] - y[a]) / dist[keep, None]
        np.maximum(out, diffs.max(axis=0), out=out)
    return out


def pair_max(x, y, use_numba: bool | None = None) -> np.ndarray:
    """max over pairs a < b of |y_a - y_b| / ||x_a - x_b||, elementwise; zero-distance pairs skipped.

    ``y`` is F applied to the rows of ``x``, so each term is the modulus of F
    applied to a normalized difference.
    """
    use_numba = _accel.HAVE_NUMBA if use_numba is None else use_numba
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.complex128)
    if use_numba:
        return _pair_max_nb(x, np.ascontiguousarray(y.real), np.ascontiguousarray(y.imag))
    return _pair_max_np(x, y)
