"""Unitary measurement operators F with fast apply and row access.

Indices are 0-based here; the CLI converts from 1-based frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("identity", "dft1d", "dft2d", "hadamard", "dense")


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class UnitaryOperator:
    kind: str
    n: int
    shape: tuple[int, int] | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TransformError(f"unknown transform kind {self.kind!r}")
        if self.n < 1:
            raise TransformError("n must be positive")
        if self.kind == "dft2d":
            if self.shape is None or self.shape[0] * self.shape[1] != self.n:
                raise TransformError(f"dft2d needs shape (H, W) with H*W = n, got {self.shape} for n={self.n}")
        if self.kind == "hadamard" and self.n & (self.n - 1):
            raise TransformError(f"hadamard needs n a power of two, got {self.n}")
        if self.kind == "dense":
            if self.matrix is None or self.matrix.shape != (self.n, self.n):
                raise TransformError("dense operator needs an n x n matrix")
            mat = np.array(self.matrix)
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)


def identity(n: int) -> UnitaryOperator:
    return UnitaryOperator("identity", n)


def dft1d(n: int) -> UnitaryOperator:
    return UnitaryOperator("dft1d", n)


def dft2d(h: int, w: int) -> UnitaryOperator:
    return UnitaryOperator("dft2d", h * w, shape=(h, w))


def hadamard(n: int) -> UnitaryOperator:
    return UnitaryOperator("hadamard", n)


def dense(matrix, check: bool = True, tol: float = 1e-10) -> UnitaryOperator:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise TransformError(f"dense operator must be square, got shape {matrix.shape}")
    if check:
        err = np.linalg.norm(matrix.conj().T @ matrix - np.eye(matrix.shape[0]), 2)
        if err > tol:
            raise TransformError(f"matrix is not unitary (||F*F - I|| = {err:.3g})")
    return UnitaryOperator("dense", matrix.shape[0], matrix=matrix)


def random_orthogonal(n: int, seed: int) -> UnitaryOperator:
    """Haar-style real orthogonal matrix from QR of a Gaussian, with sign-fixed R diagonal."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    return dense(q)


def _check_length(op: UnitaryOperator, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1:] != (op.n,):
        raise TransformError(f"expected trailing length {op.n}, got shape {x.shape}")
    return x


def _fwht(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis (Sylvester order)."""
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = np.array(x, dtype=np.result_type(x.dtype, np.float64))
    h = 1
    while h < n:
        y = y.reshape(*lead, n // (2 * h), 2, h)
        a = y[..., 0, :].copy()
        b = y[..., 1, :]
        y[..., 0, :] += b
        y[..., 1, :] = a - b
        h *= 2
    return y.reshape(*lead, n)


def apply(op: UnitaryOperator, x) -> np.ndarray:
    """F x along the last axis (batches allowed)."""
    x = _check_length(op, x)
    if op.kind == "identity":
        return x.astype(np.complex128)
    if op.kind == "dft1d":
        return np.fft.fft(x, axis=-1, norm="ortho")
    if op.kind == "dft2d":
        h, w = op.shape
        y = np.fft.fft2(x.reshape(*x.shape[:-1], h, w), norm="ortho")
        return y.reshape(x.shape)
    if op.kind == "hadamard":
        return (_fwht(x) / math.sqrt(op.n)).astype(np.complex128)
    return (x @ op.matrix.T).astype(np.complex128)


def adjoint_apply(op: UnitaryOperator, y) -> np.ndarray:
    """F* y along the last axis."""
    y = _check_length(op, y)
    if op.kind == "identity":
        return y.astype(np.complex128)
    if op.kind == "dft1d":
        return np.fft.ifft(y, axis=-1, norm="ortho")
    if op.kind == "dft2d":
        h, w = op.shape
        x = np.fft.ifft2(y.reshape(*y.shape[:-1], h, w), norm="ortho")
        return x.reshape(y.shape)
    if op.kind == "hadamard":
        return (_fwht(y) / math.sqrt(op.n)).astype(np.complex128)
    return (y @ op.matrix.conj()).astype(np.complex128)


def rows(op: UnitaryOperator, indices) -> np.ndarray:
    """The rows F[indices, :] as an (m, n) complex array."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= op.n):
        raise TransformError(f"row index out of range [0, {op.n})")
    n = op.n
    cols = np.arange(n)
    if op.kind == "identity":
        out = np.zeros((idx.size, n), dtype=np.complex128)
        out[np.arange(idx.size), idx] = 1.0
        return out
    if op.kind == "dft1d":
        phase = np.outer(idx, cols) % n
        return np.exp(-2j * np.pi * phase / n) / math.sqrt(n)
    if op.kind == "dft2d":
        h, w = op.shape
        jr, jc = np.divmod(idx, w)
        lr, lc = np.divmod(cols, w)
        phase = (np.outer(jr, lr) % h) / h + (np.outer(jc, lc) % w) / w
        return np.exp(-2j * np.pi * phase) / math.sqrt(n)
    if op.kind == "hadamard":
        bits = np.bitwise_and(idx[:, None], cols[None, :])
        parity = np.zeros_like(bits)
        while bits.any():
            parity ^= bits & 1
            bits = bits >> 1
        return (1.0 - 2.0 * parity).astype(np.complex128) / math.sqrt(n)
    return op.matrix[idx].astype(np.complex128)


def row(op: UnitaryOperator, j: int) -> np.ndarray:
    """f_j, the conjugated j-th row, so that <f_j, x> = f_j^* x = (F x)_j."""
    if not 0 <= j < op.n:
        raise TransformError(f"row index {j} out of range [0, {op.n})")
    return rows(op, [j])[0].conj()


def dense_matrix(op: UnitaryOperator) -> np.ndarray:
    return rows(op, np.arange(op.n))


def parse_transform(spec: str, n: int | None = None) -> UnitaryOperator:
    """Parse a CLI transform spec: identity|dft1d|dft2d:HxW|hadamard|dense:FILE."""
    kind, _, arg = spec.partition(":")
    if kind == "dft2d":
        try:
            h, w = (int(v) for v in arg.lower().split("x"))
        except ValueError:
            raise TransformError(f"dft2d spec must look like dft2d:HxW, got {spec!r}") from None
        op = dft2d(h, w)
    elif kind == "dense":
        if not arg:
            raise TransformError("dense spec needs a file: dense:FILE")
        op = dense(load_matrix(arg))
    elif kind in ("identity", "dft1d", "hadamard"):
        if n is None:
            raise TransformError(f"{kind} needs the ambient dimension n")
        op = UnitaryOperator(kind, n)
    else:
        raise TransformError(f"unknown transform {spec!r}")
    if n is not None and op.n != n:
        raise TransformError(f"transform {spec!r} has n={op.n}, expected {n}")
    return op


def save_matrix(matrix, path) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    with open(path, "w") as fh:
        fh.write(f"GCSMAT 1 {n} {matrix.shape[1]}\n")
        for r in matrix:
            fh.write(" ".join(f"{v:.17g}" for v in r) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["GCSMAT", "1"]:
        raise TransformError(f"{path}: header must be 'GCSMAT 1 n n'")
    try:
        r, c = int(head[2]), int(head[3])
    except ValueError:
        raise TransformError(f"{path}: malformed dimension header") from None
    if r != c or r < 1 or len(lines) - 1 != r:
        raise TransformError(f"{path}: expected a square {r} x {c} grid with {r} rows")
    mat = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if mat.shape != (r, c):
        raise TransformError(f"{path}: ragged rows")
    return mat
