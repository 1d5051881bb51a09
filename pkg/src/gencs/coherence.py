"""Local coherences of F with respect to a generative prior.

alpha_j is the largest |<f_j, x>| over unit vectors x in the piecewise linear
expansion of T = range(G) - range(G). Subspace projections are taken in the
complexified sense, alpha_j = ||Q^* f_j||_2 for an orthonormal basis Q, which
is what the isotropy and boundedness arguments for the preconditioned
measurements use.

Pass ``field="real"`` to restrict the sup to real vectors instead; the two
agree for real F (identity, Hadamard, real dense) and for 1-D subspaces, and
differ by at most a factor sqrt(2) for complex rows.

Three estimators:

* ``coherence_exact_subspace`` - T is a known subspace.
* ``coherence_exact_pieces`` - T covered by pair sums of enumerated piece spans (toy nets).
* ``coherence_heuristic`` - max over normalized differences of sampled range points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .generative import ActivationPiece, GenerativeNetwork, activation_pattern, forward
from .transforms import UnitaryOperator, apply

RANK_CUTOFF = 1e-10


class CoherenceError(ValueError):
    pass


@dataclass(frozen=True)
class CoherenceVector:
    alpha: np.ndarray = field(repr=False)
    method: str = "exact_subspace"

    def __post_init__(self):
        a = np.array(self.alpha, dtype=np.float64)
        if a.ndim != 1 or a.min(initial=0.0) < 0.0:
            raise CoherenceError("alpha must be a nonnegative 1-D array")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.alpha))

    def __len__(self):
        return self.alpha.size


def orthonormal_basis(vectors, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Orthonormal basis of the column space, dropping singular values below cutoff * s_max."""
    a = np.asarray(vectors, dtype=np.float64)
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    return u[:, s > cutoff * s[0]]


def check_orthonormal(basis, tol: float = 1e-10) -> np.ndarray:
    b = np.asarray(basis)
    if b.ndim != 2:
        raise CoherenceError("basis must be an n x k array")
    err = np.abs(b.conj().T @ b - np.eye(b.shape[1])).max(initial=0.0)
    if err > tol:
        raise CoherenceError(f"basis columns are not orthonormal (max deviation {err:.3g})")
    return b


FIELDS = ("complex", "real")


def _row_norms_of_image(op: UnitaryOperator, basis: np.ndarray, field: str = "complex") -> np.ndarray:
    """sup over unit x in span(basis) of |<f_j, x>|, for every j.

    ``field="complex"`` lets x range over the complex span, giving
    ||Q^* f_j||_2. ``field="real"`` restricts x to real combinations of a
    real basis: the sup is then the top singular value of the r x 2 matrix
    [Q^T Re f_j, Q^T Im f_j].
    """
    if field not in FIELDS:
        raise CoherenceError(f"field must be one of {FIELDS}, got {field!r}")
    if basis.shape[1] == 0:
        return np.zeros(op.n)
    # (F Q)[j, :] = f_j^* Q
    fq = apply(op, basis.T)
    if field == "complex":
        return np.sqrt(np.sum(np.abs(fq) ** 2, axis=0))
    if np.iscomplexobj(basis) and np.abs(basis.imag).max() > 0.0:
        raise CoherenceError("field='real' needs a real basis")
    re, im = fq.real, fq.imag
    # eigenvalues of the 2x2 Gram [[re.re, re.im], [re.im, im.im]] per column
    a = np.sum(re * re, axis=0)
    b = np.sum(re * im, axis=0)
    c = np.sum(im * im, axis=0)
    top = 0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + b * b)
    return np.sqrt(top)


def coherence_exact_subspace(op: UnitaryOperator, basis, field: str = "complex") -> CoherenceVector:
    """alpha_j = ||Pi_U f_j||_2 for U spanned by the orthonormal columns of ``basis``."""
    b = check_orthonormal(basis)
    if b.shape[0] != op.n:
        raise CoherenceError(f"basis has {b.shape[0]} rows, operator has n={op.n}")
    alpha = np.minimum(_row_norms_of_image(op, b, field), 1.0)
    return CoherenceVector(alpha, "exact_subspace" if field == "complex" else "exact_subspace(real)")


def piece_span(piece: ActivationPiece, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Orthonormal basis of span(C_i).

    Pieces carry an interior witness, so their latent cones are full
    dimensional and span(C_i) is the column space of the effective map.
    """
    return orthonormal_basis(piece.effective_map, cutoff)


def coherence_exact_pieces(op: UnitaryOperator, pieces: Sequence[ActivationPiece],
                           cutoff: float = RANK_CUTOFF, field: str = "complex") -> CoherenceVector:
    """Max over piece pairs (i, i') of ||Pi_{span C_i + span C_i'} f_j||_2."""
    if not pieces:
        raise CoherenceError("no pieces given")
    spans = [piece_span(pc, cutoff) for pc in pieces]
    alpha = np.zeros(op.n)
    for i in range(len(spans)):
        for j in range(i, len(spans)):
            q = orthonormal_basis(np.hstack([spans[i], spans[j]]), cutoff)
            np.maximum(alpha, _row_norms_of_image(op, q, field), out=alpha)
    return CoherenceVector(np.minimum(alpha, 1.0), "exact_pieces" if field == "complex" else "exact_pieces(real)")


def latent_batch(net: GenerativeNetwork, batch: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((batch, net.k))


def coherence_heuristic(net: GenerativeNetwork, op: UnitaryOperator, batch: int, seed: int,
                        use_numba: bool | None = None) -> CoherenceVector:
    """Sampled estimate: max over pairs of |F (G(z_a) - G(z_b))| / ||G(z_a) - G(z_b)||.

    Pairs are streamed, so memory stays O(batch * n). A lower bound on the
    exact coherence.
    """
    if batch < 2:
        raise CoherenceError(f"batch must be >= 2, got {batch}")
    if op.n != net.n:
        raise CoherenceError(f"operator n={op.n} does not match network n={net.n}")
    x = forward(net, latent_batch(net, batch, seed))
    y = apply(op, x)
    alpha = kernels.pair_max(x, y, use_numba=use_numba)
    return CoherenceVector(np.minimum(alpha, 1.0), f"heuristic(B={batch},seed={seed})")


@dataclass
class ExpansionReport:
    samples: int
    unassigned: list = field(default_factory=list)
    difference_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.unassigned and not self.difference_violations


def _in_span(q: np.ndarray, x: np.ndarray, tol: float) -> bool:
    r = x - q @ (q.T @ x)
    return np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(x))


def piecewise_expansion_properties_check(net: GenerativeNetwork, pieces: Sequence[ActivationPiece],
                                         samples: int, seed: int, tol: float = 1e-8,
                                         extra_points=()) -> ExpansionReport:
    """Check that sampled range points lie in some piece span, and that
    differences of points from the same piece stay in that piece's span.

    ``extra_points`` are tested for membership too (used to confirm that
    outsiders get flagged).
    """
    spans = {pc.pattern: piece_span(pc) for pc in pieces}
    rep = ExpansionReport(samples)
    rng = np.random.default_rng(seed)
    last_by_piece: dict = {}
    for s in range(samples):
        z = rng.standard_normal(net.k)
        x = forward(net, z)
        pattern = activation_pattern(net, z)
        q = spans.get(pattern)
        if q is None or not _in_span(q, x, tol):
            if not any(_in_span(qq, x, tol) for qq in spans.values()):
                rep.unassigned.append(s)
            continue
        prev = last_by_piece.get(pattern)
        if prev is not None and not _in_span(q, x - prev, tol):
            rep.difference_violations.append(s)
        last_by_piece[pattern] = x
    for i, x in enumerate(extra_points):
        x = np.asarray(x, dtype=np.float64)
        if not any(_in_span(q, x, tol) for q in spans.values()):
            rep.unassigned.append(f"extra:{i}")
    return rep


def save_coherence(cv: CoherenceVector, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,alpha\n")
        for j, a in enumerate(cv.alpha, start=1):
            fh.write(f"{j},{a:.17g}\n")


def load_coherence(path) -> CoherenceVector:
    with open(path) as fh:
        if fh.readline().strip() != "index,alpha":
            raise CoherenceError(f"{path}: expected header 'index,alpha'")
        vals = [float(line.split(",")[1]) for line in fh if line.strip()]
    return CoherenceVector(np.array(vals), f"file:{path}")
