"""(k, d, n) ReLU generative networks.

A network maps a latent code z in R^k through d affine-free layers,

    G(z) = W_d relu(... W_2 relu(W_1 z)),

with no activation after the last layer. Its range is a finite union of
polyhedral cones, one per feasible activation pattern; ``enumerate_pieces``
lists them on small nets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

MAX_EXHAUSTIVE_UNITS = 24
PIECE_MARGIN = 1e-9


class NetworkError(ValueError):
    pass


def validate_widths(widths: Sequence[int], n: int | None = None) -> tuple[int, ...]:
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise NetworkError(f"need at least two widths (d >= 1), got {widths}")
    if widths[0] < 2:
        raise NetworkError(f"latent dimension must be >= 2, got {widths[0]}")
    if any(w < widths[0] for w in widths[1:]):
        raise NetworkError(f"every width must be >= k={widths[0]}, got {widths}")
    if n is not None and widths[-1] != n:
        raise NetworkError(f"output width {widths[-1]} != declared n={n}")
    return widths


@dataclass(frozen=True)
class GenerativeNetwork:
    widths: tuple[int, ...]
    weights: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        widths = validate_widths(self.widths)
        if len(self.weights) != len(widths) - 1:
            raise NetworkError(f"{len(widths) - 1} layers declared, {len(self.weights)} weight matrices given")
        frozen = []
        for i, w in enumerate(self.weights):
            w = np.array(w, dtype=np.float64)
            if w.shape != (widths[i + 1], widths[i]):
                raise NetworkError(
                    f"layer {i + 1}: expected shape {(widths[i + 1], widths[i])}, got {w.shape}"
                )
            w.setflags(write=False)
            frozen.append(w)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "weights", tuple(frozen))

    @classmethod
    def from_weights(cls, weights: Sequence[np.ndarray]) -> "GenerativeNetwork":
        weights = [np.asarray(w, dtype=np.float64) for w in weights]
        if not weights:
            raise NetworkError("no weight matrices")
        widths = [weights[0].shape[1]] + [w.shape[0] for w in weights]
        return cls(tuple(widths), tuple(weights))

    @property
    def k(self) -> int:
        return self.widths[0]

    @property
    def n(self) -> int:
        return self.widths[-1]

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def hidden_units(self) -> int:
        return sum(self.widths[1:-1])

    def __call__(self, z):
        return forward(self, z)


@dataclass(frozen=True)
class ActivationPiece:
    """One linear piece of G: an activation pattern, its linear map, and an interior latent point."""

    pattern: tuple[int, ...]
    effective_map: np.ndarray = field(repr=False)
    witness: np.ndarray = field(repr=False)


def _check_latent(net: GenerativeNetwork, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1:] != (net.k,) or z.ndim > 2:
        raise NetworkError(f"latent code must have trailing dimension k={net.k}, got shape {z.shape}")
    return z


def forward(net: GenerativeNetwork, z) -> np.ndarray:
    """Evaluate G at one code (shape (k,)) or a batch (shape (B, k))."""
    z = _check_latent(net, z)
    h = z.T
    for w in net.weights[:-1]:
        h = np.maximum(w @ h, 0.0)
    return (net.weights[-1] @ h).T


def latent_gradient(net: GenerativeNetwork, z, cotangent) -> np.ndarray:
    """Vector-Jacobian product J(z)^T c, using relu'(0) = 0."""
    z = _check_latent(net, z)
    if z.ndim != 1:
        raise NetworkError("latent_gradient takes a single code")
    cotangent = np.asarray(cotangent, dtype=np.float64)
    if cotangent.shape != (net.n,):
        raise NetworkError(f"cotangent must have length n={net.n}, got shape {cotangent.shape}")
    masks = []
    h = z
    for w in net.weights[:-1]:
        pre = w @ h
        masks.append(pre > 0.0)
        h = np.where(masks[-1], pre, 0.0)
    g = net.weights[-1].T @ cotangent
    for w, mask in zip(reversed(net.weights[:-1]), reversed(masks)):
        g = w.T @ np.where(mask, g, 0.0)
    return g


def activation_pattern(net: GenerativeNetwork, z) -> tuple[int, ...]:
    z = _check_latent(net, z)
    bits = []
    h = z
    for w in net.weights[:-1]:
        pre = w @ h
        on = pre > 0.0
        bits.extend(int(b) for b in on)
        h = np.where(on, pre, 0.0)
    return tuple(bits)


def _split_pattern(net: GenerativeNetwork, pattern: Sequence[int]) -> list[np.ndarray]:
    out, pos = [], 0
    for width in net.widths[1:-1]:
        out.append(np.asarray(pattern[pos:pos + width], dtype=bool))
        pos += width
    return out


def effective_map(net: GenerativeNetwork, pattern: Sequence[int]) -> np.ndarray:
    """The n x k matrix that G equals on the piece with this activation pattern."""
    if len(pattern) != net.hidden_units:
        raise NetworkError(f"pattern has {len(pattern)} bits, net has {net.hidden_units} hidden units")
    a = net.weights[0]
    for w, mask in zip(net.weights[1:], _split_pattern(net, pattern)):
        a = w @ (a * mask[:, None])
    return np.array(a)


def random_gaussian_init(widths: Sequence[int], seed: int, n: int | None = None) -> GenerativeNetwork:
    """I.i.d. N(0, 1/k_{i-1}) weights in every layer."""
    widths = validate_widths(widths, n)
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((widths[i + 1], widths[i])) / math.sqrt(widths[i])
               for i in range(len(widths) - 1)]
    return GenerativeNetwork(widths, tuple(weights))


def piece_count_bound(widths: Sequence[int]) -> float:
    """Natural-log upper bound k(d-1) ln(2e kbar / k) on the number of pieces."""
    widths = validate_widths(widths)
    k, d = widths[0], len(widths) - 1
    if d == 1:
        return 0.0
    kbar = math.exp(sum(math.log(w) for w in widths[1:d]) / (d - 1))
    return k * (d - 1) * math.log(2.0 * math.e * kbar / k)


def _max_margin(rows: np.ndarray, k: int) -> tuple[float, np.ndarray]:
    """Largest t with rows @ z >= t, |z_i| <= 1, t <= 1. Rows must be unit norm."""
    c = np.zeros(k + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-rows, np.ones((rows.shape[0], 1))])
    b_ub = np.zeros(rows.shape[0])
    bounds = [(-1.0, 1.0)] * k + [(None, 1.0)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return -math.inf, np.zeros(k)
    return -res.fun, res.x[:k]


def _enumerate_exhaustive(net: GenerativeNetwork, budget: int) -> list[tuple[tuple[int, ...], np.ndarray]]:
    k = net.k
    hidden = list(net.widths[1:-1])
    found: list[tuple[tuple[int, ...], np.ndarray]] = []

    # depth-first over hidden units in layer order; each node carries an interior witness
    def visit(layer, unit, pre_map, bits, rows, witness, margin):
        if layer == len(hidden):
            if len(found) >= budget:
                raise NetworkError(
                    f"exhaustive enumeration exceeded budget={budget} pieces; use mode='sampling'"
                )
            found.append((tuple(bits), witness))
            return
        if unit == hidden[layer]:
            mask = np.asarray(bits[len(bits) - hidden[layer]:], dtype=bool)
            nxt = net.weights[layer + 1] @ (pre_map * mask[:, None]) if layer + 1 < len(hidden) else None
            visit(layer + 1, 0, nxt, bits, rows, witness, margin)
            return
        a = pre_map[unit]
        norm = np.linalg.norm(a)
        if norm == 0.0:
            # identically zero pre-activation sits on the kink: relu'(0) = 0 makes it inactive
            visit(layer, unit + 1, pre_map, bits + [0], rows, witness, margin)
            return
        a = a / norm
        value = float(a @ witness)
        for bit in (0, 1):
            row = a if bit else -a
            signed = value if bit else -value
            new_rows = rows + [row]
            if signed > PIECE_MARGIN:
                child_witness, child_margin = witness, min(margin, signed)
            else:
                child_margin, child_witness = _max_margin(np.array(new_rows), k)
                if child_margin <= PIECE_MARGIN:
                    continue
            visit(layer, unit + 1, pre_map, bits + [bit], new_rows, child_witness, child_margin)

    if not hidden:
        return [((), np.ones(k) / math.sqrt(k))]
    start = np.zeros(k)
    start[0] = 1.0
    visit(0, 0, np.array(net.weights[0]), [], [], start, 1.0)
    return found


def enumerate_pieces(net: GenerativeNetwork, budget: int = 1 << 16, mode: str = "exhaustive",
                     seed: int = 0) -> list[ActivationPiece]:
    """List the linear pieces of ``net``, sorted by pattern bits.

    ``mode="exhaustive"`` certifies every nonempty pattern with a small LP and
    raises once more than ``budget`` pieces turn up. ``mode="sampling"`` probes
    ``budget`` Gaussian latent codes and keeps the distinct patterns hit.
    """
    if mode == "exhaustive":
        if net.hidden_units > MAX_EXHAUSTIVE_UNITS:
            raise NetworkError(
                f"{net.hidden_units} hidden units exceeds the exhaustive cap of "
                f"{MAX_EXHAUSTIVE_UNITS}; use mode='sampling'"
            )
        raw = _enumerate_exhaustive(net, budget)
    elif mode == "sampling":
        rng = np.random.default_rng(seed)
        probes = rng.standard_normal((budget, net.k))
        seen: dict[tuple[int, ...], np.ndarray] = {}
        for z in probes:
            seen.setdefault(activation_pattern(net, z), z)
        raw = list(seen.items())
    else:
        raise ValueError(f"unknown mode {mode!r}")
    pieces = []
    for pattern, witness in sorted(raw, key=lambda item: item[0]):
        witness = np.array(witness, dtype=np.float64)
        witness.setflags(write=False)
        emap = effective_map(net, pattern)
        emap.setflags(write=False)
        pieces.append(ActivationPiece(pattern, emap, witness))
    return pieces


def low_frequency_net(n: int, k: int, hidden: int, seed: int, frequencies: int = 3,
                      nyquist: bool = True) -> GenerativeNetwork:
    """Two-layer net whose range sits inside a low-frequency real DFT subspace.

    The subspace is spanned by the real and imaginary parts of the DFT
    frequencies 0..``frequencies`` (plus the Nyquist row when ``nyquist``),
    so the prior is coherent with at most 2*frequencies + 2 DFT rows.
    """
    grid = np.arange(n)
    cols = [np.ones(n)]
    for f in range(1, frequencies + 1):
        cols.append(np.cos(2 * np.pi * f * grid / n))
        cols.append(np.sin(2 * np.pi * f * grid / n))
    if nyquist and n % 2 == 0:
        cols.append(np.cos(np.pi * grid))
    basis = np.stack(cols, axis=1)
    basis /= np.linalg.norm(basis, axis=0)
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((hidden, k)) / math.sqrt(k)
    mix = rng.standard_normal((basis.shape[1], hidden)) / math.sqrt(hidden)
    return GenerativeNetwork((k, hidden, n), (w1, basis @ mix))


def save_net(net: GenerativeNetwork, path) -> None:
    lines = ["GCSNET 1", " ".join(str(v) for v in (net.depth, *net.widths))]
    for w in net.weights:
        lines.extend(" ".join(f"{x:.17g}" for x in row) for row in w)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_net(path) -> GenerativeNetwork:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].split() != ["GCSNET", "1"]:
        raise NetworkError(f"{path}: missing 'GCSNET 1' header")
    try:
        header = [int(tok) for tok in lines[1].split()]
    except (IndexError, ValueError):
        raise NetworkError(f"{path}: malformed dimension header") from None
    if not header or header[0] < 1 or len(header) != header[0] + 2:
        raise NetworkError(f"{path}: dimension header must be 'd k0 ... kd', got {lines[1]!r}")
    widths = validate_widths(header[1:])
    body = lines[2:]
    expected = sum(widths[1:])
    if len(body) != expected:
        raise NetworkError(f"{path}: expected {expected} weight rows, found {len(body)}")
    weights, pos = [], 0
    for i in range(len(widths) - 1):
        rows = []
        for ln in body[pos:pos + widths[i + 1]]:
            vals = [float(tok) for tok in ln.split()]
            if len(vals) != widths[i]:
                raise NetworkError(f"{path}: layer {i + 1} row has {len(vals)} entries, expected {widths[i]}")
            rows.append(vals)
        pos += widths[i + 1]
        weights.append(np.array(rows))
    return GenerativeNetwork(widths, tuple(weights))
