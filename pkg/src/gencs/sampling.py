"""Sampling distributions over the rows of F, sampling plans, and preconditioners."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SUM_TOL = 1e-12
FILE_SUM_TOL = 1e-9
_TINY = np.finfo(np.float64).tiny


class SamplingError(ValueError):
    pass


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProbabilityVector:
    p: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p)
        if p.ndim != 1 or p.size == 0:
            raise SamplingError("probability vector must be a nonempty 1-D array")
        if not np.all(np.isfinite(p)) or p.min() < 0.0:
            raise SamplingError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise SamplingError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class SamplingPlan:
    """m row indices (0-based) drawn i.i.d. from ``p``; row i of S is e_{indices[i]}."""

    indices: np.ndarray
    p: ProbabilityVector
    seed: int | None = None

    def __post_init__(self):
        idx = _frozen(self.indices, np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise SamplingError("a plan needs at least one index")
        if idx.min() < 0 or idx.max() >= self.p.n:
            raise SamplingError(f"plan index out of range [0, {self.p.n})")
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return self.indices.size

    @property
    def n(self) -> int:
        return self.p.n

    def matrix(self) -> np.ndarray:
        """Dense S, for oracles and small checks."""
        s = np.zeros((self.m, self.n))
        s[np.arange(self.m), self.indices] = 1.0
        return s


@dataclass(frozen=True)
class Preconditioner:
    d_full: np.ndarray = field(repr=False)
    d_sub: np.ndarray = field(repr=False)


def uniform(n: int) -> ProbabilityVector:
    return ProbabilityVector(np.full(n, 1.0 / n))


def normalize(weights) -> ProbabilityVector:
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if not total > 0.0:
        raise SamplingError("weights must have positive sum")
    return ProbabilityVector(w / total)


def optimal_probabilities(alpha) -> ProbabilityVector:
    """p*_j = alpha_j^2 / ||alpha||_2^2, the minimizer of mu over the simplex."""
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=np.float64)
    top = a.max(initial=0.0)
    if not top > 0.0:
        raise SamplingError("coherence vector is identically zero")
    sq = (a / top) ** 2
    p = sq / sq.sum()
    # alpha_j^2 can underflow to 0 while alpha_j > 0, which would make mu infinite;
    # the floor keeps alpha_j / sqrt(p_j) below ||alpha|| and moves the sum by < n * 2.3e-308
    p[(a > 0.0) & (p < _TINY)] = _TINY
    return ProbabilityVector(p)


def mu(alpha, p) -> float:
    """max_j alpha_j / sqrt(p_j), with 0/0 = 0 and positive/0 = inf."""
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=np.float64)
    pv = np.asarray(getattr(p, "p", p), dtype=np.float64)
    if a.shape != pv.shape:
        raise SamplingError(f"length mismatch: alpha {a.shape}, p {pv.shape}")
    pos = pv > 0.0
    if np.any(a[~pos] > 0.0):
        return math.inf
    if not pos.any():
        return 0.0
    return float(np.max(a[pos] / np.sqrt(pv[pos])))


def random_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet(1, ..., 1) via normalized exponentials."""
    e = rng.standard_exponential(n)
    return e / e.sum()


@dataclass
class OptimalityReport:
    trials: int
    mu_star: float
    alpha_norm: float
    violations: list = field(default_factory=list)
    min_gap: float = math.inf

    @property
    def ok(self) -> bool:
        return not self.violations and abs(self.mu_star - self.alpha_norm) <= 1e-12 * max(1.0, self.alpha_norm)


def verify_p_star_optimality(alpha, trials: int, seed: int) -> OptimalityReport:
    """Check mu(alpha, p) >= mu(alpha, p*) on ``trials`` random simplex points."""
    if trials < 1:
        raise SamplingError("trials must be >= 1")
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=np.float64)
    mu_star = mu(a, optimal_probabilities(a))
    rep = OptimalityReport(trials, mu_star, float(np.linalg.norm(a)))
    rng = np.random.default_rng(seed)
    for t in range(trials):
        p = random_simplex(a.size, rng)
        val = mu(a, p)
        gap = val - mu_star
        rep.min_gap = min(rep.min_gap, gap)
        if gap < -1e-12:
            rep.violations.append((t, val))
    return rep


def cdf_table(p: ProbabilityVector) -> np.ndarray:
    """Prefix sums with the last entry pinned to exactly 1.0."""
    cdf = np.cumsum(p.p)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return cdf


def categorical(p: ProbabilityVector, m: int, rng: np.random.Generator) -> np.ndarray:
    # u in (0, 1]; the first index whose cumulative value reaches u never has p = 0
    u = 1.0 - rng.random(m)
    return np.searchsorted(cdf_table(p), u, side="left").astype(np.int64)


def make_rng(seed, *key: int) -> np.random.Generator:
    """Counter-based stream for (seed, *key); distinct keys give independent streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def draw_plan(p: ProbabilityVector, m: int, seed: int) -> SamplingPlan:
    """m i.i.d. row draws from p, with replacement."""
    if m < 1:
        raise SamplingError(f"m must be >= 1, got {m}")
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(p)
    return SamplingPlan(categorical(p, m, make_rng(seed)), p, seed)


def draw_blocked_plan(p: ProbabilityVector, m_per_block: int, blocks: int, seed: int) -> SamplingPlan:
    """Draw ``m_per_block`` rows independently inside each of ``blocks`` equal index blocks.

    Channel-wise sampling; this is block sampling and falls outside the i.i.d.
    row model the guarantees assume.
    """
    if p.n % blocks:
        raise SamplingError(f"n={p.n} is not divisible into {blocks} blocks")
    size = p.n // blocks
    parts = []
    for b in range(blocks):
        sub = normalize(p.p[b * size:(b + 1) * size])
        parts.append(b * size + categorical(sub, m_per_block, make_rng(seed, b)))
    return SamplingPlan(np.concatenate(parts), p, seed)


def build_preconditioner(plan: SamplingPlan) -> Preconditioner:
    """D = diag(1/sqrt(p)) (0 where p = 0) and its sampled diagonal S diag(D)."""
    p = plan.p.p
    d_full = np.zeros_like(p)
    pos = p > 0.0
    d_full[pos] = 1.0 / np.sqrt(p[pos])
    if not np.all(pos[plan.indices]):
        bad = int(plan.indices[~pos[plan.indices]][0])
        raise SamplingError(f"plan samples row {bad}, which has probability 0")
    d_sub = d_full[plan.indices]
    return Preconditioner(_frozen(d_full), _frozen(d_sub))


def sample_complexity(alpha_norm_sq: float, k: int, d: int, n: int, eps: float, C: float = 1.0) -> int:
    """ceil(C ||alpha||^2 (k d ln(n/k) + ln(2/eps))).

    Pass mu(alpha, p)^2 as ``alpha_norm_sq`` for a non-adapted p.
    """
    if not 0.0 < eps < 1.0:
        raise SamplingError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < k < n:
        raise SamplingError(f"need 0 < k < n, got k={k}, n={n}")
    if d < 1 or C <= 0.0 or alpha_norm_sq <= 0.0 or not math.isfinite(alpha_norm_sq):
        raise SamplingError("d, C and alpha_norm_sq must be positive and finite")
    return int(math.ceil(C * alpha_norm_sq * (k * d * math.log(n / k) + math.log(2.0 / eps))))


def save_probabilities(p: ProbabilityVector, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,p\n")
        for j, v in enumerate(p.p, start=1):
            fh.write(f"{j},{v:.17g}\n")


def load_probabilities(path) -> ProbabilityVector:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "index,p":
            raise SamplingError(f"{path}: expected header 'index,p'")
        try:
            vals = [float(line.split(",")[1]) for line in fh if line.strip()]
        except (IndexError, ValueError):
            raise SamplingError(f"{path}: malformed row") from None
    total = math.fsum(vals)
    if not vals or abs(total - 1.0) > FILE_SUM_TOL:
        raise SamplingError(f"{path}: probabilities sum to {total!r}, not 1")
    # absorb the rounding left by 17-digit text
    return normalize(vals)


def save_plan(plan: SamplingPlan, path) -> None:
    with open(path, "w") as fh:
        fh.write("i,index\n")
        for i, j in enumerate(plan.indices, start=1):
            fh.write(f"{i},{j + 1}\n")


def load_plan(path, p: ProbabilityVector) -> SamplingPlan:
    with open(path) as fh:
        if fh.readline().strip() != "i,index":
            raise SamplingError(f"{path}: expected header 'i,index'")
        idx = [int(line.split(",")[1]) - 1 for line in fh if line.strip()]
    return SamplingPlan(np.array(idx), p)
