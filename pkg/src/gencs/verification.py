"""Empirical checks of the recovery guarantees.

The RIP deviation of (1/sqrt(m)) S D F on a subspace U with orthonormal basis
Q is exact: with A = (1/sqrt(m)) d_sub * (F Q)[indices] and Gram A^* A having
eigenvalues l_min <= ... <= l_max,

    sup_{x in U, |x| = 1} | |A x| - 1 | = max(|sqrt(l_max) - 1|, |sqrt(l_min) - 1|).

On a cone covered by finitely many subspaces the sup is the max over those.
Random probing only ever gives lower bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coherence import (FIELDS, CoherenceVector, check_orthonormal, coherence_exact_pieces,
                        coherence_heuristic, orthonormal_basis, piece_span)
from .generative import ActivationPiece, GenerativeNetwork, enumerate_pieces, forward
from .recovery import (RecoveryConfig, error_bound_rhs, measure, minimize_latent, recover)
from .sampling import (Preconditioner, ProbabilityVector, SamplingPlan, build_preconditioner,
                       categorical, draw_plan, make_rng, mu, optimal_probabilities, sample_complexity)
from .transforms import UnitaryOperator, apply, rows

RIP_THRESHOLD = 1.0 / 3.0


class VerificationError(AssertionError):
    pass


@dataclass
class DeviationReport:
    sup_deviation: float
    samples: int
    deviations: list[float] = field(default_factory=list)
    threshold: float = RIP_THRESHOLD
    probe_estimate: float | None = None
    method: str = "gram"

    @property
    def passed(self) -> bool:
        return self.sup_deviation <= self.threshold


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def measurement_block(plan: SamplingPlan, precond: Preconditioner, op: UnitaryOperator,
                      basis: np.ndarray) -> np.ndarray:
    """A = (1/sqrt(m)) d_sub * (F Q)[indices], an m x r complex matrix."""
    fq = apply(op, np.asarray(basis).T).T
    return (precond.d_sub / math.sqrt(plan.m))[:, None] * fq[plan.indices]


def gram_deviation(a: np.ndarray, field: str = "complex") -> float:
    if a.shape[1] == 0:
        return 0.0
    g = a.conj().T @ a
    if field == "real":
        g = g.real
    elif field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}")
    lam = np.clip(np.linalg.eigvalsh(g), 0.0, None)
    return float(max(abs(math.sqrt(lam[-1]) - 1.0), abs(math.sqrt(lam[0]) - 1.0)))


def _random_unit(rng, k, count, field):
    u = rng.standard_normal((count, k))
    if field == "complex":
        u = u + 1j * rng.standard_normal((count, k))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def probe_deviation(a: np.ndarray, probes: int, seed: int, field: str = "complex",
                    sweeps: int = 400) -> tuple[float, float]:
    """Probe-based lower bound on the Gram deviation.

    Returns (raw, refined): the best of ``probes`` random unit directions, and
    that value after ``sweeps`` random plane rotations that push the quadratic
    form |A u|^2 up from the best high probe and down from the best low
    probe. The rotations solve each 2-D restriction in closed form; no
    eigendecomposition is used.
    """
    rng = np.random.default_rng(seed)
    k = a.shape[1]
    u = _random_unit(rng, k, probes, field)
    q = np.sum(np.abs(u @ a.T) ** 2, axis=1)
    raw = float(np.max(np.abs(np.sqrt(q) - 1.0)))

    def quad(x, y):
        return np.vdot(a @ x, a @ y)

    def polish(x, sign):
        for _ in range(sweeps):
            v = _random_unit(rng, k, 1, field)[0]
            v = v - np.vdot(x, v) * x
            nv = np.linalg.norm(v)
            if nv < 1e-12:
                continue
            v /= nv
            # restriction of |A u|^2 to span{x, v} is a 2x2 Hermitian form; take its extreme eigenvector
            qa, qb, qc = quad(x, x).real, quad(x, v), quad(v, v).real
            if field == "real":
                qb = qb.real
            tr, det = qa + qc, qa * qc - abs(qb) ** 2
            lam = tr / 2 + sign * math.sqrt(max(tr * tr / 4 - det, 0.0))
            if abs(qb) > 0.0:
                c = np.array([qb, lam - qa])
            else:
                c = np.array([1.0, 0.0]) if sign * (qa - qc) >= 0 else np.array([0.0, 1.0])
            cand = c[0] * x + c[1] * v
            cand /= np.linalg.norm(cand)
            if sign * (quad(cand, cand).real - qa) > 0:
                x = cand
        return x

    hi = polish(u[np.argmax(q)], +1.0)
    lo = polish(u[np.argmin(q)], -1.0)
    refined = max(abs(np.linalg.norm(a @ hi) - 1.0), abs(np.linalg.norm(a @ lo) - 1.0), raw)
    return raw, float(refined)


def rip_deviation_subspace(plan: SamplingPlan, precond: Preconditioner, op: UnitaryOperator, basis,
                           probes: int = 0, seed: int = 0, field: str = "complex") -> DeviationReport:
    """Exact deviation on a subspace from the Gram eigenvalues; optional probe cross-check."""
    q = check_orthonormal(basis)
    a = measurement_block(plan, precond, op, q)
    dev = gram_deviation(a, field)
    rep = DeviationReport(dev, plan.m, [dev])
    if probes:
        rep.probe_estimate = probe_deviation(a, probes, seed, field)[1]
    return rep


def pair_bases(pieces: Sequence[ActivationPiece]) -> list[np.ndarray]:
    """Orthonormal bases of span(C_i) + span(C_i') over all pairs i <= i'."""
    spans = [piece_span(pc) for pc in pieces]
    return [orthonormal_basis(np.hstack([spans[i], spans[j]]))
            for i in range(len(spans)) for j in range(i, len(spans))]


def cone_deviation_exact(plan: SamplingPlan, precond: Preconditioner, op: UnitaryOperator,
                         bases: Sequence[np.ndarray], field: str = "complex") -> float:
    scale = precond.d_sub / math.sqrt(plan.m)
    f_rows = rows(op, plan.indices) * scale[:, None]
    return max(gram_deviation(f_rows @ q, field) for q in bases)


def cone_deviation_probe(plan: SamplingPlan, precond: Preconditioner, op: UnitaryOperator,
                         net: GenerativeNetwork, probes: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = forward(net, rng.standard_normal((2 * probes, net.k)))
    diff = x[:probes] - x[probes:]
    nrm = np.linalg.norm(diff, axis=1)
    diff = diff[nrm > 0] / nrm[nrm > 0, None]
    if diff.shape[0] == 0:
        return 0.0
    y = apply(op, diff)[:, plan.indices] * (precond.d_sub / math.sqrt(plan.m))
    return float(np.max(np.abs(np.linalg.norm(y, axis=1) - 1.0)))


def rip_deviation_cone(plan: SamplingPlan, precond: Preconditioner, op: UnitaryOperator,
                       net: GenerativeNetwork, probes: int, seed: int,
                       pieces: Sequence[ActivationPiece] | None = None,
                       bases: Sequence[np.ndarray] | None = None,
                       field: str = "complex") -> DeviationReport:
    """Deviation over the expanded cone: exact from piece pairs when given, else a probe lower bound."""
    probe = cone_deviation_probe(plan, precond, op, net, probes, seed) if probes else None
    if bases is None and pieces is not None:
        bases = pair_bases(pieces)
    if bases is not None:
        dev = cone_deviation_exact(plan, precond, op, bases, field)
        return DeviationReport(dev, plan.m, [dev], probe_estimate=probe, method="pieces")
    if probe is None:
        raise ValueError("need probes > 0 when no pieces are supplied")
    return DeviationReport(probe, plan.m, [probe], probe_estimate=probe, method="probe")


@dataclass
class IsotropyReport:
    samples: int
    distance: float
    tolerance: float
    mu: float
    max_norm: float

    @property
    def passed(self) -> bool:
        return self.distance <= self.tolerance and self.max_norm <= self.mu + 1e-9


def isotropy_check(p: ProbabilityVector, op: UnitaryOperator, basis, samples: int, seed: int) -> IsotropyReport:
    """Empirical E[v v^*] for v = Q^* F^* D s, s ~ p; checks |v| <= mu on every draw.

    Raises VerificationError when any draw exceeds mu_U(F, p) + 1e-9.
    """
    q = check_orthonormal(basis)
    k = q.shape[1]
    # row j of (F Q) is f_j^* Q = (Q^* f_j)^*
    fq = apply(op, q.T).T
    alpha = np.sqrt(np.sum(np.abs(fq) ** 2, axis=1))
    mu_u = mu(alpha, p)
    idx = categorical(p, samples, make_rng(seed))
    if np.any(p.p[idx] == 0.0):
        raise VerificationError("drew a zero-probability row")
    v = fq[idx].conj() / np.sqrt(p.p[idx])[:, None]
    norms = np.linalg.norm(v, axis=1)
    if norms.max() > mu_u + 1e-9:
        raise VerificationError(f"|v| = {norms.max():.6g} exceeds mu = {mu_u:.6g}")
    mean = (v.T @ v.conj()) / samples
    dist = float(np.linalg.norm(mean - np.eye(k), 2))
    return IsotropyReport(samples, dist, 5.0 * math.sqrt(k / samples) * mu_u ** 2, mu_u, float(norms.max()))


def projection_onto_range(net: GenerativeNetwork, x0, config: RecoveryConfig = RecoveryConfig()):
    """Approximate proj onto range(G) by multi-restart minimization of |G(z) - x0|.

    Linear nets use the closed-form least-squares projection. Returns
    (x_proj, x_perp).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (net.n,):
        raise ValueError(f"signal length {x0.shape} does not match n={net.n}")
    if not np.any(x0):
        return np.zeros_like(x0), np.zeros_like(x0)
    if net.depth == 1:
        w = net.weights[0]
        z, *_ = np.linalg.lstsq(w, x0, rcond=None)
        x_proj = w @ z
        return x_proj, x0 - x_proj
    last = net.weights[-1]

    def evaluate(z):
        r = forward(net, z) - x0
        return float(r @ r)

    runs, best = minimize_latent(net, last.T @ last, last.T @ x0, float(x0 @ x0), config, evaluate)
    x_proj = forward(net, runs[best][0])
    return x_proj, x0 - x_proj


@dataclass
class Theorem1Report:
    m: int
    alpha_norm_sq: float
    coherence_method: str
    trials: int
    rip_passes: int
    deviations: list[float]
    wilson: tuple[float, float]
    target: float
    bound_checks: int = 0
    bound_failures: list = field(default_factory=list)
    skipped_bound_checks: int = 0

    @property
    def rip_ok(self) -> bool:
        # the pass rate is consistent with >= 1 - eps at 95% confidence
        return self.wilson[1] >= self.target

    @property
    def passed(self) -> bool:
        return self.rip_ok and not self.bound_failures


def theorem1_end_to_end(net: GenerativeNetwork, op: UnitaryOperator, C: float, eps: float, trials: int,
                        seed: int, alpha: CoherenceVector | None = None,
                        pieces: Sequence[ActivationPiece] | None = None, recoveries: int = 1,
                        config: RecoveryConfig | None = None, heuristic_batch: int = 500,
                        threshold: float = RIP_THRESHOLD) -> Theorem1Report:
    """Adapted sampling at the guaranteed m: RIP pass rate and the recovery bound on passing plans.

    Coherence comes from enumerated pieces when the net is small enough,
    otherwise from the sampling heuristic. Each passing plan gets
    ``recoveries`` in-range noiseless instances whose error must satisfy
    |x_hat - x0| <= 1.5 eps_hat.
    """
    if pieces is None and net.hidden_units <= 12:
        pieces = enumerate_pieces(net)
    if alpha is None:
        alpha = (coherence_exact_pieces(op, pieces) if pieces is not None
                 else coherence_heuristic(net, op, heuristic_batch, seed))
    p = optimal_probabilities(alpha)
    m = sample_complexity(alpha.norm ** 2, net.k, net.depth, net.n, eps, C)
    bases = pair_bases(pieces) if pieces is not None else None
    config = config or RecoveryConfig(preconditioned=True)
    devs, passes, checks, failures, skipped = [], 0, 0, [], 0
    for t in range(trials):
        plan = draw_plan(p, m, seed=int(make_rng(seed, t).integers(2 ** 62)))
        pc = build_preconditioner(plan)
        rep = rip_deviation_cone(plan, pc, op, net, probes=0 if bases is not None else 2000,
                                 seed=seed + t, bases=bases)
        rep.threshold = threshold
        devs.append(rep.sup_deviation)
        if not rep.passed:
            skipped += recoveries
            continue
        passes += 1
        for r in range(recoveries):
            z0 = make_rng(seed, t, r, 1).standard_normal(net.k)
            x0 = forward(net, z0)
            meas = measure(x0, plan, op)
            cfg = RecoveryConfig(**{**config.__dict__, "seed": seed + 1000 * t + r, "preconditioned": True})
            res = recover(net, meas, pc, cfg)
            rhs = error_bound_rhs(x0, np.zeros(net.n), plan, pc, op, np.zeros(m), res.eps_hat)
            err = float(np.linalg.norm(res.x_hat - x0))
            checks += 1
            if err > rhs:
                failures.append((t, r, err, rhs))
    return Theorem1Report(m, alpha.norm ** 2, alpha.method, trials, passes, devs,
                          wilson_interval(passes, trials), 1.0 - eps, checks, failures, skipped)


@dataclass
class CalibrationReport:
    C: float
    m: int
    pass_rate: float
    history: list = field(default_factory=list)


def rip_pass_rate(net: GenerativeNetwork, op: UnitaryOperator, p: ProbabilityVector, m: int, trials: int,
                  seed: int, bases=None, probes: int = 2000, threshold: float = RIP_THRESHOLD) -> tuple[int, list]:
    devs = []
    for t in range(trials):
        plan = draw_plan(p, m, seed=int(make_rng(seed, t).integers(2 ** 62)))
        pc = build_preconditioner(plan)
        rep = rip_deviation_cone(plan, pc, op, net, probes=0 if bases is not None else probes,
                                 seed=seed + t, bases=bases)
        devs.append(rep.sup_deviation)
    return sum(d <= threshold for d in devs), devs


def calibrate_constant(net: GenerativeNetwork, op: UnitaryOperator, eps: float, trials: int, seed: int,
                       target: float = 0.95, lo: float = 1e-3, hi: float = 4.0, steps: int = 12,
                       alpha: CoherenceVector | None = None, pieces: Sequence[ActivationPiece] | None = None,
                       threshold: float = RIP_THRESHOLD) -> CalibrationReport:
    """Bisect (in log C) for the smallest C whose adapted plans pass RIP at rate >= target.

    The pass rate is an empirical proportion on fixed seeds, so the result is
    an effective constant for this net and transform only.
    """
    if pieces is None and net.hidden_units <= 12:
        pieces = enumerate_pieces(net)
    if alpha is None:
        alpha = (coherence_exact_pieces(op, pieces) if pieces is not None
                 else coherence_heuristic(net, op, 500, seed))
    p = optimal_probabilities(alpha)
    bases = pair_bases(pieces) if pieces is not None else None
    norm_sq = alpha.norm ** 2
    history = []

    def rate(c):
        m = sample_complexity(norm_sq, net.k, net.depth, net.n, eps, c)
        passes, _ = rip_pass_rate(net, op, p, m, trials, seed, bases, threshold=threshold)
        history.append((c, m, passes / trials))
        return m, passes / trials

    m_hi, r_hi = rate(hi)
    if r_hi < target:
        raise VerificationError(f"even C={hi} reaches only {r_hi:.3f} RIP success")
    best = (hi, m_hi, r_hi)
    a, b = math.log(lo), math.log(hi)
    for _ in range(steps):
        mid = math.exp(0.5 * (a + b))
        m_mid, r_mid = rate(mid)
        if r_mid >= target:
            best, b = (mid, m_mid, r_mid), math.log(mid)
        else:
            a = math.log(mid)
    return CalibrationReport(best[0], best[1], best[2], history)
