"""Measurements b = (1/sqrt(m)) S F x0 + eta and latent-space recovery.

Objectives are written in terms of the sampled, optionally preconditioned
residual

    r(z) = (1/sqrt(m)) w * (F G(z))[indices] - w * b,

with w = d_sub (preconditioned) or w = 1. Optimization minimizes ||r||^2;
the recovery bound is stated with ||r|| for w = d_sub.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._pool import pmap
from .generative import GenerativeNetwork, forward, latent_gradient
from .sampling import Preconditioner, SamplingPlan, make_rng
from .transforms import UnitaryOperator, adjoint_apply, apply

SUCCESS_RRE = 3e-3


class RecoveryError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementSet:
    b: np.ndarray = field(repr=False)
    plan: SamplingPlan
    op: UnitaryOperator
    noise: np.ndarray = field(repr=False)
    scaled: bool = True

    @property
    def m(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class RecoveryConfig:
    restarts: int = 4
    iterations: int = 20000
    lr: float = 0.003
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    preconditioned: bool = False
    seed: int = 0
    tol: float = 0.0
    threads: int | None = 1

    def __post_init__(self):
        if self.restarts < 1 or self.iterations < 1:
            raise RecoveryError("restarts and iterations must be >= 1")
        if not self.lr > 0.0:
            raise RecoveryError("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise RecoveryError("beta1 and beta2 must lie in [0, 1)")
        if self.weight_decay < 0.0 or self.tol < 0.0:
            raise RecoveryError("weight_decay and tol must be nonnegative")


@dataclass
class RecoveryResult:
    z_hat: np.ndarray
    x_hat: np.ndarray
    objectives: list[float]
    best_restart: int
    objective: float
    eps_hat: float
    iterations: list[int]
    rre: float | None = None


def measure(x0, plan: SamplingPlan, op: UnitaryOperator, eta=None, noise_level: float = 0.0,
            seed: int | None = None) -> MeasurementSet:
    """b_i = (Fx0)_{indices[i]} / sqrt(m) + eta_i.

    Without an explicit ``eta``, noise is circular complex Gaussian with
    E|eta_i|^2 = noise_level^2 (zero when noise_level is 0).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (op.n,):
        raise RecoveryError(f"signal length {x0.shape} does not match n={op.n}")
    if plan.n != op.n:
        raise RecoveryError(f"plan is over n={plan.n}, operator has n={op.n}")
    m = plan.m
    if eta is None:
        eta = np.zeros(m, dtype=np.complex128)
        if noise_level > 0.0:
            rng = make_rng(0 if seed is None else seed, 7)
            eta = noise_level / math.sqrt(2.0) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    eta = np.asarray(eta, dtype=np.complex128)
    if eta.shape != (m,):
        raise RecoveryError(f"noise length {eta.shape} does not match m={m}")
    b = apply(op, x0)[plan.indices] / math.sqrt(m) + eta
    b.setflags(write=False)
    eta.setflags(write=False)
    return MeasurementSet(b, plan, op, eta)


def _weights(meas: MeasurementSet, precond: Preconditioner | None, preconditioned: bool) -> np.ndarray:
    if not preconditioned:
        return np.ones(meas.m)
    if precond is None:
        raise RecoveryError("preconditioned objective needs a Preconditioner")
    if precond.d_sub.shape != (meas.m,):
        raise RecoveryError(f"preconditioner has {precond.d_sub.size} entries, m={meas.m}")
    return precond.d_sub


def residual(x, meas: MeasurementSet, precond: Preconditioner | None, preconditioned: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (meas.op.n,):
        raise RecoveryError(f"signal length {x.shape} does not match n={meas.op.n}")
    w = _weights(meas, precond, preconditioned)
    y = apply(meas.op, x)[meas.plan.indices]
    return w * y / math.sqrt(meas.m) - w * meas.b


def objective(z, net: GenerativeNetwork, meas: MeasurementSet, precond: Preconditioner | None = None,
              preconditioned: bool = True, squared: bool = False) -> float:
    r = residual(forward(net, z), meas, precond, preconditioned)
    val = float(np.vdot(r, r).real)
    return val if squared else math.sqrt(val)


def objective_gradient(z, net: GenerativeNetwork, meas: MeasurementSet,
                       precond: Preconditioner | None = None, preconditioned: bool = True) -> np.ndarray:
    """Gradient in z of the squared objective (complex residual taken as real pairs)."""
    r = residual(forward(net, z), meas, precond, preconditioned)
    w = _weights(meas, precond, preconditioned)
    u = np.zeros(meas.op.n, dtype=np.complex128)
    np.add.at(u, meas.plan.indices, w * r / math.sqrt(meas.m))
    grad_x = 2.0 * adjoint_apply(meas.op, u).real
    return latent_gradient(net, z, grad_x)


def collapsed_problem(net: GenerativeNetwork, meas: MeasurementSet, precond: Preconditioner | None,
                      preconditioned: bool) -> tuple[np.ndarray, np.ndarray, float]:
    """Gram form (M, c, r) of the squared objective in the last hidden activation."""
    w = _weights(meas, precond, preconditioned)
    last = net.weights[-1]
    f_last = apply(meas.op, last.T).T  # n x k_{d-1}
    k_c = (w / math.sqrt(meas.m))[:, None] * f_last[meas.plan.indices]
    t = w * meas.b
    k_r = np.vstack([k_c.real, k_c.imag])
    t_r = np.concatenate([t.real, t.imag])
    return k_r.T @ k_r, k_r.T @ t_r, float(t_r @ t_r)


def minimize_latent(net: GenerativeNetwork, gram, lin, const, config: RecoveryConfig, evaluate):
    """Multi-restart Adam(W) on a collapsed objective; best restart by (value, index)."""
    hidden = list(net.weights[:-1])

    def run(restart):
        z0 = make_rng(config.seed, restart).standard_normal(net.k)
        z, steps = kernels.adam_latent(hidden, gram, lin, const, z0, lr=config.lr, beta1=config.beta1,
                                       beta2=config.beta2, weight_decay=config.weight_decay,
                                       iterations=config.iterations, tol=config.tol)
        return z, evaluate(z), steps

    runs = pmap(run, range(config.restarts), threads=config.threads)
    best = min(range(config.restarts), key=lambda i: (runs[i][1], i))
    return runs, best


def recover(net: GenerativeNetwork, meas: MeasurementSet, precond: Preconditioner | None,
            config: RecoveryConfig = RecoveryConfig()) -> RecoveryResult:
    """Minimize the squared objective over the latent space from ``restarts`` Gaussian starts."""
    if meas.op.n != net.n:
        raise RecoveryError(f"network n={net.n} does not match operator n={meas.op.n}")
    gram, lin, const = collapsed_problem(net, meas, precond, config.preconditioned)

    def evaluate(z):
        return objective(z, net, meas, precond, config.preconditioned, squared=True)

    runs, best = minimize_latent(net, gram, lin, const, config, evaluate)
    z_hat = runs[best][0]
    x_hat = forward(net, z_hat)
    eps_hat = (objective(z_hat, net, meas, precond, True) if precond is not None
               else math.sqrt(runs[best][1]))
    return RecoveryResult(z_hat=z_hat, x_hat=x_hat, objectives=[r[1] for r in runs], best_restart=best,
                          objective=runs[best][1], eps_hat=eps_hat, iterations=[r[2] for r in runs])


def rre(x0, x_hat) -> float:
    x0 = np.asarray(x0, dtype=np.float64)
    nrm = np.linalg.norm(x0)
    if nrm == 0.0:
        raise RecoveryError("relative error is undefined for x0 = 0")
    return float(np.linalg.norm(x0 - np.asarray(x_hat)) / nrm)


def error_bound_rhs(x0, x_perp, plan: SamplingPlan, precond: Preconditioner, op: UnitaryOperator,
                    eta, eps_hat: float) -> float:
    """||x_perp|| + 3/sqrt(m) ||S D F x_perp|| + 3 ||D~ eta|| + 1.5 eps_hat."""
    x0 = np.asarray(x0, dtype=np.float64)
    x_perp = np.asarray(x_perp, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.complex128)
    if x0.shape != (op.n,) or x_perp.shape != (op.n,):
        raise RecoveryError("x0 and x_perp must have length n")
    if eta.shape != (plan.m,) or precond.d_sub.shape != (plan.m,):
        raise RecoveryError("eta and the preconditioner must have length m")
    sdf = precond.d_sub * apply(op, x_perp)[plan.indices]
    return float(np.linalg.norm(x_perp) + 3.0 / math.sqrt(plan.m) * np.linalg.norm(sdf)
                 + 3.0 * np.linalg.norm(precond.d_sub * eta) + 1.5 * eps_hat)


def save_measurements(meas: MeasurementSet, path) -> None:
    with open(path, "w") as fh:
        fh.write("i,index,re,im\n")
        for i, (j, v) in enumerate(zip(meas.plan.indices, meas.b), start=1):
            fh.write(f"{i},{j + 1},{v.real:.17g},{v.imag:.17g}\n")


def load_measurements(path, op: UnitaryOperator, p) -> MeasurementSet:
    idx, vals = [], []
    with open(path) as fh:
        if fh.readline().strip() != "i,index,re,im":
            raise RecoveryError(f"{path}: expected header 'i,index,re,im'")
        for line in fh:
            if not line.strip():
                continue
            _, j, re_, im_ = line.split(",")
            idx.append(int(j) - 1)
            vals.append(complex(float(re_), float(im_)))
    plan = SamplingPlan(np.array(idx), p)
    b = np.array(vals)
    b.setflags(write=False)
    return MeasurementSet(b, plan, op, np.zeros(len(vals), dtype=np.complex128))
