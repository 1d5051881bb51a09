"""Uniform-vs-adapted phase-transition sweeps.

Config files are line oriented::

    # comment
    net.widths = 4, 32, 256
    net.init = lowfreq
    transform = dft1d
    schemes = uniform, adapted
    m = 4, 8, ..., 256
    trials = 64

Keys are dot paths, values are scalars or comma lists. A list may end in a
geometric shorthand ``a, b, ..., z`` that keeps multiplying by b/a until it
reaches z exactly.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from statistics import mean, median

import numpy as np

from ._pool import pmap
from .coherence import CoherenceVector, coherence_heuristic, save_coherence
from .generative import GenerativeNetwork, forward, load_net, low_frequency_net, random_gaussian_init
from .recovery import SUCCESS_RRE, RecoveryConfig, measure, recover, rre
from .sampling import (ProbabilityVector, build_preconditioner, draw_blocked_plan, draw_plan,
                       load_probabilities, make_rng, optimal_probabilities, uniform)
from .transforms import UnitaryOperator, parse_transform

RESULT_FIELDS = ("trial", "scheme", "m", "rre", "objective", "eps_hat", "success")
ELLIPSES = ("...", "…")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    net_file: str | None = None
    net_init: str = "gaussian"
    net_widths: tuple[int, ...] = (4, 32, 64)
    net_seed: int = 0
    net_frequencies: int = 3
    transform: str = "dft1d"
    schemes: tuple[str, ...] = ("uniform", "adapted")
    m_grid: tuple[int, ...] = (8, 16, 32, 64)
    trials: int = 64
    noise: float = 0.0
    in_range: bool = True
    signal_file: str | None = None
    seed: int = 0
    output_dir: str = "results"
    coherence_batch: int = 500
    coherence_seed: int = 0
    blocks: int = 1
    recovery: RecoveryConfig = field(default_factory=RecoveryConfig)

    def __post_init__(self):
        if not self.m_grid:
            raise ConfigError("m grid is empty")
        if any(m < 1 for m in self.m_grid):
            raise ConfigError(f"every m must be >= 1, got {self.m_grid}")
        if list(self.m_grid) != sorted(set(self.m_grid)):
            raise ConfigError(f"m grid must be strictly ascending, got {self.m_grid}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.schemes:
            raise ConfigError("no sampling schemes")
        for s in self.schemes:
            if s not in ("uniform", "adapted") and not s.startswith("custom:"):
                raise ConfigError(f"unknown scheme {s!r}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("duplicate scheme")
        if self.net_init not in ("gaussian", "lowfreq"):
            raise ConfigError(f"net.init must be gaussian or lowfreq, got {self.net_init!r}")
        if not self.in_range and not self.signal_file:
            raise ConfigError("out-of-range experiments need signal.file")
        if self.noise < 0.0 or self.blocks < 1 or self.coherence_batch < 2:
            raise ConfigError("noise must be >= 0, blocks >= 1, coherence.batch >= 2")


def expand_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",")]
    if any(not t for t in items):
        raise ConfigError(f"empty list item in {text!r}")
    return items


def expand_int_grid(text: str) -> list[int]:
    """Parse an integer list, expanding a geometric ``a, b, ..., z`` tail."""
    items = expand_list(text)
    out: list[int] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if tok in ELLIPSES:
            if len(out) < 2 or i + 1 >= len(items):
                raise ConfigError(f"'...' needs two terms before it and one after: {text!r}")
            a, b = out[-2], out[-1]
            end = _int(items[i + 1])
            if a <= 0 or b % a or b // a < 2:
                raise ConfigError(f"shorthand needs an integer ratio >= 2, got {a}, {b}")
            ratio = b // a
            v = b
            while v < end:
                v *= ratio
                out.append(v)
            if v != end:
                raise ConfigError(f"{end} is not reached from {a}, {b} by ratio {ratio}")
            i += 2
            continue
        out.append(_int(tok))
        i += 1
    return out


def format_int_grid(values) -> str:
    """Inverse of ``expand_int_grid``; geometric runs of five or more become shorthand."""
    values = list(values)
    if len(values) >= 5 and values[0] > 0 and values[1] % values[0] == 0 and values[1] // values[0] >= 2:
        r = values[1] // values[0]
        if all(values[i + 1] == values[i] * r for i in range(len(values) - 1)):
            return f"{values[0]}, {values[1]}, ..., {values[-1]}"
    return ", ".join(str(v) for v in values)


def _int(tok: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ConfigError(f"expected an integer, got {tok!r}") from None


def _float(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"expected a number, got {tok!r}") from None


def _bool(tok: str) -> bool:
    low = tok.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {tok!r}")


# key -> (ExperimentConfig or RecoveryConfig field, parser)
_KEYS = {
    "net.file": ("net_file", str),
    "net.init": ("net_init", str),
    "net.widths": ("net_widths", lambda v: tuple(_int(t) for t in expand_list(v))),
    "net.seed": ("net_seed", _int),
    "net.frequencies": ("net_frequencies", _int),
    "transform": ("transform", str),
    "schemes": ("schemes", lambda v: tuple(expand_list(v))),
    "m": ("m_grid", lambda v: tuple(expand_int_grid(v))),
    "trials": ("trials", _int),
    "noise": ("noise", _float),
    "signal.in_range": ("in_range", _bool),
    "signal.file": ("signal_file", str),
    "seed": ("seed", _int),
    "output.dir": ("output_dir", str),
    "coherence.batch": ("coherence_batch", _int),
    "coherence.seed": ("coherence_seed", _int),
    "sampling.blocks": ("blocks", _int),
}
_RECOVERY_KEYS = {
    "recovery.restarts": ("restarts", _int),
    "recovery.iterations": ("iterations", _int),
    "recovery.lr": ("lr", _float),
    "recovery.beta1": ("beta1", _float),
    "recovery.beta2": ("beta2", _float),
    "recovery.weight_decay": ("weight_decay", _float),
    "recovery.preconditioned": ("preconditioned", _bool),
    "recovery.seed": ("seed", _int),
    "recovery.tol": ("tol", _float),
}


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values, rec_values, seen = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, val = (s.strip() for s in line.partition("="))
        if not key or not val:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        try:
            if key in _KEYS:
                name, parse = _KEYS[key]
                values[name] = parse(val)
            elif key in _RECOVERY_KEYS:
                name, parse = _RECOVERY_KEYS[key]
                rec_values[name] = parse(val)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    try:
        return ExperimentConfig(recovery=RecoveryConfig(**rec_values), **values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), str(path))


def load_vectors(path) -> np.ndarray:
    """One vector per line, whitespace separated."""
    with open(path) as fh:
        rows_ = [[float(t) for t in ln.split()] for ln in fh if ln.strip()]
    if not rows_ or len({len(r) for r in rows_}) != 1:
        raise ConfigError(f"{path}: vectors must be nonempty lines of equal length")
    return np.array(rows_)


def save_vectors(vectors, path) -> None:
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    with open(path, "w") as fh:
        for v in vectors:
            fh.write(" ".join(f"{x:.17g}" for x in v) + "\n")


def build_network(cfg: ExperimentConfig) -> GenerativeNetwork:
    if cfg.net_file:
        return load_net(cfg.net_file)
    if cfg.net_init == "lowfreq":
        if len(cfg.net_widths) != 3:
            raise ConfigError("lowfreq nets take net.widths = k, hidden, n")
        k, hidden, n = cfg.net_widths
        return low_frequency_net(n, k, hidden, cfg.net_seed, cfg.net_frequencies)
    return random_gaussian_init(cfg.net_widths, cfg.net_seed)


@dataclass
class Prepared:
    net: GenerativeNetwork
    op: UnitaryOperator
    probabilities: dict
    coherence: CoherenceVector | None
    signals: np.ndarray | None


def prepare(cfg: ExperimentConfig) -> Prepared:
    net = build_network(cfg)
    op = parse_transform(cfg.transform, net.n)
    coh = None
    probs: dict[str, ProbabilityVector] = {}
    for s in cfg.schemes:
        if s == "uniform":
            probs[s] = uniform(net.n)
        elif s == "adapted":
            coh = coherence_heuristic(net, op, cfg.coherence_batch, cfg.coherence_seed)
            probs[s] = optimal_probabilities(coh)
        else:
            p = load_probabilities(s.split(":", 1)[1])
            if p.n != net.n:
                raise ConfigError(f"{s}: length {p.n} does not match n={net.n}")
            probs[s] = p
    signals = None
    if not cfg.in_range:
        signals = load_vectors(cfg.signal_file)
        if signals.shape[1] != net.n:
            raise ConfigError(f"signal.file vectors have length {signals.shape[1]}, n={net.n}")
    return Prepared(net, op, probs, coh, signals)


def _signal(cfg: ExperimentConfig, prep: Prepared, trial: int) -> np.ndarray:
    if cfg.in_range:
        return forward(prep.net, make_rng(cfg.seed, 1, trial).standard_normal(prep.net.k))
    return prep.signals[trial % prep.signals.shape[0]]


def run_cell(cfg: ExperimentConfig, prep: Prepared, scheme_idx: int, m: int, trial: int) -> dict:
    scheme = cfg.schemes[scheme_idx]
    p = prep.probabilities[scheme]
    x0 = _signal(cfg, prep, trial)
    plan_seed = int(make_rng(cfg.seed, 2, scheme_idx, m, trial).integers(2 ** 62))
    if cfg.blocks > 1:
        if m % cfg.blocks:
            raise ConfigError(f"m={m} is not divisible by sampling.blocks={cfg.blocks}")
        plan = draw_blocked_plan(p, m // cfg.blocks, cfg.blocks, plan_seed)
    else:
        plan = draw_plan(p, m, plan_seed)
    pc = build_preconditioner(plan)
    meas = measure(x0, plan, prep.op, noise_level=cfg.noise, seed=plan_seed)
    # restarts share their seed across schemes so trials are paired
    rc = replace(cfg.recovery, seed=int(make_rng(cfg.seed, 3, m, trial).integers(2 ** 62)) + cfg.recovery.seed,
                 threads=1)
    res = recover(prep.net, meas, pc, rc)
    err = rre(x0, res.x_hat)
    return {"trial": trial, "scheme": scheme, "m": m, "rre": err, "objective": res.objective,
            "eps_hat": res.eps_hat, "success": int(err < SUCCESS_RRE)}


def run_phase_transition(cfg: ExperimentConfig, threads: int | None = None,
                         prep: Prepared | None = None) -> list[dict]:
    """Every (scheme, m, trial) cell; rows come back sorted by (scheme order, m, trial)."""
    prep = prep or prepare(cfg)
    cells = [(s, m, t) for s in range(len(cfg.schemes)) for m in cfg.m_grid for t in range(cfg.trials)]
    rows_ = pmap(lambda c: run_cell(cfg, prep, *c), cells, threads=threads)
    order = {s: i for i, s in enumerate(cfg.schemes)}
    return sorted(rows_, key=lambda r: (order[r["scheme"]], r["m"], r["trial"]))


def summarize(rows_: list[dict]) -> list[dict]:
    groups: dict = {}
    for r in rows_:
        groups.setdefault((r["scheme"], r["m"]), []).append(r)
    out = []
    for (scheme, m), rs in groups.items():
        errs = [r["rre"] for r in rs]
        out.append({"scheme": scheme, "m": m, "trials": len(rs), "successes": sum(r["success"] for r in rs),
                    "success_rate": sum(r["success"] for r in rs) / len(rs),
                    "median_rre": median(errs), "mean_rre": mean(errs)})
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(rows_: list[dict], fields, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(fields) + "\n")
        for r in rows_:
            fh.write(",".join(_fmt(r[f]) for f in fields) + "\n")


def read_results(path) -> list[dict]:
    out = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != RESULT_FIELDS:
            raise ConfigError(f"{path}: expected header {','.join(RESULT_FIELDS)}")
        for line in fh:
            if not line.strip():
                continue
            t, s, m, e, o, eh, ok = line.strip().split(",")
            out.append({"trial": int(t), "scheme": s, "m": int(m), "rre": float(e), "objective": float(o),
                        "eps_hat": float(eh), "success": int(ok)})
    return out


SUMMARY_FIELDS = ("scheme", "m", "trials", "successes", "success_rate", "median_rre", "mean_rre")


def run_experiment(cfg: ExperimentConfig, threads: int | None = None, plots: bool = True) -> dict:
    """Run the sweep and write results.csv, summary.csv, coherence.csv and plots into output_dir."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    prep = prepare(cfg)
    rows_ = run_phase_transition(cfg, threads, prep)
    paths = {"results": os.path.join(cfg.output_dir, "results.csv"),
             "summary": os.path.join(cfg.output_dir, "summary.csv")}
    write_csv(rows_, RESULT_FIELDS, paths["results"])
    write_csv(summarize(rows_), SUMMARY_FIELDS, paths["summary"])
    if prep.coherence is not None:
        paths["coherence"] = os.path.join(cfg.output_dir, "coherence.csv")
        save_coherence(prep.coherence, paths["coherence"])
    if plots:
        from .plots import emit_plots
        paths.update(emit_plots(rows_, cfg.output_dir, prep.coherence))
    return paths
