"""gencs command line.

Exit codes: 0 success, 1 usage or config error, 2 runtime error, 3 a
verification check failed.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import coherence as coh
from . import experiment as exp
from . import generative as gen
from . import recovery as rec
from . import sampling as smp
from . import transforms as tf
from . import verification as ver
from .plots import PlotError, emit_plots

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3

# errors that mean the inputs were malformed
USAGE_ERRORS = (exp.ConfigError, gen.NetworkError, tf.TransformError, smp.SamplingError,
                coh.CoherenceError, rec.RecoveryError, PlotError)


class CheckFailed(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (math.isfinite(v) and v >= 0.0):
        raise argparse.ArgumentTypeError(f"expected a finite nonnegative number, got {text!r}")
    return v


def _probabilities(args, n: int) -> smp.ProbabilityVector:
    if args.probabilities is None:
        return smp.uniform(n)
    p = smp.load_probabilities(args.probabilities)
    if p.n != n:
        raise smp.SamplingError(f"{args.probabilities}: length {p.n} does not match n={n}")
    return p


def _scheme_probabilities(scheme: str, n: int, coherence_file: str | None) -> smp.ProbabilityVector:
    if scheme == "uniform":
        return smp.uniform(n)
    if scheme == "adapted":
        if not coherence_file:
            raise exp.ConfigError("--scheme adapted needs --coherence FILE")
        alpha = coh.load_coherence(coherence_file)
        if len(alpha) != n:
            raise coh.CoherenceError(f"coherence file has {len(alpha)} entries, n={n}")
        return smp.optimal_probabilities(alpha)
    if scheme.startswith("custom:") or scheme not in ("uniform", "adapted"):
        p = smp.load_probabilities(scheme.split(":", 1)[1] if scheme.startswith("custom:") else scheme)
        if p.n != n:
            raise smp.SamplingError(f"custom probabilities have length {p.n}, n={n}")
        return p


def cmd_gen_net(args) -> None:
    if args.init == "lowfreq":
        if len(args.widths) != 3:
            raise exp.ConfigError("lowfreq nets take --widths k,hidden,n")
        k, hidden, n = args.widths
        net = gen.low_frequency_net(n, k, hidden, args.seed, args.frequencies)
    else:
        net = gen.random_gaussian_init(args.widths, args.seed)
    gen.save_net(net, args.output)
    if args.signals:
        z = smp.make_rng(args.seed, 1).standard_normal((args.signals, net.k))
        exp.save_vectors(gen.forward(net, z), args.signal_output)
    print(f"wrote {args.output}: widths {','.join(map(str, net.widths))}")


def cmd_coherence(args) -> None:
    net = gen.load_net(args.net)
    op = tf.parse_transform(args.transform, net.n)
    if args.method == "exact":
        cv = coh.coherence_exact_pieces(op, gen.enumerate_pieces(net, budget=args.budget), field=args.field)
    else:
        cv = coh.coherence_heuristic(net, op, args.batch, args.seed)
    coh.save_coherence(cv, args.output)
    print(f"{cv.method}: ||alpha||^2 = {cv.norm ** 2:.6g}, max alpha = {cv.alpha.max():.6g}")


def cmd_sample(args) -> None:
    p = _scheme_probabilities(args.scheme, args.n, args.coherence)
    if args.blocks > 1:
        if args.m % args.blocks:
            raise exp.ConfigError(f"m={args.m} is not divisible by --blocks {args.blocks}")
        plan = smp.draw_blocked_plan(p, args.m // args.blocks, args.blocks, args.seed)
    else:
        plan = smp.draw_plan(p, args.m, args.seed)
    smp.save_plan(plan, args.output)
    if args.p_output:
        smp.save_probabilities(p, args.p_output)
    print(f"wrote {args.output}: m={plan.m}, distinct rows {np.unique(plan.indices).size}")


def _load_signal(path: str, n: int) -> np.ndarray:
    v = exp.load_vectors(path)
    if v.shape != (1, n):
        raise exp.ConfigError(f"{path}: expected a single vector of length {n}, got shape {v.shape}")
    return v[0]


def cmd_measure(args) -> None:
    net = gen.load_net(args.net)
    op = tf.parse_transform(args.transform, net.n)
    p = _probabilities(args, net.n)
    plan = smp.load_plan(args.plan, p)
    if args.signal:
        x0 = _load_signal(args.signal, net.n)
    else:
        x0 = gen.forward(net, smp.make_rng(args.latent_seed, 1).standard_normal(net.k))
    meas = rec.measure(x0, plan, op, noise_level=args.noise, seed=args.seed)
    rec.save_measurements(meas, args.output)
    if args.signal_output:
        exp.save_vectors(x0, args.signal_output)
    print(f"wrote {args.output}: m={meas.m}")


def cmd_recover(args) -> None:
    net = gen.load_net(args.net)
    op = tf.parse_transform(args.transform, net.n)
    p = _probabilities(args, net.n)
    meas = rec.load_measurements(args.measurements, op, p)
    pc = smp.build_preconditioner(meas.plan)
    cfg = rec.RecoveryConfig(restarts=args.restarts, iterations=args.iterations, lr=args.lr,
                             weight_decay=args.weight_decay, preconditioned=args.preconditioned,
                             seed=args.seed, tol=args.tol, threads=args.threads)
    res = rec.recover(net, meas, pc, cfg)
    exp.save_vectors(res.x_hat, args.output)
    line = f"objective {res.objective:.6g}, eps_hat {res.eps_hat:.6g}, best restart {res.best_restart}"
    if args.signal:
        err = rec.rre(_load_signal(args.signal, net.n), res.x_hat)
        line += f", rre {err:.6g} ({'success' if err < rec.SUCCESS_RRE else 'failure'})"
    print(line)


def _pieces_or_none(net: gen.GenerativeNetwork, budget: int):
    if net.hidden_units > gen.MAX_EXHAUSTIVE_UNITS:
        return None
    return gen.enumerate_pieces(net, budget=budget)


def cmd_verify_rip(args) -> None:
    net = gen.load_net(args.net)
    op = tf.parse_transform(args.transform, net.n)
    p = _scheme_probabilities(args.scheme, net.n, args.coherence)
    pieces = _pieces_or_none(net, args.budget)
    bases = ver.pair_bases(pieces) if pieces is not None else None
    passes, devs = ver.rip_pass_rate(net, op, p, args.m, args.trials, args.seed, bases, args.probes,
                                     args.threshold)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write("trial,m,deviation,passed\n")
            for t, d in enumerate(devs):
                fh.write(f"{t},{args.m},{d:.17g},{int(d <= args.threshold)}\n")
    lo, hi = ver.wilson_interval(passes, args.trials)
    method = "pieces (exact)" if bases is not None else f"probes={args.probes} (lower bound)"
    print(f"RIP on the expanded range, {method}: {passes}/{args.trials} plans with deviation <= "
          f"{args.threshold:.4g}, Wilson 95% [{lo:.3f}, {hi:.3f}], median deviation {np.median(devs):.4g}")
    if hi < args.target:
        raise CheckFailed(f"pass rate is below {args.target} at 95% confidence")


def cmd_verify_isotropy(args) -> None:
    op = tf.parse_transform(args.transform, args.n)
    rng = np.random.default_rng(args.seed)
    basis = coh.orthonormal_basis(rng.standard_normal((args.n, args.k)))
    if args.scheme == "adapted":
        p = smp.optimal_probabilities(coh.coherence_exact_subspace(op, basis))
    else:
        p = smp.uniform(args.n)
    try:
        rep = ver.isotropy_check(p, op, basis, args.samples, args.seed + 1)
    except ver.VerificationError as exc:
        raise CheckFailed(str(exc)) from None
    print(f"isotropy: |E vv* - I| = {rep.distance:.4g} (tolerance {rep.tolerance:.4g}), "
          f"max |v| = {rep.max_norm:.4g} <= mu = {rep.mu:.4g}")
    if not rep.passed:
        raise CheckFailed("empirical covariance is too far from the identity")


def cmd_verify_theorem1(args) -> None:
    net = gen.load_net(args.net)
    op = tf.parse_transform(args.transform, net.n)
    if args.calibrate:
        cal = ver.calibrate_constant(net, op, args.eps, args.trials, args.seed, target=1.0 - args.eps)
        print(f"calibrated C = {cal.C:.4g} (m = {cal.m}, RIP pass rate {cal.pass_rate:.3f} over "
              f"{args.trials} plans, {len(cal.history)} evaluations)")
        return
    cfg = rec.RecoveryConfig(iterations=args.iterations, restarts=args.restarts, preconditioned=True,
                             tol=args.tol, threads=args.threads)
    rep = ver.theorem1_end_to_end(net, op, args.C, args.eps, args.trials, args.seed,
                                  recoveries=args.recoveries, config=cfg)
    print(f"m = {rep.m} (||alpha||^2 = {rep.alpha_norm_sq:.4g}, {rep.coherence_method}); "
          f"RIP passed on {rep.rip_passes}/{rep.trials} plans, Wilson 95% [{rep.wilson[0]:.3f}, "
          f"{rep.wilson[1]:.3f}] vs target {rep.target:.3f}; error bound held on "
          f"{rep.bound_checks - len(rep.bound_failures)}/{rep.bound_checks} recoveries "
          f"({rep.skipped_bound_checks} skipped on failing plans)")
    if not rep.passed:
        raise CheckFailed("RIP rate or error bound check failed")


def cmd_experiment(args) -> None:
    cfg = exp.parse_config(args.config)
    if args.output_dir:
        cfg = exp.ExperimentConfig(**{**cfg.__dict__, "output_dir": args.output_dir})
    paths = exp.run_experiment(cfg, threads=args.threads, plots=not args.no_plots)
    for key, path in sorted(paths.items()):
        print(f"{key}: {path}")


def cmd_plot(args) -> None:
    rows_ = exp.read_results(args.results)
    alpha = coh.load_coherence(args.coherence) if args.coherence else None
    for key, path in sorted(emit_plots(rows_, args.output_dir, alpha).items()):
        print(f"{key}: {path}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gencs", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-net", help="write a random ReLU generator, optionally with in-range signals")
    s.add_argument("--widths", type=_int_list, required=True, help="k0,k1,...,kd")
    s.add_argument("--init", choices=("gaussian", "lowfreq"), default="gaussian")
    s.add_argument("--frequencies", type=_positive_int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--signals", type=int, default=0, help="also write this many in-range signals")
    s.add_argument("--signal-output", default="signals.txt")
    s.add_argument("-o", "--out", "--output", dest="output", required=True)
    s.set_defaults(func=cmd_gen_net)

    s = sub.add_parser("coherence", help="estimate local coherences")
    s.add_argument("--net", required=True)
    s.add_argument("--transform", default="dft1d")
    s.add_argument("--method", choices=("heuristic", "exact"), default="heuristic")
    s.add_argument("--batch", type=_positive_int, default=500)
    s.add_argument("--budget", type=_positive_int, default=1 << 16)
    s.add_argument("--field", choices=coh.FIELDS, default="complex")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out", "--output", dest="output", required=True)
    s.set_defaults(func=cmd_coherence)

    s = sub.add_parser("sample", help="draw a sampling plan")
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--m", type=_positive_int, required=True)
    s.add_argument("--p", "--scheme", dest="scheme", default="uniform",
                   help="uniform | adapted | FILE (a probability CSV; custom:FILE also accepted)")
    s.add_argument("--coherence", help="coherence CSV for --scheme adapted")
    s.add_argument("--blocks", type=_positive_int, default=1,
                   help="sample independently per equal index block (outside theory)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--p-output", help="also write the probability vector")
    s.add_argument("-o", "--out", "--output", dest="output", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("measure", help="simulate subsampled measurements")
    s.add_argument("--net", required=True)
    s.add_argument("--transform", default="dft1d")
    s.add_argument("--plan", required=True)
    s.add_argument("--probabilities", help="probability CSV the plan was drawn from (default uniform)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--signal", help="vector file with x0")
    g.add_argument("--latent-seed", type=int, default=0, help="x0 = G(z), z Gaussian from this seed")
    s.add_argument("--noise", type=_nonneg_float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--signal-output")
    s.add_argument("-o", "--out", "--output", dest="output", required=True)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("recover", help="recover a signal from measurements")
    s.add_argument("--net", required=True)
    s.add_argument("--transform", default="dft1d")
    s.add_argument("--measurements", required=True)
    s.add_argument("--probabilities")
    s.add_argument("--restarts", type=_positive_int, default=4)
    s.add_argument("--iterations", type=_positive_int, default=20000)
    s.add_argument("--lr", type=float, default=0.003)
    s.add_argument("--weight-decay", type=_nonneg_float, default=0.0)
    s.add_argument("--preconditioned", action="store_true")
    s.add_argument("--tol", type=_nonneg_float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=_positive_int)
    s.add_argument("--signal", help="true x0, to report the relative error")
    s.add_argument("-o", "--out", "--output", dest="output", required=True)
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("verify", help="run a verification check")
    vsub = s.add_subparsers(dest="check", required=True)
    v = vsub.add_parser("rip", help="RIP pass rate of random plans on the expanded range")
    v.add_argument("--net", required=True)
    v.add_argument("--transform", default="dft1d")
    v.add_argument("--p", "--scheme", dest="scheme", default="uniform", help="uniform | adapted | FILE")
    v.add_argument("--coherence")
    v.add_argument("--report", help="write per-plan deviations as CSV")
    v.add_argument("--m", type=_positive_int, required=True)
    v.add_argument("--trials", type=_positive_int, default=100)
    v.add_argument("--threshold", type=float, default=ver.RIP_THRESHOLD)
    v.add_argument("--target", type=float, default=0.95)
    v.add_argument("--probes", type=_positive_int, default=2000)
    v.add_argument("--budget", type=_positive_int, default=1 << 16)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify_rip)
    v = vsub.add_parser("isotropy", help="empirical isotropy on a random subspace")
    v.add_argument("--n", type=_positive_int, required=True)
    v.add_argument("--k", type=_positive_int, required=True)
    v.add_argument("--transform", default="dft1d")
    v.add_argument("--scheme", choices=("uniform", "adapted"), default="adapted")
    v.add_argument("--samples", type=_positive_int, default=100000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify_isotropy)
    v = vsub.add_parser("theorem1", help="adapted sampling at the guaranteed m, end to end")
    v.add_argument("--net", required=True)
    v.add_argument("--transform", default="dft1d")
    v.add_argument("--C", type=float, default=1.0)
    v.add_argument("--eps", type=float, default=0.05)
    v.add_argument("--trials", type=_positive_int, default=20)
    v.add_argument("--recoveries", type=_positive_int, default=1)
    v.add_argument("--restarts", type=_positive_int, default=4)
    v.add_argument("--iterations", type=_positive_int, default=20000)
    v.add_argument("--tol", type=_nonneg_float, default=0.0)
    v.add_argument("--threads", type=_positive_int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--calibrate", action="store_true",
                   help="instead, bisect for the smallest C with RIP pass rate >= 1 - eps")
    v.set_defaults(func=cmd_verify_theorem1)

    s = sub.add_parser("experiment", help="run a phase-transition sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir")
    s.add_argument("--threads", type=_positive_int, help="worker threads (default GCS_THREADS or CPU count)")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("plot", help="render SVG plots from a results CSV")
    s.add_argument("--results", required=True)
    s.add_argument("--coherence")
    s.add_argument("--output-dir", required=True)
    s.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        args.func(args)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
