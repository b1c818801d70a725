"""Command-line entry point.

Exit codes: 0 success, 1 a statistical check failed, 2 invalid configuration
or arguments, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .agents import KINDS
from .config import ConfigError

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _common(p):
    p.add_argument("--config", help="flat 'section.key = value' config file")
    p.add_argument("--seed", type=int, help="first seed; trials use seed, seed+1, ...")
    p.add_argument("--trials", type=int, help="number of seeds")
    p.add_argument("--out", help="output directory")
    p.add_argument("--episodes", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--updates-per-step", type=float, dest="updates_per_step")
    p.add_argument("--agent", choices=KINDS)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deepexplore", description="Deep-exploration workbench")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, help_ in (("run", "one depth and update setting over all seeds"),
                        ("sweep", "depth x updates-per-step grid")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--workers", type=int, help="parallel worker processes")

    p = sub.add_parser("score", help="deep-sea score from existing summary CSVs")
    p.add_argument("paths", nargs="*", help="summary.csv files (default: <out>/summary.csv)")
    p.add_argument("--out", default=".")
    p.add_argument("--budget", type=int, default=5000)

    p = sub.add_parser("tabular-demo", help="uncertainty propagation on the four-state MDP")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--updates", type=int, default=30000)
    p.add_argument("--eps", type=float, default=5e-4)
    p.add_argument("--snapshot-every", type=int, default=500, dest="snapshot_every")

    p = sub.add_parser("posterior-check", help="Langevin SGD on a conjugate Gaussian model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=50, help="number of observations")
    p.add_argument("--true-mean", type=float, default=0.7, dest="true_mean")
    p.add_argument("--sigma-sq", type=float, default=1.0, dest="sigma_sq")
    p.add_argument("--prior-var", type=float, default=2.0, dest="prior_var")
    p.add_argument("--batch", type=int, help="minibatch size (default: full batch)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--burn-in", type=int, default=2000, dest="burn_in")
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("dithering-check", help="uniform-random play on deep sea")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--episodes", type=int, default=100_000)
    p.add_argument("--trials", type=int, default=1)
    return ap


def _experiment(args):
    from .harness import load_experiment

    cli = {k: getattr(args, k, None) for k in
           ("seed", "trials", "out", "episodes", "depth", "updates_per_step", "agent")}
    exp = load_experiment(args.config, **cli)
    if getattr(args, "workers", None) is not None:
        from dataclasses import replace

        exp = replace(exp, workers=args.workers)
    return exp


def _cmd_sweep(args, single: bool) -> int:
    from dataclasses import replace

    from .harness import fmt_ups, run_sweep

    exp = _experiment(args)
    if single:
        exp = replace(exp, depths=exp.depths[:1], updates_per_step=exp.updates_per_step[:1])
    out = exp.out or "."
    summary = run_sweep(exp, out)
    for (d, u), f in sorted(summary.solved_fraction.items()):
        print(f"depth={d} updates_per_step={fmt_ups(u)} solved_fraction={f:g} "
              f"median_learning_time={summary.median_learning_time[(d, u)]:g}")
    if not single:
        for u, s in summary.scores.items():
            print(f"updates_per_step={fmt_ups(u)} score={s:g}")
    return EXIT_OK


def _cmd_score(args) -> int:
    from .harness import emit_plot_data, fmt_ups, read_summary_csv, score_summary_rows

    paths = args.paths or [os.path.join(args.out, "summary.csv")]
    rows = []
    for p in paths:
        rows.extend(read_summary_csv(p))
    scores = score_summary_rows(rows, args.budget)
    for u, s in scores.items():
        print(f"updates_per_step={fmt_ups(u)} score={s:g}")
    os.makedirs(args.out, exist_ok=True)
    emit_plot_data([(u, "score", s) for u, s in scores.items()], os.path.join(args.out, "score.csv"))
    return EXIT_OK


def _cmd_tabular(args) -> int:
    from .envs import FourStateMdp
    from .tabular import run_propagation_demo, write_uncertainty_csv

    mdp = FourStateMdp()
    res = run_propagation_demo(mdp, args.updates, np.random.default_rng(args.seed), eps=args.eps,
                               snapshot_every=args.snapshot_every)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "uncertainty.csv")
    write_uncertainty_csv(res, path)
    std = res.mean_std()
    sx, sa = mdp.scarce_pair
    h = mdp.horizon - 1
    others = max(std[h, x, a] for x in range(mdp.n_states) for a in range(mdp.n_actions) if (x, a) != (sx, sa))
    print(f"last-stage scarce/well-sampled std ratio: {std[h, sx, sa] / others:.2f}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_posterior(args) -> int:
    from .checks import posterior_check

    rng = np.random.default_rng(args.seed)
    y = args.true_mean + np.sqrt(args.sigma_sq) * rng.standard_normal(args.n)
    r = posterior_check(args.alpha, args.sigma_sq, args.prior_var, y, args.burn_in, args.samples, rng,
                        batch=args.batch)
    print(f"posterior mean {r.posterior_mean:.6g} var {r.posterior_var:.6g}")
    print(f"empirical mean {r.empirical_mean:.6g} var {r.empirical_var:.6g}")
    print(f"mean error {r.mean_error:.4f} var error {r.var_error:.4f} tolerance {r.tolerance:g}")
    print("PASS" if r.passed else "FAIL")
    return EXIT_OK if r.passed else EXIT_CHECK_FAILED


def _cmd_dithering(args) -> int:
    from .checks import dithering_bound_check

    r = dithering_bound_check(args.depth, args.episodes, args.trials, np.random.default_rng(args.seed))
    print(f"success rate {r.success_rate:.6g} expected {r.expected_rate:.6g} z {r.rate_z:.3f}")
    print(f"median first-success episode {r.median_first_success:g} 99% band {r.band} from {r.draws} draws")
    print("PASS" if r.passed else "FAIL")
    return EXIT_OK if r.passed else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_sweep(args, single=True)
        if args.command == "sweep":
            return _cmd_sweep(args, single=False)
        if args.command == "score":
            return _cmd_score(args)
        if args.command == "tabular-demo":
            return _cmd_tabular(args)
        if args.command == "posterior-check":
            return _cmd_posterior(args)
        if args.command == "dithering-check":
            return _cmd_dithering(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
