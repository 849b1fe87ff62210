"""Command-line entry point: ``nuts-engine {sample,ess,benchmark,compare}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .diagnostics import ESS_CUTOFF, ReferenceMoments, ess_report, gaussian_reference
from .errors import NutsEngineError
from .harness import (ExperimentConfig, SAMPLERS, compare_samplers, load_summaries,
                      model_from_spec, read_draws, run_experiment)
from .model import MvnModel

logger = logging.getLogger("nuts_engine")


def _sample(args):
    fixed = args.epsilon is not None
    if args.sampler == "hmc-fixed" and (args.epsilon is None or args.steps is None):
        raise NutsEngineError("hmc-fixed needs --epsilon and --steps")
    adapt = 0 if fixed and args.sampler in ("nuts", "nuts-naive") else args.adapt
    config = ExperimentConfig(
        model=args.model, samplers=[args.sampler], n_iter=args.iters, n_adapt=adapt,
        deltas=[args.delta], lambdas=[args.lam] if args.lam is not None else None,
        replications=1, seed=args.seed, out_dir=args.out, max_depth=args.max_depth,
        step_size=args.epsilon, n_steps=args.steps, reference=args.ref,
        paper_scale=args.paper_scale, workers=1,
    )
    summary = run_experiment(config)
    chain = summary["chains"][0]
    line = f"{chain['name']}: mean accept {chain['mean_accept_stat']:.3f}"
    if "ess" in chain:
        line += f", min ESS {chain['ess']['min_ess']:.1f}, ESS/grad {chain['ess']['ess_per_grad']:.4g}"
    print(line)
    print(f"wrote {Path(args.out) / chain['name']}")


def _ess(args):
    draws = read_draws(args.draws)
    if args.ref == "analytic":
        if not args.model:
            raise NutsEngineError("--ref analytic needs --model (a Gaussian target)")
        model = model_from_spec(args.model)
        if not isinstance(model, MvnModel):
            raise NutsEngineError("analytic references exist only for Gaussian targets")
        refs = gaussian_reference([0.0] * model.dim, model.spec.covariance)
    else:
        with open(args.ref) as fh:
            refs = ReferenceMoments.from_dict(json.load(fh))
    grads = args.grads if args.grads is not None else draws.shape[0]
    report = ess_report(draws, refs, grads, cutoff=args.cutoff)
    if args.out:
        report.to_json(args.out)
    else:
        json.dump(report.to_dict(), sys.stdout, indent=2, sort_keys=True)
        print()


def _benchmark(args):
    config = ExperimentConfig.from_toml(args.config)
    if args.out:
        config.out_dir = args.out
    if args.paper_scale:
        config.paper_scale = True
    summary = run_experiment(config)
    print(f"{len(summary['chains'])} chains written to {config.out_dir} "
          f"in {summary['wall_time']:.1f} s")


def _compare(args):
    out = args.out or str(Path(args.input) / "comparison.csv")
    rows = compare_samplers(load_summaries(args.input), out)
    for row in rows:
        ratio = row["ratio_to_best_hmc"]
        extra = "" if ratio is None else f"  NUTS/best-HMC {ratio:.3f}"
        print(f"{row['sampler']:>10} delta={row['delta']} lambda={row['lambda']} "
              f"ESS/grad={row['ess_per_grad']:.4g}{extra}")
    print(f"wrote {out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="nuts-engine", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run one chain")
    p.add_argument("--model", required=True, help='e.g. "mvn:dim=10,seed=1"')
    p.add_argument("--sampler", required=True, choices=SAMPLERS)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--adapt", type=int, default=1000)
    p.add_argument("--delta", type=float, default=0.6)
    p.add_argument("--lambda", dest="lam", type=float, help="simulation length for hmc")
    p.add_argument("--epsilon", type=float, help="fixed step size")
    p.add_argument("--steps", type=int, help="fixed leapfrog steps (hmc-fixed)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--ref", default="auto", help="auto, none, analytic or a reference JSON")
    p.add_argument("--paper-scale", action="store_true")
    p.set_defaults(func=_sample)

    p = sub.add_parser("ess", help="ESS report for a draws CSV")
    p.add_argument("--draws", required=True)
    p.add_argument("--ref", required=True, help="reference JSON or 'analytic'")
    p.add_argument("--model", help="model spec, needed with --ref analytic")
    p.add_argument("--grads", type=int, help="gradient evaluations behind the draws")
    p.add_argument("--cutoff", type=float, default=ESS_CUTOFF)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=_ess)

    p = sub.add_parser("benchmark", help="run a grid from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override out_dir")
    p.add_argument("--paper-scale", action="store_true")
    p.set_defaults(func=_benchmark)

    p = sub.add_parser("compare", help="ESS-per-gradient table from run summaries")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (NutsEngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
