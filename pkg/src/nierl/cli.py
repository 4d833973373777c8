"""Command line entry points: run experiments, re-evaluate checkpoints, export data.

Verbosity is controlled by the NIERL_LOG environment variable
(debug/info/warning; default warning).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .causal import NeuralPhi
from .envs.doorkey import DoorKeyEnv
from .harness import (
    EXPERIMENTS,
    EvalReport,
    ExperimentSpec,
    TrainConfig,
    doorkey_train_defaults,
    evaluate_nie_monte_carlo,
    export_scatter_data,
    run_experiment,
)
from .nn import Mlp, load_checkpoint

log = logging.getLogger("nierl")


def _configure_logging() -> None:
    level = os.environ.get("NIERL_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load_spec(args) -> ExperimentSpec:
    if args.config:
        with open(args.config) as fh:
            spec = ExperimentSpec.from_json(fh.read())
        if args.experiment:
            spec.experiment = args.experiment
        if args.out:
            spec.out_dir = args.out
    else:
        if not args.experiment:
            raise SystemExit("either --config or --experiment is required")
        train = doorkey_train_defaults() if args.experiment.startswith("doorkey") else TrainConfig()
        spec = ExperimentSpec(experiment=args.experiment, train=train, out_dir=args.out or "out")
    seeds = _parse_seeds(args)
    if seeds:
        spec.seeds = seeds
    return spec


def _parse_seeds(args) -> tuple[int, ...]:
    if getattr(args, "seeds", None):
        return tuple(int(s) for s in args.seeds.split(","))
    if getattr(args, "seed", None) is not None:
        return (int(args.seed),)
    return ()


def _mlp_from_checkpoint(prefix: str, head: str) -> Mlp:
    params = load_checkpoint(prefix)
    hidden, input_dim = params["w1"].shape
    output_dim = params["w2"].shape[0]
    net = Mlp(input_dim, hidden, output_dim, head=head)
    net.set_parameters(params)
    return net


def cmd_run(args) -> int:
    spec = _load_spec(args)
    log.info("running %s for seeds %s", spec.experiment, spec.seeds)
    summaries = run_experiment(spec, workers=args.workers)
    json.dump(summaries, sys.stdout, indent=1, sort_keys=True)
    print()
    return 0


def cmd_eval(args) -> int:
    """Re-run the Monte-Carlo evaluation from a finished run's checkpoints."""
    ckpt = os.path.join(args.run_dir, "checkpoints")
    if not os.path.isdir(ckpt):
        raise SystemExit(f"no checkpoints under {args.run_dir}")
    pi_a = _mlp_from_checkpoint(os.path.join(ckpt, "pi_a"), head="softmax")
    pi_b = _mlp_from_checkpoint(os.path.join(ckpt, "pi_b"), head="softmax")
    phi_net = _mlp_from_checkpoint(os.path.join(ckpt, "phi"), head="sigmoid")
    phi_model = NeuralPhi.__new__(NeuralPhi)
    phi_model.net = phi_net
    size = int(round(((phi_net.input_dim - 4) / 11) ** 0.5))
    env = DoorKeyEnv(size=size)
    report = evaluate_nie_monte_carlo(
        pi_a, pi_b, phi_model, env,
        n_instances=args.instances,
        rollouts_per_instance=args.rollouts,
        rng=np.random.default_rng(args.eval_seed),
    )
    out = args.out or os.path.join(args.run_dir, "eval_report.json")
    with open(out, "w") as fh:
        fh.write(report.to_json())
    log.info("wrote %s", out)
    print(out)
    return 0


def cmd_export(args) -> int:
    """Extract the scatter CSV from a stored evaluation report."""
    with open(os.path.join(args.run_dir, "eval_report.json")) as fh:
        report = EvalReport.from_json(fh.read())
    out = args.out or os.path.join(args.run_dir, "scatter.csv")
    export_scatter_data(report, out)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nierl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment for one or more seeds")
    p_run.add_argument("--experiment", choices=EXPERIMENTS)
    p_run.add_argument("--config", help="experiment spec as JSON (see README for the schema)")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--seeds", help="comma-separated seed list")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--workers", type=int, default=1, help="parallel seed processes")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="re-evaluate a finished gridworld run")
    p_eval.add_argument("run_dir")
    p_eval.add_argument("--instances", type=int, default=200)
    p_eval.add_argument("--rollouts", type=int, default=10)
    p_eval.add_argument("--eval-seed", type=int, default=12345)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_eval)

    p_export = sub.add_parser("export", help="export scatter data from an evaluation report")
    p_export.add_argument("run_dir")
    p_export.add_argument("--out")
    p_export.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
