"""Command-line entry points.

Subcommands:
  run          execute an experiment grid from a config file
  certify      check the greedy (1 - 1/e) bound on random enumerable instances
  synth        write a synthetic sparse-format dataset
  demo-finite  run exact-inference active learning on an instance file
"""

import argparse
import sys

import numpy as np

from . import harness, oracle
from .core import Dataset, Example, LabelSpace, run_active_learning
from .criteria import make_policy
from .sim import SimulatedLabeler


def _cmd_run(args) -> int:
    paths = harness.run_config_file(args.config)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_certify(args) -> int:
    report = oracle.certify_bounds(
        pool_size=args.pool,
        budget=args.budget,
        trials=args.trials,
        seed=args.seed,
        max_hypotheses=args.hypotheses,
        max_rates=args.rates,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(oracle.report_to_json(report))
        print(f"report: {args.out}")
    ratios_avg = [r.to_record()["ratio_avg"] for r in report["results"]]
    ratios_worst = [r.to_record()["ratio_worst"] for r in report["results"]]
    print(
        f"{report['trials']} instances (pool={args.pool}, budget={args.budget}): "
        f"{report['failures']} bound violations"
    )
    print(
        f"min ratio avg={min(ratios_avg):.6f} worst={min(ratios_worst):.6f} "
        f"(required > {oracle.GREEDY_FACTOR:.6f})"
    )
    return 0 if report["all_passed"] else 1


def _cmd_synth(args) -> int:
    dataset = harness.synth_dataset(
        args.n,
        args.dim,
        args.seed,
        separation=args.separation,
        redundant=args.redundant,
    )
    harness.save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} examples to {args.out}")
    return 0


def _cmd_demo_finite(args) -> int:
    belief = oracle.load_instance(args.instance)
    induced = oracle.induce(belief)
    rng = np.random.default_rng(args.seed)
    f = induced.labelings[rng.choice(len(induced.qf), p=induced.qf)]
    k = induced.patterns[rng.choice(len(induced.qk), p=induced.qk)]
    pool_size = induced.num_examples
    examples = [Example(x, ((x, 1.0),), int(f[x])) for x in range(pool_size)]
    pool = Dataset(examples, LabelSpace(belief.num_labels), name="instance")
    labeler = SimulatedLabeler(
        {x: 0 if k[x] == 1 else int(f[x]) for x in range(pool_size)}, "instance"
    )
    budget = args.budget if args.budget is not None else pool_size
    policy = make_policy(args.policy)
    trace = run_active_learning(
        policy, labeler, pool, budget, belief, pool, rng_seed=args.seed
    )
    print(f"ground truth labels: {list(map(int, f))}, pattern: {list(map(int, k))}")
    final = belief
    for record in trace.records:
        fb = "abstain" if record.feedback == 0 else f"label {record.feedback}"
        print(
            f"query {record.iteration}: example {record.example_index} -> {fb} "
            f"(pool accuracy {record.accuracy:.3f})"
        )
        example = pool[record.example_index]
        if record.feedback == 0:
            final = final.update_on_abstain(example)
        else:
            final = final.update_on_label(example, record.feedback)
    h_weights = ", ".join(f"{w:.4f}" for w in final.hypothesis_weights)
    r_weights = ", ".join(f"{w:.4f}" for w in final.rate_weights)
    print(f"final hypothesis weights: [{h_weights}]")
    print(f"final rate weights: [{r_weights}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abstain-al",
        description="Pool-based active learning with abstention feedback",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment grid")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_cert = sub.add_parser("certify", help="certify greedy near-optimality bounds")
    p_cert.add_argument("--pool", type=int, default=3)
    p_cert.add_argument("--budget", type=int, default=2)
    p_cert.add_argument("--trials", type=int, default=200)
    p_cert.add_argument("--seed", type=int, default=0)
    p_cert.add_argument("--hypotheses", type=int, default=3)
    p_cert.add_argument("--rates", type=int, default=2)
    p_cert.add_argument("--out")
    p_cert.set_defaults(func=_cmd_certify)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--dim", type=int, required=True)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--separation", type=float, default=3.0)
    p_synth.add_argument("--redundant", type=int, default=0)
    p_synth.set_defaults(func=_cmd_synth)

    p_demo = sub.add_parser("demo-finite", help="exact-inference demo run")
    p_demo.add_argument("--instance", required=True)
    p_demo.add_argument("--budget", type=int, default=None)
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.add_argument("--policy", choices=("ala", "alw"), default="ala")
    p_demo.set_defaults(func=_cmd_demo_finite)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
