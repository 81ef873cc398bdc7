"""Command-line front end.

Every command takes its randomness from an explicit ``--seed`` (or the
scenario's ``run.seed``), so repeated invocations print identical bytes.
With ``--out DIR`` the artefacts are written there and a manifest of
``<sha256>  <file>`` lines is printed instead.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import fixtures
from .experiments import emit_plot_data, run_example, run_figure1, run_posterior_trace
from .game import run_episode
from .planner import PlanConfig, hba_policy
from .scenario import ScenarioError, load_scenario
from .verifier import (
    ChainFormatError,
    ProcessChain,
    build_chain,
    check_bounded_reach,
    check_theorem_premises,
    check_unbounded_reach,
    detect_critical,
    verify_property4,
)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(files: dict, out: str | None, stdout):
    """Write ``{name: text}`` to ``out`` (with a digest manifest) or to stdout."""
    if out is None:
        for name, text in files.items():
            if len(files) > 1:
                stdout.write(f"==> {name} <==\n")
            stdout.write(text)
        return
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (root / name).write_text(text)
        stdout.write(f"{hashlib.sha256(text.encode()).hexdigest()}  {name}\n")


def _verify_files(spec, config, kind):
    x = build_chain(spec, "X", config=config)
    y = build_chain(spec, "Y", kind, config)
    report = check_theorem_premises(x, y)
    report["bisimilar"] = verify_property4(x, y)["bisimilar"]
    return {"x.chain": x.to_text(), "y.chain": y.to_text(), "premises.json": _json(report)}


def cmd_simulate(args, stdout):
    sc = load_scenario(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    config = PlanConfig(gamma=sc.config.gamma if args.gamma is None else args.gamma,
                        horizon=sc.config.horizon if args.horizon is None else args.horizon)
    posterior = args.posterior or sc.posterior
    files = {}
    if sc.experiment == "episode":
        for r in range(sc.repetitions):
            log = run_episode(sc.spec, hba_policy(sc.spec, posterior, config), sc.steps,
                              np.random.default_rng(seed + r))
            files[f"episode-{r}.csv"] = log.to_csv(include_plan=args.trace_plan)
    elif sc.experiment == "posterior-trace":
        for r in range(sc.repetitions):
            trace = run_posterior_trace(sc.spec, posterior, sc.steps, seed + r, config)
            files[f"trace-{r}.csv"] = trace.to_csv()
    elif sc.experiment == "figure1":
        trace = run_figure1(seed=seed, steps=sc.steps, **sc.options)
        text = trace.to_csv()
        files = {"figure1.csv": text, "figure1.dat": emit_plot_data(text)}
    else:
        files = _verify_files(sc.spec, config, posterior)
    _emit(files, args.out, stdout)
    return 0


def cmd_example(args, stdout):
    report = run_example(args.name, args.posterior, args.steps, args.seed)
    _emit({f"{args.name}-{args.posterior}.json": _json(report)}, args.out, stdout)
    return 0 if report["passed"] else 1


def cmd_figure1(args, stdout):
    trace = run_figure1(seed=args.seed, steps=args.steps)
    text = trace.to_csv()
    _emit({"figure1.csv": text, "figure1.dat": emit_plot_data(text, args.stride)}, args.out, stdout)
    return 0


def cmd_chains(args, stdout):
    spec, config = fixtures.build(args.name)
    _emit(_verify_files(spec, config, args.posterior), args.out, stdout)
    return 0


def _load_chain(path):
    return ProcessChain.from_text(Path(path).read_text())


def cmd_verify(args, stdout):
    chains = [_load_chain(p) for p in args.chains]
    need = {"bisim": 2, "reach": 1, "critical": 2, "premises": 2}[args.check]
    if len(chains) != need:
        raise SystemExit(f"verify {args.check}: expected {need} chain file(s), got {len(chains)}")
    if args.check == "bisim":
        report = verify_property4(chains[0], chains[1], t_max=args.t)
    elif args.check == "reach":
        chain = chains[0]
        if args.t is None:
            res = check_unbounded_reach(chain, args.p, args.comparator)
        else:
            res = check_bounded_reach(chain, args.t, args.p, args.comparator)
        report = {"steps": res.steps, "threshold": res.threshold, "comparator": res.comparator,
                  "probability": res.value, "verdict": res.verdict}
    elif args.check == "critical":
        crit = detect_critical(chains[1], chains[0])
        report = {"critical": crit.critical, "witness": crit.witness, "candidates": crit.candidates}
    else:
        report = check_theorem_premises(chains[0], chains[1])
    _emit({f"{args.check}.json": _json(report)}, args.out, stdout)
    return 0


def cmd_plot_data(args, stdout):
    _emit({"plot.dat": emit_plot_data(Path(args.trace).read_text(), args.stride)}, args.out, stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hba", description="Type-based planning in stochastic Bayesian games.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log degenerate-posterior events")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a JSON scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--posterior", choices=("product", "sum", "correlated"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--trace-plan", action="store_true", help="add the planner's action values to episode CSVs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example", help="run a worked example and check its outcome")
    p.add_argument("name", choices=fixtures.NAMES)
    p.add_argument("--posterior", choices=("product", "sum", "correlated"), default="sum")
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("figure1", help="posterior error against learning types in a random game")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("chains", help="build the X and Y chains of a worked example")
    p.add_argument("name", choices=fixtures.NAMES)
    p.add_argument("--posterior", choices=("product", "sum", "correlated"), default="sum")
    p.add_argument("--out")
    p.set_defaults(func=cmd_chains)

    p = sub.add_parser("verify", help="check properties of chain files (X first, then Y)")
    p.add_argument("check", choices=("bisim", "reach", "critical", "premises"))
    p.add_argument("chains", nargs="+")
    p.add_argument("--t", type=int, help="step bound (reach: omit for unbounded; bisim: default 50)")
    p.add_argument("--p", type=float, default=1.0, help="reach threshold")
    p.add_argument("--comparator", choices=(">=", ">"), default=">=")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot-data", help="downsample a posterior trace to 't error ao as' columns")
    p.add_argument("trace")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if args.command == "verify" and args.check == "bisim" and args.t is None:
        args.t = 50
    try:
        return args.func(args, stdout)
    except (ScenarioError, ChainFormatError, KeyError, ValueError, OSError) as exc:
        print(f"hba: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
