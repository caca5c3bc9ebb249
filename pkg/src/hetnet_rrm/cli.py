"""Command-line entry points: run, oracle, validate and sweep.

Exit codes: 0 success (run converged), 2 run stopped at the superframe limit,
3 configuration or scenario error, 4 oracle size caps exceeded.  Log verbosity
comes from the ``HETNET_RRM_LOG`` environment variable (a standard logging
level name); everything else is flags and files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .baselines import run_fbc, run_fddsa, run_proposed, run_ttrsc
from .channel import ChannelModel
from .oracle import OracleScaleError, oracle_solve
from .rrm import RrmResult
from .scenario import Scenario, ScenarioError, load_scenario, with_param
from .trace import BITS_PER_NAT, format_trace

EXIT_OK = 0
EXIT_MAX_ITERS = 2
EXIT_CONFIG = 3
EXIT_ORACLE_SCALE = 4

_RUNNERS = {
    "proposed": run_proposed,
    "fddsa": run_fddsa,
    "ttrsc": run_ttrsc,
}

log = logging.getLogger("hetnet_rrm")


def run_experiment(
    scenario: Scenario, mode: str, seed: int
) -> tuple[RrmResult, ChannelModel]:
    """Run one pipeline; returns the result and the channel model it ran on
    (the backhaul-augmented one for fbc)."""
    model = scenario.channel_model(seed=seed)
    if mode == "fbc":
        return run_fbc(model, scenario.rrm)
    result = _RUNNERS[mode](model, scenario.rrm)
    return result, model


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    mode = args.mode or scenario.mode
    seed = scenario.seed if args.seed is None else args.seed
    if seed != scenario.seed or mode != scenario.mode:
        scenario = replace(scenario, seed=seed, mode=mode)
    log.info("running mode=%s seed=%d on %s", mode, seed, args.scenario)
    result, _ = run_experiment(scenario, mode, seed)
    _emit(format_trace(scenario, mode, seed, result), args.out)
    return EXIT_OK if result.converged else EXIT_MAX_ITERS


def _cmd_oracle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if not scenario.deterministic:
        raise ScenarioError(
            [f"{args.scenario}: the oracle needs 'deterministic = true' in [radio]"]
        )
    model = scenario.channel_model()
    solution = oracle_solve(model, scenario.rrm.utility)
    lines = [
        "oracle-report v1",
        f"scenario = {args.scenario}",
        f"utility = {solution.utility!r}",
        f"vertices = {solution.n_vertices}",
        "shares = " + ",".join(repr(float(q)) for q in solution.shares),
        "flow_rates_bits = "
        + ",".join(repr(float(r * BITS_PER_NAT)) for r in solution.flow.rates),
        "",
    ]
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    graph = scenario.graph
    sys.stdout.write(
        f"ok: {graph.num_nodes} nodes, {graph.num_links} links, "
        f"{graph.num_flows} flows, {scenario.subbands} subbands\n"
    )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ScenarioError([f"--values must be comma-separated numbers: {exc}"]) from exc
    if not values:
        raise ScenarioError(["--values must list at least one value"])
    modes = args.modes.split(",") if args.modes else ["proposed", "fbc", "fddsa", "ttrsc"]
    for mode in modes:
        if mode != "fbc" and mode not in _RUNNERS:
            raise ScenarioError([f"unknown mode '{mode}' in --modes"])

    lines = [
        "sweep-report v1",
        f"scenario = {args.scenario}",
        f"param = {args.param}",
        "# value mode utility superframes converged",
    ]
    all_converged = True
    for value in values:
        swept = with_param(scenario, args.param, value)
        for mode in modes:
            result, _ = run_experiment(swept, mode, swept.seed)
            all_converged &= result.converged
            lines.append(
                f"{value!r} {mode} {result.utility!r} "
                f"{len(result.records)} {'true' if result.converged else 'false'}"
            )
            log.info("sweep %s=%s mode=%s utility=%s", args.param, value, mode, result.utility)
    lines.append("")
    _emit("\n".join(lines), args.out)
    return EXIT_OK if all_converged else EXIT_MAX_ITERS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetnet-rrm",
        description="Two-timescale radio resource management experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write its trace")
    run.add_argument("--scenario", required=True)
    run.add_argument("--mode", choices=("proposed", "fbc", "fddsa", "ttrsc"), default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="trace path (default: stdout)")
    run.set_defaults(func=_cmd_run)

    oracle = sub.add_parser("oracle", help="brute-force optimum on a small deterministic scenario")
    oracle.add_argument("--scenario", required=True)
    oracle.add_argument("--out", default=None)
    oracle.set_defaults(func=_cmd_oracle)

    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=_cmd_validate)

    sweep = sub.add_parser("sweep", help="re-run every mode across one swept parameter")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--modes", default=None, help="comma-separated subset of modes")
    sweep.add_argument("--out", default=None)
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("HETNET_RRM_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for line in exc.errors:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE_SCALE


if __name__ == "__main__":
    sys.exit(main())
