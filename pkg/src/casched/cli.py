"""Command line entry point.

    casched run SCENARIO [--frames N] [--policy upf|pf|pf-weighted] [--out DIR]
    casched compare SCENARIO [--out DIR]

Both accept ``--log-base {2,e}`` and ``--kkt-tol X``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .errors import CaschedError
from .outputs import fmt, write_outputs
from .scenario import Scenario, load_scenario, parse_policy
from .scheduler import Policy, SimResult, run_simulation

log = logging.getLogger("casched")


def compare_policies(scenario: Scenario, n_frames: int | None = None) -> dict[Policy, SimResult]:
    return {p: run_simulation(scenario, p, n_frames) for p in (Policy.UPF, Policy.PF_WEIGHTED, Policy.PF)}


def comparison_rows(results: dict[Policy, SimResult]) -> list[dict]:
    rows = []
    for p, res in results.items():
        row = {"policy": p.value}
        for s in res.stages:
            row[f"L_carrier_{s.carrier_id}"] = s.final_objective
            row[f"utility_product_carrier_{s.carrier_id}"] = math.exp(s.final_objective)
        row["total_log_utility"] = res.total_log_utility
        rows.append(row)
    return rows


def _print_table(rows: list[dict], stream=None):
    stream = stream or sys.stdout
    cols = list(rows[0])
    widths = [max(len(c), 14) for c in cols]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)), file=stream)
    for r in rows:
        cells = [r[c] if isinstance(r[c], str) else f"{r[c]:.6g}" for c in cols]
        print("  ".join(c.rjust(w) for c, w in zip(cells, widths)), file=stream)


def _print_summary(res: SimResult, stream=None):
    stream = stream or sys.stdout
    print(f"policy: {res.policy.label}", file=stream)
    for s in res.stages:
        print(f"  carrier {s.carrier_id}: users {list(s.user_ids)}  L = {s.final_objective:.6f}"
              f"  oracle L* = {s.oracle_value:.6f}  KKT residual = {s.kkt_residual:.3e}", file=stream)
    rates = ", ".join(f"{u}: {r:.4g}" for u, r in sorted(res.aggregate_rate.items()))
    print(f"  aggregate rates: {rates}", file=stream)
    print(f"  sum ln U(r) = {res.total_log_utility:.6f}", file=stream)


def run_command(scenario: Scenario, mode: str, out_dir=None, n_frames=None, policy=None) -> int:
    out = Path(out_dir or scenario.output_dir)
    if mode == "run":
        pol = policy or scenario.policy
        if not isinstance(pol, Policy):
            pol = Policy.UPF
        res = run_simulation(scenario, pol, n_frames)
        write_outputs(res, out)
        _print_summary(res)
    elif mode == "compare":
        results = compare_policies(scenario, n_frames)
        for p, res in results.items():
            write_outputs(res, out / p.value)
        rows = comparison_rows(results)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "comparison.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([v if isinstance(v, str) else fmt(v) for v in r.values()])
        _print_table(rows)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", type=Path)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--log-base", choices=["2", "e"], default=None,
                        help="logarithm base of the rate formula")
    common.add_argument("--kkt-tol", type=float, default=None, help="oracle KKT tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="casched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    run = sub.add_parser("run", parents=[common], help="simulate one policy")
    run.add_argument("--frames", type=int, default=None)
    run.add_argument("--policy", choices=[p.value for p in Policy], default=None)
    cmp_ = sub.add_parser("compare", parents=[common], help="UPF vs weighted and equal PF")
    cmp_.add_argument("--frames", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario)
        if args.log_base is not None:
            scenario = replace(scenario, channel=replace(
                scenario.channel, log_base=2.0 if args.log_base == "2" else math.e))
        if args.frames is not None and args.frames < 1:
            raise CaschedError(f"--frames must be >= 1, got {args.frames}")
        scenario = scenario.with_overrides(kkt_tol=args.kkt_tol, n_frames=args.frames)
        policy = parse_policy(args.policy, "--policy") if getattr(args, "policy", None) else None
        return run_command(scenario, args.mode, args.out, policy=policy)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except (CaschedError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
