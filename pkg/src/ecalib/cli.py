"""Command-line entry points.

Subcommands:
  simulate   one synthetic run, full per-round log
  validate   M-trial Monte Carlo, error-rate estimates and a pass/fail gate
  calibrate  one run against an external oracle command
  report     collect summary curves from run directories into one CSV
  sweep      cartesian grid over {epsilon, delta, alpha, strategy}

Exit status: 0 on success (and a passing validate), 1 on failure or any
config/protocol error, 2 when report finds no runs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import logging
import math
import sys
from pathlib import Path

from .core import BettingStrategy, ErrorMetric
from .errors import EcalibError
from .oracle import oracle_client
from .orchestrator import run_altt
from .runio import (
    OracleSpec,
    RunPlan,
    load_config,
    read_manifest,
    realized_curves,
    replay_check,
    summary_curves,
    utc_now,
    write_final_json,
    write_manifest,
    write_rounds_csv,
    write_summary_csv,
)
from .simharness import derive_reliable, run_trials

logger = logging.getLogger("ecalib")


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _override_seed(plan: RunPlan, seed: int | None) -> RunPlan:
    if seed is None:
        return plan
    return RunPlan(dataclasses.replace(plan.cfg, seed=seed), plan.source, plan.sweep)


def _require_synthetic(plan: RunPlan, command: str) -> None:
    if isinstance(plan.source, OracleSpec):
        raise EcalibError(f"{command} needs a synthetic source (ground truth required)")


def cmd_simulate(args) -> int:
    plan = _override_seed(load_config(args.config), args.seed)
    _require_synthetic(plan, "simulate")
    out = _prepare_out(args.out)
    started = utc_now()
    source = plan.source.make_source(plan.cfg.seed, 0)
    result = run_altt(plan.cfg, source, trial=0, record_rounds=True)
    reliable = derive_reliable(plan.cfg, plan.source)
    write_manifest(out, plan, started=started, finished=utc_now(), stop_reason=result.stop_reason.value)
    write_rounds_csv(out, [(0, result)], bool(plan.cfg.extra_metrics))
    write_summary_csv(out, *realized_curves(result, reliable))
    write_final_json(
        out,
        {
            "selected": sorted(result.selected),
            "stop_reason": result.stop_reason.value,
            "T": result.T,
            "n_queries": result.n_queries,
        },
    )
    logger.info(
        "simulate: stopped at t=%d (%s), selected %s", result.T, result.stop_reason.value, sorted(result.selected)
    )
    return 0


def cmd_validate(args) -> int:
    plan = _override_seed(load_config(args.config), args.seed)
    _require_synthetic(plan, "validate")
    out = _prepare_out(args.out)
    cfg = plan.cfg
    started = utc_now()
    reliable = derive_reliable(cfg, plan.source)
    summary = run_trials(
        cfg,
        plan.source,
        M=args.trials,
        base_seed=cfg.seed,
        workers=args.workers,
        compute_tpr=bool(reliable),
    )
    if cfg.error_metric is ErrorMetric.FWER:
        estimate_name, estimate = "fwer_hat", summary.fwer_hat
    else:
        estimate_name, estimate = "fdr_hat_unconditional", summary.fdr_hat_unconditional
    margin = 3.0 * math.sqrt(cfg.delta * (1.0 - cfg.delta) / args.trials)
    passed = estimate <= cfg.delta + margin
    write_manifest(out, plan, started=started, finished=utc_now(), trials=args.trials)
    write_summary_csv(out, *summary_curves(summary))
    write_final_json(
        out,
        {
            "trials": summary.M,
            "fwer_hat": summary.fwer_hat,
            "fdr_hat_conditional": summary.fdr_hat_conditional,
            "fdr_hat_unconditional": summary.fdr_hat_unconditional,
            "tpr_hat": summary.tpr_hat,
            "mean_stop_round": summary.mean_stop_round,
            "mean_queries": summary.mean_queries,
            "margins": summary.margins,
            "stop_reason_counts": summary.stop_reason_counts,
            "gate": {
                "metric": estimate_name,
                "estimate": estimate,
                "delta": cfg.delta,
                "margin_3sigma": margin,
                "pass": passed,
            },
        },
    )
    logger.info(
        "validate: %s=%.4f vs delta=%.3f + margin=%.4f -> %s",
        estimate_name,
        estimate,
        cfg.delta,
        margin,
        "PASS" if passed else "FAIL",
    )
    return 0 if passed else 1


def cmd_calibrate(args) -> int:
    plan = load_config(args.config)
    if not isinstance(plan.source, OracleSpec):
        raise EcalibError("calibrate needs an oracle source")
    command = args.oracle or plan.source.command
    timeout = args.timeout if args.timeout is not None else plan.source.timeout
    out = _prepare_out(args.out)
    started = utc_now()
    with oracle_client(command, plan.cfg, timeout) as source:
        result = run_altt(plan.cfg, source, trial=0, record_rounds=True)
    write_manifest(out, plan, started=started, finished=utc_now(), stop_reason=result.stop_reason.value)
    write_rounds_csv(out, [(0, result)], False)
    write_summary_csv(out, *realized_curves(result, None))
    write_final_json(
        out,
        {
            "selected": sorted(result.selected),
            "stop_reason": result.stop_reason.value,
            "T": result.T,
            "n_queries": result.n_queries,
        },
    )
    logger.info(
        "calibrate: stopped at t=%d (%s), selected %s", result.T, result.stop_reason.value, sorted(result.selected)
    )
    return 0


def cmd_report(args) -> int:
    root = Path(args.input)
    run_dirs = []
    if (root / "summary.csv").exists():
        run_dirs.append(root)
    else:
        for child in sorted(root.glob("*")):
            if (child / "summary.csv").exists():
                run_dirs.append(child)
    if not run_dirs:
        print("no runs found", file=sys.stderr)
        return 2
    rows = []
    for run in run_dirs:
        with open(run / "summary.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rows.append([run.name, row["t"], row["tpr"], row["fwer"], row["fdr"], row["mean_set_size"]])
    sink = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(sink)
        w.writerow(["run", "t", "tpr", "fwer", "fdr", "mean_set_size"])
        w.writerows(rows)
    finally:
        if args.out:
            sink.close()
    return 0


def cmd_sweep(args) -> int:
    plan = _override_seed(load_config(args.config), args.seed)
    _require_synthetic(plan, "sweep")
    if not plan.sweep:
        raise EcalibError("config has no sweep block")
    out = _prepare_out(args.out)
    started = utc_now()
    axes = {
        "strategy": plan.sweep.get("strategy", [plan.cfg.betting.strategy.value]),
        "alpha": plan.sweep.get("alpha", [plan.cfg.alpha]),
        "delta": plan.sweep.get("delta", [plan.cfg.delta]),
        "epsilon": plan.sweep.get("epsilon", [plan.cfg.acquisition.epsilon]),
    }
    rows = []
    for strategy, alpha, delta, epsilon in itertools.product(
        axes["strategy"], axes["alpha"], axes["delta"], axes["epsilon"]
    ):
        cfg = dataclasses.replace(
            plan.cfg,
            alpha=float(alpha),
            delta=float(delta),
            betting=dataclasses.replace(plan.cfg.betting, strategy=BettingStrategy(strategy)),
            acquisition=dataclasses.replace(plan.cfg.acquisition, epsilon=float(epsilon)),
        )
        reliable = derive_reliable(cfg, plan.source)
        summary = run_trials(
            cfg,
            plan.source,
            M=args.trials,
            base_seed=cfg.seed,
            workers=args.workers,
            compute_tpr=bool(reliable),
        )
        rows.append(
            [
                strategy,
                alpha,
                delta,
                epsilon,
                summary.fwer_hat,
                summary.fdr_hat_unconditional,
                summary.fdr_hat_conditional,
                summary.tpr_hat,
                summary.mean_stop_round,
                summary.mean_queries,
            ]
        )
        logger.info(
            "sweep cell strategy=%s alpha=%s delta=%s epsilon=%s: fwer=%.4f tpr=%.4f",
            strategy, alpha, delta, epsilon, summary.fwer_hat, summary.tpr_hat,
        )
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "strategy", "alpha", "delta", "epsilon",
                "fwer_hat", "fdr_hat_unconditional", "fdr_hat_conditional",
                "tpr_hat", "mean_stop_round", "mean_queries",
            ]
        )
        w.writerows(rows)
    write_manifest(out, plan, started=started, finished=utc_now(), trials=args.trials)
    return 0


def cmd_replay(args) -> int:
    checked = replay_check(args.input)
    manifest = read_manifest(Path(args.input))
    logger.info("replay: %d rounds reproduced exactly (run of %s)", checked, manifest["started_utc"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecalib", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one synthetic run with a full round log")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="Monte Carlo error-rate estimation and gate")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calibrate", help="one run against an external oracle command")
    p.add_argument("--config", required=True)
    p.add_argument("--oracle", default=None, help="override the config's oracle command")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", help="collect summary curves into one CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="grid over epsilon/delta/alpha/strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="verify a run directory reproduces its own log")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EcalibError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
