"""Command-line entry point: train, evaluate, export-plotdata, print-default-config."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .checkpoint import Checkpoint, CheckpointError
from .config import ConfigError, RunConfig, config_hash, dump_config, load_config
from .envelope import RECOVERY_ENVELOPE, check_recovery_criterion
from .grid_env import FaultScenario
from .trainer import RolloutError, evaluate, train

logger = logging.getLogger("safe_ars")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
OUT_DIR_ENV = "SAFE_ARS_OUT_DIR"
TRAJECTORY_HEADER = ["t", "V4", "V7", "V8", "V18", "p4", "p7", "p18",
                     "a4", "a7", "a18", "reward", "safety"]
ENVELOPE_COLUMN = "envelope_lower"
FINAL_CHECKPOINT = "final.ckpt"
METRICS_FILE = "metrics.jsonl"


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _out_dir(args, config: RunConfig) -> Path:
    d = args.out_dir or os.environ.get(OUT_DIR_ENV) or config.output.out_dir or "runs"
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "parallelism", None) is not None:
        config = config.replace(parallelism=args.parallelism)
    return config


def cmd_print_default_config(args) -> int:
    sys.stdout.write(dump_config(RunConfig()))
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load(args)
    out = _out_dir(args, config)
    digest = config_hash(config)
    start = None
    if args.resume:
        start = Checkpoint.load(args.resume)
        if start.config_hash != digest and not args.force:
            raise UsageError(
                f"checkpoint config hash {start.config_hash} does not match config {digest}; "
                "pass --force to resume anyway"
            )
        if args.force:
            start = start.replace(config_hash=digest)
    (out / "config.yaml").write_text(dump_config(config), encoding="utf-8")
    metrics_path = out / METRICS_FILE
    every = config.output.checkpoint_every

    with open(metrics_path, "a" if start is not None else "w", encoding="utf-8", newline="\n") as fh:
        def on_iteration(state, record):
            fh.write(json.dumps(record.metrics(), sort_keys=True) + "\n")
            fh.flush()
            if every > 0 and state.iteration % every == 0:
                state.save(out / f"ckpt_{state.iteration:06d}.ckpt")

        state, records = train(
            config.trainer, config.env_factory(), config.task_list(),
            start=start, parallelism=config.parallelism,
            callback=on_iteration, config_hash=digest,
        )
    state.save(out / FINAL_CHECKPOINT)
    last = records[-1] if records else None
    print(f"trained {state.iteration} iterations, lambda={state.lam:g}"
          + (f", mean plain reward {last.mean_plain:.4f}" if last else ""))
    print(f"checkpoint: {out / FINAL_CHECKPOINT}")
    return EXIT_OK


def trajectory_rows(result) -> list[list[str]]:
    rows = []
    for obs, action, reward, safety, info in result.trajectory:
        rows.append([_fmt(info["outcome"].t), *(_fmt(v) for v in obs),
                     *(_fmt(a) for a in action), _fmt(reward), _fmt(safety)])
    return rows


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_evaluate(args) -> int:
    config = _load(args)
    state = Checkpoint.load(args.checkpoint)
    if config.env != "grid":
        raise UsageError("evaluate reports the voltage recovery criterion; use a grid config")
    scenario = FaultScenario(args.fault_bus, args.duration, args.fault_start)
    if scenario.fault_bus not in config.surrogate.prox:
        raise UsageError(f"fault bus {scenario.fault_bus} is outside the configured topology")
    result = evaluate(state, config.env_factory(), [scenario], record=True)[0]
    outcomes = [row[4]["outcome"] for row in result.trajectory]
    report = check_recovery_criterion(outcomes, scenario.t_pf)
    shed = sum(sum(o.shed_amounts) for o in outcomes)
    if args.out:
        write_csv(args.out, TRAJECTORY_HEADER, trajectory_rows(result))
    summary = {
        "scenario": scenario.label(),
        "t_pf": scenario.t_pf,
        "criterion_pass": report.passed,
        "first_violation_time": report.first_violation_time,
        "violating_bus": None if report.violating_bus is None else
        (4, 7, 8, 18)[report.violating_bus],
        "violating_samples": report.n_violating_samples,
        "plain_reward": result.total_plain,
        "total_shed": shed,
        "blackout": result.blackout,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


class PlotDataError(ValueError):
    pass


def export_plotdata(src, dst, t_pf: float, envelope=RECOVERY_ENVELOPE) -> int:
    """Copy a trajectory CSV adding the envelope lower bound at ``t - t_pf``."""
    with open(src, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotDataError(f"{src}:1: empty file") from None
        if "t" not in header:
            raise PlotDataError(f"{src}:1: header lacks a 't' column")
        ti = header.index("t")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise PlotDataError(f"{src}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                t = float(row[ti])
            except ValueError:
                raise PlotDataError(f"{src}:{lineno}: bad time value {row[ti]!r}") from None
            bound = envelope.lower_bound(t - t_pf)
            rows.append(row + [_fmt(bound)])
    write_csv(dst, header + [ENVELOPE_COLUMN], rows)
    return len(rows)


def cmd_export_plotdata(args) -> int:
    n = export_plotdata(args.trajectory, args.out, args.t_pf)
    print(f"wrote {n} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safe-ars", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run safe (or standard) ARS training")
    t.add_argument("--config", type=str, default=None)
    t.add_argument("--resume", type=str, default=None, help="checkpoint to continue from")
    t.add_argument("--force", action="store_true", help="resume despite a config hash mismatch")
    t.add_argument("--seed", type=int, default=None, help="override trainer.seed")
    t.add_argument("--parallelism", type=int, default=None)
    t.add_argument("--out-dir", type=str, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="deterministic rollout of a checkpoint on one fault")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", type=str, default=None)
    e.add_argument("--fault-bus", type=int, default=4)
    e.add_argument("--duration", type=float, default=0.15)
    e.add_argument("--fault-start", type=float, default=1.0)
    e.add_argument("--out", type=str, default=None, help="trajectory CSV path")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("export-plotdata", help="add the recovery envelope to a trajectory CSV")
    x.add_argument("trajectory")
    x.add_argument("--t-pf", type=float, required=True, help="fault clearing time (s)")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export_plotdata)

    d = sub.add_parser("print-default-config", help="print the full default configuration")
    d.set_defaults(func=cmd_print_default_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, CheckpointError, PlotDataError, RolloutError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
