"""Command-line harness: train, sweep, export-fields, check.

Configuration is a JSON document mirroring ExperimentConfig; command-line
flags override file fields, and --seed overrides both. Exit code is 0 on
success and nonzero on any error, failed run or failed check.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .check import run_all_checks
from .checkpoint import CheckpointError, load_checkpoint
from .train import ConfigError, ExperimentConfig, TrainingDiverged, run_training


def _load_config_file(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _apply_overrides(data: dict, args) -> dict:
    data = json.loads(json.dumps(data))  # deep copy
    if getattr(args, "out", None):
        data["out_dir"] = args.out
    if getattr(args, "iterations", None) is not None:
        data.setdefault("training", {})["iterations"] = args.iterations
    if getattr(args, "resolution", None) is not None:
        data.setdefault("evaluation", {})["grid_resolution"] = args.resolution
    if getattr(args, "seed", None) is not None:
        data.setdefault("training", {})["seed"] = args.seed
    return data


def cmd_train(args) -> int:
    data = _apply_overrides(_load_config_file(args.config), args)
    config = ExperimentConfig.from_dict(data)
    try:
        record = run_training(config)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"[{config.name}] done: mse {record.final.mse!r} rel_l2 {record.final.rel_l2!r} "
        f"({record.wall_seconds:.1f}s)"
    )
    return 0


def cmd_sweep(args) -> int:
    data = _load_config_file(args.config)
    runs = data.get("runs")
    if not runs:
        print("error: sweep config has no runs", file=sys.stderr)
        return 1
    out_base = Path(args.out) if args.out else Path(data.get("out_dir", "runs/sweep"))
    out_base.mkdir(parents=True, exist_ok=True)
    table_rows = []
    any_failed = False
    for entry in runs:
        entry = json.loads(json.dumps(entry))
        name = entry.get("name", f"run{len(table_rows)}")
        entry["out_dir"] = str(out_base / name)
        if args.seed is not None:
            entry.setdefault("training", {})["seed"] = args.seed
        if args.iterations is not None:
            entry.setdefault("training", {})["iterations"] = args.iterations
        if args.resolution is not None:
            entry.setdefault("evaluation", {})["grid_resolution"] = args.resolution
        try:
            config = ExperimentConfig.from_dict(entry)
            record = run_training(config)
            table_rows.append(
                (name, record.n_theta, record.compression,
                 record.final.mse, record.final.rel_l2)
            )
        except (TrainingDiverged, ConfigError) as exc:
            print(f"[{name}] FAILED: {exc}", file=sys.stderr)
            any_failed = True
            table_rows.append((name, -1, math.nan, math.nan, math.nan))
    table = out_base / "table.csv"
    with open(table, "w") as fh:
        fh.write("name,n_theta,compression,mse,rel_l2\n")
        for name, n, comp, mse, rel in table_rows:
            fh.write(f"{name},{n},{comp!r},{mse!r},{rel!r}\n")
    print(f"wrote {table}")
    return 1 if any_failed else 0


def cmd_export_fields(args) -> int:
    from .export import export_fields
    from .problem import predict_u

    try:
        _, net, _ = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.out or str(Path(args.checkpoint).parent / "fields")
    export_fields(lambda pts: predict_u(net, pts), args.resolution, out)
    print(f"wrote pred/truth/abserr CSV and PGM files to {out}")
    return 0


def cmd_check(args) -> int:
    results = run_all_checks()
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ttpinn",
        description="Train and benchmark tensor-train compressed PINNs on the Helmholtz problem.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--config", required=True, help="JSON experiment config")
    t.add_argument("--seed", type=int, default=None, help="override the config seed")
    t.add_argument("--out", default=None, help="override the output directory")
    t.add_argument("--iterations", type=int, default=None, help="override iteration count")
    t.add_argument("--resolution", type=int, default=None, help="override evaluation grid")
    t.set_defaults(fn=cmd_train)

    s = sub.add_parser("sweep", help="train a list of configurations, emit a comparison table")
    s.add_argument("--config", required=True, help='JSON file with {"runs": [...]}')
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--iterations", type=int, default=None)
    s.add_argument("--resolution", type=int, default=None)
    s.set_defaults(fn=cmd_sweep)

    e = sub.add_parser("export-fields", help="export prediction/truth/error grids from a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out", default=None)
    e.add_argument("--resolution", type=int, default=256)
    e.set_defaults(fn=cmd_export_fields)

    c = sub.add_parser("check", help="run the built-in verification suites")
    c.set_defaults(fn=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
