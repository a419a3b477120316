#!/usr/bin/env python3
"""Run the two benchmark sweeps and export solution fields.

Table 1: dense models (widths 32/64/128/256). Table 2: TT models built from a
256-wide MLP with hidden-layer compression targets 100x/40x/20x. 128-wide TT
variants are available behind --include-128 (their parameter totals come from
the uniform-rank planner).

Each table is a `ttpinn sweep`; pass --iterations to shorten for a quick look.

    python scripts/benchmark_tables.py --table 1 --out runs/table1
    python scripts/benchmark_tables.py --table 2 --out runs/table2 --seed 0
    python scripts/benchmark_tables.py --fields runs/table2/tt256-c100 --out runs/fig
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ttpinn.cli import main as cli_main


def base_run(name, model, seed):
    return {
        "name": name,
        "model": model,
        "training": {"iterations": 40000, "n_residual": 1200, "seed": seed},
        "schedule": {"lr0": 1e-3, "decay": 0.9, "period": 1000},
        "evaluation": {"grid_resolution": 256, "report_interval": 500},
    }


def table1_runs(seed):
    return [
        base_run(f"dense{w}", {"width": w, "hidden_layers": 3, "kind": "dense"}, seed)
        for w in (32, 64, 128, 256)
    ]


def table2_runs(seed, include_128=False):
    def tt(width, factors, target):
        return {
            "width": width,
            "hidden_layers": 3,
            "kind": "tt",
            "row_factors": factors,
            "col_factors": factors,
            "target_compression": target,
        }

    runs = [
        base_run(f"tt256-c{c:g}", tt(256, [4, 4, 4, 4], c), seed) for c in (100.0, 40.0, 20.0)
    ]
    if include_128:
        runs += [
            base_run(f"tt128-c{c:g}", tt(128, [4, 4, 8], c), seed) for c in (40.0, 20.0)
        ]
    return runs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--table", choices=["1", "2"], help="which table to reproduce")
    ap.add_argument("--fields", metavar="RUN_DIR", help="export field grids from a finished run")
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=None)
    ap.add_argument("--include-128", action="store_true", help="add the 128-wide TT rows")
    args = ap.parse_args(argv)

    if args.fields:
        ckpt = Path(args.fields) / "model.ckpt"
        return cli_main(["export-fields", "--checkpoint", str(ckpt), "--out", args.out])

    if not args.table:
        ap.error("pick --table 1, --table 2 or --fields RUN_DIR")
    runs = table1_runs(args.seed) if args.table == "1" else table2_runs(args.seed, args.include_128)
    sweep = {"runs": runs}
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(sweep, fh)
        cfg_path = fh.name
    cmd = ["sweep", "--config", cfg_path, "--out", args.out]
    if args.iterations is not None:
        cmd += ["--iterations", str(args.iterations)]
    return cli_main(cmd)


if __name__ == "__main__":
    sys.exit(main())
