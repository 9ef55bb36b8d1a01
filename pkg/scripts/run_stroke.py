#!/usr/bin/env python3
"""End-to-end stroke experiment: synthesizes data if missing, then runs the pipeline."""

from __future__ import annotations

import argparse
from pathlib import Path

from tabfusion.cli import main as tabfusion_main
from tabfusion.synth import write_stroke_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=Path, default=Path("configs/stroke.conf"))
    parser.add_argument("--data", type=Path, default=Path("data/stroke.csv"))
    parser.add_argument("--out", type=Path, default=Path("runs/stroke"))
    parser.add_argument("--seed", type=int)
    args = parser.parse_args()
    if not args.data.exists():
        write_stroke_csv(args.data)
        print(f"synthesized {args.data}")
    argv = ["run", "--config", str(args.config), "--data", str(args.data), "--out", str(args.out)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return tabfusion_main(argv)


if __name__ == "__main__":
    raise SystemExit(main())
