#!/usr/bin/env python3
"""Create the stroke CSV used by configs/stroke.conf.

Either synthesizes a stroke-shaped table (default) or cleans a real export by
dropping its `id` column so the shipped schema applies:

    python scripts/make_stroke_data.py --out data/stroke.csv
    python scripts/make_stroke_data.py --from-csv ~/healthcare-dataset-stroke-data.csv --out data/stroke.csv
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

from tabfusion.synth import DEFAULT_N_ROWS, DEFAULT_SEED, write_stroke_csv


def strip_id_column(src: Path, dst: Path) -> None:
    with src.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    keep = [i for i, name in enumerate(rows[0]) if name != "id"]
    dst.parent.mkdir(parents=True, exist_ok=True)
    with dst.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([row[i] for i in keep])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", type=Path, default=Path("data/stroke.csv"))
    parser.add_argument("--rows", type=int, default=DEFAULT_N_ROWS)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument(
        "--from-csv",
        type=Path,
        help="clean a real stroke export instead of synthesizing",
    )
    args = parser.parse_args()
    if args.from_csv is not None:
        strip_id_column(args.from_csv, args.out)
    else:
        write_stroke_csv(args.out, args.rows, args.seed)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
