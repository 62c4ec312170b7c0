#!/usr/bin/env python3
"""Regenerate the committed miniature dataset under figures/demo_data.

Runs the two demo experiment specs with the wormsim CLI and merges their
CSV outputs into one directory.  Deterministic: rerunning reproduces the
committed files byte for byte.

Usage: python figures/scripts/make_demo_dataset.py [--out figures/demo_data]
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from wormsim.cli import default_worker_count, execute, load_spec

HERE = Path(__file__).resolve().parent
CSVS = ("prevalence.csv", "timeseries.csv", "thresholds.csv", "metrics.csv")


def merge_csvs(dirs: list[Path], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for fname in CSVS:
        header = None
        body: list[str] = []
        for d in dirs:
            lines = (d / fname).read_text().splitlines()
            if header is None:
                header = lines[0]
            elif lines[0] != header:
                raise SystemExit(f"{d / fname}: header mismatch")
            body.extend(lines[1:])
        (out_dir / fname).write_text("\n".join([header] + sorted(body)) + "\n")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(HERE.parent / "demo_data"))
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()
    workers = args.workers if args.workers is not None else default_worker_count()

    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        run_dirs = []
        for cfg in ("demo_rgg.cfg", "demo_rg.cfg"):
            spec = load_spec(HERE.parent / "demo" / cfg)
            run_dir = tmp_path / spec.name
            execute(spec, run_dir, worker_count=workers)
            run_dirs.append(run_dir)
        merge_csvs(run_dirs, Path(args.out))
    print(f"demo dataset written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
