#!/usr/bin/env python3
"""Shot/way sweep in the hard regime (wide clusters, sigma 0.35).

Runs pn/mn/sc at {5,10}-way x {1,5}-shot, 5 runs x 200 test episodes each,
and prints the table. Expected pattern, mirroring the paper's grids: accuracy
rises from 1-shot to 5-shot and falls from 5-way to 10-way for every method.

Usage: python scripts/run_hard_regime.py [--out-dir OUT] [--seed S]
"""

import argparse
import sys
import tempfile
from pathlib import Path

from domainshot.cli import run_command


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out_dir) if args.out_dir else Path(tempfile.mkdtemp(prefix="hard-"))
    data = out / "data"
    rc = run_command(
        ["synth", "--domains", "18", "--per-class", "30", "--dim", "16",
         "--sigma", "0.35", "--gap", "1.0", "--flip", "0.5", "--splits", "6,6,6",
         "--seed", str(args.seed), "--out", str(data)]
    )
    if rc != 0:
        return rc
    return run_command(
        ["run-matrix", "--data", str(data), "--methods", "pn,mn,sc,baseline",
         "--ways", "5,10", "--shots", "1,5", "--runs", "5", "--test-episodes", "200",
         "--threads", str(args.threads), "--seed", str(args.seed),
         "--out", str(out / "matrix")]
    )


if __name__ == "__main__":
    sys.exit(main())
