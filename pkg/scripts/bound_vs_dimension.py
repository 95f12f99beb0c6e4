#!/usr/bin/env python3
"""Bound-vs-dimension curve data for all three worst-case families.

For each family, runs the engine over d in a doubling grid at a fixed
horizon, verifies every trajectory against its closed form, and writes one
CSV per family with columns d, final_suboptimality, bound.  The files are
ready for external plotting.

Usage:
    python scripts/bound_vs_dimension.py --T 4096 --out-dir results/
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from lastiter import cli  # noqa: E402
from lastiter.constructions import FAMILIES  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=4096)
    ap.add_argument("--dims", default="1,2,4,8,16,32,64")
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    for family in FAMILIES:
        sweep_path = out_dir / f"sweep_{family}.csv"
        curve_path = out_dir / f"curve_{family}.csv"
        code = cli.main([
            "sweep", "--family", family, "--d", args.dims, "--T", str(args.T),
            "--out", str(sweep_path), "--curve-out", str(curve_path),
        ])
        print(f"{family}: wrote {sweep_path} and {curve_path} (exit {code})")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
