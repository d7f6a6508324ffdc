#!/usr/bin/env python3
"""Visibility and relative peak-SNR surfaces over the fractional orders.

Writes one CSV covering m in {20, 30}, mu in [-3, 3] \\ {0} and
nu in (0, 3] on a 0.1 grid; columns V and Rp_over_sqrtN are the surfaces
to plot against (mu, nu) per m.

Usage:
    python scripts/sweep_surfaces.py --out runs/surfaces.csv
"""

import argparse
from pathlib import Path

from fracgi.cli import main as cli_main


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/surfaces.csv")
    parser.add_argument("--m", default="20,30")
    args = parser.parse_args()

    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    code = cli_main(
        ["sweep", "--m", args.m, "--mu=-3:3:0.1", "--nu", "0.1:3:0.1", "--out", args.out]
    )
    raise SystemExit(code)


if __name__ == "__main__":
    main()
