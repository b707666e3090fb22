"""Run the three RTS-24 scenarios through the CLI and print the summary table."""

import argparse
import sys
from pathlib import Path

from pmufdi.cli import main as cli


def run(*argv):
    code = cli([str(a) for a in argv])
    if code not in (0, 3):
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/scenarios")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    root = Path(args.out)
    common = ["--case", "rts24.grid", "--seed", args.seed]
    run("simulate", *common, "--out", root / "no_attack")
    run("detect", *common, "--out", root / "no_attack", "--lambda-sweep", "1.05:1.5:10")
    for name, bus, phase in [("bus4", 4, 0.2), ("bus16", 16, 0.3)]:
        run("attack", *common, "--out", root / name, "--mult", "--bus", bus, "--phase", phase)
        run("detect", *common, "--out", root / name, "--lambda-sweep", "1.05:1.5:10")
    run("report", root)


if __name__ == "__main__":
    main()
