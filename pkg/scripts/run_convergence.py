#!/usr/bin/env python3
"""Holevo variance vs adaptive steps at mean photon number 1, by detector resolution.

Sweeps L for PNR 1, 3, 6 at alpha^2 = 1, then fits the exponential
relaxation A*exp(-B*L) + C per resolution.  The fitted C values are the
asymptotes the adaptive strategy reaches with unbounded step counts.

Heavy: with the default trial count this is hours of CPU.  Pass a smaller
--trials for a smoke run.
"""

import argparse
import sys

from phaseforge.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/convergence")
    parser.add_argument("--trials", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    steps = ",".join(str(l) for l in range(20, 220, 20))
    code = main(["sweep", "--alpha-sq", "1", "--steps", steps, "--pnr", "1,3,6",
                 "--trials", str(args.trials), "--seed", str(args.seed),
                 "--grid", "512", "--out", args.out])
    if code != 0:
        return code
    return main(["fit", f"{args.out}/ensembles.csv", "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
