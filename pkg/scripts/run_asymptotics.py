#!/usr/bin/env python3
"""Large-photon-number scaling: power-model fits and coefficient extrapolation.

Sweeps alpha^2 over 6..30 for several step counts at PNR(3), fits the
inverse-power models per L, runs backward elimination, and extrapolates the
surviving coefficients to the infinite-step limit with an exponential trend.

Heavy: budget several CPU-hours at the default trial count.
"""

import argparse
import sys

from phaseforge.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/asymptotics")
    parser.add_argument("--trials", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--steps", default="20,40,60,80,100,120,140,160,180,200")
    args = parser.parse_args(argv)

    alpha_sqs = ",".join(str(a) for a in range(6, 32, 2))
    code = main(["sweep", "--alpha-sq", alpha_sqs, "--steps", args.steps,
                 "--pnr", "3", "--trials", str(args.trials),
                 "--seed", str(args.seed), "--grid", "512", "--out", args.out])
    if code != 0:
        return code
    return main(["fit", f"{args.out}/ensembles.csv", "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
