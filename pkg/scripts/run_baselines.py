#!/usr/bin/env python3
"""Emit the benchmark variance table over a mean-photon-number sweep.

Writes baselines.csv with the quantum Cramer-Rao bound, heterodyne floor,
adaptive homodyne asymptote, canonical phase measurement (exact series and
asymptote), the photon-counting asymptote, and the excess of each curve over
the canonical variance.
"""

import sys

from phaseforge.cli import main

if __name__ == "__main__":
    alpha_sqs = ",".join(f"{x:g}" for x in
                         [1, 2, 3, 4, 5, 6, 8, 10, 15, 20, 30, 50, 80, 100])
    sys.exit(main(["baselines", "--alpha-sq", alpha_sqs, "--out",
                   sys.argv[1] if len(sys.argv) > 1 else "out/baselines"]))
