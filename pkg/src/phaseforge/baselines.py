"""Closed-form and series benchmarks for single-shot phase estimation.

All variances are functions of the field amplitude alpha (mean photon number
alpha**2): the quantum Cramer-Rao bound, the heterodyne floor, the best known
adaptive homodyne (asymptotic form plus its known value at mean photon number
one), and the canonical phase measurement both as an exact series and in its
large-amplitude expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NonPositiveAlpha

# Holevo variance of the best adaptive homodyne strategy at mean photon number 1
MKII_AT_MPN1 = 0.767

# fitted asymptote of the photon-counting strategy, with 1-sigma uncertainties
NONGAUSSIAN_COEFF_ALPHA2 = 0.250
NONGAUSSIAN_COEFF_ALPHA2_SIGMA = 0.001
NONGAUSSIAN_COEFF_ALPHA4 = 0.520
NONGAUSSIAN_COEFF_ALPHA4_SIGMA = 0.010


def _require_positive(alpha: float) -> float:
    a = float(alpha)
    if not (math.isfinite(a) and a > 0.0):
        raise NonPositiveAlpha(f"amplitude must be > 0, got {alpha!r}")
    return a


def qcrb(alpha: float) -> float:
    """Quantum Cramer-Rao bound 1/(4 alpha^2)."""
    a = _require_positive(alpha)
    return 1.0 / (4.0 * a * a)


def heterodyne_variance(alpha: float) -> float:
    """Heterodyne floor 1/(2 alpha^2)."""
    a = _require_positive(alpha)
    return 1.0 / (2.0 * a * a)


def mkii_asymptotic(alpha: float) -> float:
    """Adaptive homodyne (Mark II) Holevo variance, valid for alpha >> 1."""
    a = _require_positive(alpha)
    return 1.0 / (4.0 * a * a) + 1.0 / (8.0 * a ** 3)


def cpm_exact(alpha: float) -> float:
    """Canonical-phase-measurement Holevo variance 1/S^2 - 1 from its series.

    S = e^{-alpha^2} * sum_n alpha^{2n+1} / (n! sqrt(n+1)); terms are summed in
    the log domain until the running term falls below 1e-15 of the partial sum
    and the index clears the Poisson bulk at alpha^2 + 10*sqrt(alpha^2+1).
    """
    a = float(alpha)
    if not (math.isfinite(a) and a >= 0.0):
        raise NonPositiveAlpha(f"amplitude must be >= 0, got {alpha!r}")
    if a == 0.0:
        return math.inf
    asq = a * a
    n_bulk = int(asq + 10.0 * math.sqrt(asq + 1.0)) + 1
    n_max = n_bulk
    s = 0.0
    while True:
        n = np.arange(0, n_max + 1)
        log_terms = (2 * n + 1) * math.log(a) - gammaln(n + 1) - 0.5 * np.log(n + 1.0) - asq
        terms = np.exp(log_terms)
        s = float(terms.sum())
        if terms[-1] < 1e-15 * s and n_max >= n_bulk:
            break
        n_max *= 2
    return 1.0 / (s * s) - 1.0


def cpm_asymptotic(alpha: float) -> float:
    """Large-amplitude expansion 1/(4 alpha^2) + 5/(32 alpha^4) of cpm_exact."""
    a = _require_positive(alpha)
    return 1.0 / (4.0 * a * a) + 5.0 / (32.0 * a ** 4)


def nongaussian_asymptotic(alpha: float) -> float:
    """Fitted asymptote of the adaptive photon-counting strategy."""
    a = _require_positive(alpha)
    return NONGAUSSIAN_COEFF_ALPHA2 / (a * a) + NONGAUSSIAN_COEFF_ALPHA4 / (a ** 4)


@dataclass(frozen=True)
class BaselineRow:
    """All benchmark variances evaluated at one mean photon number."""

    alpha_sq: float
    qcrb: float
    heterodyne: float
    mkii_asymptotic: float
    cpm_exact: float
    cpm_asymptotic: float
    nongaussian_asymptotic: float


def baseline_table(alpha_sq_values) -> list[BaselineRow]:
    """Benchmark variances per mean photon number, ordering-checked per row."""
    rows = []
    for asq in alpha_sq_values:
        a = math.sqrt(float(asq))
        row = BaselineRow(
            alpha_sq=float(asq),
            qcrb=qcrb(a),
            heterodyne=heterodyne_variance(a),
            mkii_asymptotic=mkii_asymptotic(a),
            cpm_exact=cpm_exact(a),
            cpm_asymptotic=cpm_asymptotic(a),
            nongaussian_asymptotic=nongaussian_asymptotic(a),
        )
        if not row.qcrb < row.cpm_exact:
            raise AssertionError(f"bound ordering violated at alpha_sq={asq}")
        rows.append(row)
    return rows
