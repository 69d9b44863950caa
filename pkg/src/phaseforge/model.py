"""Photon statistics of displaced coherent states with bucketed number resolution.

One adaptive step interferes the phase-carrying field (per-step amplitude
``alpha / sqrt(L)``) with a local-oscillator displacement ``beta`` and counts
photons on a detector that resolves ``0 .. m-1`` clicks plus one overflow
bucket for ``>= m``.  The click number is Poisson with mean

    lam = alpha^2/L + |beta|^2 - 2*alpha*|beta|*cos(phi - theta)/sqrt(L)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

TWO_PI = 2.0 * math.pi

# factorials up to here are exact in float64 and cheap via recursion;
# larger counts go through log-gamma to avoid overflow at lam > 50
_DIRECT_K_MAX = 20


def reduce_angle(theta: float) -> float:
    """Map an angle to the canonical interval [0, 2*pi)."""
    t = math.fmod(float(theta), TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:  # fmod edge for tiny negative inputs
        t = 0.0
    return t


def wrap_signed(delta: float) -> float:
    """Wrap an angle difference into (-pi, pi]."""
    d = math.fmod(float(delta), TWO_PI)
    if d <= -math.pi:
        d += TWO_PI
    elif d > math.pi:
        d -= TWO_PI
    return d


def fold_halfturn(delta) -> np.ndarray | float:
    """Absolute circular offset in [0, pi]; sign of the wrapped difference dropped.

    Mirror-image designs (theta on either side of the estimate) are physically
    equivalent, so per-trial design offsets are pooled on the folded scale.
    """
    d = np.mod(np.asarray(delta, dtype=float), TWO_PI)
    d = np.where(d > math.pi, TWO_PI - d, d)
    if np.ndim(delta) == 0:
        return float(d)
    return d


@dataclass(frozen=True)
class ProbeSpec:
    """Physical parameters of one single-shot estimation experiment.

    alpha:   field amplitude; mean photon number of the full state is alpha**2
    steps_L: number of adaptive steps; each step carries energy alpha**2/steps_L
    pnr_m:   detector resolution; counts m and above land in one overflow bucket
    """

    alpha: float
    steps_L: int
    pnr_m: int

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha!r}")
        if not (isinstance(self.steps_L, int) and self.steps_L >= 1):
            raise ValueError(f"steps_L must be an integer >= 1, got {self.steps_L!r}")
        if not (isinstance(self.pnr_m, int) and self.pnr_m >= 1):
            raise ValueError(f"pnr_m must be an integer >= 1, got {self.pnr_m!r}")
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def step_amplitude(self) -> float:
        return self.alpha / math.sqrt(self.steps_L)

    @property
    def n_outcomes(self) -> int:
        """Size of the detection alphabet: counts 0..m-1 plus the overflow bucket."""
        return self.pnr_m + 1


@dataclass(frozen=True)
class DisplacementDesign:
    """One adaptive step's control variable beta = magnitude * exp(i*theta)."""

    theta: float
    magnitude: float

    def __post_init__(self):
        if not (math.isfinite(self.magnitude) and self.magnitude >= 0.0):
            raise ValueError(f"magnitude must be finite and >= 0, got {self.magnitude!r}")
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta!r}")
        object.__setattr__(self, "theta", reduce_angle(self.theta))
        object.__setattr__(self, "magnitude", float(self.magnitude))


def poisson_mean(spec: ProbeSpec, design: DisplacementDesign, phi: float) -> float:
    """Mean click number |alpha e^{i phi}/sqrt(L) - beta|^2 for one step."""
    a = spec.step_amplitude
    b = design.magnitude
    lam = a * a + b * b - 2.0 * a * b * math.cos(phi - design.theta)
    return max(lam, 0.0)


def poisson_mean_grid(spec: ProbeSpec, design: DisplacementDesign, phis: np.ndarray) -> np.ndarray:
    """Vectorized poisson_mean over an array of phases."""
    a = spec.step_amplitude
    b = design.magnitude
    lam = (a * a + b * b) - (2.0 * a * b) * np.cos(phis - design.theta)
    np.maximum(lam, 0.0, out=lam)
    return lam


def bucket_pmf(lam: np.ndarray, pnr_m: int) -> np.ndarray:
    """Bucketed Poisson pmf: counts 0..m-1 plus the overflow bucket >= m.

    Accepts any array shape for ``lam``; the outcome axis is appended last.
    The overflow entry is the complement of a compensated running sum, so the
    full row sums to one to within a few ulp even for hundreds of buckets.
    """
    lam = np.asarray(lam, dtype=float)
    out = np.empty(lam.shape + (pnr_m + 1,))
    term = np.exp(-lam)
    out[..., 0] = term
    total = term.copy()
    comp = np.zeros_like(total)
    if pnr_m - 1 > _DIRECT_K_MAX:
        with np.errstate(divide="ignore"):
            loglam = np.log(lam)
    for k in range(1, pnr_m):
        if k <= _DIRECT_K_MAX:
            term = term * lam / k
        else:
            with np.errstate(invalid="ignore"):
                term = np.exp(k * loglam - lam - gammaln(k + 1.0))
            term = np.nan_to_num(term, nan=0.0)
        out[..., k] = term
        # Kahan step: keeps the complement accurate after many small terms
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    out[..., pnr_m] = np.clip(1.0 - total, 0.0, 1.0)
    return out


def outcome_pmf(spec: ProbeSpec, design: DisplacementDesign, phi: float) -> np.ndarray:
    """Probability vector over the (m+1)-outcome detection alphabet."""
    lam = poisson_mean(spec, design, phi)
    return bucket_pmf(np.asarray(lam), spec.pnr_m)


def outcome_likelihood(spec: ProbeSpec, design: DisplacementDesign, outcome: int,
                       phis: np.ndarray) -> np.ndarray:
    """Likelihood of one detection outcome evaluated at an array of phases."""
    if not 0 <= outcome <= spec.pnr_m:
        raise ValueError(f"outcome must lie in 0..{spec.pnr_m}, got {outcome}")
    lam = poisson_mean_grid(spec, design, phis)
    if outcome == spec.pnr_m:
        return bucket_pmf(lam, spec.pnr_m)[..., spec.pnr_m]
    if outcome <= _DIRECT_K_MAX:
        return np.exp(-lam) * lam ** outcome / math.factorial(outcome)
    with np.errstate(divide="ignore", invalid="ignore"):
        like = np.exp(outcome * np.log(lam) - lam - gammaln(outcome + 1.0))
    return np.nan_to_num(like, nan=0.0)


def sample_outcome(spec: ProbeSpec, design: DisplacementDesign, phi: float,
                   rng: np.random.Generator) -> int:
    """Draw one detection outcome; consumes exactly one uniform from ``rng``."""
    return int(sample_outcomes(spec, design, phi, rng, 1)[0])


def sample_outcomes(spec: ProbeSpec, design: DisplacementDesign, phi: float,
                    rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized outcome draws; stream-compatible with repeated sample_outcome."""
    cdf = np.cumsum(outcome_pmf(spec, design, phi))
    u = rng.random(size)
    k = np.searchsorted(cdf, u, side="right")
    return np.minimum(k, spec.pnr_m).astype(np.int64)
