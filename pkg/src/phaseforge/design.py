"""Per-step selection of the displacement design.

The magnitude |beta| is slaved to the phase theta through the
information-optimal rule |beta| = alpha / (sqrt(L) * cos(phi_hat - theta)),
with |cos| floored at a small epsilon so the magnitude stays finite near
quadrature.  The phase theta is chosen by maximizing a cost function of the
predictive posterior (expected sharpness by default, mutual information as
the alternative) over a coarse grid followed by golden-section refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import DegenerateLikelihood, NullingSingularity
from .model import (
    TWO_PI,
    DisplacementDesign,
    ProbeSpec,
    bucket_pmf,
    outcome_likelihood,
    reduce_angle,
)
from .posterior import PhasePosterior, _phase_table

COST_FUNCTIONS = ("expected_sharpness", "mutual_information")

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DesignPolicy:
    """Knobs of the per-step design search."""

    cost_function: str = "expected_sharpness"
    theta_candidates: int = 32
    refine_iters: int = 20
    beta_cap_epsilon: float = 0.05

    def __post_init__(self):
        if self.cost_function not in COST_FUNCTIONS:
            raise ValueError(f"cost_function must be one of {COST_FUNCTIONS}, "
                             f"got {self.cost_function!r}")
        if not (isinstance(self.theta_candidates, int) and self.theta_candidates >= 4):
            raise ValueError(f"theta_candidates must be an integer >= 4, "
                             f"got {self.theta_candidates!r}")
        if not (isinstance(self.refine_iters, int) and self.refine_iters >= 0):
            raise ValueError(f"refine_iters must be a nonnegative integer, "
                             f"got {self.refine_iters!r}")
        if not 0.0 < self.beta_cap_epsilon <= 0.5:
            raise ValueError(f"beta_cap_epsilon must lie in (0, 0.5], "
                             f"got {self.beta_cap_epsilon!r}")


def fisher_information(spec: ProbeSpec, design: DisplacementDesign, phi: float) -> float:
    """Single-step Fisher information of the Poisson click statistics.

    Equals (d lam/d phi)^2 / lam for the untruncated Poisson model; the
    denominator vanishes only at exact nulling, which raises.
    """
    a = spec.alpha
    b = design.magnitude
    sqrt_l = math.sqrt(spec.steps_L)
    d = phi - design.theta
    den = a * a + spec.steps_L * b * b - 2.0 * a * b * math.cos(d) * sqrt_l
    if den <= 1e-15:
        raise NullingSingularity(f"design nulls the field at phi={phi!r} (denominator {den!r})")
    s = math.sin(d)
    return 4.0 * a * a * b * b * s * s / den


def optimal_beta_magnitude(spec: ProbeSpec, theta: float, phi_hat: float,
                           policy: DesignPolicy) -> float:
    """Fisher-optimal |beta| for a given theta, with the singularity capped."""
    c = max(abs(math.cos(phi_hat - theta)), policy.beta_cap_epsilon)
    return spec.alpha / (math.sqrt(spec.steps_L) * c)


def _beta_for_thetas(spec: ProbeSpec, thetas: np.ndarray, phi_hat: float,
                     policy: DesignPolicy) -> np.ndarray:
    c = np.maximum(np.abs(np.cos(phi_hat - thetas)), policy.beta_cap_epsilon)
    return spec.alpha / (math.sqrt(spec.steps_L) * c)


class _DesignCost:
    """Evaluates one cost function over candidate designs for a fixed prior.

    Grid tables are prepared once per adaptive step; single-theta evaluation
    is kept lean because golden-section refinement calls it sequentially.
    """

    def __init__(self, prior: PhasePosterior, spec: ProbeSpec, policy: DesignPolicy):
        _, cos_t, sin_t = _phase_table(prior.grid_size)
        w = prior.weights
        self._cos = cos_t
        self._sin = sin_t
        self._trig = np.vstack([cos_t, sin_t])  # (2, N) for batched cos(phi - theta)
        self._w = w
        self._wc = w * cos_t
        self._ws = w * sin_t
        self._a = spec.step_amplitude
        self._m = spec.pnr_m
        self._sharp = policy.cost_function == "expected_sharpness"

    def _lam(self, theta: float, b: float) -> np.ndarray:
        a = self._a
        cosd = math.cos(theta) * self._cos + math.sin(theta) * self._sin
        lam = (a * a + b * b) - (2.0 * a * b) * cosd
        np.maximum(lam, 0.0, out=lam)
        return lam

    def _pmf_rows(self, lam: np.ndarray) -> np.ndarray:
        """(m+1, N) outcome likelihoods along the grid."""
        m = self._m
        if m > 20:
            return np.moveaxis(bucket_pmf(lam, m), -1, 0)
        rows = np.empty((m + 1,) + lam.shape)
        term = np.exp(-lam)
        rows[0] = term
        total = term.copy()
        for k in range(1, m):
            term = term * lam / k
            rows[k] = term
            total += term
        rows[m] = np.clip(1.0 - total, 0.0, 1.0)
        return rows

    def value(self, theta: float, b: float) -> float:
        lam = self._lam(theta, b)
        rows = self._pmf_rows(lam)
        if self._sharp:
            re = rows @ self._wc
            im = rows @ self._ws
            return float(np.hypot(re, im).sum())
        # mutual information I = H(Y) - H(Y | phi)
        q = rows @ self._w
        h_marg = float(-xlogy(q, q).sum())
        h_cond = float(-self._w @ xlogy(rows, rows).sum(axis=0))
        return h_marg - h_cond

    def batch(self, thetas: np.ndarray, bs: np.ndarray) -> np.ndarray:
        a = self._a
        # cos(phi_j - theta_k) as a (K,2)@(2,N) matmul; elementwise broadcasting
        # of the same expression is an order of magnitude slower
        lam = np.column_stack([np.cos(thetas), np.sin(thetas)]) @ self._trig
        lam *= (-2.0 * a) * bs[:, None]
        lam += (a * a + bs * bs)[:, None]
        np.maximum(lam, 0.0, out=lam)
        rows = self._pmf_rows(lam)  # (m+1, K, N)
        if self._sharp:
            re = rows @ self._wc
            im = rows @ self._ws
            return np.hypot(re, im).sum(axis=0)
        q = rows @ self._w  # (m+1, K)
        h_marg = -xlogy(q, q).sum(axis=0)
        h_cond = -xlogy(rows, rows).sum(axis=0) @ self._w
        return h_marg - h_cond


def expected_sharpness(prior: PhasePosterior, spec: ProbeSpec,
                       design: DisplacementDesign) -> float:
    """Average posterior sharpness sum_n p(n) |E[e^{i phi} | n]| over the alphabet."""
    cost = _DesignCost(prior, spec, DesignPolicy(cost_function="expected_sharpness"))
    val = cost.value(design.theta, design.magnitude)
    if not math.isfinite(val):
        raise DegenerateLikelihood(f"expected sharpness is not finite for {design!r}")
    return val


def mutual_information_gain(prior: PhasePosterior, spec: ProbeSpec,
                            design: DisplacementDesign) -> float:
    """Mutual information I(phi; Y) of one candidate design, fast path."""
    cost = _DesignCost(prior, spec, DesignPolicy(cost_function="mutual_information"))
    val = cost.value(design.theta, design.magnitude)
    if not math.isfinite(val):
        raise DegenerateLikelihood(f"information gain is not finite for {design!r}")
    return val


def _golden_max(f, lo: float, hi: float, iters: int):
    """Golden-section maximization on [lo, hi]; returns (x, f(x)) of the best probe."""
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = f(x1)
    f2 = f(x2)
    for _ in range(iters):
        if f1 > f2:
            hi = x2
            x2, f2 = x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo = x1
            x1, f1 = x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def choose_design(prior: PhasePosterior, spec: ProbeSpec, phi_hat: float,
                  policy: DesignPolicy, rng: np.random.Generator | None = None,
                  *, first_step: bool = False) -> DisplacementDesign:
    """Pick the next displacement design.

    On the first step the phase is a uniformly random guess (drawn from
    ``rng``); afterwards the cost function is evaluated on
    ``policy.theta_candidates`` equally spaced phases, the best candidate is
    refined by golden-section search, and ties resolve to the smallest theta.
    """
    if first_step:
        if rng is None:
            raise ValueError("first_step design needs a random stream")
        theta0 = float(rng.uniform(0.0, TWO_PI))
        return DisplacementDesign(theta0, optimal_beta_magnitude(spec, theta0, phi_hat, policy))

    cost = _DesignCost(prior, spec, policy)
    k = policy.theta_candidates
    thetas = TWO_PI * np.arange(k) / k
    betas = _beta_for_thetas(spec, thetas, phi_hat, policy)
    values = cost.batch(thetas, betas)
    if not np.all(np.isfinite(values)):
        raise DegenerateLikelihood("design cost is not finite on the candidate grid")
    i = int(np.argmax(values))  # first maximum: smallest-theta tie break
    best_theta = float(thetas[i])
    best_value = float(values[i])

    if policy.refine_iters > 0:
        h = TWO_PI / k

        def scalar_cost(th: float) -> float:
            return cost.value(th, optimal_beta_magnitude(spec, th, phi_hat, policy))

        t_ref, v_ref = _golden_max(scalar_cost, best_theta - h, best_theta + h,
                                   policy.refine_iters)
        if v_ref > best_value:  # strict: flat costs keep the coarse tie break
            best_theta, best_value = t_ref, v_ref

    return DisplacementDesign(reduce_angle(best_theta),
                              optimal_beta_magnitude(spec, best_theta, phi_hat, policy))


def count_likelihood_maxima(spec: ProbeSpec, designs, outcomes,
                            grid_size: int = 1024, within: float = 5.0) -> int:
    """Number of prominent local maxima of the accumulated log-likelihood.

    Diagnostic for identifiability: a fixed displacement phase leaves a phantom
    second maximum degenerate with the true one, while a rotating phase pushes
    it down.  Only maxima within ``within`` nats of the global maximum count;
    a fully flat log-likelihood reports zero.
    """
    phis = _phase_table(grid_size)[0]
    ll = np.zeros(grid_size)
    for design, outcome in zip(designs, outcomes):
        like = outcome_likelihood(spec, design, int(outcome), phis)
        ll += np.log(np.maximum(like, 1e-300))
    diff = np.roll(ll, -1) - ll
    signs = np.sign(diff)
    keep = signs != 0.0
    if not np.any(keep):
        return 0
    # positions of +to- sign changes of the circular discrete gradient,
    # with plateaus collapsed onto their last rising edge
    idx = np.arange(grid_size)[keep]
    s = signs[keep]
    nxt = np.roll(s, -1)
    peak_positions = idx[(s > 0) & (nxt < 0)]
    threshold = ll.max() - within
    return int(np.sum(ll[(peak_positions + 1) % grid_size] >= threshold))
