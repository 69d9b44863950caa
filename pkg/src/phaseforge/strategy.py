"""Single-shot adaptive runs and Monte Carlo ensembles over trials.

Each trial owns a private random stream derived from (master_seed, trial
index), so ensembles are bit-identical regardless of worker count or
execution order.  Trials are embarrassingly parallel; aggregation is an
ordered reduction by trial index.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .design import DesignPolicy, choose_design
from .errors import DegenerateLikelihood, EmptySample, ExcessiveExclusions
from .model import TWO_PI, ProbeSpec, fold_halfturn, reduce_angle, sample_outcome, wrap_signed
from .posterior import (
    DEFAULT_GRID_SIZE,
    bayes_update,
    circular_moment,
    holevo_variance,
    map_estimate,
    uniform_prior,
)

THREADS_ENV_VAR = "PHASEFORGE_THREADS"

# spawn-key tags keeping the per-trial protocol stream and the true-phase
# stream (and the bootstrap stream) statistically unrelated
_PHASE_STREAM_TAG = 0x9e3e
_BOOTSTRAP_TAG = 0xb005

EXCLUSION_LIMIT = 0.01

BOOTSTRAP_RESAMPLES = 500

PHASE_MODES = ("random_uniform", "fixed")


def trial_seed(master_seed: int, index: int) -> int:
    """64-bit protocol seed for one trial, a pure function of (master, index)."""
    ss = np.random.SeedSequence((master_seed, index))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_true_phase(master_seed: int, index: int) -> float:
    """Uniform true phase for one trial, independent of the protocol stream."""
    ss = np.random.SeedSequence((master_seed, index, _PHASE_STREAM_TAG))
    g = np.random.Generator(np.random.PCG64(ss))
    return float(g.uniform(0.0, TWO_PI))


@dataclass(frozen=True)
class TrialRecord:
    """Full per-step trajectory of one single-shot run.

    The reported estimate is the circular-mean direction of the posterior
    (the estimator whose pooled resultant equals the expected sharpness the
    design cost maximizes); the per-step MAP sequence that drives the
    adaptive magnitude rule is recorded alongside it.
    """

    true_phase: float
    seed: int
    thetas: np.ndarray
    beta_mags: np.ndarray
    outcomes: np.ndarray
    map_estimates: np.ndarray
    mean_estimates: np.ndarray
    delta_designs: np.ndarray
    final_estimate: float

    def __post_init__(self):
        n = len(self.thetas)
        for name in ("beta_mags", "outcomes", "map_estimates", "mean_estimates",
                     "delta_designs"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from thetas length {n}")
        if n and self.final_estimate != self.mean_estimates[-1]:
            raise ValueError("final_estimate must equal the last mean_estimate")

    @property
    def steps(self) -> int:
        return len(self.thetas)


@dataclass(frozen=True)
class EnsembleResult:
    """Aggregated statistics of a Monte Carlo ensemble."""

    trials: int
    holevo_variance: float
    holevo_stderr: float
    mean_delta_design_final: float
    per_step_holevo: np.ndarray
    excluded_trials: int = 0
    final_deltas: Optional[np.ndarray] = field(repr=False, default=None)


def _mean_direction(post, fallback: float) -> float:
    """Circular-mean direction, falling back to the MAP for flat posteriors."""
    moment = circular_moment(post)
    if moment.magnitude < 1e-12:
        return fallback
    return moment.angle


def run_single_shot(spec: ProbeSpec, policy: DesignPolicy, true_phase: float,
                    seed: int, grid_size: int = DEFAULT_GRID_SIZE) -> TrialRecord:
    """Execute one L-step adaptive estimation run, deterministically in the seed.

    The MAP drives the adaptive magnitude rule at every step; the reported
    per-step and final estimates are the posterior's circular-mean direction.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    post = uniform_prior(grid_size)
    phi_hat = map_estimate(post)
    steps = spec.steps_L
    thetas = np.empty(steps)
    beta_mags = np.empty(steps)
    outcomes = np.empty(steps, dtype=np.int64)
    maps = np.empty(steps)
    means = np.empty(steps)
    deltas = np.empty(steps)
    for l in range(steps):
        if l == 0:
            design = choose_design(post, spec, phi_hat, policy, rng, first_step=True)
        else:
            design = choose_design(post, spec, phi_hat, policy)
        outcome = sample_outcome(spec, design, true_phase, rng)
        try:
            post = bayes_update(post, spec, design, outcome)
        except DegenerateLikelihood as err:
            raise DegenerateLikelihood(f"step {l}: {err}", step_index=l) from err
        phi_hat = map_estimate(post)
        thetas[l] = design.theta
        beta_mags[l] = design.magnitude
        outcomes[l] = outcome
        maps[l] = phi_hat
        means[l] = _mean_direction(post, phi_hat)
        deltas[l] = wrap_signed(phi_hat - design.theta)
    return TrialRecord(true_phase=reduce_angle(true_phase), seed=int(seed),
                       thetas=thetas, beta_mags=beta_mags, outcomes=outcomes,
                       map_estimates=maps, mean_estimates=means,
                       delta_designs=deltas, final_estimate=float(means[-1]))


def _resolve_workers(max_workers: int | None, trials: int) -> int:
    base = max_workers if max_workers is not None else (os.cpu_count() or 1)
    env = os.environ.get(THREADS_ENV_VAR)
    if env is not None:
        try:
            cap = int(env)
        except ValueError as err:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from err
        if cap >= 1:
            base = min(base, cap)
    return max(1, min(base, trials))


def _true_phase_for(master_seed: int, index: int, phase_mode: str,
                    fixed_phase: float | None) -> float:
    if phase_mode == "fixed":
        return reduce_angle(fixed_phase)
    return trial_true_phase(master_seed, index)


def _run_block(spec: ProbeSpec, policy: DesignPolicy, master_seed: int,
               phase_mode: str, fixed_phase: float | None, grid_size: int,
               indices: range):
    out = []
    for t in indices:
        phase = _true_phase_for(master_seed, t, phase_mode, fixed_phase)
        try:
            rec = run_single_shot(spec, policy, phase, trial_seed(master_seed, t), grid_size)
        except DegenerateLikelihood as err:
            out.append((t, None, err.step_index))
            continue
        out.append((t, rec, None))
    return out


def _bootstrap_stderr(deltas: np.ndarray, master_seed: int,
                      resamples: int = BOOTSTRAP_RESAMPLES) -> float:
    """Half-width of the central 68.27% of resampled Holevo variances."""
    n = deltas.size
    if n < 2:
        return 0.0
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((master_seed, _BOOTSTRAP_TAG))))
    z = np.exp(1j * deltas)
    idx = rng.integers(0, n, size=(resamples, n))
    r = np.abs(z[idx].mean(axis=1))
    with np.errstate(divide="ignore"):
        values = 1.0 / (r * r) - 1.0
    lo, hi = np.percentile(values, [15.8655, 84.1345])
    return float((hi - lo) / 2.0)


def summarize_ensemble(records: list[TrialRecord], master_seed: int,
                       excluded: int = 0,
                       bootstrap_resamples: int = BOOTSTRAP_RESAMPLES) -> EnsembleResult:
    """Aggregate trial records (assumed in trial order) into ensemble statistics."""
    if not records:
        raise EmptySample("ensemble has no successful trials")
    truth = np.array([r.true_phase for r in records])
    finals = np.array([r.final_estimate for r in records])
    deltas = np.angle(np.exp(1j * (finals - truth)))
    per_step = np.stack([r.mean_estimates for r in records])  # (n, L)
    step_err = np.angle(np.exp(1j * (per_step - truth[:, None])))
    per_step_holevo = np.array([holevo_variance(step_err[:, l])
                                for l in range(step_err.shape[1])])
    final_fold = fold_halfturn(np.array([r.delta_designs[-1] for r in records]))
    return EnsembleResult(
        trials=len(records),
        holevo_variance=holevo_variance(deltas),
        holevo_stderr=_bootstrap_stderr(deltas, master_seed, bootstrap_resamples),
        mean_delta_design_final=float(np.mean(final_fold)),
        per_step_holevo=per_step_holevo,
        excluded_trials=excluded,
        final_deltas=deltas,
    )


def run_ensemble(spec: ProbeSpec, policy: DesignPolicy, trials: int, master_seed: int,
                 phase_mode: str = "random_uniform", fixed_phase: float | None = None,
                 grid_size: int = DEFAULT_GRID_SIZE, max_workers: int | None = None,
                 bootstrap_resamples: int = BOOTSTRAP_RESAMPLES):
    """Run a Monte Carlo ensemble; returns (EnsembleResult, trial records).

    Failed trials (DegenerateLikelihood) are excluded and counted; more than
    EXCLUSION_LIMIT of the ensemble failing raises ExcessiveExclusions.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if phase_mode not in PHASE_MODES:
        raise ValueError(f"phase_mode must be one of {PHASE_MODES}, got {phase_mode!r}")
    if phase_mode == "fixed" and fixed_phase is None:
        raise ValueError("fixed phase_mode needs fixed_phase")
    workers = _resolve_workers(max_workers, trials)
    if workers == 1:
        raw = _run_block(spec, policy, master_seed, phase_mode, fixed_phase,
                         grid_size, range(trials))
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        blocks = [range(bounds[i], bounds[i + 1]) for i in range(workers)
                  if bounds[i] < bounds[i + 1]]
        raw = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, spec, policy, master_seed,
                                   phase_mode, fixed_phase, grid_size, blk)
                       for blk in blocks]
            for fut in futures:
                raw.extend(fut.result())
    raw.sort(key=lambda item: item[0])
    records = [rec for _, rec, _ in raw if rec is not None]
    failures = [(t, step) for t, rec, step in raw if rec is None]
    if len(failures) > EXCLUSION_LIMIT * trials:
        raise ExcessiveExclusions(
            f"{len(failures)}/{trials} trials failed (first at trial {failures[0][0]}, "
            f"step {failures[0][1]})")
    result = summarize_ensemble(records, master_seed, excluded=len(failures),
                                bootstrap_resamples=bootstrap_resamples)
    return result, records
