"""Convergence and asymptote fits for ensemble variance data.

Two model families cover the full analysis pipeline: an exponential
relaxation y = A*exp(-B*L) + C of the Holevo variance in the number of
adaptive steps, and inverse-power models in the mean photon number
(y1: a2+a3+a4 terms, y2: a2+a3, y3: a2+a4).  Backward elimination picks
among the power models via per-coefficient t-tests; exponential fits of the
surviving coefficients against L extrapolate them to the infinite-step limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import NoConvergence, SingularFit

POWER_MODEL_TERMS = {
    "y1": (("A1", 2), ("A2", 3), ("A3", 4)),
    "y2": (("A1", 2), ("A2", 3)),
    "y3": (("A1", 2), ("A3", 4)),
}

# backward-elimination thresholds: drop above P_DROP, accept below P_KEEP
P_DROP = 0.1
P_KEEP = 0.001

MIN_ALPHA_SQ = 5.0

_GN_MAX_ITERS = 200
_GN_RELATIVE_TOL = 1e-10


@dataclass(frozen=True)
class FitResult:
    """Weighted least-squares estimate of one model."""

    model_id: str
    coefficients: dict[str, float]
    standard_errors: dict[str, float]
    p_values: dict[str, float]
    residual_standard_error: float
    covariance: np.ndarray
    dof: int


@dataclass(frozen=True)
class ModelSelection:
    """Outcome of backward elimination over the power-model family."""

    status: str  # "selected" or "inconclusive"
    model_id: str
    fit: FitResult
    steps: list[str] = field(default_factory=list)


def _as_points(points, n_min: int, what: str):
    arr = np.asarray([(float(a), float(b), float(c)) for a, b, c in points])
    if arr.shape[0] < n_min:
        raise ValueError(f"{what} needs at least {n_min} points, got {arr.shape[0]}")
    if np.any(arr[:, 2] <= 0.0):
        raise ValueError(f"{what} needs strictly positive sigmas")
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _p_values_from(coefs: np.ndarray, ses: np.ndarray, dof: int) -> np.ndarray:
    if dof <= 0:
        return np.full_like(coefs, math.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.abs(coefs) / ses
    return 2.0 * stats.t.sf(t, dof)


def _exp_model(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    a, b, c = params
    return a * np.exp(-b * x) + c


def _exp_jacobian(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    a, b, _ = params
    e = np.exp(-b * x)
    return np.column_stack([e, -a * x * e, np.ones_like(x)])


def _exp_start(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    c0 = float(y.min())
    a0 = float(y.max() - c0)
    resid = y - c0
    mask = resid > max(a0 * 1e-6, 1e-300)
    if a0 > 0.0 and mask.sum() >= 2:
        slope = np.polyfit(x[mask], np.log(resid[mask]), 1)[0]
        b0 = max(-slope, 1e-8)
    else:
        b0 = 0.0
    return np.array([a0, b0, c0])


def fit_exponential(points, model_id: str = "exponential",
                    names: tuple[str, str, str] = ("A", "B", "C")) -> FitResult:
    """Weighted fit of y = A*exp(-B*x) + C by damped Gauss-Newton.

    Weights are 1/sigma^2.  Damping follows the usual Levenberg schedule on
    the diagonal of the normal matrix; convergence requires the relative
    parameter change of an accepted step to fall below 1e-10.
    """
    x, y, sigma = _as_points(points, 4, "exponential fit")
    w = 1.0 / sigma ** 2
    params = _exp_start(x, y)
    damping = 1e-3
    chi2 = float(np.sum(w * (y - _exp_model(params, x)) ** 2))
    converged = False
    for _ in range(_GN_MAX_ITERS):
        r = y - _exp_model(params, x)
        jac = _exp_jacobian(params, x)
        grad = jac.T @ (w * r)
        normal = (jac * w[:, None]).T @ jac
        accepted = False
        for _ in range(50):
            damped = normal + damping * np.diag(np.diag(normal)) + 1e-14 * np.eye(3)
            try:
                step = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError as err:
                raise SingularFit("normal matrix is singular") from err
            trial = params + step
            chi2_trial = float(np.sum(w * (y - _exp_model(trial, x)) ** 2))
            if math.isfinite(chi2_trial) and chi2_trial <= chi2:
                accepted = True
                break
            damping *= 3.0
            if damping > 1e12:
                break
        if not accepted:
            # cannot decrease chi-square any further: treat as stationary
            converged = True
            break
        rel = float(np.max(np.abs(step) / (np.abs(params) + 1e-12)))
        params = trial
        chi2 = chi2_trial
        damping = max(damping / 3.0, 1e-12)
        if rel < _GN_RELATIVE_TOL:
            converged = True
            break
    if not converged:
        raise NoConvergence(f"no convergence within {_GN_MAX_ITERS} iterations")

    r = y - _exp_model(params, x)
    jac = _exp_jacobian(params, x)
    normal = (jac * w[:, None]).T @ jac
    dof = x.size - 3
    chi2_w = float(np.sum(w * r ** 2))
    scale = chi2_w / dof if dof > 0 else math.nan
    cov = np.linalg.pinv(normal) * scale
    ses = np.sqrt(np.maximum(np.diag(cov), 0.0))
    rse = math.sqrt(float(np.sum(r ** 2)) / dof) if dof > 0 else math.nan
    pvals = _p_values_from(params, ses, dof)
    return FitResult(
        model_id=model_id,
        coefficients=dict(zip(names, map(float, params))),
        standard_errors=dict(zip(names, map(float, ses))),
        p_values=dict(zip(names, map(float, pvals))),
        residual_standard_error=rse,
        covariance=cov,
        dof=dof,
    )


def fit_power_models(points, model_id: str) -> FitResult:
    """Weighted linear fit in the inverse-power basis selected by ``model_id``.

    Points are (alpha_sq, variance, sigma); only alpha_sq > 5 enters the fit,
    matching the regime where the power models are meaningful.
    """
    if model_id not in POWER_MODEL_TERMS:
        raise ValueError(f"unknown power model {model_id!r}")
    terms = POWER_MODEL_TERMS[model_id]
    k = len(terms)
    asq, y, sigma = _as_points(points, k + 2, f"{model_id} fit")
    mask = asq > MIN_ALPHA_SQ
    if mask.sum() < k + 2:
        raise ValueError(f"{model_id} fit needs >= {k + 2} points with alpha_sq > "
                         f"{MIN_ALPHA_SQ}, got {int(mask.sum())}")
    asq, y, sigma = asq[mask], y[mask], sigma[mask]
    alpha = np.sqrt(asq)
    design = np.column_stack([alpha ** (-power) for _, power in terms])
    sw = 1.0 / sigma
    dw = design * sw[:, None]
    yw = y * sw
    coefs, _, rank, _ = np.linalg.lstsq(dw, yw, rcond=None)
    if rank < k:
        raise SingularFit(f"design matrix of {model_id} is rank deficient ({rank} < {k})")
    r = y - design @ coefs
    dof = y.size - k
    chi2_w = float(np.sum((r * sw) ** 2))
    scale = chi2_w / dof if dof > 0 else math.nan
    cov = np.linalg.inv(dw.T @ dw) * scale
    ses = np.sqrt(np.maximum(np.diag(cov), 0.0))
    rse = math.sqrt(float(np.sum(r ** 2)) / dof) if dof > 0 else math.nan
    names = [name for name, _ in terms]
    pvals = _p_values_from(coefs, ses, dof)
    return FitResult(
        model_id=model_id,
        coefficients=dict(zip(names, map(float, coefs))),
        standard_errors=dict(zip(names, map(float, ses))),
        p_values=dict(zip(names, map(float, pvals))),
        residual_standard_error=rse,
        covariance=cov,
        dof=dof,
    )


_DROPPABLE = {
    ("y1", "A2"): "y3",
    ("y1", "A3"): "y2",
}


def backward_eliminate(points) -> ModelSelection:
    """Stepwise model selection over the power-model family.

    Starts from the full model, drops the worst coefficient with p > 0.1
    (largest first, restricted to drops that stay inside the family), and
    stops once every surviving p-value clears 0.001.  Grey-zone p-values are
    reported as inconclusive rather than forced to a model.
    """
    model_id = "y1"
    steps: list[str] = []
    while True:
        fit = fit_power_models(points, model_id)
        pvals = fit.p_values
        if all(p < P_KEEP for p in pvals.values()):
            steps.append(f"{model_id}: all p < {P_KEEP}, selected")
            return ModelSelection("selected", model_id, fit, steps)
        over = sorted(((p, name) for name, p in pvals.items() if p > P_DROP),
                      reverse=True)
        dropped = False
        for p, name in over:
            successor = _DROPPABLE.get((model_id, name))
            if successor is not None:
                steps.append(f"{model_id}: dropped {name} (p={p:.3g}) -> {successor}")
                model_id = successor
                dropped = True
                break
        if not dropped:
            grey = {name: p for name, p in pvals.items() if p >= P_KEEP}
            steps.append(f"{model_id}: grey-zone p-values {grey}, inconclusive")
            return ModelSelection("inconclusive", model_id, fit, steps)


def extrapolate_coefficients(per_l_fits) -> FitResult:
    """Exponential trend A_i(L) = D*exp(-E*L) + F; F is the infinite-L limit."""
    return fit_exponential(per_l_fits, model_id="coefficient_trend",
                           names=("D", "E", "F"))
