"""Adaptive photon-counting phase estimation of coherent states.

Library layout:

- model:      displaced-coherent-state click statistics (bucketed Poisson)
- posterior:  circular grid posterior, MAP, moments, Holevo variance
- design:     Fisher-optimal displacement magnitude + cost-optimal phase
- strategy:   single-shot adaptive runs and Monte Carlo ensembles
- baselines:  QCRB, heterodyne, adaptive homodyne, canonical measurement
- fitting:    exponential convergence fits, power models, model selection
- cli:        simulate | baselines | fit | sweep front door
"""

__version__ = "0.1.0"

from .baselines import (
    MKII_AT_MPN1,
    baseline_table,
    cpm_asymptotic,
    cpm_exact,
    heterodyne_variance,
    mkii_asymptotic,
    nongaussian_asymptotic,
    qcrb,
)
from .design import (
    DesignPolicy,
    choose_design,
    count_likelihood_maxima,
    expected_sharpness,
    fisher_information,
    mutual_information_gain,
    optimal_beta_magnitude,
)
from .errors import (
    DegenerateLikelihood,
    EmptySample,
    ExcessiveExclusions,
    NoConvergence,
    NonPositiveAlpha,
    NullingSingularity,
    PhaseforgeError,
    SchemaError,
    SingularFit,
)
from .fitting import (
    FitResult,
    ModelSelection,
    backward_eliminate,
    extrapolate_coefficients,
    fit_exponential,
    fit_power_models,
)
from .model import (
    DisplacementDesign,
    ProbeSpec,
    fold_halfturn,
    outcome_pmf,
    poisson_mean,
    reduce_angle,
    sample_outcome,
    wrap_signed,
)
from .posterior import (
    CircularMoment,
    InfoFunctionals,
    PhasePosterior,
    bayes_update,
    circular_moment,
    holevo_variance,
    info_functionals,
    map_estimate,
    uniform_prior,
)
from .strategy import (
    EnsembleResult,
    TrialRecord,
    run_ensemble,
    run_single_shot,
    summarize_ensemble,
    trial_seed,
    trial_true_phase,
)
