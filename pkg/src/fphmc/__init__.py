"""Functional proportional hazards mixture cure model."""

from .basis import (
    BasisMatrix,
    FunctionalCovariate,
    Grid,
    PenaltyMatrix,
    bspline_basis,
    difference_penalty,
    functional_design,
    make_grid,
    quadrature_weights,
)
from .bootstrap import BootstrapResult, bootstrap_fit, pointwise_ci
from .em import (
    FitConfig,
    FphmcFit,
    SurvivalDataset,
    e_step,
    fit_fphmc,
    observed_loglik,
    prepare_designs,
)
from .errors import (
    BootstrapUnstableError,
    ConvergenceError,
    DegenerateRiskSetError,
    InsufficientReplicatesError,
)
from .incidence import IncidenceFit, fit_incidence, incidence_loglik, predict_pi, select_lambda_incidence
from .latency import (
    LatencyFit,
    StepSurvival,
    breslow_baseline,
    cox_penalized_loglik,
    fit_latency,
    predict_survival,
    select_lambda_latency,
)
from .sim import (
    McReport,
    ScenarioConfig,
    gen_functional_covariate,
    gen_scenario,
    integrated_metrics,
    run_mc,
    scenario_config,
)

__version__ = "0.1.0"
