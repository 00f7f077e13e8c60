"""Sampling-based model predictive control.

Four receding-horizon controllers over a shared Gaussian control
distribution — the path-integral update (MPPI), covariance matrix adaptation
(CMA), the cross-entropy method (CE), and the combined MPOPI — plus a
deterministic parallel rollout engine, desk-scale benchmark environments, and
an experiment harness with a CLI.
"""

from .controllers import (
    CONTROLLER_NAMES,
    CONTROLLER_STEPS,
    ControllerConfig,
    StepDiagnostics,
    ce_step,
    cma_step,
    cycle_sizes,
    mpopi_importance_correction,
    mpopi_step,
    mppi_step,
)
from .envs import ENV_REGISTRY, EnvModel, TaskSpec, make_env
from .errors import (
    ConfigError,
    InputError,
    InvariantViolation,
    ParameterError,
    SmpcError,
    StepFailure,
)
from .experiment import (
    ComparisonReport,
    ExperimentConfig,
    ExperimentRecord,
    StepRow,
    compare_controllers,
    load_config,
    run_experiment,
    serialize_config,
    summarize_costs,
)
from .policy import (
    GaussianPolicy,
    bound_covariance,
    elite_uniform_weights,
    exploration_magnitude,
    log_rank_weights,
    shift_policy,
    softmax_weights,
    weighted_cov_update,
    weighted_mean_update,
)
from .rollout import (
    RolloutBatch,
    SeedSpec,
    evaluate_batch,
    sample_noise_batch,
    sort_and_select_elites,
)

__version__ = "0.1.0"

__all__ = [
    "CONTROLLER_NAMES",
    "CONTROLLER_STEPS",
    "ComparisonReport",
    "ConfigError",
    "ControllerConfig",
    "ENV_REGISTRY",
    "EnvModel",
    "ExperimentConfig",
    "ExperimentRecord",
    "GaussianPolicy",
    "InputError",
    "InvariantViolation",
    "ParameterError",
    "RolloutBatch",
    "SeedSpec",
    "SmpcError",
    "StepDiagnostics",
    "StepFailure",
    "StepRow",
    "TaskSpec",
    "bound_covariance",
    "ce_step",
    "cma_step",
    "compare_controllers",
    "cycle_sizes",
    "elite_uniform_weights",
    "evaluate_batch",
    "exploration_magnitude",
    "load_config",
    "log_rank_weights",
    "make_env",
    "mpopi_importance_correction",
    "mpopi_step",
    "mppi_step",
    "run_experiment",
    "sample_noise_batch",
    "serialize_config",
    "shift_policy",
    "softmax_weights",
    "sort_and_select_elites",
    "summarize_costs",
    "weighted_cov_update",
    "weighted_mean_update",
]
