"""Receding-horizon controller steps: MPPI, CMA, CE, and the combined MPOPI.

Each step function maps (policy, env, state) to (first action, updated and
shifted policy, diagnostics). All four share the sampling, evaluation, and
weighting primitives; in particular the MPPI mean update and the MPOPI final
averaging use the same mean-plus-weighted-noise code path, so MPOPI with a
single cycle and learning rate 1 reproduces MPPI bit for bit at the same
sample budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, InputError, StepFailure
from .policy import (
    GaussianPolicy,
    bound_covariance,
    elite_uniform_weights,
    exploration_magnitude,
    log_rank_weights,
    shift_policy,
    softmax_weights,
    tie_covariances,
    weight_entropy,
    weighted_cov_update,
    weighted_mean_update,
)
from .rollout import RolloutBatch, SeedSpec, evaluate_batch, sample_noise_batch, sort_and_select_elites

CONTROLLER_NAMES = ("mppi", "cma", "ce", "mpopi")

_SHIFT_FILLS = ("repeat-last", "zero")
_COV_MODES = ("shared", "per-timestep")
_CMA_WEIGHTINGS = ("log-rank", "elite-uniform")
_INNER_CENTERS = ("outer-mean", "cycle-mean")


@dataclass(frozen=True)
class ControllerConfig:
    """Hyperparameters shared by the four controllers.

    `learning_rate`, `n_elite`, and `covariance_mode` default to None and are
    filled per controller by :meth:`resolved_for` (CE pins the learning rate
    to 1; the elite count follows the per-cycle sample count; MPPI keeps a
    single shared covariance).
    """

    n_samples: int = 30
    horizon: int = 40
    temperature: float = 0.1
    learning_rate: float | None = None
    cycles: int = 3
    n_elite: int | None = None
    cov_floor: float = 1e-6
    init_std: float = 0.2
    shift_fill: str = "repeat-last"
    covariance_mode: str | None = None
    cma_weighting: str = "log-rank"
    inner_center: str = "outer-mean"
    reset_cov: bool = False

    def resolved_for(self, controller: str) -> "ControllerConfig":
        """Fill controller-specific defaults and validate every field."""
        if controller not in CONTROLLER_NAMES:
            raise ConfigError(f"controller: unknown name {controller!r}")
        cfg = self
        if cfg.learning_rate is None:
            alpha = 1.0 if controller in ("mppi", "ce") else 0.9
            cfg = replace(cfg, learning_rate=alpha)
        if cfg.covariance_mode is None:
            cfg = replace(cfg, covariance_mode="shared" if controller == "mppi" else "per-timestep")
        if cfg.n_elite is None:
            if controller == "mpopi":
                per_cycle = min(cycle_sizes(max(cfg.n_samples, cfg.cycles), cfg.cycles))
                elite = min(per_cycle, max(2, math.ceil(per_cycle / 3)))
            else:
                elite = min(cfg.n_samples, max(2, math.ceil(cfg.n_samples / 5)))
            cfg = replace(cfg, n_elite=elite)
        cfg._validate(controller)
        return cfg

    def _validate(self, controller: str) -> None:
        def bad(key: str, message: str):
            return ConfigError(f"{key}: {message}")

        if not isinstance(self.n_samples, (int, np.integer)) or self.n_samples < 1:
            raise bad("samples", f"must be a positive integer, got {self.n_samples}")
        if not isinstance(self.horizon, (int, np.integer)) or self.horizon < 1:
            raise bad("horizon", f"must be a positive integer, got {self.horizon}")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise bad("lambda", f"must be positive, got {self.temperature}")
        if not (np.isfinite(self.learning_rate) and 0 < self.learning_rate <= 1):
            raise bad("alpha", f"must lie in (0, 1], got {self.learning_rate}")
        if controller == "ce" and self.learning_rate != 1.0:
            raise bad("alpha", "the cross-entropy update requires alpha = 1")
        if not isinstance(self.cycles, (int, np.integer)) or self.cycles < 1:
            raise bad("cycles", f"must be a positive integer, got {self.cycles}")
        if controller == "mpopi" and self.n_samples < self.cycles:
            raise bad(
                "samples",
                f"need at least one sample per cycle: samples={self.n_samples} < cycles={self.cycles}",
            )
        if not (np.isfinite(self.cov_floor) and self.cov_floor > 0):
            raise bad("cov_floor", f"must be positive, got {self.cov_floor}")
        if not (np.isfinite(self.init_std) and self.init_std > 0):
            raise bad("init_std", f"must be positive, got {self.init_std}")
        if self.shift_fill not in _SHIFT_FILLS:
            raise bad("shift_fill", f"must be one of {_SHIFT_FILLS}, got {self.shift_fill!r}")
        if self.covariance_mode not in _COV_MODES:
            raise bad("covariance_mode", f"must be one of {_COV_MODES}, got {self.covariance_mode!r}")
        if self.cma_weighting not in _CMA_WEIGHTINGS:
            raise bad("cma_weighting", f"must be one of {_CMA_WEIGHTINGS}, got {self.cma_weighting!r}")
        if self.inner_center not in _INNER_CENTERS:
            raise bad("inner_center", f"must be one of {_INNER_CENTERS}, got {self.inner_center!r}")
        cap = min(cycle_sizes(self.n_samples, self.cycles)) if controller == "mpopi" else self.n_samples
        if not isinstance(self.n_elite, (int, np.integer)) or not (1 <= self.n_elite <= cap):
            raise bad("elites", f"must satisfy 1 <= elites <= {cap}, got {self.n_elite}")

    def initial_policy(self, control_dim: int) -> GaussianPolicy:
        return GaussianPolicy.isotropic(self.horizon, control_dim, self.init_std)


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step telemetry. `cycle_costs` is (best, mean) per cycle, MPOPI only."""

    best_cost: float
    mean_cost: float
    weight_entropy: float
    exploration: float
    wall_ms: float
    cycle_costs: tuple[tuple[float, float], ...] | None = None


def cycle_sizes(n_samples: int, cycles: int) -> list[int]:
    """Split the sample budget over cycles: floor(N/L) each, remainder last."""
    if cycles < 1 or n_samples < cycles:
        raise ConfigError(f"samples: need samples >= cycles >= 1, got {n_samples}, {cycles}")
    base = n_samples // cycles
    return [base] * (cycles - 1) + [n_samples - base * (cycles - 1)]


def _sample_and_evaluate(mean, covariances, n, env, x0, seeds, cycle, workers) -> RolloutBatch:
    policy = GaussianPolicy(mean=mean, covariances=covariances)
    batch = sample_noise_batch(policy, n, seeds, cycle=cycle)
    return evaluate_batch(env, x0, batch, workers=workers)


def _require_valid_costs(costs: np.ndarray) -> None:
    if not np.isfinite(costs.min()):
        raise StepFailure("every rollout in the batch failed (all costs are +inf)")


def _mean_shift(weights: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    return np.einsum("n,ntm->tm", weights, deltas)


def _finite_stats(costs: np.ndarray) -> tuple[float, float]:
    finite = costs[np.isfinite(costs)]
    return float(finite.min()), float(finite.mean())


def _diagnostics(costs, weights, covariances, t0, cycle_costs=None) -> StepDiagnostics:
    best, mean = _finite_stats(costs)
    top = float(np.linalg.eigvalsh(covariances)[:, -1].max())
    return StepDiagnostics(
        best_cost=best,
        mean_cost=mean,
        weight_entropy=weight_entropy(weights),
        exploration=top,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        cycle_costs=cycle_costs,
    )


def mppi_step(policy, env, x0, cfg: ControllerConfig, seeds: SeedSpec, workers: int = 1):
    """One path-integral update with a fixed covariance.

    Samples around the current mean, weights by the softmax of costs, and
    moves the mean by the weighted noise average (the weighted average of the
    absolute samples, written so the old mean cancels exactly). Covariance is
    never updated.
    """
    t0 = time.perf_counter()
    cfg = cfg.resolved_for("mppi")
    batch = _sample_and_evaluate(
        policy.mean, policy.covariances, cfg.n_samples, env, x0, seeds, 0, workers
    )
    _require_valid_costs(batch.costs)
    weights = softmax_weights(batch.costs, cfg.temperature)
    new_mean = policy.mean + _mean_shift(weights, batch.noises)
    action = new_mean[0].copy()
    new_policy = shift_policy(
        GaussianPolicy(mean=new_mean, covariances=policy.covariances), cfg.shift_fill
    )
    diag = _diagnostics(batch.costs, weights, policy.covariances, t0)
    return action, new_policy, diag


def cma_step(policy, env, x0, cfg: ControllerConfig, seeds: SeedSpec, workers: int = 1):
    """One covariance-matrix-adaptation update.

    Samples are ranked cost-ascending and weighted (log-rank by default).
    The covariance updates first, centered on the pre-update mean the samples
    were drawn from; then the mean, both at learning rate alpha. The
    covariance is eigenvalue-floored before reuse.
    """
    t0 = time.perf_counter()
    cfg = cfg.resolved_for("cma")
    batch = _sample_and_evaluate(
        policy.mean, policy.covariances, cfg.n_samples, env, x0, seeds, 0, workers
    )
    _require_valid_costs(batch.costs)
    ranked_idx = sort_and_select_elites(batch, batch.size)
    if cfg.cma_weighting == "log-rank":
        weights = log_rank_weights(batch.size)
    else:
        weights = elite_uniform_weights(batch.size, cfg.n_elite)
    ranked = batch.controls[ranked_idx]
    # Covariance first: it must be centered on the old mean.
    new_cov = weighted_cov_update(
        policy.covariances, policy.mean, ranked, weights, cfg.learning_rate, cfg.cov_floor
    )
    if cfg.covariance_mode == "shared":
        new_cov = tie_covariances(new_cov)
    new_mean = weighted_mean_update(policy.mean, ranked, weights, cfg.learning_rate)
    action = new_mean[0].copy()
    new_policy = shift_policy(GaussianPolicy(mean=new_mean, covariances=new_cov), cfg.shift_fill)
    diag = _diagnostics(batch.costs, weights, new_cov, t0)
    return action, new_policy, diag


def ce_step(policy, env, x0, cfg: ControllerConfig, seeds: SeedSpec, workers: int = 1):
    """One cross-entropy refit.

    The elite set (lowest-cost samples) replaces the mean with its average
    and the covariance with its scatter about that new mean (learning rate
    pinned to 1), floored.
    """
    t0 = time.perf_counter()
    cfg = cfg.resolved_for("ce")
    batch = _sample_and_evaluate(
        policy.mean, policy.covariances, cfg.n_samples, env, x0, seeds, 0, workers
    )
    _require_valid_costs(batch.costs)
    elite_idx = sort_and_select_elites(batch, cfg.n_elite)
    elites = batch.controls[elite_idx]
    weights = np.full(cfg.n_elite, 1.0 / cfg.n_elite)
    new_mean = weighted_mean_update(policy.mean, elites, weights, 1.0)
    # CE scatter is taken about the refit mean, unlike the adaptation update.
    new_cov = weighted_cov_update(
        policy.covariances, new_mean, elites, weights, 1.0, cfg.cov_floor
    )
    if cfg.covariance_mode == "shared":
        new_cov = tie_covariances(new_cov)
    action = new_mean[0].copy()
    new_policy = shift_policy(GaussianPolicy(mean=new_mean, covariances=new_cov), cfg.shift_fill)
    diag = _diagnostics(batch.costs, weights, new_cov, t0)
    return action, new_policy, diag


def _correction_batch(noises, mean, cycle_mean, cov_inverse, temperature, learning_rate):
    """Importance-correction cost for every sample of one cycle."""
    shifted = noises + (cycle_mean - mean)[None, :, :]
    return temperature * (1.0 - learning_rate) * np.einsum(
        "ti,tij,ntj->n", cycle_mean, cov_inverse, shifted
    )


def mpopi_importance_correction(noise, mean, cycle_mean, covariances, temperature, learning_rate):
    """Cost adjustment for sampling around the refined mean instead of the original.

    Per timestep: temperature * (1 - alpha) * mu'_t^T S_t^-1 (eps_t + mu'_t - mu_t),
    summed over the horizon; exactly zero at alpha = 1. `covariances` is the
    step-initial covariance, not the refined one.
    """
    noise = np.asarray(noise, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    cycle_mean = np.asarray(cycle_mean, dtype=np.float64)
    cov = np.asarray(covariances, dtype=np.float64)
    if noise.shape != mean.shape or cycle_mean.shape != mean.shape:
        raise InputError("noise, mean, and cycle_mean must share the same (T, m) shape")
    if not (np.isfinite(temperature) and temperature > 0):
        raise ConfigError(f"lambda: must be positive, got {temperature}")
    if not (0 < learning_rate <= 1):
        raise ConfigError(f"alpha: must lie in (0, 1], got {learning_rate}")
    if learning_rate == 1.0:
        return 0.0
    try:
        inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError as exc:
        from .errors import InvariantViolation

        raise InvariantViolation("correction term needs an invertible covariance") from exc
    return float(_correction_batch(noise[None], mean, cycle_mean, inv, temperature, learning_rate)[0])


def mpopi_step(policy, env, x0, cfg: ControllerConfig, seeds: SeedSpec, workers: int = 1):
    """One combined update: L refinement cycles, then a softmax average.

    Each cycle samples zero-mean noise from the refined covariance around the
    refined mean, evaluates it, and adds the importance correction to each
    cost. Between cycles the elite set drives a rank-weighted covariance-then-
    mean update (covariance first, floored). After the last cycle the softmax
    weights of that cycle's corrected costs move the original mean by the
    weighted average of (noise + refined-mean offset). The refined covariance
    is carried to the next step unless `reset_cov` restores the initial one.
    """
    t0 = time.perf_counter()
    cfg = cfg.resolved_for("mpopi")
    mean = policy.mean
    cov_outer = policy.covariances
    cycle_mean = mean.copy()
    cycle_cov = cov_outer.copy()
    corrected = cfg.learning_rate < 1.0
    cov_inverse = np.linalg.inv(cov_outer) if corrected else None
    cycle_stats: list[tuple[float, float]] = []
    batch = None
    for cycle, n_c in enumerate(cycle_sizes(cfg.n_samples, cfg.cycles)):
        batch = _sample_and_evaluate(cycle_mean, cycle_cov, n_c, env, x0, seeds, cycle, workers)
        _require_valid_costs(batch.costs)
        if corrected:
            batch.costs = batch.costs + _correction_batch(
                batch.noises, mean, cycle_mean, cov_inverse, cfg.temperature, cfg.learning_rate
            )
            _require_valid_costs(batch.costs)
        cycle_stats.append(_finite_stats(batch.costs))
        if cycle < cfg.cycles - 1:
            elite_idx = sort_and_select_elites(batch, cfg.n_elite)
            elites = batch.controls[elite_idx]
            weights = log_rank_weights(cfg.n_elite)
            center = mean if cfg.inner_center == "outer-mean" else cycle_mean
            # Covariance first; the mean update below must not feed it.
            cycle_cov = weighted_cov_update(
                cycle_cov, center, elites, weights, cfg.learning_rate, cfg.cov_floor
            )
            if cfg.covariance_mode == "shared":
                cycle_cov = tie_covariances(cycle_cov)
            cycle_mean = weighted_mean_update(cycle_mean, elites, weights, cfg.learning_rate)
    weights = softmax_weights(batch.costs, cfg.temperature)
    new_mean = mean + _mean_shift(weights, batch.noises + (cycle_mean - mean)[None, :, :])
    action = new_mean[0].copy()
    if cfg.reset_cov:
        next_cov = np.tile(cfg.init_std**2 * np.eye(mean.shape[1]), (mean.shape[0], 1, 1))
    else:
        next_cov = cycle_cov
    new_policy = shift_policy(GaussianPolicy(mean=new_mean, covariances=next_cov), cfg.shift_fill)
    diag = _diagnostics(batch.costs, weights, cycle_cov, t0, cycle_costs=tuple(cycle_stats))
    return action, new_policy, diag


CONTROLLER_STEPS = {
    "mppi": mppi_step,
    "cma": cma_step,
    "ce": ce_step,
    "mpopi": mpopi_step,
}
