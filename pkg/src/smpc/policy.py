"""Gaussian control-distribution primitives shared by all four controllers.

A policy is a per-timestep multivariate Gaussian over control vectors: a mean
sequence of shape (T, m) and one m-by-m covariance per timestep. This module
holds the three sample-weighting schemes (softmax, logarithmic rank,
elite-uniform), the weighted mean/covariance update rules, eigenvalue
flooring of covariances, horizon shifting, and the exploration-magnitude
diagnostic. Everything here is a pure function of its inputs; policies are
immutable once constructed and safe to share across rollout workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError

# Normalization guard of the logarithmic ranking scheme. Fixed, not
# configurable.
LOG_RANK_EPS = 1e-10

# Default lower bound on covariance eigenvalues.
DEFAULT_COV_FLOOR = 1e-6


def as_control_sequence(values, *, name: str = "control sequence") -> np.ndarray:
    """Validate and return a (T, m) float64 control sequence."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name} must be a (T, m) matrix with T, m >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class GaussianPolicy:
    """Per-timestep Gaussian over control vectors.

    Attributes:
        mean: (T, m) control mean sequence.
        covariances: (T, m, m) symmetric positive-definite matrices, one per
            timestep. Symmetry is enforced on construction; positive
            definiteness is maintained by the update rules via
            :func:`bound_covariance`.
    """

    mean: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        mean = as_control_sequence(self.mean, name="policy mean")
        cov = np.asarray(self.covariances, dtype=np.float64)
        t, m = mean.shape
        if cov.shape != (t, m, m):
            raise InputError(
                f"covariances must have shape ({t}, {m}, {m}) to match the mean, got {cov.shape}"
            )
        if not np.all(np.isfinite(cov)):
            raise InputError("policy covariances contain non-finite entries")
        asym = np.max(np.abs(cov - cov.transpose(0, 2, 1)))
        if asym > 1e-9:
            raise InputError(f"policy covariances are asymmetric by {asym:.3e} (> 1e-9)")
        cov = 0.5 * (cov + cov.transpose(0, 2, 1))
        mean = mean.copy()
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariances", cov)

    @property
    def horizon(self) -> int:
        return self.mean.shape[0]

    @property
    def control_dim(self) -> int:
        return self.mean.shape[1]

    @classmethod
    def isotropic(cls, horizon: int, control_dim: int, std: float) -> "GaussianPolicy":
        """Zero-mean policy with covariance std**2 * I at every timestep."""
        if horizon < 1 or control_dim < 1:
            raise ParameterError("horizon and control_dim must be >= 1")
        if not (std > 0 and np.isfinite(std)):
            raise ParameterError(f"std must be positive and finite, got {std}")
        mean = np.zeros((horizon, control_dim))
        cov = np.tile(std * std * np.eye(control_dim), (horizon, 1, 1))
        return cls(mean=mean, covariances=cov)


def softmax_weights(costs, temperature: float) -> np.ndarray:
    """Exponentially cost-weighted sample weights.

    w_n = exp(-(c_n - c_min) / temperature), normalized to sum to one. The
    c_min subtraction is part of the definition and doubles as the numerical
    guard, so the weights are invariant to adding a constant to every cost.
    +inf costs (failed rollouts) get weight zero; the minimum cost must be
    finite.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 1 or costs.size < 1:
        raise InputError(f"costs must be a non-empty vector, got shape {costs.shape}")
    if not (np.isfinite(temperature) and temperature > 0):
        raise ParameterError(f"temperature must be positive and finite, got {temperature}")
    if np.isnan(costs).any() or np.isneginf(costs).any():
        raise InputError("costs contain NaN or -inf entries")
    lowest = costs.min()
    if not np.isfinite(lowest):
        raise InputError("every cost is +inf; no valid sample to weight")
    raw = np.exp(-(costs - lowest) / temperature)
    return raw / raw.sum()


def log_rank_weights(count: int) -> np.ndarray:
    """Logarithmic ranking weights over `count` cost-ascending samples.

    Raw weight for rank i (1 = lowest cost) is log((count + 1) / i),
    normalized by (sum + 1e-10). Strictly decreasing over rank.
    """
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise ParameterError(f"count must be a positive integer, got {count}")
    ranks = np.arange(1, count + 1, dtype=np.float64)
    raw = np.log((count + 1) / ranks)
    return raw / (raw.sum() + LOG_RANK_EPS)


def elite_uniform_weights(population: int, n_elite: int) -> np.ndarray:
    """Weight 1/n_elite on the first n_elite (cost-ascending) samples, 0 elsewhere."""
    if not isinstance(population, (int, np.integer)) or population < 1:
        raise ParameterError(f"population must be a positive integer, got {population}")
    if not isinstance(n_elite, (int, np.integer)) or not (1 <= n_elite <= population):
        raise ParameterError(
            f"n_elite must satisfy 1 <= n_elite <= population ({population}), got {n_elite}"
        )
    weights = np.zeros(int(population))
    weights[: int(n_elite)] = 1.0 / int(n_elite)
    return weights


def _check_update_args(mean, samples, weights, learning_rate):
    mean = as_control_sequence(mean, name="mean")
    samples = np.asarray(samples, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[1:] != mean.shape:
        raise InputError(
            f"samples must have shape (K, {mean.shape[0]}, {mean.shape[1]}), got {samples.shape}"
        )
    if weights.shape != (samples.shape[0],):
        raise InputError(
            f"weights must have shape ({samples.shape[0]},), got {weights.shape}"
        )
    if not (np.isfinite(learning_rate) and 0 < learning_rate <= 1):
        raise ParameterError(f"learning_rate must lie in (0, 1], got {learning_rate}")
    return mean, samples, weights


def weighted_mean_update(mean, samples, weights, learning_rate: float) -> np.ndarray:
    """mean' = (1 - a * sum(w)) * mean + a * sum_k w_k * u_k, per timestep.

    With learning_rate 1 and weights summing to one this reduces to the plain
    weighted sample mean.
    """
    mean, samples, weights = _check_update_args(mean, samples, weights, learning_rate)
    total = weights.sum()
    blended = np.einsum("k,ktm->tm", weights, samples)
    return (1.0 - learning_rate * total) * mean + learning_rate * blended


def weighted_cov_update(
    covariances,
    center,
    samples,
    weights,
    learning_rate: float,
    floor: float = DEFAULT_COV_FLOOR,
) -> np.ndarray:
    """Rank-mu style covariance blend, floored.

    Per timestep t:
        S'_t = (1 - a * sum(w)) * S_t + a * sum_k w_k (u_kt - c_t)(u_kt - c_t)^T
    then eigenvalue-floored via :func:`bound_covariance`. `center` must be the
    mean the deviations are measured against; for the adaptive update rule
    that is the PRE-update mean (the one the samples were drawn from), which
    the step functions enforce by call order.
    """
    center, samples, weights = _check_update_args(center, samples, weights, learning_rate)
    cov = np.asarray(covariances, dtype=np.float64)
    t, m = center.shape
    if cov.shape != (t, m, m):
        raise InputError(f"covariances must have shape ({t}, {m}, {m}), got {cov.shape}")
    total = weights.sum()
    dev = samples - center[None, :, :]
    scatter = np.einsum("k,kti,ktj->tij", weights, dev, dev)
    updated = (1.0 - learning_rate * total) * cov + learning_rate * scatter
    return bound_covariance(updated, floor)


def bound_covariance(matrix, floor: float) -> np.ndarray:
    """Clamp the eigenvalues of a symmetric matrix (or stack) from below.

    Symmetrizes, eigendecomposes, clamps each eigenvalue to at least `floor`,
    and reconstructs in the same eigenbasis. Idempotent on already-bounded
    input. Accepts a single (m, m) matrix or a (T, m, m) stack.
    """
    if not (np.isfinite(floor) and floor > 0):
        raise ParameterError(f"floor must be positive and finite, got {floor}")
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim not in (2, 3) or arr.shape[-1] != arr.shape[-2]:
        raise InputError(f"expected (m, m) or (T, m, m) input, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("covariance contains non-finite entries")
    sym = 0.5 * (arr + np.swapaxes(arr, -1, -2))
    eigvals, eigvecs = np.linalg.eigh(sym)
    eigvals = np.maximum(eigvals, floor)
    rebuilt = (eigvecs * eigvals[..., None, :]) @ np.swapaxes(eigvecs, -1, -2)
    return 0.5 * (rebuilt + np.swapaxes(rebuilt, -1, -2))


def tie_covariances(covariances) -> np.ndarray:
    """Average a (T, m, m) stack over the horizon and broadcast it back.

    Implements the shared-covariance mode, where all timesteps are tied to a
    single matrix.
    """
    cov = np.asarray(covariances, dtype=np.float64)
    if cov.ndim != 3:
        raise InputError(f"expected a (T, m, m) stack, got shape {cov.shape}")
    pooled = cov.mean(axis=0)
    return np.broadcast_to(pooled, cov.shape).copy()


def shift_policy(policy: GaussianPolicy, fill: str = "repeat-last") -> GaussianPolicy:
    """Advance the policy one timestep for the receding-horizon loop.

    Mean row t takes row t+1; the final row repeats the old last row or is
    zeroed, per `fill`. Covariances shift the same way but always repeat the
    last matrix, so the sampling distribution never collapses at the tail.
    """
    if fill not in ("repeat-last", "zero"):
        raise ParameterError(f"fill must be 'repeat-last' or 'zero', got {fill!r}")
    mean = policy.mean
    if fill == "repeat-last":
        last = mean[-1:]
    else:
        last = np.zeros((1, policy.control_dim))
    new_mean = np.concatenate([mean[1:], last], axis=0)
    cov = policy.covariances
    new_cov = np.concatenate([cov[1:], cov[-1:]], axis=0)
    return GaussianPolicy(mean=new_mean, covariances=new_cov)


def exploration_magnitude(policy: GaussianPolicy) -> float:
    """Largest covariance eigenvalue across the horizon.

    The per-matrix magnitude is the top eigenvalue; the policy-level
    diagnostic takes the max over timesteps.
    """
    eigvals = np.linalg.eigvalsh(policy.covariances)
    return float(eigvals[:, -1].max())


def weight_entropy(weights) -> float:
    """Shannon entropy of a weight vector; zero-weight entries contribute 0."""
    w = np.asarray(weights, dtype=np.float64)
    positive = w[w > 0]
    return float(-(positive * np.log(positive)).sum())
