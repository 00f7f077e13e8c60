"""Deterministic sampling and parallel evaluation of control perturbations.

Sampling uses counter-based Philox streams: sample n of cycle l at controller
step s reads a dedicated counter block of the generator keyed by
(master_seed, s, l), so its noise is a pure function of
(master_seed, s, l, n) and batches are bit-identical no matter how evaluation
work is divided among workers. Evaluation splits the batch into contiguous
chunks; each rollout accumulates its stage costs strictly in timestep order
into its own slot, so no reduction order can vary.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import InputError, InvariantViolation, ParameterError
from .policy import GaussianPolicy

# One Philox counter increment yields four 64-bit words.
_WORDS_PER_BLOCK = 4


def _uniform_open(raw: np.ndarray) -> np.ndarray:
    """Map raw 64-bit words to doubles strictly inside (0, 1)."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0**-53)


@dataclass(frozen=True)
class SeedSpec:
    """Root of the per-sample random streams for one controller step.

    Each sample owns a fixed span of Philox counter blocks, so its draws are
    a pure function of (master_seed, step, cycle, sample) — never of shared
    generator state, batch composition, or worker count.
    """

    master_seed: int
    step: int = 0

    def __post_init__(self):
        if self.master_seed < 0 or self.step < 0:
            raise ParameterError("master_seed and step must be non-negative integers")

    def _keyed(self, cycle: int) -> np.random.Philox:
        if cycle < 0:
            raise ParameterError(f"cycle must be >= 0, got {cycle}")
        return np.random.Philox(
            np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.step, cycle))
        )

    def standard_normals(self, cycle: int, count: int, size: int) -> np.ndarray:
        """(count, size) standard normals; row n is sample n's private block."""
        if count < 1 or size < 1:
            raise ParameterError(f"need count >= 1 and size >= 1, got {count}, {size}")
        blocks = -(-size // _WORDS_PER_BLOCK)
        raw = self._keyed(cycle).random_raw(count * blocks * _WORDS_PER_BLOCK)
        raw = raw.reshape(count, blocks * _WORDS_PER_BLOCK)[:, :size]
        return ndtri(_uniform_open(raw))

    def sample_normals(self, cycle: int, sample: int, size: int) -> np.ndarray:
        """Sample `sample`'s block alone: pure function of the seed tuple.

        Equals row `sample` of :meth:`standard_normals` bit for bit.
        """
        if sample < 0:
            raise ParameterError(f"sample must be >= 0, got {sample}")
        blocks = -(-size // _WORDS_PER_BLOCK)
        bg = self._keyed(cycle)
        bg.advance(sample * blocks)
        raw = bg.random_raw(blocks * _WORDS_PER_BLOCK)[:size]
        return ndtri(_uniform_open(raw))


@dataclass
class RolloutBatch:
    """N sampled control sequences plus (once evaluated) their costs.

    Rows are ordered by `sample_index` regardless of how they were evaluated;
    controls[n] equals the sampling mean plus noises[n] exactly.
    """

    noises: np.ndarray  # (N, T, m) zero-mean perturbations
    controls: np.ndarray  # (N, T, m) absolute candidates
    costs: np.ndarray | None = None  # (N,) once evaluated
    failed: np.ndarray | None = None  # (N,) bool, true where the rollout blew up
    sample_index: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.noises.shape != self.controls.shape or self.noises.ndim != 3:
            raise InputError(
                f"noises and controls must share a (N, T, m) shape, got "
                f"{self.noises.shape} and {self.controls.shape}"
            )
        if self.sample_index is None:
            self.sample_index = np.arange(self.noises.shape[0])

    @property
    def size(self) -> int:
        return self.noises.shape[0]


def sample_noise_batch(
    policy: GaussianPolicy, n_samples: int, seeds: SeedSpec, cycle: int = 0
) -> RolloutBatch:
    """Draw N perturbations from the policy covariances, centered on its mean.

    noises[n][t] ~ N(0, S_t) via a per-timestep Cholesky transform of standard
    normals from sample n's stream; controls[n] = mean + noises[n].
    """
    if n_samples < 1:
        raise ParameterError(f"n_samples must be >= 1, got {n_samples}")
    try:
        chol = np.linalg.cholesky(policy.covariances)
    except np.linalg.LinAlgError as exc:
        raise InvariantViolation(
            "covariance factorization failed; policy covariances are not positive-definite"
        ) from exc
    t, m = policy.mean.shape
    z = seeds.standard_normals(cycle, n_samples, t * m).reshape(n_samples, t, m)
    noises = np.einsum("tij,ntj->nti", chol, z)
    controls = policy.mean[None, :, :] + noises
    return RolloutBatch(noises=noises, controls=controls)


def resolve_workers(workers: int) -> int:
    """Map the --workers convention (0 = auto-detect) to a concrete count."""
    if workers < 0:
        raise ParameterError(f"workers must be >= 0, got {workers}")
    if workers == 0:
        return os.cpu_count() or 1
    return workers


def _rollout_chunk(env, x0: np.ndarray, controls: np.ndarray):
    """Cost one contiguous chunk of rollouts against a shared start state.

    Per rollout: apply controls[:, t] for t = 0..T-1, adding the stage cost of
    (state, control) before each transition and the terminal cost at the end.
    A rollout that produces a non-finite state/cost or leaves the workspace is
    frozen and flagged; its cost becomes +inf.
    """
    n, horizon = controls.shape[0], controls.shape[1]
    states = np.repeat(x0[None, :], n, axis=0)
    costs = np.zeros(n)
    failed = np.zeros(n, dtype=bool)
    for t in range(horizon):
        u = controls[:, t, :]
        stage = env.stage_cost_batch(states, u)
        bad_cost = ~np.isfinite(stage)
        costs = np.where(failed | bad_cost, costs, costs + stage)
        nxt = env.step_batch(states, u)
        bad_state = ~np.all(np.isfinite(nxt), axis=1) | ~env.valid_mask(nxt)
        newly_failed = (bad_cost | bad_state) & ~failed
        failed |= newly_failed
        # Frozen rollouts keep their last valid state so later steps stay finite.
        states = np.where(failed[:, None], states, nxt)
    terminal = env.terminal_cost_batch(states)
    failed |= ~np.isfinite(terminal)
    costs = np.where(failed, np.inf, costs + np.where(np.isfinite(terminal), terminal, 0.0))
    return costs, failed


def evaluate_batch(env, x0, batch: RolloutBatch, workers: int = 1) -> RolloutBatch:
    """Fill in the costs of a sampled batch by forward simulation.

    Rollouts are independent; with workers > 1 the batch is split into
    contiguous chunks evaluated on a thread pool, each writing into its
    pre-assigned slots. Results are bit-identical for any worker count.
    """
    if batch.controls is None or batch.size < 1:
        raise InputError("batch has no controls to evaluate")
    x0 = np.asarray(x0, dtype=np.float64)
    n = batch.size
    n_workers = min(resolve_workers(workers), n)
    if n_workers <= 1:
        costs, failed = _rollout_chunk(env, x0, batch.controls)
    else:
        bounds = np.linspace(0, n, n_workers + 1).astype(int)
        costs = np.empty(n)
        failed = np.empty(n, dtype=bool)

        def run(lo: int, hi: int):
            c, f = _rollout_chunk(env, x0, batch.controls[lo:hi])
            costs[lo:hi] = c
            failed[lo:hi] = f

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(run, lo, hi)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for fut in futures:
                fut.result()
    batch.costs = costs
    batch.failed = failed
    return batch


def sort_and_select_elites(batch: RolloutBatch, n_elite: int) -> np.ndarray:
    """Indices of the n_elite lowest-cost samples, cost-ascending.

    Ties break by ascending sample_index, so the selection is deterministic
    and invariant to the batch's storage order.
    """
    if batch.costs is None:
        raise InputError("batch costs are unset; evaluate the batch first")
    if not (1 <= n_elite <= batch.size):
        raise ParameterError(
            f"n_elite must satisfy 1 <= n_elite <= {batch.size}, got {n_elite}"
        )
    order = np.lexsort((batch.sample_index, batch.costs))
    return batch.sample_index[order[:n_elite]]
