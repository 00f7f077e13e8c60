"""Shared test environments and oracle helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from smpc.envs import EnvModel, PointMass2D
from smpc.envs.base import sq_norm


@dataclass(frozen=True)
class QuadraticBowl(EnvModel):
    """Static cost bowl in control space: cost = |u - center|^2, no dynamics."""

    center: tuple[float, ...] = (0.0,)
    limit: float = 20.0

    name = "quadratic-bowl"
    state_dim = 1
    state_labels = ("s",)
    substeps = 1
    dt_outer = 0.02

    @property
    def control_dim(self):
        return len(self.center)

    @property
    def control_low(self):
        return tuple(-self.limit for _ in self.center)

    @property
    def control_high(self):
        return tuple(self.limit for _ in self.center)

    def initial_state(self):
        return np.zeros(1)

    def _substep(self, states, controls, dt, substep):
        return states

    def stage_cost_batch(self, states, controls):
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        diff = u - np.asarray(self.center)
        return np.sum(diff * diff, axis=1)

    def terminal_cost_batch(self, states):
        return np.zeros(states.shape[0])


@dataclass(frozen=True)
class ConstantCostEnv(EnvModel):
    """Every stage costs `stage`; no dynamics, no terminal cost."""

    stage: float = 2.5

    name = "constant-cost"
    control_dim = 1
    state_dim = 1
    state_labels = ("s",)
    substeps = 1
    dt_outer = 0.02
    control_low = (-10.0,)
    control_high = (10.0,)

    def initial_state(self):
        return np.zeros(1)

    def _substep(self, states, controls, dt, substep):
        return states

    def stage_cost_batch(self, states, controls):
        return np.full(states.shape[0], self.stage)

    def terminal_cost_batch(self, states):
        return np.zeros(states.shape[0])


@dataclass(frozen=True)
class ExplodingEnv(EnvModel):
    """Rollouts whose first control exceeds `threshold` blow up to NaN."""

    threshold: float = 0.5

    name = "exploding"
    control_dim = 1
    state_dim = 1
    state_labels = ("s",)
    substeps = 1
    dt_outer = 0.02
    control_low = (-10.0,)
    control_high = (10.0,)

    def initial_state(self):
        return np.zeros(1)

    def _substep(self, states, controls, dt, substep):
        states[:, 0] = np.where(controls[:, 0] > self.threshold, np.nan, states[:, 0])
        return states

    def stage_cost_batch(self, states, controls):
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        return u[:, 0] * u[:, 0]

    def terminal_cost_batch(self, states):
        return np.zeros(states.shape[0])


class CountingEnv:
    """Delegating wrapper that counts simulated rollout row-steps."""

    def __init__(self, inner):
        self._inner = inner
        self.row_steps = 0

    def __getattr__(self, name):
        return getattr(self._inner, name)

    def step_batch(self, states, controls, dt=None):
        self.row_steps += states.shape[0]
        return self._inner.step_batch(states, controls, dt)

    def simulations(self, horizon: int) -> float:
        return self.row_steps / horizon


@dataclass(frozen=True)
class DyadicPointMass(PointMass2D):
    """Point mass with stage costs snapped to a dyadic grid plus an offset.

    Sums of dyadic rationals are exact in float64, so adding a dyadic
    constant to every stage cost shifts rollout costs exactly and controller
    outputs must not change at all.
    """

    offset: float = 0.0

    def stage_cost_batch(self, states, controls):
        base = super().stage_cost_batch(states, controls)
        return np.floor(base * 1024.0) / 1024.0 + self.offset

    def terminal_cost_batch(self, states):
        base = super().terminal_cost_batch(states)
        return np.floor(base * 1024.0) / 1024.0


def power_iteration_top_eig(matrix: np.ndarray, iters: int = 500) -> float:
    """Independent largest-eigenvalue oracle for SPD matrices."""
    vec = np.ones(matrix.shape[0])
    for _ in range(iters):
        vec = matrix @ vec
        vec /= np.sqrt(np.sum(vec * vec))
    return float(vec @ (matrix @ vec))


def manual_rollout_cost(env, x0, controls) -> float:
    """Sequential single-rollout oracle using the env's single-state surface."""
    x = np.asarray(x0, dtype=np.float64).copy()
    total = 0.0
    for t in range(controls.shape[0]):
        total += env.stage_cost(x, controls[t])
        x = env.transition(x, controls[t])
    return total + env.terminal_cost(x)


def riccati_regulator(a, b, q, r, iters=2000, tol=1e-12):
    """Discrete Riccati recursion to convergence; returns the gain matrix K
    for u = -K x."""
    p = q.copy()
    for _ in range(iters):
        btp = b.T @ p
        gain = np.linalg.solve(r + btp @ b, btp @ a)
        p_next = q + a.T @ p @ (a - b @ gain)
        if np.max(np.abs(p_next - p)) < tol:
            p = p_next
            break
        p = p_next
    btp = b.T @ p
    gain = np.linalg.solve(r + btp @ b, btp @ a)
    return gain
