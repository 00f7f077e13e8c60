"""Common environment interface: dynamics + cost behind one contract.

An environment is an immutable description of a task: a deterministic batch
transition, a nonnegative stage cost, a terminal cost, and a workspace
validity test. Rollout state is a plain float vector (value-semantic, copied
per rollout), so concurrent evaluation is race-free by construction. Task
progress (the index of the active waypoint) travels inside the state vector
as its last component and advances once per outer control period.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import ConfigError, InputError


@dataclass(frozen=True)
class TaskSpec:
    """Ordered 2-D waypoints with an arrival tolerance and a speed target.

    For the pusher the waypoints are box goal positions. The terminal goal is
    the last waypoint.
    """

    waypoints: tuple[tuple[float, float], ...]
    tolerance: float = 0.15
    target_speed: float = 0.0

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ConfigError("task.waypoints: need at least one waypoint")
        try:
            wp = tuple(tuple(float(v) for v in point) for point in self.waypoints)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"task.waypoints: expected 2-D positions: {exc}") from exc
        if any(len(point) != 2 or not all(np.isfinite(point)) for point in wp):
            raise ConfigError("task.waypoints: each waypoint must be a finite 2-D position")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise ConfigError(f"task.tolerance: must be positive, got {self.tolerance}")
        if not (np.isfinite(self.target_speed) and self.target_speed >= 0):
            raise ConfigError(f"task.target_speed: must be >= 0, got {self.target_speed}")
        object.__setattr__(self, "waypoints", wp)
        object.__setattr__(self, "tolerance", float(self.tolerance))
        object.__setattr__(self, "target_speed", float(self.target_speed))

    @cached_property
    def waypoint_array(self) -> np.ndarray:
        arr = np.asarray(self.waypoints, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @property
    def count(self) -> int:
        return len(self.waypoints)


class EnvModel:
    """Base class for benchmark environments.

    Subclasses are frozen dataclasses carrying their physical and cost
    parameters, and define:

        name, control_dim, state_dim, state_labels, control_low/high,
        dt_outer, substeps
        _substep(states, controls, dt, substep)  -> next states
        _task_positions(states)                  -> (B, 2) task-space points
        stage_cost_batch(states, controls)       -> (B,) nonnegative
        terminal_cost_batch(states)              -> (B,)
        initial_state()                          -> (state_dim,)

    `xy_tracks` names (label, (col_x, col_y)) pairs for trajectory output.
    """

    name: str = "env"
    control_dim: int = 1
    state_dim: int = 1
    state_labels: tuple[str, ...] = ()
    xy_tracks: tuple[tuple[str, tuple[int, int]], ...] = ()
    substeps: int = 1
    dt_outer: float = 0.02
    task: TaskSpec | None = None
    waypoint_penalty: float = 0.0

    # Generous workspace half-width; leaving it flags the state invalid.
    workspace_limit: float = 100.0

    @cached_property
    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.control_low, dtype=np.float64),
            np.asarray(self.control_high, dtype=np.float64),
        )

    def clamp_controls(self, controls: np.ndarray) -> np.ndarray:
        low, high = self._bounds
        return np.clip(controls, low, high)

    def step_batch(self, states: np.ndarray, controls: np.ndarray, dt: float | None = None) -> np.ndarray:
        """One outer control period: `substeps` semi-implicit substeps, then a
        single waypoint-progress update."""
        if dt is None:
            dt = self.dt_outer
        elif not (np.isfinite(dt) and dt > 0):
            raise InputError(f"dt must be positive, got {dt}")
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        out = np.array(states, dtype=np.float64)
        h = dt / self.substeps
        for k in range(self.substeps):
            out = self._substep(out, u, h, k)
        if self.task is not None:
            out[:, -1] = self._advance_waypoints(self._task_positions(out), out[:, -1])
        return out

    def valid_mask(self, states: np.ndarray) -> np.ndarray:
        return np.all(np.abs(states) <= self.workspace_limit, axis=1)

    def success_mask(self, states: np.ndarray) -> np.ndarray:
        """Task tolerance met: every waypoint has been reached."""
        if self.task is None:
            return np.zeros(states.shape[0], dtype=bool)
        return states[:, -1] >= self.task.count

    # Single-state conveniences mirroring the batch contract.

    def transition(self, x: np.ndarray, u: np.ndarray, dt: float | None = None) -> np.ndarray:
        return self.step_batch(
            np.asarray(x, dtype=np.float64)[None, :], np.asarray(u, dtype=np.float64)[None, :], dt
        )[0]

    def stage_cost(self, x: np.ndarray, u: np.ndarray) -> float:
        return float(
            self.stage_cost_batch(
                np.asarray(x, dtype=np.float64)[None, :], np.asarray(u, dtype=np.float64)[None, :]
            )[0]
        )

    def terminal_cost(self, x: np.ndarray) -> float:
        return float(self.terminal_cost_batch(np.asarray(x, dtype=np.float64)[None, :])[0])

    def _task_positions(self, states: np.ndarray) -> np.ndarray:
        return states[:, 0:2]

    # Waypoint helpers shared by the task environments.

    def _active_waypoints(self, wp_index: np.ndarray) -> np.ndarray:
        """Target per batch row: the active waypoint, or the last one once
        every waypoint has been reached."""
        wps = self.task.waypoint_array
        idx = np.minimum(wp_index.astype(np.int64), len(wps) - 1)
        return wps[idx]

    def _advance_waypoints(self, pos: np.ndarray, wp_index: np.ndarray) -> np.ndarray:
        """Bump the active-waypoint index where `pos` is within tolerance."""
        task = self.task
        target = self._active_waypoints(wp_index)
        diff = pos - target
        d2 = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]
        within = d2 <= task.tolerance * task.tolerance
        return np.where(within & (wp_index < task.count), wp_index + 1.0, wp_index)

    def _remaining_waypoint_cost(self, wp_index: np.ndarray) -> np.ndarray:
        """Constant penalty per unreached waypoint.

        Keeps progression strictly cheaper than loitering at an intermediate
        waypoint (reaching one re-targets the next, which is farther away).
        """
        return self.waypoint_penalty * np.maximum(self.task.count - wp_index, 0.0)


def sq_norm(vectors: np.ndarray) -> np.ndarray:
    """Row-wise squared Euclidean norm of a (B, 2) array."""
    return vectors[:, 0] * vectors[:, 0] + vectors[:, 1] * vectors[:, 1]


def speed_error_sq(velocities: np.ndarray, target_speed: float) -> np.ndarray:
    """Squared difference between the speed |v| and the target speed."""
    err = np.sqrt(sq_norm(velocities)) - target_speed
    return err * err
