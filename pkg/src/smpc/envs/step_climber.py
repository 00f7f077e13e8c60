"""Point hopper on piecewise-constant stair terrain.

The exploration-heavy task: horizontal force alone cannot pass a riser, so
rollouts must discover well-timed vertical impulses while grounded. Terrain
is a list of (x_start, height) breakpoints; contact is resolved by projecting
onto the terrain with an inelastic landing, and risers block horizontal
motion from below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .base import EnvModel, TaskSpec, speed_error_sq, sq_norm


def default_terrain(
    flat_until: float = 0.7, riser: float = 0.15, tread: float = 0.20, steps: int = 4
) -> tuple[tuple[float, float], ...]:
    """Flat approach followed by a staircase and a top landing."""
    points = [(-1e9, 0.0)]
    for k in range(steps):
        points.append((flat_until + k * tread, (k + 1) * riser))
    return tuple(points)


@dataclass(frozen=True)
class StepClimber(EnvModel):
    """State [x, z, vx, vz, wp]; controls [horizontal force, vertical impulse].

    The impulse component is clamped to [0, jump_limit] and adds to vz once
    per outer step, at the first substep, and only while grounded.
    """

    task: TaskSpec = field(
        default_factory=lambda: TaskSpec(
            waypoints=((0.45, 0.0), (1.05, 0.30), (1.75, 0.60)),
            tolerance=0.15,
            target_speed=0.5,
        )
    )
    terrain: tuple[tuple[float, float], ...] = field(default_factory=default_terrain)
    dt_outer: float = 0.02
    start: tuple[float, float] = (0.0, 0.0)
    mass: float = 1.0
    gravity: float = 9.81
    ground_friction: float = 2.5
    air_drag: float = 0.1
    force_limit: float = 8.0
    jump_limit: float = 3.0
    pos_weight: float = 4.0
    speed_weight: float = 0.2
    effort_weight: float = 0.02
    terminal_weight: float = 30.0
    waypoint_penalty: float = 4.0

    name = "step-climber"
    control_dim = 2
    state_dim = 5
    state_labels = ("x", "z", "vx", "vz", "wp")
    xy_tracks = (("agent", (0, 1)),)
    substeps = 2

    _GROUND_EPS = 1e-6
    _CLIMB_EPS = 1e-3

    @property
    def control_low(self):
        return (-self.force_limit, 0.0)

    @property
    def control_high(self):
        return (self.force_limit, self.jump_limit)

    @cached_property
    def _terrain_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        starts = np.asarray([p[0] for p in self.terrain], dtype=np.float64)
        heights = np.asarray([p[1] for p in self.terrain], dtype=np.float64)
        if np.any(np.diff(starts) <= 0):
            from ..errors import ConfigError

            raise ConfigError("env.terrain: breakpoints must have strictly increasing x")
        return starts, heights

    def initial_state(self) -> np.ndarray:
        x0 = float(self.start[0])
        z0 = max(float(self.start[1]), float(self.terrain_height(np.array([x0]))[0]))
        return np.array([x0, z0, 0.0, 0.0, 0.0])

    def terrain_height(self, x: np.ndarray) -> np.ndarray:
        starts, heights = self._terrain_arrays
        idx = np.maximum(np.searchsorted(starts, x, side="right") - 1, 0)
        return heights[idx]

    def _substep(self, states, controls, dt, substep):
        x, z, vx, vz = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
        grounded = (z - self.terrain_height(x)) <= self._GROUND_EPS
        if substep == 0:
            vz = np.where(grounded, vz + controls[:, 1], vz)
        drag = np.where(grounded, self.ground_friction, self.air_drag)
        vx = vx + (controls[:, 0] / self.mass - drag * vx) * dt
        vz = vz - self.gravity * dt
        # Ground support: no sinking while standing.
        vz = np.where(grounded, np.maximum(vz, 0.0), vz)
        x_new = x + vx * dt
        # A riser taller than the current altitude blocks horizontal motion.
        blocked = self.terrain_height(x_new) > z + self._CLIMB_EPS
        x_new = np.where(blocked, x, x_new)
        vx = np.where(blocked, 0.0, vx)
        z_new = z + vz * dt
        ground_new = self.terrain_height(x_new)
        landing = z_new < ground_new
        states[:, 0] = x_new
        states[:, 1] = np.where(landing, ground_new, z_new)
        states[:, 2] = vx
        states[:, 3] = np.where(landing, 0.0, vz)
        return states

    def stage_cost_batch(self, states, controls):
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        wp = states[:, 4]
        d2 = sq_norm(states[:, 0:2] - self._active_waypoints(wp))
        return (
            self.pos_weight * d2
            + self.speed_weight * speed_error_sq(states[:, 2:4], self.task.target_speed)
            + self.effort_weight * sq_norm(u)
            + self._remaining_waypoint_cost(wp)
        )

    def terminal_cost_batch(self, states):
        d2 = sq_norm(states[:, 0:2] - self.task.waypoint_array[-1])
        return self.terminal_weight * d2
