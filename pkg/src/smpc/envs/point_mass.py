"""Damped 2-D point mass with a velocity limit, following waypoints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import EnvModel, TaskSpec, sq_norm


@dataclass(frozen=True)
class PointMass2D(EnvModel):
    """State [x, y, vx, vy, wp]; controls are planar forces."""

    task: TaskSpec = field(
        default_factory=lambda: TaskSpec(
            waypoints=((0.8, 0.0), (1.6, 0.4), (2.4, 0.0)),
            tolerance=0.15,
            target_speed=0.5,
        )
    )
    dt_outer: float = 0.02
    start: tuple[float, float] = (0.0, 0.0)
    mass: float = 1.0
    damping: float = 1.5
    speed_limit: float = 2.0
    force_limit: float = 6.0
    pos_weight: float = 4.0
    speed_weight: float = 0.4
    effort_weight: float = 0.04
    terminal_weight: float = 20.0
    waypoint_penalty: float = 3.0

    name = "point-mass-2d"
    control_dim = 2
    state_dim = 5
    state_labels = ("x", "y", "vx", "vy", "wp")
    xy_tracks = (("agent", (0, 1)),)
    substeps = 1

    @property
    def control_low(self):
        return (-self.force_limit, -self.force_limit)

    @property
    def control_high(self):
        return (self.force_limit, self.force_limit)

    def initial_state(self) -> np.ndarray:
        return np.array([self.start[0], self.start[1], 0.0, 0.0, 0.0])

    def _substep(self, states, controls, dt, substep):
        vel = states[:, 2:4]
        vel += (controls / self.mass - self.damping * vel) * dt
        speed = np.sqrt(sq_norm(vel))
        # Unit scale below the limit, limit/speed above it.
        scale = self.speed_limit / np.maximum(speed, self.speed_limit)
        vel *= scale[:, None]
        states[:, 0:2] += vel * dt
        return states

    def stage_cost_batch(self, states, controls):
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        wp = states[:, 4]
        d2 = sq_norm(states[:, 0:2] - self._active_waypoints(wp))
        verr = np.sqrt(sq_norm(states[:, 2:4])) - self.task.target_speed
        return (
            self.pos_weight * d2
            + self.speed_weight * verr * verr
            + self.effort_weight * sq_norm(u)
            + self._remaining_waypoint_cost(wp)
        )

    def terminal_cost_batch(self, states):
        d2 = sq_norm(states[:, 0:2] - self.task.waypoint_array[-1])
        return self.terminal_weight * d2
