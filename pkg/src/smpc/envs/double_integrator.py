"""2-D double integrator: acceleration control, quadratic regulator cost.

The analytic-oracle environment. With the goal waypoint at the origin and
target speed zero the stage cost is exactly x'Qx + u'Ru with
Q = diag(pos_weight, pos_weight, vel_weight, vel_weight) and R = effort_weight * I,
so a discrete Riccati recursion gives the optimal regulator to compare
against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import EnvModel, TaskSpec, sq_norm


@dataclass(frozen=True)
class DoubleIntegrator2D(EnvModel):
    """State [x, y, vx, vy, wp]; controls are accelerations (ax, ay)."""

    task: TaskSpec = field(
        default_factory=lambda: TaskSpec(waypoints=((0.0, 0.0),), tolerance=0.05)
    )
    dt_outer: float = 0.05
    start: tuple[float, float] = (2.0, 1.0)
    accel_limit: float = 8.0
    pos_weight: float = 1.0
    vel_weight: float = 0.1
    effort_weight: float = 0.01
    terminal_pos_weight: float = 5.0
    terminal_vel_weight: float = 0.5
    waypoint_penalty: float = 0.0

    name = "double-integrator-2d"
    control_dim = 2
    state_dim = 5
    state_labels = ("x", "y", "vx", "vy", "wp")
    xy_tracks = (("agent", (0, 1)),)
    substeps = 1

    @property
    def control_low(self):
        return (-self.accel_limit, -self.accel_limit)

    @property
    def control_high(self):
        return (self.accel_limit, self.accel_limit)

    def initial_state(self) -> np.ndarray:
        return np.array([self.start[0], self.start[1], 0.0, 0.0, 0.0])

    def _substep(self, states, controls, dt, substep):
        vel = states[:, 2:4]
        vel += controls * dt  # semi-implicit: velocity first
        states[:, 0:2] += vel * dt
        return states

    def stage_cost_batch(self, states, controls):
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        wp = states[:, 4]
        d2 = sq_norm(states[:, 0:2] - self._active_waypoints(wp))
        verr = np.sqrt(sq_norm(states[:, 2:4])) - self.task.target_speed
        cost = (
            self.pos_weight * d2
            + self.vel_weight * verr * verr
            + self.effort_weight * sq_norm(u)
        )
        if self.waypoint_penalty:
            cost += self._remaining_waypoint_cost(wp)
        return cost

    def terminal_cost_batch(self, states):
        d2 = sq_norm(states[:, 0:2] - self._active_waypoints(states[:, 4]))
        v2 = sq_norm(states[:, 2:4])
        return self.terminal_pos_weight * d2 + self.terminal_vel_weight * v2
