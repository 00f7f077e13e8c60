"""Two-link planar arm driven by joint-target controls through a PD inner loop.

Controls are joint target angles; an inner proportional-derivative loop runs
ten substeps per outer step (the torque rate is 10x the planner rate) on
decoupled horizontal-plane joint dynamics, so holding the target at the
current pose is an exact equilibrium. The task is end-effector waypoint
tracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import EnvModel, TaskSpec, sq_norm


@dataclass(frozen=True)
class PDJointArm(EnvModel):
    """State [q1, q2, qd1, qd2, wp]; controls are joint targets (rad)."""

    task: TaskSpec = field(
        default_factory=lambda: TaskSpec(
            waypoints=((0.9, 0.5), (0.3, 1.0)), tolerance=0.1, target_speed=0.0
        )
    )
    dt_outer: float = 0.02
    start: tuple[float, float] = (0.2, 0.3)
    link_lengths: tuple[float, float] = (0.6, 0.6)
    inertia: float = 0.25
    joint_damping: float = 0.15
    kp: float = 40.0
    kd: float = 3.0
    joint_limit: float = 2.8
    pos_weight: float = 6.0
    vel_weight: float = 0.02
    effort_weight: float = 0.05
    terminal_weight: float = 30.0
    waypoint_penalty: float = 4.0

    name = "pd-joint"
    control_dim = 2
    state_dim = 5
    state_labels = ("q1", "q2", "qd1", "qd2", "wp")
    xy_tracks = ()
    substeps = 10

    @property
    def control_low(self):
        return (-self.joint_limit, -self.joint_limit)

    @property
    def control_high(self):
        return (self.joint_limit, self.joint_limit)

    def initial_state(self) -> np.ndarray:
        return np.array([self.start[0], self.start[1], 0.0, 0.0, 0.0])

    def end_effector(self, q: np.ndarray) -> np.ndarray:
        l1, l2 = self.link_lengths
        q1 = q[:, 0]
        q12 = q1 + q[:, 1]
        return np.stack(
            [l1 * np.cos(q1) + l2 * np.cos(q12), l1 * np.sin(q1) + l2 * np.sin(q12)], axis=1
        )

    def _task_positions(self, states):
        return self.end_effector(states[:, 0:2])

    def _substep(self, states, controls, dt, substep):
        q = states[:, 0:2]
        qd = states[:, 2:4]
        torque = self.kp * (controls - q) - self.kd * qd
        qd += (torque - self.joint_damping * qd) * (dt / self.inertia)
        q += qd * dt
        return states

    def stage_cost_batch(self, states, controls):
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        q, qd, wp = states[:, 0:2], states[:, 2:4], states[:, 4]
        d2 = sq_norm(self.end_effector(q) - self._active_waypoints(wp))
        return (
            self.pos_weight * d2
            + self.vel_weight * sq_norm(qd)
            + self.effort_weight * sq_norm(u - q)
            + self._remaining_waypoint_cost(wp)
        )

    def terminal_cost_batch(self, states):
        d2 = sq_norm(self.end_effector(states[:, 0:2]) - self.task.waypoint_array[-1])
        return self.terminal_weight * d2
