"""Planar pushing: a disc robot shoving a square box between goal waypoints.

Quasi-static contact: the box has no velocity state. When the disc overlaps a
box face, the penetration is resolved along the contact normal, split between
box displacement and robot pushback according to the box's mass resistance.
Sliding along a face never drags the box sideways (the normal is
perpendicular to the slide direction), which stands in for Coulomb slip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import EnvModel, TaskSpec, sq_norm


@dataclass(frozen=True)
class PlanarPusher(EnvModel):
    """State [rx, ry, rvx, rvy, bx, by, wp]; controls are robot forces.

    Task waypoints are box goal positions (0.2 m tolerance by default).
    """

    task: TaskSpec = field(
        default_factory=lambda: TaskSpec(
            waypoints=((2.0, 0.0),), tolerance=0.2, target_speed=0.0
        )
    )
    dt_outer: float = 0.02
    robot_start: tuple[float, float] = (0.0, 0.0)
    box_start: tuple[float, float] = (1.0, 0.0)
    disc_radius: float = 0.15
    box_side: float = 0.36
    box_mass: float = 3.5
    push_stiffness: float = 3.5
    mass: float = 1.0
    damping: float = 2.0
    speed_limit: float = 1.5
    force_limit: float = 8.0
    box_weight: float = 6.0
    near_weight: float = 1.0
    near_slack: float = 0.05
    effort_weight: float = 0.02
    terminal_weight: float = 40.0
    waypoint_penalty: float = 6.0

    name = "planar-pusher"
    control_dim = 2
    state_dim = 7
    state_labels = ("rx", "ry", "rvx", "rvy", "bx", "by", "wp")
    xy_tracks = (("robot", (0, 1)), ("box", (4, 5)))
    substeps = 2

    @property
    def control_low(self):
        return (-self.force_limit, -self.force_limit)

    @property
    def control_high(self):
        return (self.force_limit, self.force_limit)

    def initial_state(self) -> np.ndarray:
        return np.array(
            [self.robot_start[0], self.robot_start[1], 0.0, 0.0,
             self.box_start[0], self.box_start[1], 0.0]
        )

    def _task_positions(self, states):
        return states[:, 4:6]

    def _substep(self, states, controls, dt, substep):
        vel = states[:, 2:4]
        vel += (controls / self.mass - self.damping * vel) * dt
        speed = np.sqrt(sq_norm(vel))
        scale = self.speed_limit / np.maximum(speed, self.speed_limit)
        vel *= scale[:, None]
        states[:, 0:2] += vel * dt
        rpos, bpos = self._resolve_contact(states[:, 0:2], states[:, 4:6])
        states[:, 0:2] = rpos
        states[:, 4:6] = bpos
        return states

    def _resolve_contact(self, rpos, bpos):
        half = 0.5 * self.box_side
        rel = rpos - bpos
        closest = np.clip(rel, -half, half)
        delta = rel - closest
        dist = np.sqrt(sq_norm(delta))
        normal = delta / np.maximum(dist, 1e-12)[:, None]
        pen = np.maximum(self.disc_radius - dist, 0.0)
        inside = dist <= 1e-12
        if inside.any():
            # Disc center inside the box: push out along the least-penetrated axis.
            axis_pen = half - np.abs(closest)
            x_major = axis_pen[:, 0] <= axis_pen[:, 1]
            sign = np.where(rel >= 0, 1.0, -1.0)
            fallback = np.where(
                x_major[:, None],
                np.stack([sign[:, 0], np.zeros(len(rel))], axis=1),
                np.stack([np.zeros(len(rel)), sign[:, 1]], axis=1),
            )
            normal = np.where(inside[:, None], fallback, normal)
            pen = np.where(inside, self.disc_radius + axis_pen.min(axis=1), pen)
        eff = self.push_stiffness / (self.push_stiffness + self.box_mass)
        bpos = bpos - normal * (pen * eff)[:, None]
        rpos = rpos + normal * (pen * (1.0 - eff))[:, None]
        return rpos, bpos

    def stage_cost_batch(self, states, controls):
        u = self.clamp_controls(np.asarray(controls, dtype=np.float64))
        rpos, bpos, wp = states[:, 0:2], states[:, 4:6], states[:, 6]
        box_d2 = sq_norm(bpos - self._active_waypoints(wp))
        reach = np.sqrt(sq_norm(rpos - bpos))
        contact_range = self.disc_radius + 0.5 * self.box_side + self.near_slack
        near = np.maximum(reach - contact_range, 0.0)
        return (
            self.box_weight * box_d2
            + self.near_weight * near * near
            + self.effort_weight * sq_norm(u)
            + self._remaining_waypoint_cost(wp)
        )

    def terminal_cost_batch(self, states):
        d2 = sq_norm(states[:, 4:6] - self.task.waypoint_array[-1])
        return self.terminal_weight * d2
