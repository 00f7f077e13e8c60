"""Benchmark environments and the name registry used by experiment configs."""

from __future__ import annotations

import dataclasses

from ..errors import ConfigError
from .base import EnvModel, TaskSpec
from .double_integrator import DoubleIntegrator2D
from .pd_joint import PDJointArm
from .point_mass import PointMass2D
from .pusher import PlanarPusher
from .step_climber import StepClimber

ENV_REGISTRY: dict[str, type[EnvModel]] = {
    DoubleIntegrator2D.name: DoubleIntegrator2D,
    PointMass2D.name: PointMass2D,
    StepClimber.name: StepClimber,
    PlanarPusher.name: PlanarPusher,
    PDJointArm.name: PDJointArm,
}


def make_env(name: str, task: TaskSpec | None = None, params: dict | None = None) -> EnvModel:
    """Build an environment by registry name with optional param overrides."""
    if name not in ENV_REGISTRY:
        known = ", ".join(sorted(ENV_REGISTRY))
        raise ConfigError(f"environment: unknown name {name!r}; expected one of {known}")
    cls = ENV_REGISTRY[name]
    fields = {f.name for f in dataclasses.fields(cls)}
    params = dict(params or {})
    for key in params:
        if key not in fields or key == "task":
            raise ConfigError(f"env.{key}: unknown parameter for environment {name!r}")
        if isinstance(params[key], list):
            params[key] = _to_tuple(params[key])
    kwargs = dict(params)
    if task is not None:
        kwargs["task"] = task
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"env: invalid parameters for {name!r}: {exc}") from exc


def _to_tuple(value):
    if isinstance(value, list):
        return tuple(_to_tuple(v) for v in value)
    return value


__all__ = [
    "EnvModel",
    "TaskSpec",
    "DoubleIntegrator2D",
    "PointMass2D",
    "StepClimber",
    "PlanarPusher",
    "PDJointArm",
    "ENV_REGISTRY",
    "make_env",
]
