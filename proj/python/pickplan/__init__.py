"""Minimum-time base-pose sequence planning for tabletop picking."""

from ._pickplan import (
    Plan,
    PickplanError,
    Pose2,
    Scene,
    derive_seed,
    execute_plan,
    load_scene,
    nav_time,
    plan_cost,
    plan_scene,
    sample_scene,
    save_scene,
)

__all__ = [
    "Plan",
    "PickplanError",
    "Pose2",
    "Scene",
    "derive_seed",
    "execute_plan",
    "load_scene",
    "nav_time",
    "plan_cost",
    "plan_scene",
    "sample_scene",
    "save_scene",
]
