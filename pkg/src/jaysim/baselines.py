"""Non-learning vehicle policies and the scripted always-go pedestrian policy.

All policies share the evaluation interface: a vehicle policy maps
(observation[34], rng) -> VehicleAction, a pedestrian policy maps
observations[12, 20] -> 12 go/wait decisions. Apart from the random policy's
generator they are pure functions of the observation.
"""
from __future__ import annotations

import math

import numpy as np

from .city_map import HALF_EXTENT
from .env import N_PEDS, SDC_OBS_LAYOUT
from .physics import ACCEL_MAX, ACCEL_MIN, MAX_STEER, VehicleAction

STEER_GAIN = 1.5      # proportional gain toward the goal bearing
BRAKE_CONE_DIST = 12.0
BRAKE_CONE_HALF_ANGLE = math.radians(30.0)


def _heading_error(obs: np.ndarray) -> float:
    """Signed angle from the current heading to the goal bearing. The goal
    offset is already in the vehicle's body frame, so this is its polar angle."""
    lo, hi = SDC_OBS_LAYOUT["goal_relative"]
    rel_fwd, rel_left = obs[lo:hi]
    return math.atan2(rel_left, rel_fwd)


def random_policy(obs: np.ndarray, rng: np.random.Generator) -> VehicleAction:
    """Uniform acceleration and steering."""
    return VehicleAction(
        float(rng.uniform(ACCEL_MIN, ACCEL_MAX)),
        float(rng.uniform(-MAX_STEER, MAX_STEER)),
    )


def constant_speed_policy(obs: np.ndarray, rng=None) -> VehicleAction:
    """Fixed throttle, no steering, no awareness of anything."""
    return VehicleAction(ACCEL_MAX, 0.0)


def rule_based_policy(obs: np.ndarray, rng=None) -> VehicleAction:
    """Full throttle, proportional steering toward the goal bearing."""
    steer = min(max(STEER_GAIN * _heading_error(obs), -MAX_STEER), MAX_STEER)
    return VehicleAction(ACCEL_MAX, steer)


def _pedestrian_ahead(obs: np.ndarray) -> bool:
    lo, hi = SDC_OBS_LAYOUT["pedestrians"]
    block = obs[lo:hi].reshape(-1, 4)
    for rel_fwd, rel_left, _, _ in block:
        dx = rel_fwd * HALF_EXTENT
        dy = rel_left * HALF_EXTENT
        if math.hypot(dx, dy) <= BRAKE_CONE_DIST:
            if abs(math.atan2(dy, dx)) <= BRAKE_CONE_HALF_ANGLE:
                return True
    return False


def rule_based_braking_policy(obs: np.ndarray, rng=None) -> VehicleAction:
    """Rule-based steering, but hard braking when any pedestrian is within
    12 m inside a +/-30 degree forward cone."""
    base = rule_based_policy(obs)
    if _pedestrian_ahead(obs):
        return VehicleAction(ACCEL_MIN, base.steer_target)
    return base


def always_go_ped_policy(ped_obs: np.ndarray) -> np.ndarray:
    """Scripted pedestrians: go every step; the crossing-mode roll still
    applies inside the env."""
    return np.ones(N_PEDS, dtype=np.int64)


SDC_BASELINES = {
    "random": random_policy,
    "constant": constant_speed_policy,
    "rule": rule_based_policy,
    "rule-brake": rule_based_braking_policy,
}
