"""Vehicle and pedestrian kinematics at 10 Hz, the hard on-road projection,
and collision/goal event checks.

All functions are pure: they never mutate their inputs, so many episodes can
be stepped concurrently without shared state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

from .city_map import MapGeometry, SurfaceType, surface_at

DT = 0.1
WHEELBASE = 2.5
MAX_SPEED = 8.33
MAX_STEER = 0.52
ACCEL_MIN = -4.0
ACCEL_MAX = 3.0
STEER_RATE = 1.0  # rad/s toward the commanded steering angle
ROAD_MARGIN = 0.5
OFFROAD_SPEED_KEEP = 0.30
COLLISION_DIST = 1.5
GOAL_DIST = 3.0
WAYPOINT_RADIUS = 0.5

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


@dataclass(frozen=True, slots=True)
class VehicleState:
    x: float
    y: float
    heading: float
    speed: float
    steering: float
    goal_x: float
    goal_y: float

    def goal_distance(self) -> float:
        return math.hypot(self.goal_x - self.x, self.goal_y - self.y)


class VehicleAction(NamedTuple):
    accel: float          # m/s^2, clamped to [ACCEL_MIN, ACCEL_MAX]
    steer_target: float   # rad, clamped to [-MAX_STEER, MAX_STEER]


@dataclass(frozen=True, slots=True)
class CollisionEvent:
    ped_id: int
    distance: float
    mode: int  # env.MODE_* of the pedestrian at detection


def step_vehicle(state: VehicleState, action: VehicleAction, dt: float = DT) -> VehicleState:
    """Kinematic bicycle update: steering slews toward the commanded angle,
    speed integrates clamped acceleration, heading rate is (v/L) tan(steer)."""
    accel = min(max(action.accel, ACCEL_MIN), ACCEL_MAX)
    target = min(max(action.steer_target, -MAX_STEER), MAX_STEER)
    if state.speed == 0.0 and accel <= 0.0 and target == state.steering:
        return state  # parked and staying parked; the full update is identity
    dsteer = target - state.steering
    max_d = STEER_RATE * dt
    steering = state.steering + min(max(dsteer, -max_d), max_d)
    speed = min(max(state.speed + accel * dt, 0.0), MAX_SPEED)
    heading = wrap_angle(state.heading + (speed / WHEELBASE) * math.tan(steering) * dt)
    return VehicleState(
        x=state.x + speed * dt * math.cos(heading),
        y=state.y + speed * dt * math.sin(heading),
        heading=heading,
        speed=speed,
        steering=steering,
        goal_x=state.goal_x,
        goal_y=state.goal_y,
    )


def on_road(geom: MapGeometry, x: float, y: float, margin: float = ROAD_MARGIN) -> bool:
    for r in geom.roads:
        if r.x0 - margin <= x <= r.x1 + margin and r.y0 - margin <= y <= r.y1 + margin:
            return True
    return False


def project_to_road(geom: MapGeometry, x: float, y: float, margin: float = ROAD_MARGIN) -> tuple[float, float]:
    """Nearest point inside the union of margin-inflated road rectangles."""
    best = None
    best_d = math.inf
    for r in geom.roads:
        infl = r.inflate(margin)
        px, py = infl.clamp(x, y)
        d = math.hypot(px - x, py - y)
        if d < best_d:
            best, best_d = (px, py), d
    return best


def enforce_road_constraint(geom: MapGeometry, state: VehicleState) -> VehicleState:
    """Snap an off-road vehicle back to the road margin, keeping 30% of speed.
    Identity on feasible states, hence idempotent."""
    if on_road(geom, state.x, state.y):
        return state
    px, py = project_to_road(geom, state.x, state.y)
    return replace(state, x=px, y=py, speed=state.speed * OFFROAD_SPEED_KEEP)


def check_collision(vehicle: VehicleState, peds) -> Optional[CollisionEvent]:
    """Collision event for the nearest pedestrian closer than 1.5 m, else None."""
    best_i = -1
    best_d = COLLISION_DIST
    for i, p in enumerate(peds):
        d = math.hypot(p.x - vehicle.x, p.y - vehicle.y)
        if d < best_d:
            best_i, best_d = i, d
    if best_i < 0:
        return None
    return CollisionEvent(best_i, best_d, peds[best_i].crossing_mode)


def check_goal(vehicle: VehicleState) -> bool:
    return vehicle.goal_distance() < GOAL_DIST


# Pedestrian crossing modes (defined here so the kinematics layer has no
# upward import; the env module re-exports them).
MODE_NONE = 0
MODE_CROSSWALK = 1
MODE_JAYWALK = 2


@dataclass(slots=True)
class PedestrianState:
    x: float
    y: float
    walking_speed: float          # m/s, uniform in [1, 2] per episode
    tendency: float               # latent jaywalking tendency in [0, 1], hidden from the vehicle
    path: tuple[int, ...]         # upcoming graph nodes, ending at goal_node
    goal_node: int
    crossing_mode: int            # MODE_NONE | MODE_CROSSWALK | MODE_JAYWALK
    jaywalk_route: tuple[tuple[float, float], ...]
    exit_node: Optional[int]      # far-side node that ends a crosswalk crossing
    last_node: int
    road_entry_step: Optional[int]
    vel_x: float
    vel_y: float

    def copy(self) -> "PedestrianState":
        return PedestrianState(
            self.x, self.y, self.walking_speed, self.tendency, self.path,
            self.goal_node, self.crossing_mode, self.jaywalk_route,
            self.exit_node, self.last_node, self.road_entry_step,
            self.vel_x, self.vel_y,
        )


def advance_pedestrian(
    p: PedestrianState,
    go: bool,
    graph,
    geom: MapGeometry,
    step_index: int,
    dt: float = DT,
) -> int:
    """In-place single-tick advance of a pedestrian the caller owns; returns
    the number of path nodes popped.

    On "wait" the position is held. On "go" the pedestrian walks toward its
    active target (the jaywalk route while jaywalking, else the next path
    node); targets are consumed when passed through or once within
    WAYPOINT_RADIUS after the move, with leftover travel budget carried to the
    next target. Movement halts at a crossing boundary: when the next path
    node is a crosswalk midpoint and no crossing mode is set, the decision
    roll (owned by the env) must happen before the pedestrian proceeds.
    """
    if not go:
        p.vel_x = 0.0
        p.vel_y = 0.0
        return 0

    x0, y0 = p.x, p.y
    x, y = x0, y0
    budget = p.walking_speed * dt
    crossing_nodes = graph.crossing_nodes
    nodes = graph.nodes
    pops = 0

    while budget > 1e-12:
        if p.crossing_mode == MODE_JAYWALK and p.jaywalk_route:
            tx, ty = p.jaywalk_route[0]
        elif p.path:
            if p.crossing_mode == MODE_NONE and p.path[0] in crossing_nodes:
                break  # pending crossing roll; stand at the curb
            tx, ty = nodes[p.path[0]]
        else:
            break  # goal reached; env resamples a fresh one after the step

        d = math.hypot(tx - x, ty - y)
        if d <= budget:
            x, y = tx, ty
            budget -= d
            reached = True
        else:
            f = budget / d
            x += (tx - x) * f
            y += (ty - y) * f
            reached = (d - budget) <= WAYPOINT_RADIUS
            budget = 0.0

        if reached:
            if p.crossing_mode == MODE_JAYWALK and p.jaywalk_route:
                p.jaywalk_route = p.jaywalk_route[1:]
                if not p.jaywalk_route:
                    p.crossing_mode = MODE_NONE
            else:
                node = p.path[0]
                p.path = p.path[1:]
                p.last_node = node
                pops += 1
                if p.exit_node is not None and node == p.exit_node:
                    p.crossing_mode = MODE_NONE
                    p.exit_node = None

    p.x = x
    p.y = y
    p.vel_x = (x - x0) / dt
    p.vel_y = (y - y0) / dt
    if p.crossing_mode != MODE_NONE and p.road_entry_step is None:
        if surface_at(geom, (x, y)) == SurfaceType.ROAD:
            p.road_entry_step = step_index
    return pops


def step_pedestrian(
    ped: PedestrianState,
    go: bool,
    graph,
    geom: MapGeometry,
    step_index: int,
    dt: float = DT,
) -> tuple[PedestrianState, int]:
    """Pure variant of advance_pedestrian: the input state is left untouched."""
    p = ped.copy()
    pops = advance_pedestrian(p, go, graph, geom, step_index, dt)
    return p, pops
