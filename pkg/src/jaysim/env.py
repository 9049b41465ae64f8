"""Episode state and transition: trait sampling, the jaywalk decision roll,
observation construction, rewards, and termination.

An EpisodeState is an owned value and env_step is a pure transition (inputs
are never mutated), so any number of episodes can be stepped concurrently.
All in-episode randomness derives from the reset seed through per-pedestrian
substreams; identical seeds and action sequences give bit-identical
trajectories, and runs that differ only in the jaywalk multiplier keep every
non-jaywalking pedestrian's trajectory identical (paired comparisons).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import physics
from .city_map import (
    HALF_EXTENT,
    N_SIDEWALK_NODES,
    Rect,
    SurfaceType,
    build_map,
    build_nav_graph,
    classify_points,
    get_routing,
    lane_center_distance,
    nearest_crosswalk,
    surface_at,
)
from .physics import (
    MODE_CROSSWALK,
    MODE_JAYWALK,
    MODE_NONE,
    CollisionEvent,
    PedestrianState,
    VehicleAction,
    VehicleState,
    advance_pedestrian,
    check_collision,
    check_goal,
    enforce_road_constraint,
    step_vehicle,
    wrap_angle,
)

EPISODE_STEPS = 500
N_PEDS = 12
WALK_SPEED_MIN = 1.0
WALK_SPEED_MAX = 2.0
DEFAULT_JAYWALK_MULTIPLIER = 0.25
JAYWALK_ENTRY_OFFSETS = (8.0, 6.0, 4.0, 2.0)  # along-road detour candidates, m
JAYWALK_CURB_INSET = 0.5

PED_OBS_DIM = 20
SDC_OBS_DIM = 34
GLOBAL_STATE_DIM = 58

# Reward shaping. The terminal rewards and the pedestrian progress/waypoint/
# waiting values are fixed by the task definition; the vehicle penalty
# magnitudes and proximity thresholds are design values kept small relative
# to the +/-50 terminal rewards.
PED_PROGRESS_COEF = 2.0
PED_WAYPOINT_BONUS = 5.0
PED_COLLISION_PENALTY = -25.0
SMART_WAIT_BONUS = 0.3
SMART_WAIT_SDC_DIST = 10.0
SMART_WAIT_SDC_SPEED = 4.0
SDC_PROGRESS_COEF = 1.0
SDC_GOAL_BONUS = 50.0
SDC_COLLISION_PENALTY = -50.0
SDC_SPEEDING_PENALTY = -0.5
SPEEDING_SPEED = 4.0
SPEEDING_PED_DIST = 15.0
SDC_OFFLANE_PENALTY = -0.2
OFFLANE_DIST = 1.5
SDC_HEADING_COEF = -0.1

# Vehicle spawns sit at the through-road ends (heading into the map, small
# lateral/heading jitter so lane keeping is not free); the goal is the
# opposite end of the same road, so every route crosses the intersection and
# its crosswalks. 108 m at up to 8.33 m/s leaves margin within the 50 s
# horizon but no slack for indecision.
VEHICLE_SPAWNS = (
    # (spawn x, spawn y, heading, goal x, goal y)
    (62.0, 6.0, math.pi / 2, 60.0, 114.0),    # northbound lane
    (58.0, 114.0, -math.pi / 2, 60.0, 6.0),   # southbound lane
    (6.0, 58.0, 0.0, 114.0, 60.0),            # eastbound lane
    (114.0, 62.0, math.pi, 6.0, 60.0),        # westbound lane
)
MIN_SPAWN_GOAL_DIST = 60.0
SPAWN_LATERAL_JITTER = 1.0
SPAWN_HEADING_JITTER = 0.05
SPAWN_SPEED = 4.0  # vehicles enter the map already rolling

PED_OBS_LAYOUT = {
    "position": (0, 2),
    "walking_speed": (2, 3),
    "jaywalk_tendency": (3, 4),
    "target_direction": (4, 6),
    "target_distance": (6, 7),
    "surface_onehot": (7, 10),
    "sdc_relative": (10, 12),
    "sdc_velocity": (12, 14),
    "sdc_speed": (14, 15),
    "sdc_distance": (15, 16),
    "nearest_ped_relative": (16, 18),
    "nearest_ped_distance": (18, 19),
    "time_remaining": (19, 20),
}

# The vehicle's observation has no slot for pedestrian traits by construction.
# Relative positions/velocities are expressed in the vehicle's body frame.
SDC_OBS_LAYOUT = {
    "position": (0, 2),
    "heading": (2, 4),
    "speed": (4, 5),
    "steering": (5, 6),
    "goal_relative": (6, 8),
    "goal_distance": (8, 9),
    "crosswalk_distance": (9, 10),
    "pedestrians": (10, 34),  # 6 nearest x [rel pos (2), velocity (2)], body frame
}

GLOBAL_STATE_LAYOUT = {
    "pedestrians": (0, 48),  # 12 x [pos (2), walking speed (1), tendency (1)]
    "sdc_position": (48, 50),
    "sdc_heading": (50, 52),
    "sdc_speed": (52, 53),
    "sdc_steering": (53, 54),
    "goal_relative": (54, 56),
    "goal_distance": (56, 57),
    "step_fraction": (57, 58),
}

_GEOM = build_map()
_GRAPH = build_nav_graph()
_ROUTING = get_routing()

# crosswalk id -> the road rect it spans, used for jaywalk route geometry
_CROSSING_ROAD = tuple(
    max(
        _GEOM.roads,
        key=lambda r: max(0.0, min(r.x1, cw.x1) - max(r.x0, cw.x0))
        * max(0.0, min(r.y1, cw.y1) - max(r.y0, cw.y0)),
    )
    for cw in _GEOM.crosswalks
)

PARKED_ACTION = VehicleAction(physics.ACCEL_MIN, 0.0)


@dataclass(frozen=True, slots=True)
class EpisodeState:
    step: int
    vehicle: VehicleState
    peds: tuple[PedestrianState, ...]
    # One PCG64 state tuple (state, inc, has_uint32, uinteger) per pedestrian.
    # In-episode draws (crossing rolls, goal resampling) use per-pedestrian
    # substreams so runs that differ only in the jaywalk multiplier keep every
    # other pedestrian's trajectory bit-identical (paired-comparison design).
    ped_rng_states: tuple[tuple[int, int, int, int], ...]
    jaywalk_multiplier: float
    terminal: Optional[str]       # None | "collision" | "goal" | "timeout"
    collision: Optional[CollisionEvent]


@dataclass(frozen=True, slots=True)
class Observations:
    ped: np.ndarray           # (12, 20)
    sdc: np.ndarray           # (34,)
    global_state: np.ndarray  # (58,)


@dataclass(frozen=True, slots=True)
class StepRewards:
    ped: np.ndarray  # (12,)
    sdc: float


@dataclass(frozen=True, slots=True)
class StepEvents:
    rolls: tuple[tuple[int, int], ...]   # (ped index, rolled mode)
    ped_targets: tuple                   # (12,) step-start active target per ped, or None
    ped_pops: tuple                      # (12,) path nodes reached
    ped_waited: tuple                    # (12,) bool, decision was wait
    collision: Optional[CollisionEvent]
    goal_reached: bool
    timeout: bool


def trait_quartile(tendency: float) -> int:
    """Quartile 1..4 of the jaywalk tendency: [0,.25), [.25,.5), [.5,.75), [.75,1]."""
    if tendency < 0.25:
        return 1
    if tendency < 0.5:
        return 2
    if tendency < 0.75:
        return 3
    return 4


def rng_state_tuple(rng: np.random.Generator) -> tuple[int, int, int, int]:
    s = rng.bit_generator.state
    return (s["state"]["state"], s["state"]["inc"], s["has_uint32"], s["uinteger"])


def rng_from_tuple(t: tuple[int, int, int, int]) -> np.random.Generator:
    bg = np.random.PCG64(0)
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": t[0], "inc": t[1]},
        "has_uint32": t[2],
        "uinteger": t[3],
    }
    return np.random.Generator(bg)


def jaywalk_roll(tendency: float, multiplier: float, rng: np.random.Generator) -> int:
    """One crossing decision: jaywalk with probability tendency * multiplier,
    else use the crosswalk. Always consumes exactly one draw so episodes with
    different multipliers stay aligned on the same seed."""
    return MODE_JAYWALK if rng.random() < tendency * multiplier else MODE_CROSSWALK


def _jaywalk_route(
    x: float, y: float, midpoint_id: int, exit_id: int
) -> tuple[tuple[float, float], ...]:
    """Mid-block crossing route: walk along the curb away from the crosswalk,
    then cut straight over the road to the opposite curb. Falls back to a
    direct cut if no clear detour exists."""
    cw_idx = midpoint_id - N_SIDEWALK_NODES
    road = _CROSSING_ROAD[cw_idx]
    mx, my = _GRAPH.nodes[midpoint_id]
    bx, by = _GRAPH.nodes[exit_id]
    horizontal = road.width >= road.height  # crossing moves in y

    if horizontal:
        along, m_along = x, mx
        far_hi, far_lo = road.y1, road.y0
        b_cross, m_cross = by, my
    else:
        along, m_along = y, my
        far_hi, far_lo = road.x1, road.x0
        b_cross, m_cross = bx, mx

    away = 1.0 if along >= m_along else -1.0
    lat_dir = 1.0 if b_cross >= m_cross else -1.0
    far_edge = (far_hi + JAYWALK_CURB_INSET) if lat_dir > 0 else (far_lo - JAYWALK_CURB_INSET)

    for offset in JAYWALK_ENTRY_OFFSETS:
        for s in (away, -away):
            if horizontal:
                entry = (x + s * offset, y)
                target = (entry[0], far_edge)
            else:
                entry = (x, y + s * offset)
                target = (far_edge, entry[1])
            if surface_at(_GEOM, entry) != SurfaceType.SIDEWALK:
                continue
            if surface_at(_GEOM, target) != SurfaceType.SIDEWALK:
                continue
            if any(
                _segment_near_rect(entry, target, r) for r in _GEOM.crosswalks
            ):
                continue
            return (entry, target)

    # no clear detour: cut straight toward the far-side node's sidewalk
    for r in _GEOM.sidewalks:
        if r.contains(bx, by):
            return (r.clamp(x, y),)
    return ((bx, by),)


def _segment_near_rect(p: tuple[float, float], q: tuple[float, float], r: Rect) -> bool:
    from .city_map import _segment_hits_rect

    return _segment_hits_rect(p, q, r.inflate(JAYWALK_CURB_INSET))


def active_target(ped: PedestrianState) -> Optional[tuple[float, float]]:
    if ped.crossing_mode == MODE_JAYWALK and ped.jaywalk_route:
        return ped.jaywalk_route[0]
    if ped.path:
        return _GRAPH.nodes[ped.path[0]]
    return None


def reset(
    seed: int, jaywalk_multiplier: float = DEFAULT_JAYWALK_MULTIPLIER
) -> tuple[EpisodeState, Observations]:
    """Deterministic function of the seed: samples traits and walking speeds,
    places pedestrians on random sidewalk waypoints with shortest paths to
    random sidewalk goals, and spawns the vehicle on a road end with a goal
    at least 60 m away."""
    if not 0.0 <= jaywalk_multiplier <= 1.0:
        raise ValueError(f"jaywalk multiplier must be in [0, 1], got {jaywalk_multiplier}")
    rng = np.random.default_rng(seed)

    peds = []
    for _ in range(N_PEDS):
        tendency = float(rng.random())
        speed = WALK_SPEED_MIN + float(rng.random()) * (WALK_SPEED_MAX - WALK_SPEED_MIN)
        start = int(rng.integers(0, N_SIDEWALK_NODES))
        goal = start
        while goal == start:
            goal = int(rng.integers(0, N_SIDEWALK_NODES))
        sx, sy = _GRAPH.nodes[start]
        peds.append(
            PedestrianState(
                x=sx,
                y=sy,
                walking_speed=speed,
                tendency=tendency,
                path=tuple(_ROUTING.path(start, goal)[1:]),
                goal_node=goal,
                crossing_mode=MODE_NONE,
                jaywalk_route=(),
                exit_node=None,
                last_node=start,
                road_entry_step=None,
                vel_x=0.0,
                vel_y=0.0,
            )
        )

    si = int(rng.integers(0, len(VEHICLE_SPAWNS)))
    sx, sy, heading, gx, gy = VEHICLE_SPAWNS[si]
    lat = (2.0 * float(rng.random()) - 1.0) * SPAWN_LATERAL_JITTER
    dh = (2.0 * float(rng.random()) - 1.0) * SPAWN_HEADING_JITTER
    vehicle = VehicleState(
        x=sx - lat * math.sin(heading),
        y=sy + lat * math.cos(heading),
        heading=wrap_angle(heading + dh),
        speed=SPAWN_SPEED,
        steering=0.0,
        goal_x=gx,
        goal_y=gy,
    )

    ped_streams = tuple(
        rng_state_tuple(np.random.default_rng(np.random.SeedSequence((seed, 505, i))))
        for i in range(N_PEDS)
    )
    state = EpisodeState(
        step=0,
        vehicle=vehicle,
        peds=tuple(peds),
        ped_rng_states=ped_streams,
        jaywalk_multiplier=jaywalk_multiplier,
        terminal=None,
        collision=None,
    )
    return state, observations(state)


def _core_step(state: EpisodeState, ped_decisions, sdc_action: VehicleAction):
    """World transition without observation/reward assembly."""
    if state.terminal is not None:
        raise RuntimeError("cannot step a terminal episode")
    step_idx = state.step + 1
    crossing_nodes = _GRAPH.crossing_nodes

    # Per-pedestrian generators materialize only on steps that actually draw
    # (crossing rolls, goal resampling); their states ride along as plain data.
    new_rng_states = None

    rolls = []
    targets = []
    pops_list = []
    waited = []
    new_peds = []
    for i in range(N_PEDS):
        p = state.peds[i].copy()
        go = bool(ped_decisions[i])
        waited.append(not go)
        rng = None
        if go and p.crossing_mode == MODE_NONE and p.path and p.path[0] in crossing_nodes:
            rng = rng_from_tuple(state.ped_rng_states[i])
            mode = jaywalk_roll(p.tendency, state.jaywalk_multiplier, rng)
            rolls.append((i, mode))
            p.road_entry_step = None
            if mode == MODE_CROSSWALK:
                p.crossing_mode = MODE_CROSSWALK
                p.exit_node = p.path[1]
            else:
                p.crossing_mode = MODE_JAYWALK
                p.jaywalk_route = _jaywalk_route(p.x, p.y, p.path[0], p.path[1])
                p.path = p.path[1:]
        if p.crossing_mode == MODE_JAYWALK and p.jaywalk_route:
            targets.append(p.jaywalk_route[0])
        elif p.path:
            targets.append(_GRAPH.nodes[p.path[0]])
        else:
            targets.append(None)
        pops_list.append(advance_pedestrian(p, go, _GRAPH, _GEOM, step_idx))
        if not p.path:  # arrived: draw a fresh goal and keep walking
            if rng is None:
                rng = rng_from_tuple(state.ped_rng_states[i])
            goal = p.last_node
            while goal == p.last_node:
                goal = int(rng.integers(0, N_SIDEWALK_NODES))
            p.path = tuple(_ROUTING.path(p.last_node, goal)[1:])
            p.goal_node = goal
        if rng is not None:
            if new_rng_states is None:
                new_rng_states = list(state.ped_rng_states)
            new_rng_states[i] = rng_state_tuple(rng)
        new_peds.append(p)

    vehicle = enforce_road_constraint(_GEOM, step_vehicle(state.vehicle, sdc_action))
    collision = check_collision(vehicle, new_peds)
    goal_reached = collision is None and check_goal(vehicle)
    timeout = collision is None and not goal_reached and step_idx >= EPISODE_STEPS
    if collision is not None:
        terminal = "collision"
    elif goal_reached:
        terminal = "goal"
    elif timeout:
        terminal = "timeout"
    else:
        terminal = None

    state2 = EpisodeState(
        step=step_idx,
        vehicle=vehicle,
        peds=tuple(new_peds),
        ped_rng_states=state.ped_rng_states if new_rng_states is None else tuple(new_rng_states),
        jaywalk_multiplier=state.jaywalk_multiplier,
        terminal=terminal,
        collision=collision,
    )
    events = StepEvents(
        rolls=tuple(rolls),
        ped_targets=tuple(targets),
        ped_pops=tuple(pops_list),
        ped_waited=tuple(waited),
        collision=collision,
        goal_reached=goal_reached,
        timeout=timeout,
    )
    return state2, events


def ped_progress(state: EpisodeState, state2: EpisodeState, i: int, events: StepEvents) -> float:
    """Decrease in distance to the step-start active target."""
    target = events.ped_targets[i]
    if target is None:
        return 0.0
    tx, ty = target
    p0, p1 = state.peds[i], state2.peds[i]
    return math.hypot(tx - p0.x, ty - p0.y) - math.hypot(tx - p1.x, ty - p1.y)


def ped_reward(state: EpisodeState, state2: EpisodeState, i: int, events: StepEvents) -> float:
    """Progress toward the step-start target, waypoint bonuses, the collision
    penalty, and the smart-waiting bonus near a fast vehicle."""
    r = PED_PROGRESS_COEF * ped_progress(state, state2, i, events) + PED_WAYPOINT_BONUS * int(
        events.ped_pops[i]
    )
    if events.collision is not None and events.collision.ped_id == i:
        r += PED_COLLISION_PENALTY
    if events.ped_waited[i]:
        v = state2.vehicle
        p = state2.peds[i]
        if (
            v.speed > SMART_WAIT_SDC_SPEED
            and math.hypot(p.x - v.x, p.y - v.y) < SMART_WAIT_SDC_DIST
        ):
            r += SMART_WAIT_BONUS
    return r


def _risky_pedestrian_near(state2: EpisodeState) -> bool:
    v = state2.vehicle
    for p in state2.peds:
        if math.hypot(p.x - v.x, p.y - v.y) < SPEEDING_PED_DIST:
            s = surface_at(_GEOM, (p.x, p.y))
            if s == SurfaceType.CROSSWALK:
                return True
            if p.crossing_mode == MODE_JAYWALK and s == SurfaceType.ROAD:
                return True
    return False


def sdc_reward(state: EpisodeState, state2: EpisodeState, events: StepEvents) -> float:
    """Goal progress and arrival, the collision penalty, and small penalties
    for speeding near crossers, off-lane driving, and heading misalignment.
    Never positive while stopped (no reward for standing still)."""
    v2 = state2.vehicle
    r = SDC_PROGRESS_COEF * (state.vehicle.goal_distance() - v2.goal_distance())
    if events.collision is not None:
        r += SDC_COLLISION_PENALTY
    if events.goal_reached:
        r += SDC_GOAL_BONUS
    if v2.speed > SPEEDING_SPEED and _risky_pedestrian_near(state2):
        r += SDC_SPEEDING_PENALTY
    if lane_center_distance(_GEOM, v2.x, v2.y) > OFFLANE_DIST:
        r += SDC_OFFLANE_PENALTY
    bearing = math.atan2(v2.goal_y - v2.y, v2.goal_x - v2.x)
    r += SDC_HEADING_COEF * abs(wrap_angle(bearing - v2.heading))
    return r


def env_step(
    state: EpisodeState, ped_decisions, sdc_action: VehicleAction
) -> tuple[EpisodeState, Observations, StepRewards, bool]:
    """Full environment step: jaywalk rolls where due, pedestrians then the
    vehicle, road projection, then collision > goal > timeout checks."""
    state2, events = _core_step(state, ped_decisions, sdc_action)
    rewards = StepRewards(
        ped=np.array([ped_reward(state, state2, i, events) for i in range(N_PEDS)]),
        sdc=sdc_reward(state, state2, events),
    )
    return state2, observations(state2), rewards, state2.terminal is not None


def observations(state: EpisodeState) -> Observations:
    """All observation vectors for the current state. Positions are scaled to
    [-1, 1] by the map half-extent; speeds by their physical maxima."""
    peds = state.peds
    v = state.vehicle
    h = HALF_EXTENT

    px = np.fromiter((p.x for p in peds), float, N_PEDS)
    py = np.fromiter((p.y for p in peds), float, N_PEDS)
    wsp = np.fromiter((p.walking_speed for p in peds), float, N_PEDS)
    tend = np.fromiter((p.tendency for p in peds), float, N_PEDS)
    velx = np.fromiter((p.vel_x for p in peds), float, N_PEDS)
    vely = np.fromiter((p.vel_y for p in peds), float, N_PEDS)

    tx = np.empty(N_PEDS)
    ty = np.empty(N_PEDS)
    has_target = np.empty(N_PEDS, dtype=bool)
    for i, p in enumerate(peds):
        t = active_target(p)
        has_target[i] = t is not None
        tx[i], ty[i] = t if t is not None else (p.x, p.y)

    surf = classify_points(px, py)

    ped_obs = np.empty((N_PEDS, PED_OBS_DIM))
    ped_obs[:, 0] = (px - h) / h
    ped_obs[:, 1] = (py - h) / h
    ped_obs[:, 2] = wsp / WALK_SPEED_MAX
    ped_obs[:, 3] = tend
    dx, dy = tx - px, ty - py
    tdist = np.hypot(dx, dy)
    safe = np.where(tdist > 1e-9, tdist, 1.0)
    ped_obs[:, 4] = np.where(has_target, dx / safe, 0.0)
    ped_obs[:, 5] = np.where(has_target, dy / safe, 0.0)
    ped_obs[:, 6] = np.where(has_target, tdist / h, 0.0)
    ped_obs[:, 7] = surf == int(SurfaceType.ROAD)
    ped_obs[:, 8] = surf == int(SurfaceType.SIDEWALK)
    ped_obs[:, 9] = surf == int(SurfaceType.CROSSWALK)
    ped_obs[:, 10] = (v.x - px) / h
    ped_obs[:, 11] = (v.y - py) / h
    svx = v.speed * math.cos(v.heading)
    svy = v.speed * math.sin(v.heading)
    ped_obs[:, 12] = svx / physics.MAX_SPEED
    ped_obs[:, 13] = svy / physics.MAX_SPEED
    ped_obs[:, 14] = v.speed / physics.MAX_SPEED
    sdc_dist = np.hypot(px - v.x, py - v.y)
    ped_obs[:, 15] = sdc_dist / h
    pair = np.hypot(px[:, None] - px[None, :], py[:, None] - py[None, :])
    np.fill_diagonal(pair, np.inf)
    nearest = pair.argmin(axis=1)
    ped_obs[:, 16] = (px[nearest] - px) / h
    ped_obs[:, 17] = (py[nearest] - py) / h
    ped_obs[:, 18] = pair[np.arange(N_PEDS), nearest] / h
    ped_obs[:, 19] = (EPISODE_STEPS - state.step) / EPISODE_STEPS

    # Relative quantities in the vehicle observation are expressed in the
    # vehicle's body frame (x forward, y left) so goal bearing and pedestrian
    # geometry read directly as steering-relevant features.
    ch = math.cos(v.heading)
    sh = math.sin(v.heading)
    sdc_obs = np.empty(SDC_OBS_DIM)
    sdc_obs[0] = (v.x - h) / h
    sdc_obs[1] = (v.y - h) / h
    sdc_obs[2] = ch
    sdc_obs[3] = sh
    sdc_obs[4] = v.speed / physics.MAX_SPEED
    sdc_obs[5] = v.steering / physics.MAX_STEER
    gdx = v.goal_x - v.x
    gdy = v.goal_y - v.y
    sdc_obs[6] = (gdx * ch + gdy * sh) / h
    sdc_obs[7] = (-gdx * sh + gdy * ch) / h
    sdc_obs[8] = v.goal_distance() / h
    sdc_obs[9] = nearest_crosswalk(_GEOM, (v.x, v.y))[1] / h
    order = np.argsort(sdc_dist, kind="stable")[:6]
    dx = px[order] - v.x
    dy = py[order] - v.y
    block = sdc_obs[10:34].reshape(6, 4)
    block[:, 0] = (dx * ch + dy * sh) / h
    block[:, 1] = (-dx * sh + dy * ch) / h
    block[:, 2] = (velx[order] * ch + vely[order] * sh) / WALK_SPEED_MAX
    block[:, 3] = (-velx[order] * sh + vely[order] * ch) / WALK_SPEED_MAX

    glob = np.empty(GLOBAL_STATE_DIM)
    pblock = glob[0:48].reshape(N_PEDS, 4)
    pblock[:, 0] = (px - h) / h
    pblock[:, 1] = (py - h) / h
    pblock[:, 2] = wsp / WALK_SPEED_MAX
    pblock[:, 3] = tend
    glob[48] = (v.x - h) / h
    glob[49] = (v.y - h) / h
    glob[50] = math.cos(v.heading)
    glob[51] = math.sin(v.heading)
    glob[52] = v.speed / physics.MAX_SPEED
    glob[53] = v.steering / physics.MAX_STEER
    glob[54] = (v.goal_x - v.x) / h
    glob[55] = (v.goal_y - v.y) / h
    glob[56] = v.goal_distance() / h
    glob[57] = state.step / EPISODE_STEPS

    return Observations(ped=ped_obs, sdc=sdc_obs, global_state=glob)


def ped_observation(state: EpisodeState, i: int) -> np.ndarray:
    if not 0 <= i < N_PEDS:
        raise ValueError(f"pedestrian index out of range: {i}")
    return observations(state).ped[i]


def sdc_observation(state: EpisodeState) -> np.ndarray:
    return observations(state).sdc


def global_state(state: EpisodeState) -> np.ndarray:
    return observations(state).global_state


def nearest_pedestrian(state: EpisodeState) -> tuple[float, int]:
    """Distance and crossing mode of the pedestrian closest to the vehicle."""
    v = state.vehicle
    best_d, best_mode = math.inf, MODE_NONE
    for p in state.peds:
        d = math.hypot(p.x - v.x, p.y - v.y)
        if d < best_d:
            best_d, best_mode = d, p.crossing_mode
    return best_d, best_mode


# --- crossing-rate statistics harness ---------------------------------------

ALWAYS_GO = (1,) * N_PEDS


def episode_seed(base: int, index: int, namespace: int = 9101) -> int:
    return int(np.random.SeedSequence((base, namespace, index)).generate_state(1)[0])


def _stats_episode(args: tuple[int, float]) -> np.ndarray:
    seed, multiplier = args
    state, _ = reset(seed, multiplier)
    quart = [trait_quartile(p.tendency) for p in state.peds]
    counts = np.zeros((4, 2), dtype=np.int64)
    while state.terminal is None:
        state, events = _core_step(state, ALWAYS_GO, PARKED_ACTION)
        for i, mode in events.rolls:
            q = quart[i] - 1
            counts[q, 1] += 1
            if mode == MODE_JAYWALK:
                counts[q, 0] += 1
    return counts


def crossing_statistics(
    n_episodes: int,
    multiplier: float = DEFAULT_JAYWALK_MULTIPLIER,
    seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Per-quartile (jaywalks, crossings) counts under always-go pedestrians
    with a parked vehicle. Counts merge associatively, so the result is
    independent of the worker split."""
    jobs = [(episode_seed(seed, k), multiplier) for k in range(n_episodes)]
    total = np.zeros((4, 2), dtype=np.int64)
    if workers > 1:
        import multiprocessing as mp

        with mp.Pool(workers) as pool:
            for counts in pool.imap(_stats_episode, jobs, chunksize=32):
                total += counts
    else:
        for job in jobs:
            total += _stats_episode(job)
    return total
