"""Fixed-seed evaluation harness and trajectory-level uncertainty metrics:
speed differential between jaywalker and crosswalk encounters, collision
attribution, 5th-percentile approach distance, braking reaction time,
trait-quartile jaywalk rates, and the jaywalk-rate ablation sweep.

Every metric is a pure function of the episode logs; recomputing from a
persisted CSV reproduces the report bit-exactly. Accumulations run in
row-major log order with plain sequential sums so results match a scalar
reference implementation to the last bit.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from . import env as envmod
from . import nets, trainer
from .baselines import SDC_BASELINES, always_go_ped_policy
from .city_map import SurfaceType, classify_points
from .env import MODE_CROSSWALK, MODE_JAYWALK, MODE_NONE, N_PEDS
from .logs import EpisodeLog, EpisodeLogBuilder, write_logs_csv
from .physics import ACCEL_MAX, ACCEL_MIN, DT

DEFAULT_BINS = ((0.0, 3.0), (3.0, 6.0), (6.0, 9.0), (9.0, 12.0))
ENCOUNTER_MAX_DIST = 12.0   # sampling radius for the speed differential
ENCOUNTER_NEAR_DIST = 20.0  # a crossing counts as an encounter if it comes this close
BRAKE_ACCEL = -0.5          # commanded acceleration threshold
BRAKE_STEPS = 2             # consecutive steps below threshold = braking
LOW_CONFIDENCE_ENCOUNTERS = 20

TYPE_CW = "cw"
TYPE_JW = "jw"


@dataclass(frozen=True)
class EncounterSample:
    timestep: int
    sdc_speed: float
    distance: float
    ped_type: str  # "cw" | "jw"


def _ped_distances(log: EpisodeLog) -> np.ndarray:
    return np.hypot(
        log.ped_x - log.sdc[:, 0:1], log.ped_y - log.sdc[:, 1:2]
    )


def _road_mask(log: EpisodeLog) -> np.ndarray:
    return classify_points(log.ped_x, log.ped_y) == int(SurfaceType.ROAD)


def iter_encounter_samples(log: EpisodeLog):
    """Yield one sample per (step, actively-crossing pedestrian within 12 m)
    pair, in row-major order. A pedestrian counts as a crosswalk encounter
    while its crossing mode is crosswalk, and as a jaywalk encounter while
    jaywalking on the road surface."""
    dist = _ped_distances(log)
    on_road = _road_mask(log)
    modes = log.ped_mode
    speeds = log.sdc[:, 3]
    for t in range(log.n_steps):
        for j in range(N_PEDS):
            mode = modes[t, j]
            if mode == MODE_CROSSWALK:
                ped_type = TYPE_CW
            elif mode == MODE_JAYWALK and on_road[t, j]:
                ped_type = TYPE_JW
            else:
                continue
            d = float(dist[t, j])
            if d < ENCOUNTER_MAX_DIST:
                yield EncounterSample(int(log.steps[t]), float(speeds[t]), d, ped_type)


def speed_differential(logs: list[EpisodeLog], bins=DEFAULT_BINS) -> list[dict]:
    """Mean vehicle speed near each encounter type per distance bin, and the
    jaywalk-minus-crosswalk gap. Empty cells are NaN."""
    sums = {(b, t): 0.0 for b in range(len(bins)) for t in (TYPE_CW, TYPE_JW)}
    counts = {(b, t): 0 for b in range(len(bins)) for t in (TYPE_CW, TYPE_JW)}
    for log in logs:
        for s in iter_encounter_samples(log):
            for b, (lo, hi) in enumerate(bins):
                if lo <= s.distance < hi:
                    sums[(b, s.ped_type)] += s.sdc_speed
                    counts[(b, s.ped_type)] += 1
                    break
    out = []
    for b, (lo, hi) in enumerate(bins):
        n_cw, n_jw = counts[(b, TYPE_CW)], counts[(b, TYPE_JW)]
        mean_cw = sums[(b, TYPE_CW)] / n_cw if n_cw else math.nan
        mean_jw = sums[(b, TYPE_JW)] / n_jw if n_jw else math.nan
        out.append(
            {
                "lo": lo,
                "hi": hi,
                "mean_cw": mean_cw,
                "mean_jw": mean_jw,
                "delta": mean_jw - mean_cw,
                "n_cw": n_cw,
                "n_jw": n_jw,
            }
        )
    return out


def crossing_events(log: EpisodeLog) -> list[tuple[int, int, int, int]]:
    """Contiguous crossing runs as (ped, start row, end row exclusive, mode)."""
    events = []
    modes = log.ped_mode
    T = log.n_steps
    for j in range(N_PEDS):
        t = 0
        while t < T:
            m = modes[t, j]
            if m == MODE_NONE:
                t += 1
                continue
            start = t
            while t < T and modes[t, j] == m:
                t += 1
            events.append((j, start, t, int(m)))
    return events


MODE_LABEL = {MODE_NONE: "not_crossing", MODE_CROSSWALK: "crosswalk", MODE_JAYWALK: "jaywalk"}


def collision_attribution(logs: list[EpisodeLog]) -> dict:
    """Fraction of collisions by the involved pedestrian's crossing mode at
    impact, plus the jaywalk share of all crossing events."""
    by_mode = {"crosswalk": 0, "jaywalk": 0, "not_crossing": 0}
    crossings = 0
    jaywalks = 0
    for log in logs:
        if log.terminal == "collision":
            by_mode[MODE_LABEL[int(log.nearest_mode[-1])]] += 1
        for _, _, _, mode in crossing_events(log):
            crossings += 1
            if mode == MODE_JAYWALK:
                jaywalks += 1
    n = sum(by_mode.values())
    fractions = {k: (v / n if n else 0.0) for k, v in by_mode.items()}
    return {
        "n_collisions": n,
        "fractions": fractions,
        "crossings_total": crossings,
        "jaywalks_total": jaywalks,
        "jaywalk_share": jaywalks / crossings if crossings else math.nan,
    }


def percentile_linear(values: list[float], q: float) -> float:
    """Linear-interpolation percentile: at rank q/100 * (n-1) of the sorted
    sample."""
    s = sorted(values)
    n = len(s)
    if n == 0:
        return math.nan
    if n == 1:
        return s[0]
    idx = q / 100.0 * (n - 1)
    lo = int(math.floor(idx))
    if lo >= n - 1:
        return s[-1]
    frac = idx - lo
    return s[lo] + frac * (s[lo + 1] - s[lo])


def approach_distance_p5(logs: list[EpisodeLog]) -> dict:
    """5th percentile of per-encounter minimum approach distance, per type.
    An encounter is one pedestrian's contiguous crossing that comes within
    20 m of the vehicle."""
    mins = {TYPE_CW: [], TYPE_JW: []}
    for log in logs:
        dist = _ped_distances(log)
        for j, start, end, mode in crossing_events(log):
            d_min = float(dist[start:end, j].min())
            if d_min >= ENCOUNTER_NEAR_DIST:
                continue
            mins[TYPE_CW if mode == MODE_CROSSWALK else TYPE_JW].append(d_min)
    return {
        "cw": percentile_linear(mins[TYPE_CW], 5.0),
        "jw": percentile_linear(mins[TYPE_JW], 5.0),
        "n_cw": len(mins[TYPE_CW]),
        "n_jw": len(mins[TYPE_JW]),
        "low_confidence_cw": len(mins[TYPE_CW]) < LOW_CONFIDENCE_ENCOUNTERS,
        "low_confidence_jw": len(mins[TYPE_JW]) < LOW_CONFIDENCE_ENCOUNTERS,
    }


def braking_reaction_time(logs: list[EpisodeLog]) -> dict:
    """Mean time from a jaywalker entering the road (within 20 m of the
    vehicle) to the vehicle commanding braking below -0.5 m/s^2 for at least
    2 consecutive steps. Events with no braking before episode end are
    excluded and counted separately."""
    total = 0.0
    n_events = 0
    n_no_brake = 0
    for log in logs:
        dist = _ped_distances(log)
        on_road = _road_mask(log)
        accel = log.sdc[:, 5]
        T = log.n_steps
        for j, start, end, mode in crossing_events(log):
            if mode != MODE_JAYWALK:
                continue
            entry = None
            for t in range(start, end):
                if on_road[t, j]:
                    entry = t
                    break
            if entry is None or float(dist[entry, j]) > ENCOUNTER_NEAR_DIST:
                continue
            braked_at = None
            for t in range(entry, T - (BRAKE_STEPS - 1)):
                if all(accel[t + k] < BRAKE_ACCEL for k in range(BRAKE_STEPS)):
                    braked_at = t
                    break
            if braked_at is None:
                n_no_brake += 1
            else:
                total += (int(log.steps[braked_at]) - int(log.steps[entry])) * DT
                n_events += 1
    return {
        "mean_s": total / n_events if n_events else math.nan,
        "n_events": n_events,
        "n_no_brake": n_no_brake,
    }


def quartile_jaywalk_rates(logs: list[EpisodeLog]) -> dict:
    """Per trait quartile: jaywalk crossings / total crossings."""
    jw = [0, 0, 0, 0]
    total = [0, 0, 0, 0]
    for log in logs:
        for j, _, _, mode in crossing_events(log):
            q = int(log.tau_q[j]) - 1
            total[q] += 1
            if mode == MODE_JAYWALK:
                jw[q] += 1
    rates = [jw[q] / total[q] if total[q] else math.nan for q in range(4)]
    return {"rates": rates, "jaywalks": jw, "crossings": total}


# --- evaluation ----------------------------------------------------------------


@dataclass
class MetricsReport:
    episodes: int
    goal_rate: float
    collision_rate: float
    timeout_rate: float
    multiplier: float
    seed_set_hash: str
    sdc_policy: str
    ped_policy: str
    speed_bins: list
    attribution: dict
    p5_approach: dict
    braking: dict
    quartiles: dict
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def san(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None
            if isinstance(x, dict):
                return {k: san(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [san(v) for v in x]
            if isinstance(x, (np.integer,)):
                return int(x)
            if isinstance(x, (np.floating,)):
                return float(x)
            return x

        return json.dumps(san(asdict(self)), sort_keys=True, indent=2)


def seed_set_hash(seeds: list[int]) -> str:
    return hashlib.sha256(",".join(str(s) for s in seeds).encode()).hexdigest()[:16]


def build_report(
    logs: list[EpisodeLog],
    seeds: list[int],
    multiplier: float,
    sdc_name: str = "",
    ped_name: str = "",
    bins=DEFAULT_BINS,
) -> MetricsReport:
    n = len(logs)
    goals = sum(1 for l in logs if l.terminal == "goal")
    collisions = sum(1 for l in logs if l.terminal == "collision")
    timeouts = sum(1 for l in logs if l.terminal == "timeout")
    return MetricsReport(
        episodes=n,
        goal_rate=goals / n if n else math.nan,
        collision_rate=collisions / n if n else math.nan,
        timeout_rate=timeouts / n if n else math.nan,
        multiplier=multiplier,
        seed_set_hash=seed_set_hash(seeds),
        sdc_policy=sdc_name,
        ped_policy=ped_name,
        speed_bins=speed_differential(logs, bins),
        attribution=collision_attribution(logs),
        p5_approach=approach_distance_p5(logs),
        braking=braking_reaction_time(logs),
        quartiles=quartile_jaywalk_rates(logs),
    )


PolicySpec = Union[str, Callable]


def resolve_sdc_policy(spec: PolicySpec):
    """Baseline name, checkpoint path, or a ready callable."""
    if callable(spec):
        return spec, getattr(spec, "__name__", "custom")
    if spec in SDC_BASELINES:
        return SDC_BASELINES[spec], spec
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"vehicle policy checkpoint not found: {spec}")
    params, _ = nets.load_checkpoint(path)
    return trainer.greedy_sdc_policy(params), str(spec)


def resolve_ped_policy(spec: PolicySpec):
    if callable(spec):
        return spec, getattr(spec, "__name__", "custom")
    if spec == "always-go":
        return always_go_ped_policy, "always-go"
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"pedestrian policy checkpoint not found: {spec}")
    params, _ = nets.load_checkpoint(path)
    return trainer.greedy_ped_policy(params), str(spec)


def run_episode(sdc_policy, ped_policy, seed: int, multiplier: float) -> EpisodeLog:
    """One deterministic evaluation episode (greedy learned policies draw
    nothing; the random baseline draws from a per-seed stream)."""
    state, obs = envmod.reset(seed, multiplier)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 404)))
    builder = EpisodeLogBuilder(seed=seed)
    while state.terminal is None:
        decisions = ped_policy(obs.ped)
        action = sdc_policy(obs.sdc, rng)
        state, obs, _, _ = envmod.env_step(state, decisions, action)
        accel_cmd = min(max(action.accel, ACCEL_MIN), ACCEL_MAX)
        builder.append(state, accel_cmd)
    return builder.finish(state.terminal)


def _episode_job(args) -> EpisodeLog:
    sdc_spec, ped_spec, seed, multiplier = args
    sdc_policy, _ = resolve_sdc_policy(sdc_spec)
    ped_policy, _ = resolve_ped_policy(ped_spec)
    return run_episode(sdc_policy, ped_policy, seed, multiplier)


def evaluate(
    sdc: PolicySpec,
    peds: PolicySpec,
    n_episodes: int,
    seeds: list[int],
    multiplier: float = envmod.DEFAULT_JAYWALK_MULTIPLIER,
    workers: int = 1,
    bins=DEFAULT_BINS,
) -> tuple[MetricsReport, list[EpisodeLog]]:
    """Run each seed once with deterministic-mode policies and aggregate a
    MetricsReport. Episodes are independent and merged in seed order, so the
    result is identical for any worker count."""
    if len(seeds) != n_episodes:
        raise ValueError(f"seed set size {len(seeds)} != n_episodes {n_episodes}")
    sdc_policy, sdc_name = resolve_sdc_policy(sdc)
    ped_policy, ped_name = resolve_ped_policy(peds)
    if workers > 1 and n_episodes > 0:
        if callable(sdc) or callable(peds):
            raise ValueError("parallel evaluation needs picklable policy specs, not callables")
        import multiprocessing as mp

        jobs = [(sdc, peds, s, multiplier) for s in seeds]
        with mp.Pool(workers) as pool:
            logs = pool.map(_episode_job, jobs, chunksize=max(1, n_episodes // (4 * workers)))
    else:
        logs = [run_episode(sdc_policy, ped_policy, s, multiplier) for s in seeds]
    report = build_report(logs, seeds, multiplier, sdc_name, ped_name, bins)
    return report, logs


def ablation_sweep(
    sdc: PolicySpec,
    peds: PolicySpec,
    multipliers: list[float],
    n_episodes: int,
    seeds: list[int],
    workers: int = 1,
) -> list[tuple[float, MetricsReport]]:
    """One report per jaywalk multiplier on the shared seed set."""
    out = []
    for m in multipliers:
        report, _ = evaluate(sdc, peds, n_episodes, seeds, m, workers)
        out.append((m, report))
    return out


def write_report(path, report: MetricsReport) -> None:
    Path(path).write_text(report.to_json() + "\n")


def write_speed_csv(path, report: MetricsReport) -> None:
    with Path(path).open("w") as fh:
        fh.write("bin_lo,bin_hi,mean_cw,mean_jw,delta,n_cw,n_jw\n")
        for row in report.speed_bins:
            fh.write(
                f"{row['lo']!r},{row['hi']!r},{row['mean_cw']!r},{row['mean_jw']!r},"
                f"{row['delta']!r},{row['n_cw']},{row['n_jw']}\n"
            )


def write_ablation_csv(path, sweep: list[tuple[float, MetricsReport]]) -> None:
    with Path(path).open("w") as fh:
        fh.write("multiplier,goal_rate,collision_rate,timeout_rate,jaywalk_share\n")
        for m, rep in sweep:
            fh.write(
                f"{m!r},{rep.goal_rate!r},{rep.collision_rate!r},"
                f"{rep.timeout_rate!r},{rep.attribution['jaywalk_share']!r}\n"
            )


def save_eval_artifacts(out_dir, report: MetricsReport, logs: list[EpisodeLog], seeds: list[int], meta: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.json", report)
    write_logs_csv(out / "logs.csv", logs, meta)
    write_speed_csv(out / "speeds.csv", report)
    (out / "seeds.txt").write_text("\n".join(str(s) for s in seeds) + "\n")
