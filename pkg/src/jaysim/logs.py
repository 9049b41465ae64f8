"""Per-step episode log records and their CSV persistence.

Column order is fixed and documented here; floats are written with repr so a
round trip through CSV is bit-exact and metrics recomputed from a persisted
file match the in-memory report exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import N_PEDS, EpisodeState, nearest_pedestrian, trait_quartile

LOG_COLUMNS = (
    ["episode", "seed", "step"]
    + ["sdc_x", "sdc_y", "sdc_heading", "sdc_speed", "sdc_steering", "sdc_accel_cmd"]
    + ["goal_dist"]
    + [f"ped{i}_{f}" for i in range(N_PEDS) for f in ("x", "y", "mode", "tau_q")]
    + ["nearest_ped_dist", "nearest_ped_mode", "terminal"]
)

TERMINAL_NAMES = ("", "collision", "goal", "timeout")


@dataclass
class EpisodeLog:
    seed: int
    steps: np.ndarray         # (T,) int
    sdc: np.ndarray           # (T, 6): x, y, heading, speed, steering, accel_cmd
    goal_dist: np.ndarray     # (T,)
    ped_x: np.ndarray         # (T, 12)
    ped_y: np.ndarray         # (T, 12)
    ped_mode: np.ndarray      # (T, 12) int
    tau_q: np.ndarray         # (12,) int, constant per episode
    nearest_dist: np.ndarray  # (T,)
    nearest_mode: np.ndarray  # (T,) int
    terminal: str

    @property
    def n_steps(self) -> int:
        return len(self.steps)


@dataclass
class EpisodeLogBuilder:
    seed: int
    steps: list = field(default_factory=list)
    sdc: list = field(default_factory=list)
    goal_dist: list = field(default_factory=list)
    ped_x: list = field(default_factory=list)
    ped_y: list = field(default_factory=list)
    ped_mode: list = field(default_factory=list)
    tau_q: list = None
    nearest_dist: list = field(default_factory=list)
    nearest_mode: list = field(default_factory=list)

    def append(self, state: EpisodeState, accel_cmd: float) -> None:
        v = state.vehicle
        if self.tau_q is None:
            self.tau_q = [trait_quartile(p.tendency) for p in state.peds]
        self.steps.append(state.step)
        self.sdc.append((v.x, v.y, v.heading, v.speed, v.steering, accel_cmd))
        self.goal_dist.append(v.goal_distance())
        self.ped_x.append([p.x for p in state.peds])
        self.ped_y.append([p.y for p in state.peds])
        self.ped_mode.append([p.crossing_mode for p in state.peds])
        nd, nm = nearest_pedestrian(state)
        self.nearest_dist.append(nd)
        self.nearest_mode.append(nm)

    def finish(self, terminal: str) -> EpisodeLog:
        return EpisodeLog(
            seed=self.seed,
            steps=np.array(self.steps, dtype=np.int64),
            sdc=np.array(self.sdc),
            goal_dist=np.array(self.goal_dist),
            ped_x=np.array(self.ped_x),
            ped_y=np.array(self.ped_y),
            ped_mode=np.array(self.ped_mode, dtype=np.int64),
            tau_q=np.array(self.tau_q, dtype=np.int64),
            nearest_dist=np.array(self.nearest_dist),
            nearest_mode=np.array(self.nearest_mode, dtype=np.int64),
            terminal=terminal,
        )


def write_logs_csv(path, logs: list[EpisodeLog], meta: dict | None = None) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for ep_idx, log in enumerate(logs):
            T = log.n_steps
            for t in range(T):
                row = [str(ep_idx), str(log.seed), str(int(log.steps[t]))]
                row += [repr(float(v)) for v in log.sdc[t]]
                row.append(repr(float(log.goal_dist[t])))
                for j in range(N_PEDS):
                    row.append(repr(float(log.ped_x[t, j])))
                    row.append(repr(float(log.ped_y[t, j])))
                    row.append(str(int(log.ped_mode[t, j])))
                    row.append(str(int(log.tau_q[j])))
                row.append(repr(float(log.nearest_dist[t])))
                row.append(str(int(log.nearest_mode[t])))
                row.append(log.terminal if t == T - 1 else "")
                fh.write(",".join(row) + "\n")


def read_logs_csv(path) -> tuple[list[EpisodeLog], dict]:
    path = Path(path)
    meta: dict = {}
    logs: list[EpisodeLog] = []
    builder: EpisodeLogBuilder | None = None
    current_ep = None

    def flush(terminal: str) -> None:
        nonlocal builder
        if builder is not None:
            logs.append(builder.finish(terminal))
            builder = None

    last_terminal = ""
    with path.open() as fh:
        header = None
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
                continue
            if header is None:
                header = line.split(",")
                if header != LOG_COLUMNS:
                    raise ValueError(f"{path}: unexpected log columns")
                continue
            parts = line.split(",")
            ep = int(parts[0])
            if ep != current_ep:
                flush(last_terminal)
                current_ep = ep
                builder = EpisodeLogBuilder(seed=int(parts[1]))
            builder.steps.append(int(parts[2]))
            builder.sdc.append(tuple(float(v) for v in parts[3:9]))
            builder.goal_dist.append(float(parts[9]))
            px, py, pm, tq = [], [], [], []
            for j in range(N_PEDS):
                base = 10 + 4 * j
                px.append(float(parts[base]))
                py.append(float(parts[base + 1]))
                pm.append(int(parts[base + 2]))
                tq.append(int(parts[base + 3]))
            builder.ped_x.append(px)
            builder.ped_y.append(py)
            builder.ped_mode.append(pm)
            if builder.tau_q is None:
                builder.tau_q = tq
            builder.nearest_dist.append(float(parts[58]))
            builder.nearest_mode.append(int(parts[59]))
            last_terminal = parts[60]
    flush(last_terminal)
    return logs, meta
