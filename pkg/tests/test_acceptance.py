"""Acceptance suite: every criterion runs at its stated tolerance and prints
one pass/fail line. The desk training fixture is shared by the efficacy and
ablation criteria. Stated runtime budgets assume the 8-core reference box;
measured times are printed per criterion.
"""
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from jaysim import city_map as cm
from jaysim import env, metrics, nets, oracles, physics, trainer
from jaysim.physics import VehicleAction

WORKERS = min(8, os.cpu_count() or 1)
_RESULTS = []


def record(criterion: str, ok: bool, detail: str, elapsed: float) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail} ({elapsed:.1f}s)"
    _RESULTS.append(line)
    print(line)


@pytest.fixture(scope="session", autouse=True)
def acceptance_summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and _RESULTS:
        reporter.write_line("")
        reporter.write_line("=== acceptance criteria ===")
        for line in _RESULTS:
            reporter.write_line(line)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """One full desk-scale co-training run (32 envs x 64 steps x 300 updates),
    shared by the efficacy and ablation criteria."""
    out = tmp_path_factory.mktemp("desk")
    cfg = trainer.desk_config(seed=0)
    t0 = time.perf_counter()
    checkpoints = trainer.train(cfg, out)
    elapsed = time.perf_counter() - t0
    return {"ckpt": str(checkpoints[-1]), "train_seconds": elapsed, "out": out}


@pytest.mark.slow
def test_criterion_1_crossing_rate_statistics():
    """Always-go pedestrians at multiplier 0.25: per-quartile jaywalk rates
    within +/-1 pp of 3.125/9.375/15.625/21.875% over >= 1e5 decisions."""
    t0 = time.perf_counter()
    counts = env.crossing_statistics(8000, multiplier=0.25, seed=123, workers=WORKERS)
    elapsed = time.perf_counter() - t0
    total = int(counts[:, 1].sum())
    rates = counts[:, 0] / counts[:, 1] * 100.0
    expected = [3.125, 9.375, 15.625, 21.875]
    devs = [abs(rates[q] - expected[q]) for q in range(4)]
    ok = total >= 100_000 and all(d <= 1.0 for d in devs)
    record(
        "criterion 1 (crossing-rate quartiles)",
        ok,
        f"decisions={total} rates={[f'{r:.3f}%' for r in rates]} max_dev={max(devs):.3f}pp",
        elapsed,
    )
    assert total >= 100_000
    assert all(d <= 1.0 for d in devs), rates


def test_criterion_2_dijkstra_vs_bellman_ford():
    """Path costs equal the Bellman-Ford oracle on all 1600 pairs, exactly."""
    t0 = time.perf_counter()
    graph = cm.build_nav_graph()
    mismatches = 0
    for src in range(40):
        ref = oracles.bellman_ford_costs(graph, src)
        for dst in range(40):
            cost = cm.path_cost(graph, cm.dijkstra_path(graph, src, dst))
            if cost != ref[dst]:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    record("criterion 2 (dijkstra oracle)", mismatches == 0, f"1600 pairs, {mismatches} mismatches", elapsed)
    assert mismatches == 0


def test_criterion_3_gae_oracle():
    """Recursive GAE equals direct summation to 1e-6 on 1000 random
    sequences with random done patterns."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 32))
        r = rng.standard_normal(T)
        v = rng.standard_normal(T)
        d = (rng.random(T) < rng.uniform(0.05, 0.6)).astype(float)
        boot = float(rng.standard_normal())
        gamma = float(rng.uniform(0.9, 0.9999))
        lam = float(rng.uniform(0.8, 1.0))
        adv, _ = trainer.compute_gae(r[:, None], v[:, None], d[:, None], np.array([boot]), gamma, lam)
        ref = oracles.gae_direct(r, v, d, boot, gamma, lam)
        worst = max(worst, float(np.abs(adv[:, 0] - ref).max()))
    elapsed = time.perf_counter() - t0
    record("criterion 3 (gae oracle)", worst <= 1e-6, f"1000 sequences, worst |err|={worst:.2e}", elapsed)
    assert worst <= 1e-6


def test_criterion_4_gradient_check():
    """Finite differences agree with the analytic composite-loss gradients
    (rel err < 1e-4) on tiny nets over 100 random trials."""
    t0 = time.perf_counter()
    ok = oracles.check_gradients(n_trials=100, seed=11, tol=1e-4)
    elapsed = time.perf_counter() - t0
    record("criterion 4 (gradient finite differences)", ok, "100 trials x 3 networks", elapsed)
    assert ok


@pytest.mark.slow
def test_criterion_5_physics():
    """Circle radius within 1% of L/tan(delta); dt=0.1 within 1% of the
    dt=1e-4 oracle over 50 s; projection idempotent; bounds hold over 1e6
    random steps."""
    t0 = time.perf_counter()
    geom = cm.build_map()
    details = []

    # constant-steer circle
    delta = 0.3
    v = physics.VehicleState(0.0, 0.0, 0.0, 5.0, delta, 0.0, 0.0)
    pts = []
    turned = 0.0
    prev = v.heading
    while turned < 2 * math.pi:
        v = physics.step_vehicle(v, VehicleAction(0.0, delta))
        turned += abs(physics.wrap_angle(v.heading - prev))
        prev = v.heading
        pts.append((v.x, v.y))
    pts = np.asarray(pts)
    center = pts.mean(axis=0)
    radius = float(np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1]).mean())
    expected_r = physics.WHEELBASE / math.tan(delta)
    circle_ok = abs(radius - expected_r) / expected_r < 0.01
    details.append(f"radius {radius:.3f} vs {expected_r:.3f}")

    # fine-integration oracle over 50 s, three control sequences. Commands
    # hold for 0.5 s spans as policies emit them; per-step white-noise
    # commands are adversarial for any fixed-step scheme (the coarse update
    # applies each new steering angle over its whole step by definition).
    traj_ok = True
    for seq_seed in (1, 2, 3):
        rng = np.random.default_rng(seq_seed)
        actions = []
        while len(actions) < 500:
            a = VehicleAction(float(rng.uniform(-2, 2.5)), float(rng.uniform(-0.4, 0.4)))
            actions.extend([a] * 5)
        actions = actions[:500]
        coarse = physics.VehicleState(60.0, 10.0, math.pi / 2, 3.0, 0.0, 60.0, 114.0)
        fine = coarse
        err = 0.0
        path = 0.0
        for a in actions:
            prev_c = coarse
            coarse = physics.step_vehicle(coarse, a)
            path += math.hypot(coarse.x - prev_c.x, coarse.y - prev_c.y)
            for _ in range(1000):
                fine = physics.step_vehicle(fine, a, dt=1e-4)
            err = max(err, math.hypot(coarse.x - fine.x, coarse.y - fine.y))
        traj_ok = traj_ok and err < 0.01 * max(path, 1.0)
    details.append(f"fine-dt max err ok={traj_ok}")

    # idempotent projection + bound invariants over 1e6 random steps
    rng = np.random.default_rng(99)
    bounds_ok = True
    idem_ok = True
    state = physics.VehicleState(60.0, 30.0, math.pi / 2, 0.0, 0.0, 60.0, 114.0)
    for k in range(1_000_000):
        a = VehicleAction(float(rng.uniform(-5, 4)), float(rng.uniform(-0.8, 0.8)))
        state = physics.enforce_road_constraint(geom, physics.step_vehicle(state, a))
        if not (0.0 <= state.speed <= physics.MAX_SPEED and abs(state.steering) <= physics.MAX_STEER):
            bounds_ok = False
            break
        if k % 9973 == 0:
            again = physics.enforce_road_constraint(geom, state)
            if again != state:
                idem_ok = False
                break
    details.append(f"bounds={bounds_ok} idempotent={idem_ok}")
    elapsed = time.perf_counter() - t0
    ok = circle_ok and traj_ok and bounds_ok and idem_ok
    record("criterion 5 (physics)", ok, "; ".join(details), elapsed)
    assert circle_ok and traj_ok and bounds_ok and idem_ok


@pytest.mark.slow
def test_criterion_6_determinism(tmp_path):
    """Identical seed + config give bit-identical checkpoints and episode
    logs, including across evaluation worker counts."""
    t0 = time.perf_counter()
    cfg = trainer.TrainConfig(n_envs=4, rollout_len=16, updates=3, minibatches=2, seed=17)
    blobs = []
    metric_rows = []
    for name in ("a", "b"):
        out = tmp_path / name
        ckpts = trainer.train(cfg, out)
        blobs.append(ckpts[-1].read_bytes())
        rows = (out / "metrics.csv").read_text().splitlines()
        # drop the wall-clock steps/sec column
        metric_rows.append([",".join(r.split(",")[:-1]) for r in rows])
    ckpt_ok = blobs[0] == blobs[1]
    metrics_ok = metric_rows[0] == metric_rows[1]

    ckpt = tmp_path / "a" / "checkpoints" / "ckpt_final.bin"
    seeds = [5000 + i for i in range(8)]
    logs_bytes = []
    for workers in (1, 2):
        rep, logs_list = metrics.evaluate(str(ckpt), str(ckpt), 8, seeds, 0.25, workers=workers)
        path = tmp_path / f"logs_w{workers}.csv"
        from jaysim.logs import write_logs_csv

        write_logs_csv(path, logs_list)
        logs_bytes.append(path.read_bytes())
    logs_ok = logs_bytes[0] == logs_bytes[1]
    elapsed = time.perf_counter() - t0
    ok = ckpt_ok and metrics_ok and logs_ok
    record(
        "criterion 6 (determinism)",
        ok,
        f"checkpoints identical={ckpt_ok}, metrics identical={metrics_ok}, "
        f"logs identical across worker counts={logs_ok}",
        elapsed,
    )
    assert ok


@pytest.mark.slow
def test_criterion_7_desk_training_efficacy(desk_run):
    """Desk-trained co-trained vehicle beats the random baseline strictly and
    the constant-speed baseline by >= 10 pp on 100 shared seeds; the
    non-learning ordering rule > constant > random also holds."""
    t0 = time.perf_counter()
    seeds = [40_000 + i for i in range(100)]
    ckpt = desk_run["ckpt"]
    rates = {}
    for name, sdc, peds in (
        ("marl", ckpt, ckpt),
        ("random", "random", "always-go"),
        ("constant", "constant", "always-go"),
        ("rule", "rule", "always-go"),
    ):
        rep, _ = metrics.evaluate(sdc, peds, 100, seeds, 0.25, workers=WORKERS)
        rates[name] = (rep.goal_rate, rep.collision_rate)
    elapsed = time.perf_counter() - t0 + desk_run["train_seconds"]
    marl, rnd, const, rule = (rates[k][0] for k in ("marl", "random", "constant", "rule"))
    ok = (marl > rnd) and (marl >= const + 0.10) and (rule > const > rnd)
    record(
        "criterion 7 (desk efficacy)",
        ok,
        f"goal rates marl={marl:.2f} rule={rule:.2f} constant={const:.2f} random={rnd:.2f} "
        f"(train {desk_run['train_seconds']:.0f}s)",
        elapsed,
    )
    assert marl > rnd, rates
    assert marl >= const + 0.10, rates
    assert rule > const > rnd, rates


def test_criterion_8_metric_oracles():
    """Vectorized metrics match scalar duplicate implementations exactly on
    50 synthetic logs, including the hand-built 2.65 m/s gap example."""
    from jaysim.city_map import SurfaceType, surface_at
    from jaysim.env import MODE_CROSSWALK, MODE_JAYWALK, MODE_NONE
    from jaysim.logs import EpisodeLog

    t0 = time.perf_counter()
    rng = np.random.default_rng(21)
    lgs = []
    for k in range(50):
        T = int(rng.integers(12, 80))
        n_modes = rng.choice([MODE_NONE, MODE_CROSSWALK, MODE_JAYWALK], (T, 12))
        # crossing runs must hold one mode; smooth the samples per pedestrian
        modes = np.zeros((T, 12), dtype=np.int64)
        for j in range(12):
            t = 0
            while t < T:
                m = int(n_modes[t, j])
                span = int(rng.integers(1, 9))
                modes[t : t + span, j] = m
                t += span
        sdc = np.zeros((T, 6))
        sdc[:, 0] = rng.uniform(56, 64, T)
        sdc[:, 1] = rng.uniform(10, 110, T)
        sdc[:, 3] = rng.uniform(0, physics.MAX_SPEED, T)
        sdc[:, 5] = rng.uniform(-4, 3, T)
        ped_x = rng.uniform(50, 70, (T, 12))
        ped_y = rng.uniform(10, 110, (T, 12))
        dist = np.hypot(ped_x - sdc[:, 0:1], ped_y - sdc[:, 1:2])
        nearest = dist.argmin(axis=1)
        lgs.append(
            EpisodeLog(
                seed=k,
                steps=np.arange(1, T + 1),
                sdc=sdc,
                goal_dist=rng.uniform(0, 100, T),
                ped_x=ped_x,
                ped_y=ped_y,
                ped_mode=modes,
                tau_q=rng.integers(1, 5, 12),
                nearest_dist=dist[np.arange(T), nearest],
                nearest_mode=modes[np.arange(T), nearest],
                terminal=str(rng.choice(["collision", "goal", "timeout"])),
            )
        )

    geom = cm.build_map()

    # scalar duplicates
    def scalar_speed_diff(logs_list):
        sums, counts = {}, {}
        for log in logs_list:
            for t in range(log.n_steps):
                for j in range(12):
                    m = log.ped_mode[t, j]
                    if m == MODE_CROSSWALK:
                        typ = "cw"
                    elif m == MODE_JAYWALK and surface_at(
                        geom, (float(log.ped_x[t, j]), float(log.ped_y[t, j]))
                    ) == SurfaceType.ROAD:
                        typ = "jw"
                    else:
                        continue
                    d = math.hypot(
                        float(log.ped_x[t, j]) - float(log.sdc[t, 0]),
                        float(log.ped_y[t, j]) - float(log.sdc[t, 1]),
                    )
                    if d >= 12.0:
                        continue
                    b = int(d // 3.0)
                    sums[(b, typ)] = sums.get((b, typ), 0.0) + float(log.sdc[t, 3])
                    counts[(b, typ)] = counts.get((b, typ), 0) + 1
        return sums, counts

    got = metrics.speed_differential(lgs)
    sums, counts = scalar_speed_diff(lgs)
    speed_ok = True
    for b in range(4):
        for typ, mkey, nkey in (("cw", "mean_cw", "n_cw"), ("jw", "mean_jw", "n_jw")):
            n = counts.get((b, typ), 0)
            speed_ok &= got[b][nkey] == n
            if n:
                speed_ok &= got[b][mkey] == sums[(b, typ)] / n

    # attribution duplicate
    col, cross, jay = {"crosswalk": 0, "jaywalk": 0, "not_crossing": 0}, 0, 0
    label = {0: "not_crossing", 1: "crosswalk", 2: "jaywalk"}
    for log in lgs:
        if log.terminal == "collision":
            col[label[int(log.nearest_mode[-1])]] += 1
        for j in range(12):
            prev = 0
            for t in range(log.n_steps):
                m = int(log.ped_mode[t, j])
                if m != 0 and m != prev:
                    cross += 1
                    if m == MODE_JAYWALK:
                        jay += 1
                prev = m
    att = metrics.collision_attribution(lgs)
    n_col = sum(col.values())
    att_ok = (
        att["n_collisions"] == n_col
        and att["crossings_total"] == cross
        and att["jaywalks_total"] == jay
        and all(att["fractions"][k] == (col[k] / n_col if n_col else 0.0) for k in col)
    )

    # p5 duplicate
    mins = {"cw": [], "jw": []}
    for log in lgs:
        for j in range(12):
            t = 0
            while t < log.n_steps:
                m = int(log.ped_mode[t, j])
                if m == 0:
                    t += 1
                    continue
                start = t
                while t < log.n_steps and int(log.ped_mode[t, j]) == m:
                    t += 1
                dmin = math.inf
                for u in range(start, t):
                    dmin = min(
                        dmin,
                        math.hypot(
                            float(log.ped_x[u, j]) - float(log.sdc[u, 0]),
                            float(log.ped_y[u, j]) - float(log.sdc[u, 1]),
                        ),
                    )
                if dmin < 20.0:
                    mins["cw" if m == MODE_CROSSWALK else "jw"].append(dmin)
    p5 = metrics.approach_distance_p5(lgs)
    p5_ok = p5["n_cw"] == len(mins["cw"]) and p5["n_jw"] == len(mins["jw"])
    for typ in ("cw", "jw"):
        vals = sorted(mins[typ])
        if vals:
            idx = 0.05 * (len(vals) - 1)
            lo = int(math.floor(idx))
            ref = vals[-1] if lo >= len(vals) - 1 else vals[lo] + (idx - lo) * (vals[lo + 1] - vals[lo])
            p5_ok &= p5[typ] == ref

    # braking duplicate
    total_s, n_ev, n_nb = 0.0, 0, 0
    for log in lgs:
        for j in range(12):
            t = 0
            while t < log.n_steps:
                m = int(log.ped_mode[t, j])
                if m != MODE_JAYWALK:
                    t += 1
                    continue
                start = t
                while t < log.n_steps and int(log.ped_mode[t, j]) == MODE_JAYWALK:
                    t += 1
                entry = None
                for u in range(start, t):
                    if surface_at(geom, (float(log.ped_x[u, j]), float(log.ped_y[u, j]))) == SurfaceType.ROAD:
                        entry = u
                        break
                if entry is None:
                    continue
                d = math.hypot(
                    float(log.ped_x[entry, j]) - float(log.sdc[entry, 0]),
                    float(log.ped_y[entry, j]) - float(log.sdc[entry, 1]),
                )
                if d > 20.0:
                    continue
                braked = None
                for u in range(entry, log.n_steps - 1):
                    if log.sdc[u, 5] < -0.5 and log.sdc[u + 1, 5] < -0.5:
                        braked = u
                        break
                if braked is None:
                    n_nb += 1
                else:
                    total_s += (int(log.steps[braked]) - int(log.steps[entry])) * 0.1
                    n_ev += 1
    br = metrics.braking_reaction_time(lgs)
    br_ok = br["n_events"] == n_ev and br["n_no_brake"] == n_nb
    if n_ev:
        br_ok &= br["mean_s"] == total_s / n_ev

    # the hand-built 2.65 m/s gap example
    from test_metrics import synth_log

    T = 20
    log_cw = synth_log(
        T=T, sdc_speed=np.full(T, 5.43), sdc_pos=np.tile([62.0, 66.0], (T, 1)),
        ped_pos=np.tile([60.0, 66.0], (T, 1)), ped_mode=np.full(T, MODE_CROSSWALK),
    )
    log_jw = synth_log(
        T=T, sdc_speed=np.full(T, 8.08), sdc_pos=np.tile([62.0, 30.0], (T, 1)),
        ped_pos=np.tile([60.0, 30.0], (T, 1)), ped_mode=np.full(T, MODE_JAYWALK),
    )
    gap = metrics.speed_differential([log_cw, log_jw])[0]["delta"]
    gap_ok = gap == pytest.approx(2.65)

    elapsed = time.perf_counter() - t0
    ok = bool(speed_ok and att_ok and p5_ok and br_ok and gap_ok)
    record(
        "criterion 8 (metric oracles)",
        ok,
        f"50 logs: speed={bool(speed_ok)} attribution={att_ok} p5={bool(p5_ok)} "
        f"braking={br_ok} gap2.65={gap_ok}",
        elapsed,
    )
    assert ok


@pytest.mark.slow
def test_criterion_9_ablation_trend(desk_run):
    """Collision rate is non-decreasing across multipliers giving ~0%, ~13%
    and ~50% jaywalk shares (100 episodes each)."""
    t0 = time.perf_counter()
    seeds = [60_000 + i for i in range(100)]
    ckpt = desk_run["ckpt"]
    sweep = metrics.ablation_sweep(ckpt, ckpt, [0.0, 0.25, 1.0], 100, seeds, workers=WORKERS)
    collisions = [rep.collision_rate for _, rep in sweep]
    shares = [rep.attribution["jaywalk_share"] for _, rep in sweep]
    elapsed = time.perf_counter() - t0
    mono = collisions[0] <= collisions[1] <= collisions[2]
    share_ok = shares[0] == 0.0 and abs(shares[1] - 0.125) < 0.04 and abs(shares[2] - 0.5) < 0.08
    record(
        "criterion 9 (ablation trend)",
        mono and share_ok,
        f"collisions={[f'{c:.2f}' for c in collisions]} jaywalk_shares={[f'{s:.3f}' for s in shares]}",
        elapsed,
    )
    assert mono, collisions
    assert share_ok, shares


def test_criterion_10_trait_blindness():
    """Perturbing a non-crossing pedestrian's hidden trait leaves the vehicle
    observation bit-identical, and the 34-dim layout has no trait slot."""
    t0 = time.perf_counter()
    layout_ok = not any("tendency" in k or "trait" in k for k in env.SDC_OBS_LAYOUT)
    span = sorted(env.SDC_OBS_LAYOUT.values())
    layout_ok &= span[0][0] == 0 and span[-1][1] == 34

    bitwise_ok = True
    for seed in range(10):
        s, _ = env.reset(seed)
        idx = [i for i, p in enumerate(s.peds) if p.crossing_mode == env.MODE_NONE]
        peds = list(s.peds)
        for i in idx:
            q = peds[i].copy()
            q.tendency = (q.tendency + 0.41) % 1.0
            peds[i] = q
        s2 = env.EpisodeState(
            step=s.step, vehicle=s.vehicle, peds=tuple(peds), ped_rng_states=s.ped_rng_states,
            jaywalk_multiplier=s.jaywalk_multiplier, terminal=None, collision=None,
        )
        if not np.array_equal(env.sdc_observation(s), env.sdc_observation(s2)):
            bitwise_ok = False
            break
    elapsed = time.perf_counter() - t0
    ok = layout_ok and bitwise_ok
    record(
        "criterion 10 (trait blindness)",
        ok,
        f"layout audit={layout_ok}, perturbation bit-identical={bitwise_ok}",
        elapsed,
    )
    assert ok
