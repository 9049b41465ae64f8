"""Co-training loop: vectorized rollout collection, blended-reward critic
targets, GAE, clipped PPO updates with Adam, plus the single-agent mode that
trains the vehicle against scripted always-go pedestrians.

The critic regresses returns of the blended reward (50% mean pedestrian, 50%
vehicle); each actor's advantages come from its own reward stream against the
shared critic baseline. Pedestrian samples from all 12 agents are pooled into
the shared actor's minibatches.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import env as envmod
from . import nets
from .env import EpisodeState, N_PEDS, Observations
from .physics import VehicleAction


@dataclass(frozen=True)
class TrainConfig:
    n_envs: int = 512
    rollout_len: int = 256
    ppo_epochs: int = 4
    minibatches: int = 8
    updates: int = 5000
    lr: float = 3e-4
    gamma: float = 0.995
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    entropy_coef_ped: float = 0.03
    entropy_coef_sdc: float = 0.01
    grad_norm_clip: float = 0.5
    value_coef: float = 0.5
    seed: int = 0
    jaywalk_multiplier: float = 0.25
    mode: str = "co-train"  # co-train | single-agent
    checkpoint_every: int = 100

    def validate(self) -> None:
        positive = [
            "n_envs", "rollout_len", "ppo_epochs", "minibatches", "updates",
            "lr", "gamma", "gae_lambda", "clip_eps", "entropy_coef_ped",
            "entropy_coef_sdc", "grad_norm_clip", "value_coef", "checkpoint_every",
        ]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.gamma < 1.0:
            raise ValueError(f"gamma must be < 1, got {self.gamma}")
        if not self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be <= 1, got {self.gae_lambda}")
        if self.mode not in ("co-train", "single-agent"):
            raise ValueError(f"mode must be co-train or single-agent, got {self.mode!r}")
        if not 0.0 <= self.jaywalk_multiplier <= 1.0:
            raise ValueError(f"jaywalk_multiplier must be in [0, 1], got {self.jaywalk_multiplier}")


def desk_config(seed: int = 0, mode: str = "co-train") -> TrainConfig:
    """Reduced scale sized for CPU runs: 32 envs x 64 steps x 300 updates.

    Two optimization coefficients are adapted to the 64x smaller batch: the
    learning rate drops to 1e-4 (the full-scale rate yields per-update KL an
    order of magnitude beyond healthy PPO steps and thrashes the policy) and
    the vehicle entropy bonus is effectively disabled (it inflates the
    Gaussian log-std toward its clamp instead of aiding exploration at this
    sample budget).
    """
    return TrainConfig(
        n_envs=32, rollout_len=64, updates=300, seed=seed, mode=mode,
        lr=5e-5, entropy_coef_sdc=1e-4,
    )


def config_hash(cfg: TrainConfig) -> str:
    return hashlib.sha256(json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()[:16]


def blended_reward(ped_rewards, sdc_reward):
    """50% mean pedestrian reward + 50% vehicle reward (critic target)."""
    return 0.5 * np.mean(ped_rewards, axis=-1) + 0.5 * np.asarray(sdc_reward)


def compute_gae(rewards, values, dones, bootstrap, gamma: float, lam: float):
    """Recursive GAE over leading time axis; done flags cut the bootstrap.
    All inputs share the (T, ...) shape except bootstrap (...). Returns
    (advantages, returns) with returns = advantages + values."""
    rewards = np.asarray(rewards, dtype=np.float64)
    T = rewards.shape[0]
    adv = np.empty_like(rewards)
    last = np.zeros(rewards.shape[1:])
    next_values = bootstrap
    for t in range(T - 1, -1, -1):
        nonterm = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * nonterm - values[t]
        last = delta + gamma * lam * nonterm * last
        adv[t] = last
        next_values = values[t]
    return adv, adv + values


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + eps)


def ppo_losses(new_logp, old_logp, advantages, new_values, returns, clip_eps: float):
    """Clipped-surrogate policy loss, value loss, and diagnostics.

    The composite objective is policy + value_coef * value - entropy_coef *
    entropy; entropy is distribution-specific and owned by the caller.
    """
    delta = new_logp - old_logp
    ratio = np.exp(delta)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    policy_loss = -np.minimum(unclipped, clipped).mean()
    value_loss = 0.5 * np.mean((new_values - returns) ** 2)
    clip_frac = float(np.mean(np.abs(ratio - 1.0) > clip_eps))
    # log(ratio) written as delta so extreme ratios cannot underflow
    approx_kl = float(np.mean((ratio - 1.0) - delta))
    return float(policy_loss), float(value_loss), clip_frac, approx_kl


def global_grad_norm(grads) -> float:
    total = 0.0
    for dw, db in grads:
        total += float((dw * dw).sum()) + float((db * db).sum())
    return math.sqrt(total)


def clip_grads(grads, max_norm: float):
    """Scale gradients so the global norm is at most max_norm."""
    norm = global_grad_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return [(dw * scale, db * scale) for dw, db in grads], norm


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def adam_init(params: nets.MlpParams) -> AdamState:
    zeros = lambda arrs: [np.zeros_like(a) for a in arrs]
    m = zeros(params.weights) + zeros(params.biases)
    v = zeros(params.weights) + zeros(params.biases)
    return AdamState(m=m, v=v)


def adam_step(
    params: nets.MlpParams,
    grads,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam update with bias correction."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    n_layers = len(params.weights)
    flat = []
    for k, (dw, db) in enumerate(grads):
        flat.append((params.weights[k], dw, state.m[k], state.v[k]))
        flat.append((params.biases[k], db, state.m[n_layers + k], state.v[n_layers + k]))
    for p, g, m, v in flat:
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


# --- rollout collection -------------------------------------------------------


@dataclass
class RolloutBatch:
    ped_obs: np.ndarray    # (T, N, 12, 20) f32
    ped_act: np.ndarray    # (T, N, 12) int64
    ped_logp: np.ndarray   # (T, N, 12)
    ped_rew: np.ndarray    # (T, N, 12)
    sdc_obs: np.ndarray    # (T, N, 34) f32
    sdc_act: np.ndarray    # (T, N, 2)
    sdc_logp: np.ndarray   # (T, N)
    sdc_rew: np.ndarray    # (T, N)
    glob: np.ndarray       # (T, N, 58) f32
    values: np.ndarray     # (T, N)
    dones: np.ndarray      # (T, N)
    bootstrap: np.ndarray  # (N,)


@dataclass
class RolloutStats:
    episodes: int = 0
    goals: int = 0
    collisions: int = 0
    timeouts: int = 0
    return_sum: float = 0.0  # blended episode returns

    def merge_episode(self, terminal: str, ep_return: float) -> None:
        self.episodes += 1
        self.return_sum += ep_return
        if terminal == "goal":
            self.goals += 1
        elif terminal == "collision":
            self.collisions += 1
        else:
            self.timeouts += 1


def env_episode_seed(run_seed: int, env_idx: int, episode_idx: int) -> int:
    return int(np.random.SeedSequence((run_seed, 101, env_idx, episode_idx)).generate_state(1)[0])


class VecEnvs:
    """A fixed set of episodes stepped in lockstep with auto-reset. Fresh
    episode seeds come from the run's seed stream, independent of policy."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.n = cfg.n_envs
        self.episode_idx = [0] * self.n
        self.states: list[EpisodeState] = []
        self.obs: list[Observations] = []
        self.ep_return = [0.0] * self.n
        for i in range(self.n):
            state, obs = envmod.reset(env_episode_seed(cfg.seed, i, 0), cfg.jaywalk_multiplier)
            self.states.append(state)
            self.obs.append(obs)

    def step(self, decisions: np.ndarray, actions: np.ndarray, stats: RolloutStats):
        """Step every env; returns (ped_rewards (N,12), sdc_rewards (N,), dones (N,))."""
        n = self.n
        ped_r = np.empty((n, N_PEDS))
        sdc_r = np.empty(n)
        dones = np.zeros(n)
        for i in range(n):
            state, obs, rewards, done = envmod.env_step(
                self.states[i],
                decisions[i],
                VehicleAction(float(actions[i, 0]), float(actions[i, 1])),
            )
            ped_r[i] = rewards.ped
            sdc_r[i] = rewards.sdc
            self.ep_return[i] += float(blended_reward(rewards.ped, rewards.sdc))
            if done:
                dones[i] = 1.0
                stats.merge_episode(state.terminal, self.ep_return[i])
                self.ep_return[i] = 0.0
                self.episode_idx[i] += 1
                state, obs = envmod.reset(
                    env_episode_seed(self.cfg.seed, i, self.episode_idx[i]),
                    self.cfg.jaywalk_multiplier,
                )
            self.states[i] = state
            self.obs[i] = obs
        return ped_r, sdc_r, dones


def _stack_obs(envs: VecEnvs):
    n = envs.n
    ped = np.empty((n, N_PEDS, envmod.PED_OBS_DIM), dtype=np.float32)
    sdc = np.empty((n, envmod.SDC_OBS_DIM), dtype=np.float32)
    glob = np.empty((n, envmod.GLOBAL_STATE_DIM), dtype=np.float32)
    for i, o in enumerate(envs.obs):
        ped[i] = o.ped
        sdc[i] = o.sdc
        glob[i] = o.global_state
    return ped, sdc, glob


def collect_rollouts(
    params: dict[str, nets.MlpParams],
    envs: VecEnvs,
    cfg: TrainConfig,
    rng: np.random.Generator,
    stats: RolloutStats,
) -> RolloutBatch:
    """Sample rollout_len steps from every env under the current policies.
    Observations are stored in float32 and re-used bit-identically at update
    time, so the first-epoch PPO ratio is exactly 1."""
    T, n = cfg.rollout_len, cfg.n_envs
    single_agent = cfg.mode == "single-agent"
    batch = RolloutBatch(
        ped_obs=np.empty((T, n, N_PEDS, envmod.PED_OBS_DIM), dtype=np.float32),
        ped_act=np.empty((T, n, N_PEDS), dtype=np.int64),
        ped_logp=np.zeros((T, n, N_PEDS)),
        ped_rew=np.empty((T, n, N_PEDS)),
        sdc_obs=np.empty((T, n, envmod.SDC_OBS_DIM), dtype=np.float32),
        sdc_act=np.empty((T, n, 2)),
        sdc_logp=np.empty((T, n)),
        sdc_rew=np.empty((T, n)),
        glob=np.empty((T, n, envmod.GLOBAL_STATE_DIM), dtype=np.float32),
        values=np.empty((T, n)),
        dones=np.empty((T, n)),
        bootstrap=np.empty(n),
    )
    for t in range(T):
        ped_obs, sdc_obs, glob = _stack_obs(envs)
        batch.ped_obs[t] = ped_obs
        batch.sdc_obs[t] = sdc_obs
        batch.glob[t] = glob

        if single_agent:
            decisions = np.ones((n, N_PEDS), dtype=np.int64)
        else:
            logits = nets.forward(params["ped_actor"], ped_obs.reshape(-1, envmod.PED_OBS_DIM).astype(np.float64))
            decisions = nets.categorical_sample(rng, logits).reshape(n, N_PEDS)
            batch.ped_logp[t] = nets.categorical_logp(logits, decisions.reshape(-1)).reshape(n, N_PEDS)
        batch.ped_act[t] = decisions

        raw = nets.forward(params["sdc_actor"], sdc_obs.astype(np.float64))
        mean, log_std, _ = nets.split_sdc_head(raw)
        action = nets.gaussian_sample(rng, mean, log_std)
        batch.sdc_act[t] = action
        batch.sdc_logp[t] = nets.gaussian_logp(mean, log_std, action)
        batch.values[t] = nets.forward(params["critic"], glob.astype(np.float64))[:, 0]

        ped_r, sdc_r, dones = envs.step(decisions, action, stats)
        batch.ped_rew[t] = ped_r
        batch.sdc_rew[t] = sdc_r
        batch.dones[t] = dones

    _, _, glob = _stack_obs(envs)
    batch.bootstrap[:] = nets.forward(params["critic"], glob.astype(np.float64))[:, 0]
    return batch


# --- PPO update ---------------------------------------------------------------


@dataclass
class UpdateDiagnostics:
    ped_policy_loss: float = 0.0
    sdc_policy_loss: float = 0.0
    value_loss: float = 0.0
    ped_entropy: float = 0.0
    sdc_entropy: float = 0.0
    clip_frac: float = 0.0
    approx_kl: float = 0.0


class TrainingDiverged(RuntimeError):
    pass


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise TrainingDiverged(f"non-finite loss in {name}: {values}")


def ppo_update(
    params: dict[str, nets.MlpParams],
    opt: dict[str, AdamState],
    batch: RolloutBatch,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> UpdateDiagnostics:
    """4 epochs x 8 minibatches of clipped PPO on the collected batch."""
    T, n = cfg.rollout_len, cfg.n_envs
    single_agent = cfg.mode == "single-agent"

    values = batch.values
    dones = batch.dones
    blended = blended_reward(batch.ped_rew, batch.sdc_rew)
    _, returns_blend = compute_gae(
        blended, values, dones, batch.bootstrap, cfg.gamma, cfg.gae_lambda
    )
    sdc_adv, _ = compute_gae(
        batch.sdc_rew, values, dones, batch.bootstrap, cfg.gamma, cfg.gae_lambda
    )
    sdc_adv = normalize_advantages(sdc_adv).reshape(-1)

    if not single_agent:
        shape = batch.ped_rew.shape
        ped_adv, _ = compute_gae(
            batch.ped_rew,
            np.broadcast_to(values[:, :, None], shape),
            np.broadcast_to(dones[:, :, None], shape),
            np.broadcast_to(batch.bootstrap[:, None], shape[1:]),
            cfg.gamma,
            cfg.gae_lambda,
        )
        ped_adv = normalize_advantages(ped_adv).reshape(-1)
        ped_obs_flat = batch.ped_obs.reshape(-1, envmod.PED_OBS_DIM)
        ped_act_flat = batch.ped_act.reshape(-1)
        ped_logp_flat = batch.ped_logp.reshape(-1)

    sdc_obs_flat = batch.sdc_obs.reshape(-1, envmod.SDC_OBS_DIM)
    sdc_act_flat = batch.sdc_act.reshape(-1, 2)
    sdc_logp_flat = batch.sdc_logp.reshape(-1)
    glob_flat = batch.glob.reshape(-1, envmod.GLOBAL_STATE_DIM)
    returns_flat = returns_blend.reshape(-1)

    diag = UpdateDiagnostics()
    n_terms = 0
    for _ in range(cfg.ppo_epochs):
        if not single_agent:
            ped_perm = rng.permutation(T * n * N_PEDS)
        env_perm = rng.permutation(T * n)
        ped_mb = (T * n * N_PEDS) // cfg.minibatches
        env_mb = (T * n) // cfg.minibatches
        for mb in range(cfg.minibatches):
            if not single_agent:
                idx = ped_perm[mb * ped_mb : (mb + 1) * ped_mb]
                pl, ent = _update_ped_actor(
                    params["ped_actor"], opt["ped_actor"],
                    ped_obs_flat[idx].astype(np.float64), ped_act_flat[idx],
                    ped_logp_flat[idx], ped_adv[idx], cfg,
                )
                diag.ped_policy_loss += pl
                diag.ped_entropy += ent

            idx = env_perm[mb * env_mb : (mb + 1) * env_mb]
            spl, sent, cf, kl = _update_sdc_actor(
                params["sdc_actor"], opt["sdc_actor"],
                sdc_obs_flat[idx].astype(np.float64), sdc_act_flat[idx],
                sdc_logp_flat[idx], sdc_adv[idx], cfg,
            )
            vl = _update_critic(
                params["critic"], opt["critic"],
                glob_flat[idx].astype(np.float64), returns_flat[idx], cfg,
            )
            diag.sdc_policy_loss += spl
            diag.sdc_entropy += sent
            diag.clip_frac += cf
            diag.approx_kl += kl
            diag.value_loss += vl
            n_terms += 1

    diag.ped_policy_loss /= n_terms
    diag.sdc_policy_loss /= n_terms
    diag.value_loss /= n_terms
    diag.ped_entropy /= n_terms
    diag.sdc_entropy /= n_terms
    diag.clip_frac /= n_terms
    diag.approx_kl /= n_terms
    return diag


def _policy_grad_scale(ratio, advantages, clip_eps, m):
    """d(policy loss)/d(new_logp) per sample: gradient flows through the
    unclipped branch only where it is the active min."""
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    active = unclipped <= clipped
    return -(advantages * ratio * active) / m


def ped_actor_grads(params, obs, actions, old_logp, adv, cfg: TrainConfig):
    """Analytic gradients of the categorical-actor composite loss
    (clipped surrogate minus entropy bonus) for one minibatch."""
    m = obs.shape[0]
    logits, acts = nets.forward_cache(params, obs)
    new_logp = nets.categorical_logp(logits, actions)
    pl, _, _, _ = ppo_losses(new_logp, old_logp, adv, 0.0, 0.0, cfg.clip_eps)
    entropy = float(nets.categorical_entropy(logits).mean())
    _check_finite("ped_actor", pl, entropy)

    ratio = np.exp(new_logp - old_logp)
    gscale = _policy_grad_scale(ratio, adv, cfg.clip_eps, m)
    dlogits = gscale[:, None] * nets.grad_categorical_logp(logits, actions)
    dlogits += (-cfg.entropy_coef_ped / m) * nets.grad_categorical_entropy(logits)
    grads, _ = nets.backward(params, acts, dlogits)
    return grads, pl, entropy


def sdc_actor_grads(params, obs, actions, old_logp, adv, cfg: TrainConfig):
    """Analytic gradients of the Gaussian-actor composite loss; the log-std
    clamp blocks gradient where active."""
    m = obs.shape[0]
    raw, acts = nets.forward_cache(params, obs)
    mean, log_std, pass_mask = nets.split_sdc_head(raw)
    new_logp = nets.gaussian_logp(mean, log_std, actions)
    pl, _, cf, kl = ppo_losses(new_logp, old_logp, adv, 0.0, 0.0, cfg.clip_eps)
    entropy = float(nets.gaussian_entropy(log_std).mean())
    _check_finite("sdc_actor", pl, entropy)

    ratio = np.exp(new_logp - old_logp)
    gscale = _policy_grad_scale(ratio, adv, cfg.clip_eps, m)
    d_mean, d_log_std = nets.grad_gaussian_logp(mean, log_std, actions)
    draw = np.empty_like(raw)
    draw[:, :2] = gscale[:, None] * d_mean
    draw[:, 2:] = gscale[:, None] * d_log_std * pass_mask
    # entropy gradient w.r.t. log_std is 1 per dim inside the clamp
    draw[:, 2:] += (-cfg.entropy_coef_sdc / m) * pass_mask
    grads, _ = nets.backward(params, acts, draw)
    return grads, pl, entropy, cf, kl


def critic_grads(params, glob, returns, cfg: TrainConfig):
    """Analytic gradients of value_coef * 0.5 * mean((V - returns)^2)."""
    m = glob.shape[0]
    v, acts = nets.forward_cache(params, glob)
    v = v[:, 0]
    vl = 0.5 * float(np.mean((v - returns) ** 2))
    _check_finite("critic", vl)
    dv = cfg.value_coef * (v - returns) / m
    grads, _ = nets.backward(params, acts, dv[:, None])
    return grads, vl


def _apply(params, opt, grads, cfg: TrainConfig) -> None:
    grads, _ = clip_grads(grads, cfg.grad_norm_clip)
    adam_step(params, grads, opt, cfg.lr)


def _update_ped_actor(params, opt, obs, actions, old_logp, adv, cfg: TrainConfig):
    grads, pl, entropy = ped_actor_grads(params, obs, actions, old_logp, adv, cfg)
    _apply(params, opt, grads, cfg)
    return pl, entropy


def _update_sdc_actor(params, opt, obs, actions, old_logp, adv, cfg: TrainConfig):
    grads, pl, entropy, cf, kl = sdc_actor_grads(params, obs, actions, old_logp, adv, cfg)
    _apply(params, opt, grads, cfg)
    return pl, entropy, cf, kl


def _update_critic(params, opt, glob, returns, cfg: TrainConfig):
    grads, vl = critic_grads(params, glob, returns, cfg)
    _apply(params, opt, grads, cfg)
    return vl


# --- training loop ------------------------------------------------------------

METRICS_COLUMNS = [
    "update", "ped_policy_loss", "sdc_policy_loss", "value_loss",
    "ped_entropy", "sdc_entropy", "clip_frac", "approx_kl",
    "episodes", "goals_per_1k", "collisions_per_1k", "mean_episode_return",
    "steps_per_sec",  # wall clock; excluded from determinism comparisons
]


def train(cfg: TrainConfig, out_dir) -> list[Path]:
    """Run the full loop; returns the checkpoint paths (cadenced + final).
    Aborts with the last good checkpoint on a non-finite loss."""
    cfg.validate()
    out = Path(out_dir)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    (out / "config.json").write_text(
        json.dumps({"config": asdict(cfg), "config_hash": chash}, sort_keys=True, indent=2) + "\n"
    )

    params = nets.init_policies(cfg.seed)
    opt = {name: adam_init(p) for name, p in params.items()}
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 202)))
    envs = VecEnvs(cfg)
    stats_total = RolloutStats()

    checkpoints: list[Path] = []

    def save(tag: str, update: int) -> Path:
        path = ckpt_dir / f"ckpt_{tag}.bin"
        nets.save_checkpoint(
            path, params,
            {"format": 1, "update": update, "seed": cfg.seed, "config_hash": chash, "mode": cfg.mode},
        )
        checkpoints.append(path)
        return path

    metrics_path = out / "metrics.csv"
    with metrics_path.open("w") as fh:
        fh.write(f"# config_hash={chash} seed={cfg.seed}\n")
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        steps_per_update = cfg.n_envs * cfg.rollout_len
        for update in range(1, cfg.updates + 1):
            t0 = time.perf_counter()
            stats = RolloutStats()
            batch = collect_rollouts(params, envs, cfg, rng, stats)
            try:
                diag = ppo_update(params, opt, batch, cfg, rng)
            except TrainingDiverged:
                save("aborted", update)
                raise
            elapsed = time.perf_counter() - t0
            stats_total.episodes += stats.episodes
            row = [
                update,
                diag.ped_policy_loss, diag.sdc_policy_loss, diag.value_loss,
                diag.ped_entropy, diag.sdc_entropy, diag.clip_frac, diag.approx_kl,
                stats.episodes,
                1000.0 * stats.goals / steps_per_update,
                1000.0 * stats.collisions / steps_per_update,
                stats.return_sum / stats.episodes if stats.episodes else 0.0,
                steps_per_update / elapsed,
            ]
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
            if update % cfg.checkpoint_every == 0:
                save(f"{update:06d}", update)
        save("final", cfg.updates)
    return checkpoints


# --- evaluation-time policy adapters -------------------------------------------


def greedy_sdc_policy(params: dict[str, nets.MlpParams]):
    """Deterministic vehicle policy: the Gaussian mean."""
    actor = params["sdc_actor"]

    def policy(obs: np.ndarray, rng=None) -> VehicleAction:
        raw = nets.forward(actor, obs.astype(np.float64))
        return VehicleAction(float(raw[0]), float(raw[1]))

    return policy


def greedy_ped_policy(params: dict[str, nets.MlpParams]):
    """Deterministic pedestrian policy: argmax over go/wait logits."""
    actor = params["ped_actor"]

    def policy(ped_obs: np.ndarray) -> np.ndarray:
        logits = nets.forward(actor, ped_obs.astype(np.float64))
        return logits.argmax(axis=-1)

    return policy
