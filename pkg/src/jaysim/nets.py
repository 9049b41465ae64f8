"""Small MLP actors and critic with explicit forward/backward passes, action
distributions, and a versioned binary checkpoint format.

Three linear layers with ReLU after the first two. Gradients are hand-derived
reverse mode, kept framework-free so every update is auditable and checkable
against finite differences.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PED_ACTOR_DIMS = (20, 128, 128, 2)    # go/wait logits
SDC_ACTOR_DIMS = (34, 256, 256, 4)    # [accel mean, steer mean, accel log-std, steer log-std]
CRITIC_DIMS = (58, 256, 256, 1)

HIDDEN_GAIN = float(np.sqrt(2.0))
POLICY_OUT_GAIN = 0.01
VALUE_OUT_GAIN = 1.0

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
# Per-dimension log-std offsets: initial stds near 0.6 m/s^2 (acceleration)
# and 0.11 rad (steering). Steering noise must start small: at speed, a
# wandering heading walks the vehicle off the road into the projection
# regime within seconds, before any goal signal can arrive.
LOG_STD_OFFSET = np.array([-0.5, -2.2])
# The acceleration mean head starts optimistic so the vehicle explores while
# rolling; a zero-mean init settles into a near-stationary local optimum.
ACCEL_BIAS_INIT = 2.5

# The steering mean starts as a proportional lane controller carved into the
# weights (gain on the body-frame goal-left feature, damping on the current
# steering angle). Without it, exploration noise integrates into a t^1.5
# lateral random walk that leaves the road before any return signal arrives.
# Indices follow the vehicle observation layout in env.SDC_OBS_LAYOUT.
STEER_PRIOR_GAIN = 2.0
STEER_PRIOR_DAMPING = 0.3
_OBS_GOAL_LEFT = 7
_OBS_STEERING = 5

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class MlpParams:
    dims: tuple[int, ...]
    weights: list[np.ndarray]  # weights[k]: (dims[k], dims[k+1])
    biases: list[np.ndarray]   # biases[k]: (dims[k+1],)

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "MlpParams":
        return MlpParams(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


def orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    """Orthogonal (n_in, n_out) matrix scaled by gain."""
    shape = (n_in, n_out) if n_in >= n_out else (n_out, n_in)
    a = rng.standard_normal(shape)
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q


def init_mlp(dims: tuple[int, ...], seed, out_gain: float) -> MlpParams:
    """Orthogonal init, gain sqrt(2) on hidden layers and out_gain on the
    output layer; zero biases. Deterministic per seed."""
    if any(d <= 0 for d in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for k in range(len(dims) - 1):
        gain = out_gain if k == len(dims) - 2 else HIDDEN_GAIN
        weights.append(orthogonal(rng, dims[k], dims[k + 1], gain))
        biases.append(np.zeros(dims[k + 1]))
    return MlpParams(tuple(dims), weights, biases)


def _install_steering_prior(p: MlpParams) -> None:
    """Route +/- goal-left and +/- steering through dedicated ReLU pairs in
    both hidden layers and wire the steering mean to read them, so the
    initial policy is a stabilizing proportional controller. Everything else
    keeps its orthogonal init and is free to overwrite the prior."""
    w1, w2, w3 = p.weights
    for col, (idx, sign) in enumerate(
        ((_OBS_GOAL_LEFT, 1.0), (_OBS_GOAL_LEFT, -1.0), (_OBS_STEERING, 1.0), (_OBS_STEERING, -1.0))
    ):
        w1[:, col] = 0.0
        w1[idx, col] = sign
        w2[:, col] = 0.0
        w2[col, col] = 1.0
    w3[:, 1] = 0.0
    w3[0, 1] = STEER_PRIOR_GAIN
    w3[1, 1] = -STEER_PRIOR_GAIN
    w3[2, 1] = -STEER_PRIOR_DAMPING
    w3[3, 1] = STEER_PRIOR_DAMPING


def init_policies(seed: int) -> dict[str, MlpParams]:
    def sub(k: int) -> np.random.SeedSequence:
        return np.random.SeedSequence((seed, 303, k))

    sdc = init_mlp(SDC_ACTOR_DIMS, sub(1), POLICY_OUT_GAIN)
    sdc.biases[-1][0] = ACCEL_BIAS_INIT
    _install_steering_prior(sdc)
    return {
        "ped_actor": init_mlp(PED_ACTOR_DIMS, sub(0), POLICY_OUT_GAIN),
        "sdc_actor": sdc,
        "critic": init_mlp(CRITIC_DIMS, sub(2), VALUE_OUT_GAIN),
    }


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """ReLU MLP forward pass; accepts (..., in_dim)."""
    if x.shape[-1] != params.dims[0]:
        raise ValueError(f"input dim {x.shape[-1]} != {params.dims[0]}")
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k != last:
            np.maximum(h, 0.0, out=h)
    return h


def forward_cache(params: MlpParams, x: np.ndarray):
    """Forward pass keeping the layer activations needed for backward."""
    if x.shape[-1] != params.dims[0]:
        raise ValueError(f"input dim {x.shape[-1]} != {params.dims[0]}")
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k != last:
            np.maximum(h, 0.0, out=h)
            acts.append(h)
    return h, acts


def backward(params: MlpParams, acts: list[np.ndarray], grad_out: np.ndarray):
    """Exact reverse-mode gradients. acts comes from forward_cache; grad_out
    is dLoss/d(output), shape (..., out_dim). Returns (grads, grad_input)
    where grads is a list of (dW, db)."""
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.weights)
    g = grad_out
    for k in range(len(params.weights) - 1, -1, -1):
        a = acts[k]
        a2 = a.reshape(-1, a.shape[-1])
        g2 = g.reshape(-1, g.shape[-1])
        grads[k] = (a2.T @ g2, g2.sum(axis=0))
        g = g @ params.weights[k].T
        if k > 0:
            g = g * (a > 0.0)
    return grads, g


def num_params(dims: tuple[int, ...]) -> int:
    return sum(dims[k] * dims[k + 1] + dims[k + 1] for k in range(len(dims) - 1))


def flatten_params(params: MlpParams) -> np.ndarray:
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def unflatten_params(dims: tuple[int, ...], flat: np.ndarray) -> MlpParams:
    weights, biases = [], []
    pos = 0
    for k in range(len(dims) - 1):
        n = dims[k] * dims[k + 1]
        weights.append(flat[pos : pos + n].reshape(dims[k], dims[k + 1]).copy())
        pos += n
        biases.append(flat[pos : pos + dims[k + 1]].copy())
        pos += dims[k + 1]
    return MlpParams(tuple(dims), weights, biases)


def flatten_grads(grads) -> np.ndarray:
    parts = []
    for dw, db in grads:
        parts.append(dw.ravel())
        parts.append(db.ravel())
    return np.concatenate(parts)


# --- categorical distribution over go/wait logits ---------------------------

def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def categorical_probs(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def categorical_logp(logits: np.ndarray, actions: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return np.take_along_axis(lp, actions[..., None], axis=-1)[..., 0]


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


def categorical_sample(rng: np.random.Generator, logits: np.ndarray) -> np.ndarray:
    p_last = categorical_probs(logits)[..., 1]
    return (rng.random(p_last.shape) < p_last).astype(np.int64)


def grad_categorical_logp(logits: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """d log p(a) / d logits = onehot(a) - softmax(logits)."""
    p = categorical_probs(logits)
    g = -p
    np.put_along_axis(g, actions[..., None], 1.0 + np.take_along_axis(g, actions[..., None], axis=-1), axis=-1)
    return g


def grad_categorical_entropy(logits: np.ndarray) -> np.ndarray:
    """dH / d logits_k = -p_k (log p_k + H)."""
    lp = log_softmax(logits)
    p = np.exp(lp)
    ent = -(p * lp).sum(axis=-1, keepdims=True)
    return -p * (lp + ent)


# --- diagonal Gaussian over (acceleration, steering) -------------------------

def split_sdc_head(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the 4-unit head into means and clamped log-stds. Returns
    (mean, log_std, pass_mask) where pass_mask zeroes gradient where the
    clamp is active."""
    mean = raw[..., :2]
    pre = raw[..., 2:] + LOG_STD_OFFSET
    log_std = np.clip(pre, LOG_STD_MIN, LOG_STD_MAX)
    mask = (pre > LOG_STD_MIN) & (pre < LOG_STD_MAX)
    return mean, log_std, mask


def gaussian_sample(rng: np.random.Generator, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    return mean + np.exp(log_std) * rng.standard_normal(mean.shape)


def gaussian_logp(mean: np.ndarray, log_std: np.ndarray, x: np.ndarray) -> np.ndarray:
    z = (x - mean) * np.exp(-log_std)
    return (-0.5 * z * z - log_std - 0.5 * LOG_2PI).sum(axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> np.ndarray:
    return (log_std + 0.5 * (LOG_2PI + 1.0)).sum(axis=-1)


def grad_gaussian_logp(mean: np.ndarray, log_std: np.ndarray, x: np.ndarray):
    """Gradients of log p(x) w.r.t. mean and log_std (per sample, per dim)."""
    inv_var = np.exp(-2.0 * log_std)
    diff = x - mean
    d_mean = diff * inv_var
    d_log_std = diff * diff * inv_var - 1.0
    return d_mean, d_log_std


# --- checkpoints -------------------------------------------------------------

CHECKPOINT_MAGIC = b"NNCKPT01"


def save_checkpoint(path, params: dict[str, MlpParams], meta: dict) -> None:
    """Versioned binary: magic, per-net architecture tags, little-endian f32
    layer data, trailing CRC32; training metadata goes to a JSON sidecar."""
    path = Path(path)
    body = bytearray()
    body += struct.pack("<I", len(params))
    for name in sorted(params):
        p = params[name]
        nb = name.encode("utf-8")
        body += struct.pack("<H", len(nb)) + nb
        body += struct.pack("<I", len(p.dims))
        body += struct.pack(f"<{len(p.dims)}I", *p.dims)
        for w, b in zip(p.weights, p.biases):
            body += np.ascontiguousarray(w, dtype="<f4").tobytes()
            body += np.ascontiguousarray(b, dtype="<f4").tobytes()
    blob = CHECKPOINT_MAGIC + bytes(body)
    blob += struct.pack("<I", zlib.crc32(bytes(body)))
    path.write_bytes(blob)
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_checkpoint(path) -> tuple[dict[str, MlpParams], dict]:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    body, (crc,) = blob[8:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ValueError(f"{path}: checksum mismatch")
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        out = body[pos : pos + n]
        pos += n
        return out

    (count,) = struct.unpack("<I", take(4))
    params: dict[str, MlpParams] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (ndims,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{ndims}I", take(4 * ndims))
        weights, biases = [], []
        for k in range(ndims - 1):
            w = np.frombuffer(take(4 * dims[k] * dims[k + 1]), dtype="<f4")
            weights.append(w.astype(np.float64).reshape(dims[k], dims[k + 1]))
            b = np.frombuffer(take(4 * dims[k + 1]), dtype="<f4")
            biases.append(b.astype(np.float64))
        params[name] = MlpParams(tuple(int(d) for d in dims), weights, biases)
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return params, meta
