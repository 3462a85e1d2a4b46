"""Training machinery: schedules, TD losses, Adam, checkpoints.

The optimizer is a small functional Adam so updates are pure
(params, grads, state) -> (params', state') transformations; checkpoints
serialize tensors raw and little-endian so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .env import ConfigError, GameError


class NonFiniteLoss(GameError):
    """Loss diverged; training halts and keeps the last good checkpoint."""


class CheckpointVersionMismatch(GameError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    lr_decay_epochs: int = 200
    lr_decay_factor: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    batch_size: int = 64
    epochs: int = 400
    episodes_per_epoch: int = 500
    target_sync_updates: int = 1000
    bptt_length: int = 8
    history_length: int = 5
    replay_transitions: int = 100_000
    replay_episodes: int = 10_000
    update_period: int = 1
    conv_channels: tuple[int, int] = (16, 32)
    hidden_size: int = 128

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        for name in ("epsilon_start", "epsilon_end"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in (
            "batch_size", "epochs", "episodes_per_epoch", "target_sync_updates",
            "bptt_length", "history_length", "replay_transitions",
            "replay_episodes", "update_period", "hidden_size", "lr_decay_epochs",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")


# ------------------------------------------------------------- schedules

@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.1
    decay_steps: int = 1


def epsilon_at(step: int, schedule: EpsilonSchedule) -> float:
    """Linear decay from start to end over decay_steps, clamped after."""
    if step < 0:
        raise ValueError("step must be >= 0")
    frac = min(step / schedule.decay_steps, 1.0)
    return schedule.start + (schedule.end - schedule.start) * frac


@dataclass(frozen=True)
class LrSchedule:
    base: float = 1e-3
    decay_epochs: int = 200
    factor: float = 0.1


def lr_at(epoch: int, schedule: LrSchedule) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return schedule.base * schedule.factor ** (epoch // schedule.decay_epochs)


# ------------------------------------------------------------------ adam

@dataclass
class AdamState:
    step: int
    m: list[torch.Tensor]
    v: list[torch.Tensor]


def adam_init(params) -> AdamState:
    return AdamState(
        step=0,
        m=[torch.zeros_like(p) for p in params],
        v=[torch.zeros_like(p) for p in params],
    )


def apply_update(
    params,
    grads,
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[list[torch.Tensor], AdamState]:
    """One adaptive-moment step; returns fresh tensors, inputs untouched."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise GameError("parameter/gradient/state arity mismatch")
    b1, b2 = betas
    t = state.step + 1
    new_p, new_m, new_v = [], [], []
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if p.shape != g.shape:
                raise GameError(f"shape mismatch {tuple(p.shape)} vs {tuple(g.shape)}")
            m2 = b1 * m + (1 - b1) * g
            v2 = b2 * v + (1 - b2) * g * g
            m_hat = m2 / (1 - b1**t)
            v_hat = v2 / (1 - b2**t)
            new_p.append(p - lr * m_hat / (torch.sqrt(v_hat) + eps))
            new_m.append(m2)
            new_v.append(v2)
    return new_p, AdamState(step=t, m=new_m, v=new_v)


# ----------------------------------------------------------------- losses

def loss_and_grads(net: torch.nn.Module, loss: torch.Tensor):
    """Exact gradients for the given loss; raises on divergence."""
    if not torch.isfinite(loss):
        raise NonFiniteLoss(f"loss = {float(loss)}")
    params = list(net.parameters())
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grads = [
        g if g is not None else torch.zeros_like(p) for g, p in zip(grads, params)
    ]
    return loss.detach().item(), grads


def recurrent_td_loss(online, target, batch, gamma: float) -> torch.Tensor:
    """Masked mean Huber loss over truncated subsequences.

    Both nets start from a zero hidden state at the window head; the
    target net rolls one step further to supply bootstrap values.
    """
    dtype = next(online.parameters()).dtype
    obs = torch.as_tensor(batch["obs"]).to(dtype)
    reports = torch.as_tensor(batch["reports"]).to(dtype)
    actions = torch.as_tensor(batch["actions"])
    rewards = torch.as_tensor(batch["rewards"]).to(dtype)
    dones = torch.as_tensor(batch["dones"]).to(dtype)
    mask = torch.as_tensor(batch["mask"]).to(dtype)
    B, L = actions.shape

    h = online.initial_hidden(B)
    preds = []
    for t in range(L):
        q, h = online(obs[:, t], reports[:, t], h)
        preds.append(q.gather(1, actions[:, t : t + 1]).squeeze(1))
    pred = torch.stack(preds, dim=1)

    with torch.no_grad():
        ht = target.initial_hidden(B)
        next_max = []
        for t in range(L + 1):
            qt, ht = target(obs[:, t], reports[:, t], ht)
            if t >= 1:
                next_max.append(qt.max(dim=1).values)
        next_max = torch.stack(next_max, dim=1)
        y = rewards + gamma * (1.0 - dones) * next_max

    per_step = F.smooth_l1_loss(pred, y, reduction="none")
    return (per_step * mask).sum() / mask.sum()


def joint_td_loss(online, target, batch, gamma: float) -> torch.Tensor:
    dtype = next(online.parameters()).dtype
    obs = torch.as_tensor(batch["obs"]).to(dtype)
    next_obs = torch.as_tensor(batch["next_obs"]).to(dtype)
    actions = torch.as_tensor(batch["actions"])
    rewards = torch.as_tensor(batch["rewards"]).to(dtype)
    dones = torch.as_tensor(batch["dones"]).to(dtype)

    pred = online(obs).gather(1, actions.unsqueeze(1)).squeeze(1)
    with torch.no_grad():
        next_max = target(next_obs).max(dim=1).values
        y = rewards + gamma * (1.0 - dones) * next_max
    return F.smooth_l1_loss(pred, y)


# ------------------------------------------------------------- checkpoint

CHECKPOINT_MAGIC = b"MAPEL1"
CHECKPOINT_VERSION = 1


def config_hash(header_config: dict) -> str:
    blob = json.dumps(header_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_checkpoint(path, net: torch.nn.Module, opt: AdamState | None,
                    meta: dict) -> None:
    """Versioned binary container; byte-stable for identical inputs.

    Layout: magic, u32 version, 32-byte config hash, u64 header length,
    JSON header, then raw little-endian tensor data in header order.
    """
    tensors: list[tuple[str, np.ndarray]] = []
    for name, p in net.state_dict().items():
        tensors.append((name, p.detach().cpu().numpy()))
    opt_step = 0
    if opt is not None:
        opt_step = opt.step
        for i, m in enumerate(opt.m):
            tensors.append((f"adam.m.{i}", m.detach().cpu().numpy()))
        for i, v in enumerate(opt.v):
            tensors.append((f"adam.v.{i}", v.detach().cpu().numpy()))

    header = {
        "meta": meta,
        "opt_step": opt_step,
        "has_opt": opt is not None,
        "tensors": [
            {"name": n, "shape": list(a.shape), "dtype": str(a.dtype)}
            for n, a in tensors
        ],
    }
    header_blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    digest = bytes.fromhex(config_hash(meta))

    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(digest)
        fh.write(struct.pack("<Q", len(header_blob)))
        fh.write(header_blob)
        for _, a in tensors:
            fh.write(np.ascontiguousarray(a).astype(a.dtype, copy=False).tobytes())


def load_checkpoint(path):
    """Returns (meta, tensors-by-name, opt_step, has_opt)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointVersionMismatch(f"bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionMismatch(f"unsupported version {version}")
        digest = fh.read(32)
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        if bytes.fromhex(config_hash(header["meta"])) != digest:
            raise CheckpointVersionMismatch("config hash mismatch")
        tensors = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            tensors[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return header["meta"], tensors, header["opt_step"], header["has_opt"]


def restore_net(net: torch.nn.Module, tensors: dict[str, np.ndarray]) -> None:
    state = {}
    for name, p in net.state_dict().items():
        if name not in tensors:
            raise CheckpointVersionMismatch(f"missing tensor {name}")
        state[name] = torch.as_tensor(tensors[name]).to(p.dtype)
    net.load_state_dict(state)
