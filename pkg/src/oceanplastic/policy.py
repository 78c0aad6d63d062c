"""Shared actor-critic network for all vessels.

Two-conv visual encoder over the stacked 2x25x25 grid, a fully connected
trunk, and three heads: continuous action mean (with a state-independent
learned log-std), binary signal logits, and a state value. All agents
evaluate the same parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import CheckpointShapeError, ShapeError
from .world import AgentAction, OBS_SIZE, VECTOR_FRAME_SIZE, GRID_CELLS

CHECKPOINT_VERSION = 1

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NetworkConfig:
    hidden_units: int = 512
    num_layers: int = 2
    conv1_filters: int = 16
    conv2_filters: int = 32
    grid: int = GRID_CELLS
    stacks: int = 2
    vector_size: int = 2 * VECTOR_FRAME_SIZE
    log_std_init: float = 0.0


def _orthogonal(rows: int, cols: int, gain: float, gen: torch.Generator) -> torch.Tensor:
    flat = torch.randn(max(rows, cols), min(rows, cols), generator=gen)
    q, r = torch.linalg.qr(flat)
    q = q * torch.sign(torch.diagonal(r))
    if rows < cols:
        q = q.t()
    return gain * q[:rows, :cols].contiguous()


@dataclass
class ActionDistribution:
    """Diagonal Gaussian over (thrust, turn) plus a categorical signal."""

    mean: torch.Tensor  # (B, 2)
    log_std: torch.Tensor  # (2,) state-independent
    logits: torch.Tensor  # (B, 2) index 0 = false, 1 = true

    def sample(self, gen: torch.Generator) -> tuple[torch.Tensor, torch.Tensor]:
        """Raw continuous sample (pre-clamp) and signal index."""
        std = self.log_std.exp()
        noise = torch.randn(self.mean.shape, generator=gen, dtype=self.mean.dtype)
        raw = self.mean + std * noise
        probs = F.softmax(self.logits, dim=-1)
        signal = torch.multinomial(probs, 1, generator=gen).squeeze(-1)
        return raw, signal

    def deterministic(self) -> tuple[torch.Tensor, torch.Tensor]:
        return self.mean, self.logits.argmax(dim=-1)

    def log_prob(self, raw: torch.Tensor, signal: torch.Tensor) -> torch.Tensor:
        """Joint log-probability; Gaussian density of the pre-clamp sample."""
        std = self.log_std.exp()
        z = (raw - self.mean) / std
        gauss = (-0.5 * z * z - self.log_std - 0.5 * _LOG_2PI).sum(dim=-1)
        logp = F.log_softmax(self.logits, dim=-1)
        cat = logp.gather(-1, signal.long().unsqueeze(-1)).squeeze(-1)
        return gauss + cat

    def entropy(self) -> torch.Tensor:
        gauss = (self.log_std + 0.5 * (_LOG_2PI + 1.0)).sum().expand(len(self.mean))
        logp = F.log_softmax(self.logits, dim=-1)
        cat = -(logp.exp() * logp).sum(dim=-1)
        return gauss + cat


class PolicyNetwork(nn.Module):
    def __init__(self, config: NetworkConfig = NetworkConfig(), seed: int = 0):
        super().__init__()
        self.config = config
        c = config
        self.conv1 = nn.Conv2d(c.stacks, c.conv1_filters, kernel_size=8, stride=4)
        side = (c.grid - 8) // 4 + 1
        self.conv2 = nn.Conv2d(c.conv1_filters, c.conv2_filters, kernel_size=4, stride=2)
        side = (side - 4) // 2 + 1
        self.encoder_out = c.conv2_filters * side * side

        layers = []
        in_size = self.encoder_out + c.vector_size
        for _ in range(c.num_layers):
            layers.append(nn.Linear(in_size, c.hidden_units))
            in_size = c.hidden_units
        self.trunk = nn.ModuleList(layers)

        self.mean_head = nn.Linear(in_size, 2)
        self.log_std = nn.Parameter(torch.full((2,), float(c.log_std_init)))
        self.logit_head = nn.Linear(in_size, 2)
        self.value_head = nn.Linear(in_size, 1)
        self._init_params(seed)

    def _init_params(self, seed: int):
        gen = torch.Generator().manual_seed(seed)
        for module in [self.conv1, self.conv2, *self.trunk]:
            w = module.weight
            flat = _orthogonal(w.shape[0], int(np.prod(w.shape[1:])), math.sqrt(2.0), gen)
            with torch.no_grad():
                w.copy_(flat.reshape(w.shape))
                module.bias.zero_()
        for head, gain in [(self.mean_head, 0.01), (self.logit_head, 0.01),
                           (self.value_head, 1.0)]:
            with torch.no_grad():
                head.weight.copy_(_orthogonal(*head.weight.shape, gain, gen))
                head.bias.zero_()

    def forward(self, obs: torch.Tensor) -> tuple[ActionDistribution, torch.Tensor]:
        """obs: (B, 1264) float tensor -> (distribution, value (B,))."""
        c = self.config
        obs_size = c.vector_size + c.stacks * c.grid * c.grid
        if obs.dim() != 2 or obs.shape[1] != obs_size:
            raise ShapeError(f"expected (B, {obs_size}) observations, got {tuple(obs.shape)}")
        vector = obs[:, : c.vector_size]
        visual = obs[:, c.vector_size:].reshape(-1, c.stacks, c.grid, c.grid)
        h = F.silu(self.conv1(visual))
        h = F.silu(self.conv2(h))
        h = h.reshape(len(obs), -1)
        h = torch.cat([vector, h], dim=1)
        for layer in self.trunk:
            h = F.silu(layer(h))
        dist = ActionDistribution(
            mean=self.mean_head(h),
            log_std=self.log_std,
            logits=self.logit_head(h),
        )
        return dist, self.value_head(h).squeeze(-1)


def obs_batch(observations) -> torch.Tensor:
    """Stack AgentObservations (or flat arrays) into a (B, 1264) tensor."""
    rows = []
    for o in observations:
        flat = o.flat() if hasattr(o, "flat") else np.asarray(o, dtype=np.float32)
        if flat.shape != (OBS_SIZE,):
            raise ShapeError(f"expected flat observation of {OBS_SIZE}, got {flat.shape}")
        rows.append(flat)
    return torch.from_numpy(np.stack(rows))


def to_agent_actions(raw: torch.Tensor, signal: torch.Tensor) -> list[AgentAction]:
    """Clamp raw continuous samples into executable env actions."""
    clamped = raw.clamp(-1.0, 1.0)
    return [
        AgentAction(
            thrust=float(clamped[i, 0]),
            turn=float(clamped[i, 1]),
            signal=bool(int(signal[i]) == 1),
        )
        for i in range(len(clamped))
    ]


def sample_actions(
    net: PolicyNetwork,
    obs: torch.Tensor,
    gen: torch.Generator,
    deterministic: bool = False,
):
    """Rollout helper: actions, raw samples, log-probs, values (no grad)."""
    with torch.no_grad():
        dist, value = net(obs)
        if deterministic:
            raw, signal = dist.deterministic()
        else:
            raw, signal = dist.sample(gen)
        log_prob = dist.log_prob(raw, signal)
    return to_agent_actions(raw, signal), raw, signal, log_prob, value


def save_checkpoint(path, net: PolicyNetwork, step: int = 0, rng_state: bytes | None = None):
    """Versioned header + flat little-endian float32 parameter blob."""
    names = [name for name, _ in net.named_parameters()]
    header = {
        "version": CHECKPOINT_VERSION,
        "step": step,
        "config": asdict(net.config),
        "shapes": [[name, list(p.shape)] for name, p in net.named_parameters()],
        "rng": rng_state.hex() if rng_state is not None else None,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for name in names:
            param = dict(net.named_parameters())[name]
            fh.write(param.detach().cpu().numpy().astype("<f4").tobytes())


def load_checkpoint(path) -> tuple[PolicyNetwork, int, bytes | None]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise CheckpointShapeError(f"{path}: bad checkpoint header") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointShapeError(f"{path}: unsupported version {header.get('version')}")
    net = PolicyNetwork(NetworkConfig(**header["config"]))
    expected = sum(int(np.prod(shape)) for _, shape in header["shapes"])
    data = np.frombuffer(blob, dtype="<f4")
    if len(data) != expected:
        raise CheckpointShapeError(
            f"{path}: blob holds {len(data)} floats, manifest says {expected}"
        )
    params = dict(net.named_parameters())
    offset = 0
    with torch.no_grad():
        for name, shape in header["shapes"]:
            if name not in params or list(params[name].shape) != shape:
                raise CheckpointShapeError(f"{path}: parameter {name} shape mismatch")
            n = int(np.prod(shape))
            params[name].copy_(
                torch.from_numpy(data[offset : offset + n].copy()).reshape(shape)
            )
            offset += n
    rng = bytes.fromhex(header["rng"]) if header.get("rng") else None
    return net, header["step"], rng
