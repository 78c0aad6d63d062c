"""GAE advantage estimation and the clipped-surrogate policy update.

The trainer fills a :class:`TrajectoryBuffer` with fixed-horizon
segments; :class:`Updater` drains it with several epochs of shuffled
minibatches, maximizing the clipped probability-ratio objective while
regressing the value head on empirical returns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import BufferNotFullError, LengthMismatchError
from .policy import PolicyNetwork


@dataclass
class PpoConfig:
    gamma: float = 0.99
    lambd: float = 0.95
    epsilon: float = 0.1
    beta: float = 0.01
    learning_rate: float = 1e-5
    learning_rate_schedule: str = "linear"  # "linear" | "constant"
    num_epoch: int = 3
    batch_size: int = 512
    buffer_size: int = 10240
    time_horizon: int = 128
    max_steps: int = 20_000_000
    normalize_advantages: bool = True
    value_loss_coef: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")
        if not (0.0 <= self.lambd <= 1.0):
            raise ValueError("lambd must be in [0, 1]")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.batch_size > self.buffer_size:
            raise ValueError("batch_size must not exceed buffer_size")


def compute_gae(rewards, values, dones, bootstrap_value, gamma, lambd):
    """Exponentially weighted TD-residual advantages and returns.

    ``bootstrap_value`` is the value of the state after the final
    transition (0 when that transition was terminal).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if not (len(rewards) == len(values) == len(dones)):
        raise LengthMismatchError(
            f"lengths differ: {len(rewards)}, {len(values)}, {len(dones)}"
        )
    advantages = np.zeros_like(rewards)
    next_value = float(bootstrap_value)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        acc = delta + gamma * lambd * nonterminal * acc
        advantages[t] = acc
        next_value = values[t]
    return advantages, advantages + values


def ppo_clip_objective(log_prob_new, log_prob_old, advantage, epsilon):
    """Per-sample clipped surrogate: min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    log_prob_new = torch.as_tensor(log_prob_new)
    log_prob_old = torch.as_tensor(log_prob_old)
    advantage = torch.as_tensor(advantage)
    ratio = torch.exp(log_prob_new - log_prob_old)
    clipped = torch.clamp(ratio, 1.0 - epsilon, 1.0 + epsilon)
    return torch.minimum(ratio * advantage, clipped * advantage)


def value_loss(values_new, returns):
    """Mean squared error between predicted values and empirical returns."""
    values_new = torch.as_tensor(values_new)
    returns = torch.as_tensor(returns)
    if values_new.shape != returns.shape:
        raise LengthMismatchError(
            f"shape mismatch: {tuple(values_new.shape)} vs {tuple(returns.shape)}"
        )
    return ((values_new - returns) ** 2).mean()


@dataclass
class Segment:
    """One contiguous run of transitions for a single agent.

    Cut at episode ends and at time-horizon boundaries; non-terminal cuts
    carry the value estimate of the next state as bootstrap.
    """

    obs: np.ndarray  # (T, obs_size) float32
    raw_actions: np.ndarray  # (T, 2) pre-clamp continuous samples
    signals: np.ndarray  # (T,) int
    log_probs: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,)
    values: np.ndarray  # (T,)
    dones: np.ndarray  # (T,)
    bootstrap_value: float

    def __len__(self):
        return len(self.obs)


class TrajectoryBuffer:
    def __init__(self):
        self.segments: list[Segment] = []

    def add(self, segment: Segment):
        if len(segment) > 0:
            self.segments.append(segment)

    def __len__(self):
        return sum(len(s) for s in self.segments)

    def clear(self):
        self.segments = []


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    mean_ratio: float
    first_minibatch_ratio: float
    num_minibatches: int
    learning_rate: float


class Updater:
    """Owns the network and Adam state across updates."""

    def __init__(self, net: PolicyNetwork, config: PpoConfig):
        self.net = net
        self.config = config
        self.optimizer = torch.optim.Adam(
            net.parameters(),
            lr=config.learning_rate,
            betas=(config.adam_beta1, config.adam_beta2),
            eps=config.adam_eps,
        )

    def update(
        self, buffer: TrajectoryBuffer, progress: float, shuffle_seed: int = 0
    ) -> UpdateStats:
        cfg = self.config
        if len(buffer) < cfg.buffer_size:
            raise BufferNotFullError(
                f"buffer holds {len(buffer)} of {cfg.buffer_size} transitions"
            )

        obs_parts, raw_parts, sig_parts, adv_parts, ret_parts = [], [], [], [], []
        for seg in buffer.segments:
            adv, ret = compute_gae(
                seg.rewards, seg.values, seg.dones, seg.bootstrap_value,
                cfg.gamma, cfg.lambd,
            )
            obs_parts.append(seg.obs)
            raw_parts.append(seg.raw_actions)
            sig_parts.append(seg.signals)
            adv_parts.append(adv)
            ret_parts.append(ret)

        obs = torch.from_numpy(np.concatenate(obs_parts)).float()
        raw = torch.from_numpy(np.concatenate(raw_parts)).float()
        signals = torch.from_numpy(np.concatenate(sig_parts)).long()
        advantages = np.concatenate(adv_parts)
        returns = torch.from_numpy(np.concatenate(ret_parts)).float()

        if cfg.normalize_advantages:
            advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
        advantages = torch.from_numpy(advantages).float()

        if cfg.learning_rate_schedule == "linear":
            lr = cfg.learning_rate * max(0.0, 1.0 - progress)
        else:
            lr = cfg.learning_rate
        for group in self.optimizer.param_groups:
            group["lr"] = lr

        n = len(obs)
        rng = np.random.default_rng(shuffle_seed)
        epoch_orders = [rng.permutation(n) for _ in range(cfg.num_epoch)]

        # Old log-probs are recomputed with the pre-update parameters using
        # the first epoch's minibatch partition, so ratios on those
        # minibatches start at exactly 1 regardless of float batching noise.
        log_prob_old = torch.empty(n)
        with torch.no_grad():
            for start in range(0, n, cfg.batch_size):
                idx = epoch_orders[0][start : start + cfg.batch_size]
                dist, _ = self.net(obs[idx])
                log_prob_old[idx] = dist.log_prob(raw[idx], signals[idx])

        policy_losses, value_losses, entropies, ratios = [], [], [], []
        first_ratio = None
        for epoch in range(cfg.num_epoch):
            order = epoch_orders[epoch]
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                dist, values_new = self.net(obs[idx])
                log_prob_new = dist.log_prob(raw[idx], signals[idx])
                surrogate = ppo_clip_objective(
                    log_prob_new, log_prob_old[idx], advantages[idx], cfg.epsilon
                ).mean()
                vloss = value_loss(values_new, returns[idx])
                entropy = dist.entropy().mean()
                loss = -surrogate + cfg.value_loss_coef * vloss - cfg.beta * entropy

                self.optimizer.zero_grad()
                loss.backward()
                self.optimizer.step()

                with torch.no_grad():
                    ratio = torch.exp(log_prob_new - log_prob_old[idx]).mean()
                if first_ratio is None:
                    first_ratio = float(ratio)
                policy_losses.append(-float(surrogate.detach()))
                value_losses.append(float(vloss.detach()))
                entropies.append(float(entropy.detach()))
                ratios.append(float(ratio))

        return UpdateStats(
            policy_loss=float(np.mean(policy_losses)),
            value_loss=float(np.mean(value_losses)),
            entropy=float(np.mean(entropies)),
            mean_ratio=float(np.mean(ratios)),
            first_minibatch_ratio=first_ratio,
            num_minibatches=len(ratios),
            learning_rate=lr,
        )
