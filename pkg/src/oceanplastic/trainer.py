"""Experiment orchestration: parallel training areas, seed schedules,
rollout collection, PPO updates, checkpoints, and evaluation runs.

Areas are stepped round-robin by a single worker, which keeps runs
bit-deterministic for a given master seed; each area owns its world and
never shares state with the others.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from . import evalkit, policy as policy_mod, replay
from .errors import ConfigError
from .policy import NetworkConfig, PolicyNetwork
from .ppo import PpoConfig, Segment, TrajectoryBuffer, Updater
from .scenario import ScenarioSpec
from .world import PlasticEnv

METRICS_COLUMNS = [
    "step",
    "mean_cum_reward",
    "mean_episode_length",
    "value_loss",
    "entropy",
    "signal_count_per_episode",
]


@dataclass
class ExperimentConfig:
    mode: str = "mac"  # "ma" (no communication) | "mac"
    train_seed_min: int = 0
    train_seed_max: int = 99
    train_y_shift: float = 0.0
    test_seed_min: int = 0
    test_seed_max: int = 9
    test_y_shift: float = 200.0
    num_areas: int = 8
    agents_per_area: int = 3
    area_size: float = 200.0
    pebble_count: int = 400
    comm_range: float = 100.0
    episode_max_steps: int = 5000
    max_steps: int = 20_000_000  # total agent transitions
    summary_freq: int = 10_000
    keep_checkpoints: int = 5
    master_seed: int = 0
    hidden_units: int = 512
    num_layers: int = 2
    log_std_init: float = 0.0
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def __post_init__(self):
        if self.mode not in ("ma", "mac"):
            raise ConfigError(f"mode must be 'ma' or 'mac', got {self.mode!r}")
        if self.train_seed_max < self.train_seed_min:
            raise ConfigError("empty train seed range")
        if self.test_seed_max < self.test_seed_min:
            raise ConfigError("empty test seed range")
        if self.num_areas < 1 or self.agents_per_area < 1:
            raise ConfigError("need at least one area and one agent")

    @property
    def communication(self) -> bool:
        return self.mode == "mac"

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            hidden_units=self.hidden_units,
            num_layers=self.num_layers,
            log_std_init=self.log_std_init,
        )


def seed_schedule(
    seed_min: int,
    seed_max: int,
    y_shift: float,
    rng: np.random.Generator,
    config: ExperimentConfig,
) -> ScenarioSpec:
    """Uniform scenario draw from the configured seed range."""
    seed = int(rng.integers(seed_min, seed_max + 1))
    return ScenarioSpec(
        seed=seed,
        y_shift=y_shift,
        area_size=config.area_size,
        pebble_count=config.pebble_count,
        comm_range=config.comm_range,
        max_steps=config.episode_max_steps,
    )


@dataclass
class EpisodeRecord:
    step: int  # global step counter at episode end
    length: int
    collected_total: int
    collected: list[int]
    cum_reward_mean: float  # per-agent cumulative reward, averaged over agents
    signal_count: int
    cause: str
    scenario_seed: int = 0
    episode_seed: int = 0


@dataclass
class TrainResult:
    checkpoint_path: str
    metrics_path: str
    episodes: list[EpisodeRecord]
    num_updates: int
    final_step: int
    transitions_consumed: int = 0  # drained by updates
    transitions_residue: int = 0  # left in buffer and open partials at exit


class _PartialSegment:
    """Per-agent transition accumulator, cut at dones and horizon bounds."""

    def __init__(self):
        self.obs, self.raw, self.signals = [], [], []
        self.log_probs, self.rewards, self.values, self.dones = [], [], [], []

    def __len__(self):
        return len(self.obs)

    def append(self, obs, raw, signal, log_prob, reward, value, done):
        self.obs.append(obs)
        self.raw.append(raw)
        self.signals.append(signal)
        self.log_probs.append(log_prob)
        self.rewards.append(reward)
        self.values.append(value)
        self.dones.append(done)

    def close(self, bootstrap_value: float) -> Segment:
        seg = Segment(
            obs=np.stack(self.obs),
            raw_actions=np.stack(self.raw),
            signals=np.array(self.signals, dtype=np.int64),
            log_probs=np.array(self.log_probs),
            rewards=np.array(self.rewards),
            values=np.array(self.values),
            dones=np.array(self.dones, dtype=np.float64),
            bootstrap_value=bootstrap_value,
        )
        self.__init__()
        return seg


class _Area:
    def __init__(self, config: ExperimentConfig):
        self.env = PlasticEnv(
            communication=config.communication, num_agents=config.agents_per_area
        )
        self.obs = None
        self.partials = [_PartialSegment() for _ in range(config.agents_per_area)]
        self.cum_rewards = np.zeros(config.agents_per_area)
        self.signal_count = 0

    def begin_episode(self, spec: ScenarioSpec, episode_seed: int):
        self.spec = spec
        self.episode_seed = episode_seed
        self.obs = self.env.reset(spec, episode_seed)
        self.cum_rewards = np.zeros(self.env.num_agents)
        self.signal_count = 0


def run_training(config: ExperimentConfig, out_dir) -> TrainResult:
    os.makedirs(out_dir, exist_ok=True)
    net = PolicyNetwork(config.network_config(), seed=config.master_seed)
    updater = Updater(net, config.ppo)
    buffer = TrajectoryBuffer()

    master_rng = np.random.default_rng(config.master_seed)
    action_gen = torch.Generator().manual_seed(config.master_seed)

    areas = [_Area(config) for _ in range(config.num_areas)]
    for area in areas:
        spec = seed_schedule(
            config.train_seed_min, config.train_seed_max, config.train_y_shift,
            master_rng, config,
        )
        area.begin_episode(spec, int(master_rng.integers(2**31)))

    metrics_path = os.path.join(out_dir, "metrics.csv")
    metrics_fh = open(metrics_path, "w", newline="")
    metrics = csv.writer(metrics_fh)
    metrics.writerow(METRICS_COLUMNS)

    episodes: list[EpisodeRecord] = []
    window_start = 0  # index into episodes for the current summary window
    last_stats = None
    steps = 0
    num_updates = 0
    consumed = 0
    next_summary = config.summary_freq
    checkpoints: list[str] = []

    def write_checkpoint(tag):
        path = os.path.join(out_dir, f"checkpoint_{tag}.bin")
        policy_mod.save_checkpoint(
            path, net, step=steps, rng_state=bytes(action_gen.get_state().numpy())
        )
        return path

    def bootstrap_values(area: _Area) -> np.ndarray:
        with torch.no_grad():
            _, values = net(policy_mod.obs_batch(area.obs))
        return values.numpy()

    while steps < config.max_steps:
        for area in areas:
            obs_t = policy_mod.obs_batch(area.obs)
            actions, raw, signal, log_prob, values = policy_mod.sample_actions(
                net, obs_t, action_gen
            )
            new_obs, outcome = area.env.step(actions)
            flat_obs = obs_t.numpy()
            for i in range(config.agents_per_area):
                reward = float(outcome.local_rewards[i]) + outcome.global_reward
                area.partials[i].append(
                    flat_obs[i],
                    raw[i].numpy(),
                    int(signal[i]),
                    float(log_prob[i]),
                    reward,
                    float(values[i]),
                    1.0 if outcome.done else 0.0,
                )
                area.cum_rewards[i] += reward
            # Without a communication channel no signal is ever transmitted,
            # so the metric is defined as zero in "ma" mode.
            if config.communication:
                area.signal_count += sum(1 for a in actions if a.signal)
            area.obs = new_obs
            steps += config.agents_per_area

            if outcome.done:
                w = area.env.world
                episodes.append(
                    EpisodeRecord(
                        step=steps,
                        length=w.step,
                        collected_total=sum(v.collected_count for v in w.vessels),
                        collected=[v.collected_count for v in w.vessels],
                        cum_reward_mean=float(area.cum_rewards.mean()),
                        signal_count=area.signal_count,
                        cause=w.cause,
                        scenario_seed=area.spec.seed,
                        episode_seed=area.episode_seed,
                    )
                )
                for partial in area.partials:
                    buffer.add(partial.close(bootstrap_value=0.0))
                spec = seed_schedule(
                    config.train_seed_min, config.train_seed_max,
                    config.train_y_shift, master_rng, config,
                )
                area.begin_episode(spec, int(master_rng.integers(2**31)))
            elif len(area.partials[0]) >= config.ppo.time_horizon:
                boots = bootstrap_values(area)
                for i, partial in enumerate(area.partials):
                    buffer.add(partial.close(bootstrap_value=float(boots[i])))

        # Transitions pending an update include those in still-open segments.
        if steps - consumed >= config.ppo.buffer_size:
            for area in areas:
                if len(area.partials[0]) > 0:
                    boots = bootstrap_values(area)
                    for i, partial in enumerate(area.partials):
                        buffer.add(partial.close(bootstrap_value=float(boots[i])))
            progress = min(1.0, steps / config.max_steps)
            last_stats = updater.update(
                buffer, progress, shuffle_seed=int(master_rng.integers(2**31))
            )
            consumed += len(buffer)
            buffer.clear()
            num_updates += 1

        if steps >= next_summary:
            window = episodes[window_start:]
            metrics.writerow(
                [
                    steps,
                    _mean_or_nan([e.cum_reward_mean for e in window]),
                    _mean_or_nan([e.length for e in window]),
                    last_stats.value_loss if last_stats else math.nan,
                    last_stats.entropy if last_stats else math.nan,
                    _mean_or_nan([e.signal_count for e in window]),
                ]
            )
            metrics_fh.flush()
            window_start = len(episodes)
            checkpoints.append(write_checkpoint(steps))
            while len(checkpoints) > config.keep_checkpoints:
                os.remove(checkpoints.pop(0))
            next_summary += config.summary_freq

    metrics_fh.close()
    final_path = write_checkpoint("final")
    residue = len(buffer) + sum(
        len(p) for area in areas for p in area.partials
    )
    return TrainResult(
        checkpoint_path=final_path,
        metrics_path=metrics_path,
        episodes=episodes,
        num_updates=num_updates,
        final_step=steps,
        transitions_consumed=consumed,
        transitions_residue=residue,
    )


def _mean_or_nan(values):
    return float(np.mean(values)) if values else math.nan


@dataclass
class EvalRunResult:
    log_paths: list[str]
    report: "evalkit.EvalReport"
    steps: int
    episodes: int


def run_eval(
    checkpoint_path,
    config: ExperimentConfig,
    out_dir,
    num_steps: int = 1_000_000,
    deterministic_actions: bool = False,
    eval_seed: int = 1000,
) -> EvalRunResult:
    """Roll test-seed episodes with a frozen policy and write replay logs."""
    net, _, _ = policy_mod.load_checkpoint(checkpoint_path)
    expected = config.network_config()
    if net.config != expected:
        # Shape compatibility only; differing hidden sizes cannot be evaluated.
        from .errors import CheckpointShapeError

        raise CheckpointShapeError(
            f"checkpoint network {net.config} does not match config {expected}"
        )
    return rollout_episodes(
        net,
        config,
        out_dir,
        num_steps=num_steps,
        deterministic_actions=deterministic_actions,
        eval_seed=eval_seed,
    )


def rollout_episodes(
    net: PolicyNetwork,
    config: ExperimentConfig,
    out_dir,
    num_steps: int = 1_000_000,
    deterministic_actions: bool = False,
    eval_seed: int = 1000,
    test_seeds: bool = True,
) -> EvalRunResult:
    """Policy rollouts without learning; one replay log per episode."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng([config.master_seed, eval_seed])
    gen = torch.Generator().manual_seed(eval_seed)
    env = PlasticEnv(
        communication=config.communication, num_agents=config.agents_per_area
    )
    seed_min = config.test_seed_min if test_seeds else config.train_seed_min
    seed_max = config.test_seed_max if test_seeds else config.train_seed_max
    y_shift = config.test_y_shift if test_seeds else config.train_y_shift

    log_paths = []
    steps = 0
    episode = 0
    while steps < num_steps:
        spec = seed_schedule(seed_min, seed_max, y_shift, rng, config)
        path = os.path.join(out_dir, f"episode_{episode:05d}.jsonl")
        writer = replay.ReplayWriter(path)
        env.writer = writer
        obs = env.reset(spec, int(rng.integers(2**31)))
        done = False
        while not done and steps < num_steps:
            actions, _, _, _, _ = policy_mod.sample_actions(
                net, policy_mod.obs_batch(obs), gen,
                deterministic=deterministic_actions,
            )
            obs, outcome = env.step(actions)
            steps += config.agents_per_area
            done = outcome.done
        if not done:
            writer.write_end(env.world)  # budget exhausted mid-episode
        writer.close()
        env.writer = None
        log_paths.append(path)
        episode += 1
    report = evalkit.build_report([evalkit.load_log(p) for p in log_paths])
    return EvalRunResult(
        log_paths=log_paths, report=report, steps=steps, episodes=episode
    )


def smoke_config(
    mode: str = "mac", master_seed: int = 0, max_steps: int = 200_000
) -> ExperimentConfig:
    """Desk-scale training profile: 50 m area, 60 pebbles, fast learning rate."""
    return ExperimentConfig(
        mode=mode,
        area_size=50.0,
        pebble_count=60,
        comm_range=25.0,
        episode_max_steps=150,
        num_areas=4,
        max_steps=max_steps,
        summary_freq=20_000,
        master_seed=master_seed,
        hidden_units=64,
        num_layers=2,
        ppo=PpoConfig(
            learning_rate=3e-4,
            buffer_size=4096,
            batch_size=512,
            time_horizon=128,
            num_epoch=8,
            epsilon=0.2,
            max_steps=max_steps,
        ),
    )


# Config-file keys: the published hyperparameter spellings, plus corrected
# aliases, plus artifact-level extras.
_CONFIG_KEYS = {
    "batch_size": ("ppo", "batch_size", int),
    "buffer_size": ("ppo", "buffer_size", int),
    "learning_rate": ("ppo", "learning_rate", float),
    "beta": ("ppo", "beta", float),
    "epsilon": ("ppo", "epsilon", float),
    "lambd": ("ppo", "lambd", float),
    "lambda": ("ppo", "lambd", float),
    "num_epoch": ("ppo", "num_epoch", int),
    "learning_rate_schedule": ("ppo", "learning_rate_schedule", str),
    "gamma": ("ppo", "gamma", float),
    "time_horizon": ("ppo", "time_horizon", int),
    "normalize": ("ppo", "normalize_advantages", None),  # bool, see below
    "hidden_units": ("top", "hidden_units", int),
    "num_layers": ("top", "num_layers", int),
    "log_std_init": ("top", "log_std_init", float),
    "keep_checkpoints": ("top", "keep_checkpoints", int),
    "summary_freq": ("top", "summary_freq", int),
    "max_steps": ("both_max_steps", None, int),
    "mode": ("top", "mode", str),
    "num_areas": ("top", "num_areas", int),
    "agents_per_area": ("top", "agents_per_area", int),
    "area_size": ("top", "area_size", float),
    "pebble_count": ("top", "pebble_count", int),
    "comm_range": ("top", "comm_range", float),
    "episode_max_steps": ("top", "episode_max_steps", int),
    "master_seed": ("top", "master_seed", int),
    "train_seed_min": ("top", "train_seed_min", int),
    "train_seed_max": ("top", "train_seed_max", int),
    "test_seed_min": ("top", "test_seed_min", int),
    "test_seed_max": ("top", "test_seed_max", int),
    "test_y_shift": ("top", "test_y_shift", float),
}

# Accepted but informational-only keys (values validated where meaningful).
_PASSTHROUGH_KEYS = {"vis_encode_type", "strength", "trainer_type"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> ExperimentConfig:
    """Flat `key = value` (or `key: value`) config into an ExperimentConfig."""
    top: dict = {}
    ppo_kwargs: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = (part.strip() for part in line.split(sep, 1))
                break
        else:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw_line!r}")

        if key in ("communiation", "communication"):
            top["mode"] = "mac" if _parse_bool(value) else "ma"
            continue
        if key in ("scenario_noise_z_shift_factor", "scenario_noise_y_shift_factor"):
            # 0 = training window, 1 = held-out window shifted by 200 m.
            top["train_y_shift"] = 200.0 * float(value)
            continue
        if key in _PASSTHROUGH_KEYS:
            if key == "vis_encode_type" and value != "simple":
                raise ConfigError(f"unsupported vis_encode_type {value!r}")
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        target, attr, cast = _CONFIG_KEYS[key]
        if key == "normalize":
            ppo_kwargs["normalize_advantages"] = _parse_bool(value)
        elif target == "ppo":
            ppo_kwargs[attr] = cast(value)
        elif target == "both_max_steps":
            top["max_steps"] = int(float(value))
            ppo_kwargs["max_steps"] = int(float(value))
        else:
            top[attr] = cast(value)
    try:
        ppo = PpoConfig(**ppo_kwargs)
        return ExperimentConfig(ppo=ppo, **top)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


_PPO_FIELDS = set(PpoConfig.__dataclass_fields__)
_TOP_FIELDS = set(ExperimentConfig.__dataclass_fields__) - {"ppo"}


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Override config values; ``max_steps`` applies to trainer and PPO."""
    ppo_kwargs: dict = {}
    top_kwargs: dict = {}
    for key, value in overrides.items():
        known = False
        if key in _PPO_FIELDS:
            field_type = PpoConfig.__dataclass_fields__[key].type
            ppo_kwargs[key] = _coerce(value, field_type)
            known = True
        if key in _TOP_FIELDS:
            field_type = ExperimentConfig.__dataclass_fields__[key].type
            top_kwargs[key] = _coerce(value, field_type)
            known = True
        if not known:
            raise ConfigError(f"unknown override {key!r}")
    if ppo_kwargs:
        top_kwargs["ppo"] = replace(config.ppo, **ppo_kwargs)
    try:
        return replace(config, **top_kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _coerce(value, field_type: str):
    if isinstance(value, str):
        if field_type == "int":
            return int(float(value))
        if field_type == "float":
            return float(value)
        if field_type == "bool":
            return value.strip().lower() in ("true", "1", "yes")
    return value


def load_config_overrides(
    config: ExperimentConfig, overrides: dict | None
) -> ExperimentConfig:
    return apply_overrides(config, overrides) if overrides else config


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            config = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return load_config_overrides(config, overrides)
