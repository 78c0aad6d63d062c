"""Post-hoc analysis of replay logs: episode metrics, signal-response
classification, nearby-garbage statistics, and path plots.

Everything works from logs alone, so any report can be recomputed
without the simulation that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyLogError, WindowOverrunError
from .replay import ReplayLog, read_log

load_log = read_log

DEFAULT_WINDOW = 20  # steps between signal and response measurement
DEFAULT_DEAD_BAND = 1.0  # meters of distance change treated as neutral
DEFAULT_GARBAGE_RADIUS = 25.0

FOLLOWED = "followed"
MOVED_AWAY = "moved_away"
NEUTRAL = "neutral"

_PATH_COLORS = ["#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#8c564b"]


@dataclass(frozen=True)
class CommEvent:
    """One observed signal: the observer's nearest neighbour raised
    ``signal`` while inside communication range."""

    step: int
    signaler: int
    observer: int
    signal: bool


def extract_comm_events(log: ReplayLog) -> list[CommEvent]:
    """All (step, observer) pairs where a neighbour's signal was visible."""
    events = []
    for t in range(log.num_steps):
        positions = log.positions[t]
        for observer in range(log.num_agents):
            dists = np.linalg.norm(positions - positions[observer], axis=1)
            dists[observer] = np.inf
            nn = int(np.argmin(dists))
            if dists[nn] <= log.comm_range:
                events.append(
                    CommEvent(
                        step=t,
                        signaler=nn,
                        observer=observer,
                        signal=bool(log.signals[t, nn]),
                    )
                )
    return events


def classify_response(
    log: ReplayLog,
    event: CommEvent,
    window: int = DEFAULT_WINDOW,
    dead_band: float = DEFAULT_DEAD_BAND,
) -> str:
    """Did the observer close in on the signaler over the window, back off,
    or stay put (within the dead band)?"""
    end = event.step + window
    if end >= log.num_steps:
        raise WindowOverrunError(
            f"event at step {event.step} needs step {end}, episode has {log.num_steps}"
        )
    before = np.linalg.norm(
        log.positions[event.step, event.observer]
        - log.positions[event.step, event.signaler]
    )
    after = np.linalg.norm(
        log.positions[end, event.observer] - log.positions[end, event.signaler]
    )
    if after < before - dead_band:
        return FOLLOWED
    if after > before + dead_band:
        return MOVED_AWAY
    return NEUTRAL


def nearby_garbage_count(
    log: ReplayLog, agent: int, step: int, radius: float = DEFAULT_GARBAGE_RADIUS
) -> int:
    """Active pebbles within ``radius`` of the agent at the given step."""
    if step < 0 or step >= log.num_steps:
        raise ValueError(f"step {step} outside episode of {log.num_steps} steps")
    collected_at = log.pebble_collection_step()
    active = (collected_at == -1) | (collected_at >= step)
    if not active.any():
        return 0
    dists = np.linalg.norm(log.pebbles[active] - log.positions[step, agent], axis=1)
    return int((dists < radius).sum())


@dataclass
class EpisodeMetrics:
    cum_reward: float  # per-agent cumulative reward, averaged over agents
    episode_length: int
    local_reward: float  # team sum of per-pebble rewards
    global_reward: float  # accumulated global bonus (identical per agent)
    signal_count: int  # signal raises (true) summed over agents
    followed: int
    moved_away: int
    neutral: int
    skipped: int
    garbage_at_signal_1: float  # nan when no such event
    garbage_at_signal_0: float


def episode_metrics(
    log: ReplayLog,
    window: int = DEFAULT_WINDOW,
    dead_band: float = DEFAULT_DEAD_BAND,
    garbage_radius: float = DEFAULT_GARBAGE_RADIUS,
) -> EpisodeMetrics:
    local_team = float(log.local_rewards.sum())
    global_total = float(log.global_rewards.sum())
    per_agent_cum = log.local_rewards.sum(axis=0) + global_total
    signal_count = int(log.signals.sum())

    followed = moved_away = neutral = skipped = 0
    garbage_1: list[int] = []
    garbage_0: list[int] = []
    if log.mode == "mac":
        for event in extract_comm_events(log):
            garbage = nearby_garbage_count(
                log, event.signaler, event.step, garbage_radius
            )
            if event.signal:
                garbage_1.append(garbage)
                try:
                    outcome = classify_response(log, event, window, dead_band)
                except WindowOverrunError:
                    skipped += 1
                    continue
                if outcome == FOLLOWED:
                    followed += 1
                elif outcome == MOVED_AWAY:
                    moved_away += 1
                else:
                    neutral += 1
            else:
                garbage_0.append(garbage)

    return EpisodeMetrics(
        cum_reward=float(per_agent_cum.mean()) if log.num_agents else 0.0,
        episode_length=log.num_steps,
        local_reward=local_team,
        global_reward=global_total,
        signal_count=signal_count,
        followed=followed,
        moved_away=moved_away,
        neutral=neutral,
        skipped=skipped,
        garbage_at_signal_1=float(np.mean(garbage_1)) if garbage_1 else float("nan"),
        garbage_at_signal_0=float(np.mean(garbage_0)) if garbage_0 else float("nan"),
    )


REPORT_METRICS = [
    "cum_reward",
    "episode_length",
    "local_reward",
    "global_reward",
    "signal_count",
    "followed",
    "moved_away",
    "garbage_at_signal_1",
    "garbage_at_signal_0",
]


@dataclass
class EvalReport:
    """Cross-run mean and sample std for every reported metric.

    Conventions (also printed in the text header): local reward is the
    team sum of +1 pickups, global reward the accumulated shared bonus,
    cumulative reward the per-agent total averaged over agents.
    """

    mode: str
    num_runs: int
    window: int
    dead_band: float
    means: dict[str, float]
    stds: dict[str, float]

    def to_csv(self) -> str:
        lines = ["metric,mean,std"]
        for name in REPORT_METRICS:
            lines.append(f"{name},{self.means[name]:.6f},{self.stds[name]:.6f}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [
            f"mode={self.mode} runs={self.num_runs} "
            f"response_window={self.window} dead_band={self.dead_band}m",
            "cumulative reward = per-agent total averaged over agents; "
            "local reward = team sum of pickups; "
            "global reward = accumulated shared bonus",
        ]
        for name in REPORT_METRICS:
            lines.append(
                f"  {name:>22}: {self.means[name]:10.2f} (±{self.stds[name]:.2f})"
            )
        return "\n".join(lines) + "\n"


def build_report(
    logs,
    window: int = DEFAULT_WINDOW,
    dead_band: float = DEFAULT_DEAD_BAND,
) -> EvalReport:
    """Aggregate replay logs into a report.

    ``logs`` is either a flat list of ReplayLog (each treated as one run)
    or a list of lists grouping episodes into runs. Per-run values are
    means over the run's episodes; report values are cross-run mean and
    sample std (n-1 denominator, 0 for a single run).
    """
    if not logs:
        raise EmptyLogError("no replay logs to report on")
    if isinstance(logs[0], ReplayLog):
        runs = [[log] for log in logs]
    else:
        runs = logs
    if not all(runs):
        raise EmptyLogError("a run group contains no logs")

    mode = runs[0][0].mode
    per_run: dict[str, list[float]] = {name: [] for name in REPORT_METRICS}
    for run in runs:
        metrics = [episode_metrics(log, window, dead_band) for log in run]
        for name in REPORT_METRICS:
            values = [getattr(m, name) for m in metrics]
            values = [v for v in values if not np.isnan(v)]
            per_run[name].append(float(np.mean(values)) if values else 0.0)

    means = {name: float(np.mean(vals)) for name, vals in per_run.items()}
    stds = {
        name: float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        for name, vals in per_run.items()
    }
    return EvalReport(
        mode=mode,
        num_runs=len(runs),
        window=window,
        dead_band=dead_band,
        means=means,
        stds=stds,
    )


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def render_paths(log: ReplayLog, out_path) -> None:
    """Deterministic SVG: pebble layout, one colored polyline per vessel,
    markers on signal-1 raise points and on final positions."""
    area = log.area_size
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(area)} {_fmt(area)}" '
        f'width="600" height="600">',
        f'<rect x="0" y="0" width="{_fmt(area)}" height="{_fmt(area)}" fill="#eef6fb"/>',
    ]
    collected_at = log.pebble_collection_step()
    for i, (x, y) in enumerate(log.pebbles):
        fill = "#b0b0b0" if collected_at[i] >= 0 else "#606060"
        parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(area - y)}" r="0.5" fill="{fill}"/>'
        )
    for agent in range(log.num_agents):
        color = _PATH_COLORS[agent % len(_PATH_COLORS)]
        if log.num_steps > 0:
            points = " ".join(
                f"{_fmt(log.positions[t, agent, 0])},{_fmt(area - log.positions[t, agent, 1])}"
                for t in range(log.num_steps)
            )
            parts.append(
                f'<polyline points="{points}" fill="none" stroke="{color}" '
                'stroke-width="0.4"/>'
            )
            for t in range(log.num_steps):
                if log.signals[t, agent]:
                    x, y = log.positions[t, agent]
                    parts.append(
                        f'<circle cx="{_fmt(x)}" cy="{_fmt(area - y)}" r="0.8" '
                        f'fill="none" stroke="{color}" stroke-width="0.3"/>'
                    )
            x, y = log.positions[-1, agent]
            parts.append(
                f'<circle cx="{_fmt(x)}" cy="{_fmt(area - y)}" r="1.2" fill="{color}"/>'
            )
    parts.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
