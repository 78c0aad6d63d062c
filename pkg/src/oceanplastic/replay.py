"""Replay logs: line-delimited JSON records of every episode step.

Record order per file: one ``header`` record (scenario, pebble layout,
mode), one ``step`` record per environment step, one ``end`` record.
Field order inside records is fixed so logs diff cleanly.

The log carries enough to recompute every evaluation metric with no
access to the live simulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


FORMAT_VERSION = 1


class ReplayWriter:
    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w")

    def write_header(self, world, communication: bool):
        spec = world.spec
        record = {
            "type": "header",
            "version": FORMAT_VERSION,
            "mode": "mac" if communication else "ma",
            "seed": spec.seed,
            "y_shift": spec.y_shift,
            "area_size": spec.area_size,
            "comm_range": spec.comm_range,
            "max_steps": spec.max_steps,
            "num_agents": world.num_agents,
            "pebbles": [[round(x, 6), round(y, 6)] for x, y in world.pebbles],
        }
        self._fh.write(json.dumps(record) + "\n")

    def write_step(self, world, actions, outcome):
        record = {
            "type": "step",
            "step": world.step,
            "vessels": [
                [
                    round(float(v.position[0]), 6),
                    round(float(v.position[1]), 6),
                    round(float(v.heading[0]), 6),
                    round(float(v.heading[1]), 6),
                ]
                for v in world.vessels
            ],
            "actions": [
                [round(float(a.thrust), 6), round(float(a.turn), 6), int(a.signal)]
                for a in actions
            ],
            "signals": [int(v.raised_signal) for v in world.vessels],
            "local": [float(r) for r in outcome.local_rewards],
            "global": float(outcome.global_reward),
            "events": [[int(a), int(p)] for a, p in outcome.collected_events],
        }
        self._fh.write(json.dumps(record) + "\n")

    def write_end(self, world):
        record = {
            "type": "end",
            "cause": world.cause,
            "steps": world.step,
            "collected": [v.collected_count for v in world.vessels],
        }
        self._fh.write(json.dumps(record) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class ReplayLog:
    """Parsed episode log with step data as arrays."""

    mode: str
    seed: int
    y_shift: float
    area_size: float
    comm_range: float
    num_agents: int
    pebbles: np.ndarray  # (P, 2)
    positions: np.ndarray  # (T, A, 2)
    headings: np.ndarray  # (T, A, 2)
    actions: np.ndarray  # (T, A, 3) thrust, turn, signal
    signals: np.ndarray  # (T, A) raised signal, 0/1
    local_rewards: np.ndarray  # (T, A)
    global_rewards: np.ndarray  # (T,)
    events: list[list[tuple[int, int]]]  # per step (agent, pebble)
    cause: str = "running"
    collected: list[int] = field(default_factory=list)

    @property
    def num_steps(self) -> int:
        return len(self.positions)

    def pebble_collection_step(self) -> np.ndarray:
        """Step at which each pebble was collected; -1 if never."""
        out = np.full(len(self.pebbles), -1, dtype=np.int64)
        for t, step_events in enumerate(self.events):
            for _agent, pebble in step_events:
                out[pebble] = t
        return out


def read_log(path) -> ReplayLog:
    positions, headings, actions, signals = [], [], [], []
    local, global_, events = [], [], []
    header = None
    cause = "running"
    collected: list[int] = []
    with open(path) as fh:
        for line in fh:
            record = json.loads(line)
            if record["type"] == "header":
                header = record
            elif record["type"] == "step":
                vessels = np.array(record["vessels"])
                positions.append(vessels[:, :2])
                headings.append(vessels[:, 2:])
                actions.append(np.array(record["actions"], dtype=np.float64))
                signals.append(np.array(record["signals"], dtype=np.int64))
                local.append(np.array(record["local"]))
                global_.append(record["global"])
                events.append([(a, p) for a, p in record["events"]])
            elif record["type"] == "end":
                cause = record["cause"]
                collected = record["collected"]
    if header is None:
        raise ValueError(f"{path}: no header record")
    num_agents = header["num_agents"]
    empty = np.zeros((0, num_agents, 2))
    return ReplayLog(
        mode=header["mode"],
        seed=header["seed"],
        y_shift=header["y_shift"],
        area_size=header["area_size"],
        comm_range=header["comm_range"],
        num_agents=num_agents,
        pebbles=np.array(header["pebbles"]).reshape(-1, 2),
        positions=np.array(positions) if positions else empty,
        headings=np.array(headings) if headings else empty,
        actions=np.array(actions) if actions else np.zeros((0, num_agents, 3)),
        signals=np.array(signals) if signals else np.zeros((0, num_agents), int),
        local_rewards=np.array(local) if local else np.zeros((0, num_agents)),
        global_rewards=np.array(global_) if global_ else np.zeros(0),
        events=events,
        cause=cause,
        collected=collected,
    )
