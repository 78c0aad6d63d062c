"""Episode dynamics: vessel physics, pebble collection, rewards,
termination, and observation assembly.

A :class:`WorldState` is the single source of truth for one episode in
one training area. ``PlasticEnv`` wraps it with frame stacking and
optional replay logging so the trainer can drive it like a step/reset
environment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import commnet, scenario
from .errors import SteppedTerminatedError
from .scenario import ScenarioSpec

# Physics constants. The vessel is a unit-mass disc integrated with
# semi-implicit Euler and linear drag; thrust and turn commands are
# scaled by the movement/rotation speed factors.
DT = 0.1  # seconds per environment step
THRUST_SCALE = 2.0  # force units per unit thrust command
TURN_SCALE = math.radians(300.0)  # torque per unit turn command (rad/s^2)
DRAG = 0.5  # linear and angular drag coefficient
VESSEL_RADIUS = 2.0  # meters; overlap of two discs is a crash
COLLECT_RADIUS = 2.0  # meters

# Visual observation geometry: 25x25 grid of 2 m cells centred on the vessel.
GRID_CELLS = 25
GRID_CELL_SIZE = 2.0
GRID_HALF = GRID_CELLS * GRID_CELL_SIZE / 2.0

VECTOR_FRAME_SIZE = 7
VISUAL_FRAME_SIZE = GRID_CELLS * GRID_CELLS
OBS_SIZE = 2 * (VECTOR_FRAME_SIZE + VISUAL_FRAME_SIZE)  # 1264


@dataclass
class VesselState:
    position: np.ndarray  # (2,) meters
    heading: np.ndarray  # (2,) unit vector
    linear_velocity: np.ndarray  # (2,) m/s
    angular_velocity: float = 0.0  # rad/s
    collected_count: int = 0
    raised_signal: bool = False


@dataclass
class AgentAction:
    thrust: float
    turn: float
    signal: bool

    def clamped(self) -> "AgentAction":
        return AgentAction(
            thrust=float(np.clip(self.thrust, -1.0, 1.0)),
            turn=float(np.clip(self.turn, -1.0, 1.0)),
            signal=bool(self.signal),
        )


@dataclass
class AgentObservation:
    """Stacked observation: 2 x 7 vector values and 2 x 625 grid cells."""

    vector: np.ndarray  # (14,)
    visual: np.ndarray  # (1250,) binary

    def flat(self) -> np.ndarray:
        return np.concatenate([self.vector, self.visual]).astype(np.float32)


@dataclass
class StepOutcome:
    local_rewards: np.ndarray  # (num_agents,)
    global_reward: float  # identical for every agent
    collected_events: list[tuple[int, int]]  # (agent index, pebble index)
    done: bool
    cause: str  # "running" | "boundary" | "collision" | "step_cap"


@dataclass
class WorldState:
    spec: ScenarioSpec
    vessels: list[VesselState]
    pebbles: np.ndarray  # (P, 2) meters
    pebble_active: np.ndarray  # (P,) bool
    step: int = 0
    terminated: bool = False
    cause: str = "running"

    @property
    def num_agents(self) -> int:
        return len(self.vessels)

    def positions(self) -> np.ndarray:
        return np.array([v.position for v in self.vessels])

    def signals(self) -> list[bool]:
        return [v.raised_signal for v in self.vessels]

    def active_pebbles(self) -> np.ndarray:
        return self.pebbles[self.pebble_active]


def reset(
    spec: ScenarioSpec,
    episode_seed: int,
    num_agents: int = 3,
    octaves: int = scenario.DEFAULT_OCTAVES,
    frequency: float = scenario.DEFAULT_FREQUENCY,
) -> WorldState:
    """Fresh world: pebbles from the density field, randomized vessel poses."""
    field_ = scenario.density_field(spec, octaves=octaves, frequency=frequency)
    pebbles = scenario.spawn_pebbles(field_, spec)
    poses = scenario.spawn_vessels(spec, episode_seed, count=num_agents)
    vessels = [
        VesselState(
            position=pos.copy(),
            heading=heading.copy(),
            linear_velocity=np.zeros(2),
        )
        for pos, heading in poses
    ]
    return WorldState(
        spec=spec,
        vessels=vessels,
        pebbles=pebbles,
        pebble_active=np.ones(len(pebbles), dtype=bool),
    )


def compute_rewards(
    events: list[tuple[int, int]], counts: np.ndarray
) -> tuple[np.ndarray, float]:
    """Per-agent local rewards and the shared global bonus for one step.

    ``counts`` are the post-collection totals. Each collection event
    grants +1 to the collector and, evaluated at the moment just after
    that event, 0.01 * (lowest collection count) to every agent.
    """
    counts = np.asarray(counts, dtype=np.int64)
    num_agents = len(counts)
    local = np.zeros(num_agents)
    running = counts.copy()
    for agent, _pebble in events:
        local[agent] += 1.0
        running[agent] -= 1
    # `running` is now the pre-step totals; replay events forward.
    global_reward = 0.0
    for agent, _pebble in events:
        running[agent] += 1
        global_reward += 0.01 * int(running.min())
    return local, global_reward


def _rotate(vec: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * vec[0] - s * vec[1], s * vec[0] + c * vec[1]])


def step(
    world: WorldState, actions: list[AgentAction], dt: float = DT
) -> tuple[WorldState, StepOutcome]:
    """Advance the world by one step, mutating it in place.

    Order: physics integration, pebble collection, termination checks
    (boundary, collision, step cap), reward computation.
    """
    if world.terminated:
        raise SteppedTerminatedError(f"episode already ended ({world.cause})")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(actions) != world.num_agents:
        raise ValueError("one action per vessel required")

    for vessel, raw in zip(world.vessels, actions):
        action = raw.clamped()
        force = action.thrust * THRUST_SCALE * vessel.heading
        vessel.linear_velocity = vessel.linear_velocity + dt * (
            force - DRAG * vessel.linear_velocity
        )
        vessel.position = vessel.position + dt * vessel.linear_velocity
        torque = action.turn * TURN_SCALE
        vessel.angular_velocity += dt * (torque - DRAG * vessel.angular_velocity)
        vessel.heading = _rotate(vessel.heading, dt * vessel.angular_velocity)
        vessel.heading = vessel.heading / np.linalg.norm(vessel.heading)
        vessel.raised_signal = action.signal

    events: list[tuple[int, int]] = []
    positions = world.positions()
    active_idx = np.flatnonzero(world.pebble_active)
    if len(active_idx) > 0:
        deltas = world.pebbles[active_idx, None, :] - positions[None, :, :]
        dists = np.linalg.norm(deltas, axis=2)  # (P_active, num_agents)
        nearest = np.argmin(dists, axis=1)  # ties -> lower agent index
        collected = dists[np.arange(len(active_idx)), nearest] <= COLLECT_RADIUS
        for k in np.flatnonzero(collected):
            pebble = int(active_idx[k])
            agent = int(nearest[k])
            world.pebble_active[pebble] = False
            world.vessels[agent].collected_count += 1
            events.append((agent, pebble))

    world.step += 1

    area = world.spec.area_size
    cause = "running"
    for vessel in world.vessels:
        x, y = vessel.position
        if x < 0.0 or x > area or y < 0.0 or y > area:
            cause = "boundary"
            break
    if cause == "running":
        for i in range(world.num_agents):
            for j in range(i + 1, world.num_agents):
                gap = np.linalg.norm(
                    world.vessels[i].position - world.vessels[j].position
                )
                if gap < 2.0 * VESSEL_RADIUS:
                    cause = "collision"
                    break
            if cause != "running":
                break
    if cause == "running" and world.step >= world.spec.max_steps:
        cause = "step_cap"

    done = cause != "running"
    if done:
        world.terminated = True
        world.cause = cause

    counts = np.array([v.collected_count for v in world.vessels])
    local, global_reward = compute_rewards(events, counts)
    return world, StepOutcome(
        local_rewards=local,
        global_reward=global_reward,
        collected_events=events,
        done=done,
        cause=cause,
    )


def _visual_frame(world: WorldState, agent: int) -> np.ndarray:
    """25x25 binary grid of 2 m cells centred on the vessel, axis-aligned."""
    grid = np.zeros((GRID_CELLS, GRID_CELLS))
    active = world.active_pebbles()
    if len(active) > 0:
        offsets = active - world.vessels[agent].position + GRID_HALF
        cells = np.floor(offsets / GRID_CELL_SIZE).astype(np.int64)
        inside = (
            (cells[:, 0] >= 0)
            & (cells[:, 0] < GRID_CELLS)
            & (cells[:, 1] >= 0)
            & (cells[:, 1] < GRID_CELLS)
        )
        grid[cells[inside, 1], cells[inside, 0]] = 1.0
    return grid.reshape(-1)


def _vector_frame(world: WorldState, agent: int, communication: bool) -> np.ndarray:
    positions = world.positions()
    vessel = world.vessels[agent]
    nn = commnet.nearest_neighbor(positions, agent)
    graph = commnet.build_graph(positions, world.spec.comm_range)
    signal = commnet.visible_signal(
        graph, world.signals(), agent, positions, communication=communication
    )
    area = world.spec.area_size
    return np.array(
        [
            vessel.position[0] / area,
            vessel.position[1] / area,
            vessel.heading[0],
            vessel.heading[1],
            positions[nn][0] / area,
            positions[nn][1] / area,
            1.0 if signal else 0.0,
        ]
    )


def observe(
    world: WorldState,
    agent: int,
    prev_frame: tuple[np.ndarray, np.ndarray] | None = None,
    communication: bool = True,
) -> tuple[AgentObservation, tuple[np.ndarray, np.ndarray]]:
    """Stacked observation for one agent plus the frame to carry forward.

    ``prev_frame`` is the (vector, visual) frame from the previous step;
    on the first step of an episode the current frame is duplicated.
    Stack order is [previous, current].
    """
    vec = _vector_frame(world, agent, communication)
    vis = _visual_frame(world, agent)
    if prev_frame is None:
        prev_vec, prev_vis = vec, vis
    else:
        prev_vec, prev_vis = prev_frame
    obs = AgentObservation(
        vector=np.concatenate([prev_vec, vec]),
        visual=np.concatenate([prev_vis, vis]),
    )
    return obs, (vec, vis)


class PlasticEnv:
    """Step/reset wrapper over WorldState with per-agent frame stacking.

    One instance owns one training area; independent instances never
    share state and can be stepped from separate workers.
    """

    def __init__(self, communication: bool = True, num_agents: int = 3,
                 octaves: int = scenario.DEFAULT_OCTAVES,
                 frequency: float = scenario.DEFAULT_FREQUENCY):
        self.communication = communication
        self.num_agents = num_agents
        self.octaves = octaves
        self.frequency = frequency
        self.world: WorldState | None = None
        self._frames: list[tuple[np.ndarray, np.ndarray] | None] = []
        self.writer = None  # optional replay.ReplayWriter

    def reset(self, spec: ScenarioSpec, episode_seed: int) -> list[AgentObservation]:
        self.world = reset(
            spec, episode_seed, num_agents=self.num_agents,
            octaves=self.octaves, frequency=self.frequency,
        )
        self._frames = [None] * self.num_agents
        if self.writer is not None:
            self.writer.write_header(self.world, self.communication)
        return self._observe_all()

    def step(
        self, actions: list[AgentAction]
    ) -> tuple[list[AgentObservation], StepOutcome]:
        assert self.world is not None, "reset() before step()"
        _, outcome = step(self.world, actions)
        if self.writer is not None:
            self.writer.write_step(self.world, actions, outcome)
            if outcome.done:
                self.writer.write_end(self.world)
        return self._observe_all(), outcome

    def _observe_all(self) -> list[AgentObservation]:
        out = []
        for agent in range(self.num_agents):
            obs, frame = observe(
                self.world, agent, self._frames[agent], self.communication
            )
            self._frames[agent] = frame
            out.append(obs)
        return out
