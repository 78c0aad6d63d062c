"""Proximity communication: range-limited graph, nearest neighbours, and
a generic one-round message-passing update.

The deployed channel is deliberately narrow: each agent sees only the
binary signal of its nearest neighbour, and only while that neighbour is
inside communication range. The general ``message_pass`` covers the same
aggregation scheme for arbitrary node features.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatchError


@dataclass
class CommGraph:
    """Undirected proximity graph over agent indices."""

    num_nodes: int
    edges: set[tuple[int, int]] = field(default_factory=set)  # (lo, hi) pairs

    def adjacent(self, u: int, v: int) -> bool:
        if u == v:
            return False
        return (min(u, v), max(u, v)) in self.edges

    def neighbors(self, v: int) -> list[int]:
        out = [u for u in range(self.num_nodes) if self.adjacent(v, u)]
        return out


def build_graph(positions: np.ndarray, comm_range: float) -> CommGraph:
    """Connect every pair at Euclidean distance <= comm_range (inclusive)."""
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    graph = CommGraph(num_nodes=n)
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(positions[i] - positions[j]) <= comm_range:
                graph.edges.add((i, j))
    return graph


def nearest_neighbor(positions: np.ndarray, agent: int) -> int:
    """Closest other agent by Euclidean distance, ties to the lower index."""
    positions = np.asarray(positions, dtype=np.float64)
    if len(positions) < 2:
        raise ValueError("need at least 2 agents")
    best = -1
    best_dist = np.inf
    for other in range(len(positions)):
        if other == agent:
            continue
        dist = np.linalg.norm(positions[other] - positions[agent])
        if dist < best_dist:
            best = other
            best_dist = dist
    return best


def visible_signal(
    graph: CommGraph,
    signals: Sequence[bool],
    agent: int,
    positions: np.ndarray,
    communication: bool = True,
) -> bool:
    """Signal of the agent's nearest neighbour, if in range.

    Falls back to False when the nearest neighbour is out of range or
    when communication is disabled (the no-communication baseline).
    """
    if not communication:
        return False
    nn = nearest_neighbor(positions, agent)
    if not graph.adjacent(agent, nn):
        return False
    return bool(signals[nn])


def message_pass(
    features: Sequence[np.ndarray],
    graph: CommGraph,
    update: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> list[np.ndarray]:
    """One synchronous round: new_v = update(old_v, sum of neighbour features).

    Messages are the neighbours' feature vectors (identity message
    function); nodes without neighbours aggregate a zero vector.
    """
    features = [np.asarray(f, dtype=np.float64) for f in features]
    length = features[0].shape
    for f in features[1:]:
        if f.shape != length:
            raise DimensionMismatchError(
                f"feature shapes differ: {f.shape} vs {length}"
            )
    out = []
    for v in range(graph.num_nodes):
        aggregate = np.zeros(length)
        for u in graph.neighbors(v):
            aggregate = aggregate + features[u]
        out.append(np.asarray(update(features[v], aggregate), dtype=np.float64))
    return out
