"""Deterministic scenario generation: gradient-noise density fields and spawning.

Every function here is a pure function of its seeds, so a scenario can be
regenerated bit-exactly from a :class:`ScenarioSpec` alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SpawnStallError

# Default fractal-noise parameters for density fields.
DEFAULT_OCTAVES = 3
DEFAULT_FREQUENCY = 2.0  # cycles per area side
DEFAULT_PERSISTENCE = 0.5
DEFAULT_RESOLUTION = 100  # 2 m cells on the default 200 m area

MIN_VESSEL_SEPARATION = 10.0  # meters, enforced at spawn

# Eight unit gradient directions at 45 degree increments. Unit-length
# gradients keep the noise value inside [-1, 1].
_GRADIENTS = np.array(
    [[math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)] for k in range(8)]
)

_REJECTION_LIMIT = 1_000_000


@dataclass(frozen=True)
class ScenarioSpec:
    """Reproducible recipe for one world layout."""

    seed: int
    y_shift: float = 0.0
    area_size: float = 200.0
    pebble_count: int = 400
    comm_range: float = 100.0
    max_steps: int = 5000

    def __post_init__(self):
        if self.area_size <= 0:
            raise ValueError("area_size must be positive")
        if self.comm_range <= 0:
            raise ValueError("comm_range must be positive")
        if self.pebble_count < 0:
            raise ValueError("pebble_count must be non-negative")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class DensityField:
    """Per-cell spawn likelihood in [0, 1] over a square area."""

    resolution: int
    values: np.ndarray  # (resolution, resolution), row = y cell, col = x cell
    area_size: float

    @property
    def cell_size(self) -> float:
        return self.area_size / self.resolution

    def value_at(self, x: float, y: float) -> float:
        """Likelihood of the cell containing (x, y); clamps to the area."""
        ix = min(int(x / self.cell_size), self.resolution - 1)
        iy = min(int(y / self.cell_size), self.resolution - 1)
        return float(self.values[max(iy, 0), max(ix, 0)])


@lru_cache(maxsize=256)
def _permutation(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = rng.permutation(256)
    return np.concatenate([p, p])


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin2(x, y, seed: int):
    """Classic 2-D gradient noise in [-1, 1], zero on the integer lattice.

    Accepts scalars or equally shaped arrays; vectorized over the inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    perm = _permutation(seed)

    xi = np.floor(x).astype(np.int64)
    yi = np.floor(y).astype(np.int64)
    xf = x - xi
    yf = y - yi
    xi &= 255
    yi &= 255

    def corner(ix, iy, dx, dy):
        h = perm[perm[ix] + iy] & 7
        return _GRADIENTS[h, 0] * dx + _GRADIENTS[h, 1] * dy

    n00 = corner(xi, yi, xf, yf)
    n10 = corner(xi + 1, yi, xf - 1.0, yf)
    n01 = corner(xi, yi + 1, xf, yf - 1.0)
    n11 = corner(xi + 1, yi + 1, xf - 1.0, yf - 1.0)

    u = _fade(xf)
    v = _fade(yf)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    out = nx0 + v * (nx1 - nx0)
    if out.ndim == 0:
        return float(out)
    return out


def density_field(
    spec: ScenarioSpec,
    octaves: int = DEFAULT_OCTAVES,
    frequency: float = DEFAULT_FREQUENCY,
    persistence: float = DEFAULT_PERSISTENCE,
    resolution: int = DEFAULT_RESOLUTION,
) -> DensityField:
    """Fractal noise field rescaled to [0, 1] spawn likelihoods.

    The y offset is added to the sample coordinate before frequency
    scaling, so a shift of 200 reads a disjoint window of the noise.
    """
    if octaves < 1:
        raise ValueError("octaves must be at least 1")
    cell = spec.area_size / resolution
    centers = (np.arange(resolution) + 0.5) * cell
    xs, ys = np.meshgrid(centers, centers)  # row index = y
    base_freq = frequency / spec.area_size

    total = np.zeros_like(xs)
    amplitude = 1.0
    norm = 0.0
    for octave in range(octaves):
        f = base_freq * (2.0**octave)
        total += amplitude * perlin2(xs * f, (ys + spec.y_shift) * f, spec.seed)
        norm += amplitude
        amplitude *= persistence

    values = np.clip((total / norm + 1.0) / 2.0, 0.0, 1.0)
    return DensityField(resolution=resolution, values=values, area_size=spec.area_size)


def spawn_pebbles(field: DensityField, spec: ScenarioSpec) -> np.ndarray:
    """Draw pebble positions by rejection sampling against the field.

    Returns an (N, 2) array of positions in meters, N = spec.pebble_count.
    Raises SpawnStallError if the field rejects 1e6 candidates in a row.
    """
    rng = np.random.default_rng(spec.seed)
    positions = np.empty((spec.pebble_count, 2))
    accepted = 0
    stall = 0
    while accepted < spec.pebble_count:
        candidate = rng.uniform(0.0, spec.area_size, size=2)
        if rng.uniform() < field.value_at(candidate[0], candidate[1]):
            positions[accepted] = candidate
            accepted += 1
            stall = 0
        else:
            stall += 1
            if stall >= _REJECTION_LIMIT:
                raise SpawnStallError(
                    f"no pebble accepted in {_REJECTION_LIMIT} draws; "
                    "density field is (near-)zero everywhere"
                )
    return positions


def spawn_vessels(
    spec: ScenarioSpec, episode_rng_seed: int, count: int = 3
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random vessel poses: uniform positions with pairwise separation
    >= 10 m and headings uniform on the circle.

    Returns a list of (position, heading) pairs, heading a unit vector.
    """
    rng = np.random.default_rng([spec.seed, episode_rng_seed])
    while True:
        positions = rng.uniform(0.0, spec.area_size, size=(count, 2))
        ok = True
        for i in range(count):
            for j in range(i + 1, count):
                if np.linalg.norm(positions[i] - positions[j]) < MIN_VESSEL_SEPARATION:
                    ok = False
        if ok:
            break
    angles = rng.uniform(0.0, 2.0 * math.pi, size=count)
    return [
        (positions[i], np.array([math.cos(angles[i]), math.sin(angles[i])]))
        for i in range(count)
    ]


def dump_scenario(spec: ScenarioSpec, positions: np.ndarray) -> str:
    """Line-oriented text dump: header then one `x,y` pair per line."""
    lines = [f"seed={spec.seed} y_shift={spec.y_shift} count={len(positions)}"]
    for x, y in positions:
        lines.append(f"{x:.6f},{y:.6f}")
    return "\n".join(lines) + "\n"


def parse_scenario_dump(text: str) -> tuple[dict, np.ndarray]:
    """Inverse of dump_scenario; returns (header fields, positions)."""
    lines = text.strip().splitlines()
    header = {}
    for token in lines[0].split():
        key, value = token.split("=")
        header[key] = value
    positions = np.array(
        [[float(v) for v in line.split(",")] for line in lines[1:]]
    ).reshape(-1, 2)
    return header, positions
