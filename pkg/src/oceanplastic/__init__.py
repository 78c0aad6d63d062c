"""Multi-agent plastic-collector simulation with signal communication,
shared-policy PPO training, and replay-log analytics."""

__version__ = "0.1.0"

from .scenario import ScenarioSpec, DensityField  # noqa: F401
from .world import (  # noqa: F401
    AgentAction,
    AgentObservation,
    PlasticEnv,
    StepOutcome,
    WorldState,
)
from .ppo import PpoConfig  # noqa: F401
from .trainer import ExperimentConfig  # noqa: F401
