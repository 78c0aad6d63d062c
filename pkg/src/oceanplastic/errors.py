"""Exception types shared across the package."""


class OceanPlasticError(Exception):
    """Base class for all package errors."""


class SpawnStallError(OceanPlasticError):
    """Rejection sampling failed to accept a pebble position for too long."""


class SteppedTerminatedError(OceanPlasticError):
    """step() was called on a world whose episode already ended."""


class DimensionMismatchError(OceanPlasticError):
    """Node feature vectors have inconsistent lengths."""


class ShapeError(OceanPlasticError):
    """An observation or parameter tensor has the wrong shape."""


class LengthMismatchError(OceanPlasticError):
    """Parallel sequences passed to an operation differ in length."""


class BufferNotFullError(OceanPlasticError):
    """A policy update was requested before the trajectory buffer filled."""


class ConfigError(OceanPlasticError):
    """A config file or override could not be parsed or validated."""


class CheckpointShapeError(OceanPlasticError):
    """A checkpoint file is corrupt or incompatible with the network."""


class EmptyLogError(OceanPlasticError):
    """A report was requested over zero replay logs."""


class WindowOverrunError(OceanPlasticError):
    """A communication event sits too close to the episode end to classify."""
