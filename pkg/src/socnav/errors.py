"""Exception types raised across the package."""


class SocNavError(Exception):
    """Base class for errors raised by socnav."""


class SceneGenerationError(SocNavError):
    """Procedural generation could not satisfy its constraints within the retry budget."""


class PlacementError(SocNavError):
    """No position or waypoint set satisfies the requested constraints."""


class SensorError(SocNavError):
    """The sensor pose is not in free space."""


class ContractError(SocNavError, ValueError):
    """An operation was called with inputs violating its preconditions."""


class RecordError(ContractError):
    """An episode record is malformed (for example a non-positive shortest path)."""


class SetupError(SocNavError):
    """An episode could not be set up (start/goal sampling failed)."""


class ConfigError(SocNavError):
    """A configuration file is missing, malformed or inconsistent."""


class TrainingError(SocNavError):
    """Training diverged (for example a NaN loss)."""
