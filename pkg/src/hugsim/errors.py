"""Exception hierarchy shared across the simulator."""


class HugsimError(Exception):
    """Base class for all simulator errors."""


class InvariantViolation(HugsimError):
    """A domain-type invariant does not hold (bad quaternion norm, etc.)."""


class SceneFormatError(HugsimError):
    """Scene container is unreadable: bad magic, version, or truncation."""


class MissingAssetError(HugsimError):
    """A scenario or scene references an asset id that is not in the library."""


class ConfigError(HugsimError):
    """Invalid configuration (scenario schema, render modes, fit config)."""


class StalePlanError(HugsimError):
    """All provided waypoints are behind the ego vehicle."""


class EpisodeDoneError(HugsimError):
    """step() was called after the episode terminated."""


class ProtocolError(HugsimError):
    """Wire-protocol violation (framing, version, payload shape)."""
