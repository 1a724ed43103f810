"""Exception hierarchy shared by every stage of the pipeline."""


class LeafDxError(Exception):
    """Expected domain error: bad input, bad configuration, unusable data."""


class ImageFormatError(LeafDxError):
    pass


class ConfigError(LeafDxError):
    pass


class EmptyGlcmError(LeafDxError):
    """No co-occurring pixel pair survived the offset and mask."""


class NoForegroundError(LeafDxError):
    """Every cluster was classified as background."""


class ModelFormatError(LeafDxError):
    pass


class InvariantViolation(RuntimeError):
    """Internal consistency check failed; indicates a bug, not bad input."""
