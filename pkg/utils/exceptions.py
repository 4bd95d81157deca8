class Cam2TrajError(Exception):
    """Base class of every error raised by cam2traj"""


class InvalidArgumentError(Cam2TrajError, ValueError):
    pass


class OutOfRangeError(Cam2TrajError, ValueError):
    pass


class ShapeMismatchError(Cam2TrajError, ValueError):
    pass


class OffRouteError(Cam2TrajError):
    pass


class ExpertLostError(Cam2TrajError):
    pass


class StalePlanError(Cam2TrajError):
    pass


class TrainingAbortError(Cam2TrajError):
    pass


class DatasetLoadError(Cam2TrajError):
    pass


class CheckpointError(Cam2TrajError):
    pass


class ConfigError(Cam2TrajError):
    pass


class MapFormatError(Cam2TrajError):
    pass


class UnsupportedVariantError(Cam2TrajError):
    pass


class VerificationError(Cam2TrajError):
    pass
