"""Exception hierarchy shared across the package."""


class FastError(Exception):
    """Base class for all package errors."""


class ConfigError(FastError):
    pass


# sim
class NonClosedTrack(FastError):
    pass


class PlacementFailure(FastError):
    pass


class SteppedDoneEpisode(FastError):
    pass


class DegenerateSpeedRange(FastError):
    pass


# embed
class ShapeMismatch(FastError):
    pass


class EmptyDataset(FastError):
    pass


class DivergedTraining(FastError):
    pass


class EmptyDescription(FastError):
    pass


class ZeroVector(FastError):
    pass


class TooFewFrames(FastError):
    pass


# sac
class FrozenPolicy(FastError):
    pass


class NonFiniteLoss(FastError):
    pass


# repo / persistence
class DuplicateName(FastError):
    pass


class UnfrozenPolicy(FastError):
    pass


class VersionMismatch(FastError):
    pass


class CorruptFile(FastError):
    pass


class EpisodeTooShort(FastError):
    pass


# transfer / eval
class ModeMismatch(FastError):
    pass


class IncompatibleRepository(FastError):
    pass


class EmptyLog(FastError):
    pass


class IoFailure(FastError):
    pass
