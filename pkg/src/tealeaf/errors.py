"""Exception types raised across the tealeaf package."""


class TeaLeafError(Exception):
    """Base class for all tealeaf errors."""


# -- dataset ingestion / splitting --

class MissingRoot(TeaLeafError):
    pass


class EmptyClassDirectory(TeaLeafError):
    pass


class UndecodableImage(TeaLeafError):
    pass


class RatioSumInvalid(TeaLeafError):
    pass


class SplitInfeasible(TeaLeafError):
    pass


class EmptyTrainClass(TeaLeafError):
    pass


class ManifestInvalid(TeaLeafError):
    pass


# -- models / checkpoints --

class UnknownArchitecture(TeaLeafError):
    pass


class WeightsUnavailable(TeaLeafError):
    pass


class CorruptCheckpoint(TeaLeafError):
    pass


class RegistryMismatch(TeaLeafError):
    pass


# -- training --

class EmptySplit(TeaLeafError):
    pass


class NonFiniteLoss(TeaLeafError):
    pass


# -- evaluation --

class LengthMismatch(TeaLeafError):
    pass


class LabelOutOfRange(TeaLeafError):
    pass


class EmptyMatrix(TeaLeafError):
    pass


# -- explainers --

class LayerNotFound(TeaLeafError):
    pass


class GradientUnavailable(TeaLeafError):
    pass


class PatchLargerThanImage(TeaLeafError):
    pass


class ShapeMismatch(TeaLeafError):
    pass


# -- configuration / IO --

class ConfigInvalid(TeaLeafError):
    pass


class IoFailure(TeaLeafError):
    pass
