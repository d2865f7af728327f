"""Exception types raised across the package."""


class OrthoAugmError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(OrthoAugmError, ValueError):
    pass


class NonFinite(OrthoAugmError, ValueError):
    pass


class RankDeficient(OrthoAugmError, ValueError):
    """Regressor matrix does not have full column rank."""


class InsufficientData(OrthoAugmError, ValueError):
    pass


class MissingThetaAux(OrthoAugmError, RuntimeError):
    """An orthogonal model was used for prediction before being frozen."""


class NonFiniteObjective(OrthoAugmError, FloatingPointError):
    pass


class SingularGram(OrthoAugmError, ValueError):
    pass


class OddLengthD1(OrthoAugmError, ValueError):
    pass


class DegenerateSignal(OrthoAugmError, ValueError):
    pass


class ConfigError(OrthoAugmError, ValueError):
    pass
