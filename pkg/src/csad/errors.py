"""Exception types shared across the pipeline."""


class CsadError(Exception):
    """Base class for all pipeline errors."""


class BadMagic(CsadError):
    pass


class DimMismatch(CsadError):
    pass


class NonFinite(CsadError):
    pass


class UnsupportedFormat(CsadError):
    pass


class TooManyClasses(CsadError):
    pass


class EmptyMask(CsadError):
    pass


class EmptySet(CsadError):
    pass


class ClassAbsent(CsadError):
    pass


class FeatureDimMismatch(CsadError):
    pass


class EmptyInput(CsadError):
    pass


class TooFewPoints(CsadError):
    pass


class AllNoise(CsadError):
    pass


class NoSurvivingClusters(CsadError):
    pass


class NoComponent(CsadError):
    pass


class NoValidPlacement(CsadError):
    pass


class TooFewSamples(CsadError):
    pass


class TooFewScores(CsadError):
    pass


class UnknownStream(CsadError):
    pass


class NoTrainingMaps(CsadError):
    pass


class SpecInfeasible(CsadError):
    pass
