"""Exception types shared across the toolkit.

Every loader / numeric routine raises one of these instead of a bare
ValueError so callers (and the pipeline runner) can report which contract
was violated.
"""


class StylelabError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------- corpus
class MissingColumnError(StylelabError):
    pass


class UnknownStyleError(StylelabError):
    pass


class SelfComparisonError(StylelabError):
    pass


class UnknownStimulusError(StylelabError):
    pass


class UnknownFeatureError(StylelabError):
    pass


class EmptyInputError(StylelabError):
    pass


class MixedValueKindsError(StylelabError):
    pass


class DimensionMismatchError(StylelabError):
    pass


class NonFiniteValueError(StylelabError):
    pass


class DuplicateIdError(StylelabError):
    pass


# ---------------------------------------------------------------- vision
class EmptyImageError(StylelabError):
    pass


class CenterOutsideImageError(StylelabError):
    pass


class DegenerateImageError(StylelabError):
    pass


class ImageTooSmallError(StylelabError):
    pass


# --------------------------------------------------------------- ranking
class DisconnectedGraphError(StylelabError):
    pass


class DegenerateItemError(StylelabError):
    pass


# ----------------------------------------------------------------- stats
class RankDeficientError(StylelabError):
    pass


class TooFewRowsError(StylelabError):
    pass


class NotNestedError(StylelabError):
    pass


class ZeroVarianceError(StylelabError):
    pass


class TooFewPointsError(StylelabError):
    pass


class SampleSizeOutOfRangeError(StylelabError):
    pass


# ------------------------------------------------------------- semantics
class ZeroVectorError(StylelabError):
    pass


class MissingCaptionEmbeddingError(StylelabError):
    pass


class MissingResponseEmbeddingError(StylelabError):
    pass


class ProviderUnreachableError(StylelabError):
    pass


class ProviderError(StylelabError):
    pass


# -------------------------------------------------------------- sampling
class KTooLargeError(StylelabError):
    pass


class MTooLargeError(StylelabError):
    pass


# ------------------------------------------------------------------- cli
class MissingStageError(StylelabError):
    pass


class NoResponsesError(StylelabError):
    pass


class ConfigError(StylelabError):
    pass


class StageError(StylelabError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
