"""Exception hierarchy shared across the toolkit."""


class SurveySegError(Exception):
    """Base class for all toolkit errors."""


# --- ingest ---------------------------------------------------------------

class MissingColumn(SurveySegError):
    pass


class DuplicateHeader(SurveySegError):
    pass


class RaggedRow(SurveySegError):
    pass


class UnknownCategory(SurveySegError):
    pass


class EmptyColumn(SurveySegError):
    pass


class ValueOutsideOrder(SurveySegError):
    pass


class UnknownMood(SurveySegError):
    pass


class DimensionMismatch(SurveySegError):
    pass


class EmptySelection(SurveySegError):
    pass


class InvalidSpec(SurveySegError):
    pass


# --- numerics -------------------------------------------------------------

class NotSymmetric(SurveySegError):
    pass


class NoConvergence(SurveySegError):
    pass


class RankTooLarge(SurveySegError):
    pass


class InvalidDf(SurveySegError):
    pass


class EmptyInput(SurveySegError):
    pass


# --- assoc ----------------------------------------------------------------

class LengthMismatch(SurveySegError):
    pass


class DegenerateTable(SurveySegError):
    pass


class ConstantInput(SurveySegError):
    pass


class InvalidP(SurveySegError):
    pass


# --- graph ----------------------------------------------------------------

class NonSquareInput(SurveySegError):
    pass


class EmptyGraph(SurveySegError):
    pass


class IoError(SurveySegError):
    pass


# --- reduce ---------------------------------------------------------------

class DimensionTooLarge(SurveySegError):
    pass


class PerplexityTooLarge(SurveySegError):
    pass


# --- cluster --------------------------------------------------------------

class KTooLarge(SurveySegError):
    pass


class DegenerateSimilarity(SurveySegError):
    pass


# --- evaluate -------------------------------------------------------------

class SingleCluster(SurveySegError):
    pass


class DegenerateK(SurveySegError):
    pass


class CoincidentCentroids(SurveySegError):
    pass


class ClassTooSmall(SurveySegError):
    pass


# --- cli ------------------------------------------------------------------

class MissingRun(SurveySegError):
    pass
