"""Exception taxonomy for the aerolens pipeline.

Every error raised by library code derives from :class:`AerolensError` so
callers (notably the CLI) can distinguish pipeline failures from plain bugs.
"""

from __future__ import annotations


class AerolensError(Exception):
    """Base class for all aerolens pipeline errors."""


# --- ingestion -------------------------------------------------------------

class MissingHeaderError(AerolensError):
    """CSV header row is absent or does not match the documented schema."""


class BadTimestampError(AerolensError):
    def __init__(self, row: int, value: str):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: unparseable timestamp {value!r}")


class BadNumberError(AerolensError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: column {column!r} is not a finite number: {value!r}")


class EmptyDatasetError(AerolensError):
    """An operation that needs at least one reading received none."""


# --- synthesis -------------------------------------------------------------

class BadProfileError(AerolensError):
    """Activity profile parameters are inconsistent or unsatisfiable."""


class OverlappingSegmentsError(AerolensError):
    """Two scheduled activity segments overlap in time."""


# --- clustering ------------------------------------------------------------

class TooFewPointsError(AerolensError):
    """Fewer data rows than requested clusters."""


class DimensionMismatchError(AerolensError):
    """Matrix column count differs from what the model was fitted on."""


class SingleClusterError(AerolensError):
    """Silhouette needs at least two distinct cluster labels."""


# --- classification --------------------------------------------------------

class EmptyInputError(AerolensError):
    """Training or evaluation input is empty."""


class SingleClassError(AerolensError):
    """SVM training needs at least two distinct classes."""


class SchemaVersionMismatchError(AerolensError):
    """Persisted document was written by a newer schema than this code reads."""


class CorruptDocumentError(AerolensError):
    """Persisted document is truncated or structurally invalid."""


# --- explanation -----------------------------------------------------------

class EmptyBackgroundError(AerolensError):
    """Shapley value function needs a non-empty background matrix."""


class DegeneratePerturbationsError(AerolensError):
    """All LIME perturbation weights collapsed to (numerically) zero."""


class AllZeroImportancesError(AerolensError):
    """Weight factors need at least one strictly positive importance."""


# --- exposure --------------------------------------------------------------

class EmptyClusterError(AerolensError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"cluster {index} received no readings")


class NoTrackedPollutantsError(AerolensError):
    """Potency computation received an empty tracked-pollutant list."""


class LengthMismatchError(AerolensError):
    """Per-cluster counts do not line up with the potency table."""


class WindowLargerThanDataError(AerolensError):
    """Sliding window exceeds the time span of the dataset."""


class NonPositiveRawError(AerolensError):
    """Cohort normalization requires strictly positive raw exposures."""
