"""Exception hierarchy shared across the package."""


class BachkitError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(BachkitError):
    """Operand shapes or channel counts are incompatible."""


class NumericError(BachkitError):
    """A kernel operation produced a non-finite value, or an input is
    outside the numeric domain of an operation."""


class ParamError(BachkitError, ValueError):
    """An operation parameter is out of its allowed range."""


class TaxonomyError(BachkitError):
    """A category id is unknown to the active taxonomy."""


class LayoutError(BachkitError):
    """A layout failed validation where a valid layout is required."""


class IngestError(BachkitError):
    """A memory-bank manifest or one of its entries could not be ingested."""


class BankStateError(BachkitError):
    """A bank entry is unusable for the requested derivation
    (e.g. a segmentation map with no background pixels)."""


class RetrievalError(BachkitError):
    """Retrieval was asked to operate on an unusable bank or query."""


class ComparisonError(BachkitError):
    """Query and entry are not comparable (extent or taxonomy mismatch)."""


class FusionError(BachkitError):
    """Background fusion received inconsistent inputs."""


class TrainError(BachkitError):
    """Toy training diverged; carries the failing step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ConfigError(BachkitError):
    """Service or palette configuration is incomplete or inconsistent."""
