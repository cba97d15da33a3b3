"""Exception types shared across the package."""


class EmptyHistogramError(ValueError):
    """Raised when an operation needs at least one sample but the histogram is empty."""


class PartitionError(ValueError):
    """Raised when child histograms do not partition their parent."""
