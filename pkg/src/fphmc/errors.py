"""Exception types shared across the fitting pipeline."""


class ConvergenceError(RuntimeError):
    """Optimizer failed to converge; carries the last iterate when available."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateRiskSetError(ValueError):
    """A risk set at an event time has total weight zero."""


class BootstrapUnstableError(RuntimeError):
    """Too many bootstrap replicates failed; partial results are attached."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InsufficientReplicatesError(ValueError):
    """Not enough successful bootstrap replicates to form intervals."""
