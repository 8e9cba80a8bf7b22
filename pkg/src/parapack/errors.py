"""Exception types shared across the toolkit."""


class ParapackError(Exception):
    """Base class for toolkit-specific failures."""


class IntegrationError(ParapackError):
    """A fixed-step integration produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DiagonalizationError(ParapackError):
    """State matrix is defective or has complex eigenvalues."""


class AggregationError(ParapackError):
    """Cells cannot be merged into one equivalent cell."""


class CareSolverError(ParapackError):
    """Riccati iteration failed to meet the residual contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FilterDivergenceError(ParapackError):
    """Observer state became non-finite during propagation."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class StudyAbortError(ParapackError):
    """Monte Carlo study aborted before any runs executed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
