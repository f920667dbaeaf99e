"""Exception hierarchy shared by all edgeview modules."""


class EdgeviewError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(EdgeviewError, ValueError):
    pass


class SymmetryError(InvalidInputError):
    pass


class RankDeficiencyError(EdgeviewError, ValueError):
    """A view's Gram matrix is singular and no ridge was allowed."""

    def __init__(self, message, view=None):
        super().__init__(message)
        self.view = view


class PencilDegeneracyError(EdgeviewError, ValueError):
    pass


class ConfigurationError(EdgeviewError, ValueError):
    pass


class CalibrationError(EdgeviewError, ValueError):
    pass


class DimensionError(EdgeviewError, ValueError):
    pass


class DegenerateComponentError(EdgeviewError, ValueError):
    pass


class UnderdeterminedSystemError(EdgeviewError, ValueError):
    pass


class ConditioningError(EdgeviewError, RuntimeError):
    """Joint diagonalization failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateMixtureError(EdgeviewError, RuntimeError):
    pass


class UnresolvedAmbiguityError(EdgeviewError, RuntimeError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class PilotDesignError(EdgeviewError, ValueError):
    pass


class DetectionError(EdgeviewError, RuntimeError):
    pass
