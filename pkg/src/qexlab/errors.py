"""Exception hierarchy shared by every qexlab module."""


class QexlabError(Exception):
    """Base class for all library errors."""


class DimensionError(QexlabError, ValueError):
    pass


class DimensionCapError(QexlabError, ValueError):
    """A requested object would exceed the configured size cap."""


class RegisterNameError(QexlabError, KeyError):
    pass


class EnsembleError(QexlabError, ValueError):
    pass


class ProjectorError(QexlabError, ValueError):
    pass


class ParameterError(QexlabError, ValueError):
    pass


class NonUnitaryError(QexlabError, ValueError):
    pass


class ConvergenceError(QexlabError, RuntimeError):
    """Iterative solver hit its iteration cap.

    ``best_residual`` holds the smallest residual norm seen before giving up.
    """

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class CertificationError(QexlabError, RuntimeError):
    """A numerically checked claim did not hold."""
