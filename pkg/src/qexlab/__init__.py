"""Quantum expanders, EPR-pair tests and entangled gapped ground states at desk scale."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CertificationError,
    ConvergenceError,
    DimensionCapError,
    DimensionError,
    EnsembleError,
    NonUnitaryError,
    ParameterError,
    ProjectorError,
    QexlabError,
    RegisterNameError,
)

__all__ = [
    "CertificationError", "ConvergenceError", "DimensionCapError", "DimensionError", "EnsembleError",
    "NonUnitaryError", "ParameterError", "ProjectorError", "QexlabError", "RegisterNameError", "__version__",
]
