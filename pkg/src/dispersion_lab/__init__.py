"""Zero-dispersion limit diagnostics for KdV and semiclassical defocusing NLS."""

from dispersion_lab.errors import (
    DataError,
    DispersionLabError,
    DomainError,
    InstabilityError,
    NonIntegrableError,
    QuadratureAccuracyError,
    ShapeError,
    ValidationError,
)
from dispersion_lab.fields import FieldGrid
from dispersion_lab.quadrature import QuadResult, SingularitySpec, integrate_endpoint_singular
from dispersion_lab.reports import DiagnosticsReport, SignReport

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DiagnosticsReport",
    "DispersionLabError",
    "DomainError",
    "FieldGrid",
    "InstabilityError",
    "NonIntegrableError",
    "QuadResult",
    "QuadratureAccuracyError",
    "ShapeError",
    "SignReport",
    "SingularitySpec",
    "ValidationError",
    "integrate_endpoint_singular",
]
