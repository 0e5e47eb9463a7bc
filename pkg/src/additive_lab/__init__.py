"""Exact and numerical tools for additive functions ``f(x + y) = f(x) + f(y)``."""

from .core import (
    AdditiveLabError,
    DegenerateDomain,
    GridSpec,
    Oracle,
    OracleFailure,
    Parallelepiped,
    midpoint_quadrature,
    volume,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveLabError",
    "DegenerateDomain",
    "GridSpec",
    "Oracle",
    "OracleFailure",
    "Parallelepiped",
    "__version__",
    "midpoint_quadrature",
    "volume",
]
