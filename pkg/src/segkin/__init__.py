"""Two-species Vlasov-BGK segregation toolkit: phase diagram, fronts, dispersion, kinetics."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import AssemblyError, ConfigurationError, ConvergenceError, DomainError, SegkinError

__all__ = ["AssemblyError", "ConfigurationError", "ConvergenceError", "DomainError",
           "SegkinError", "__version__"]
