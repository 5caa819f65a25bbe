"""Exception hierarchy shared by the physics modules, services, and CLI."""
from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CAPACITY = 4


class SimulationError(Exception):
    """Base class; `exit_code` is the CLI status the error maps to."""

    exit_code: int = EXIT_NUMERIC


class ConfigError(SimulationError):
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class GeometryError(SimulationError, ValueError):
    """Degenerate or impossible atomic configuration."""

    exit_code = EXIT_CONFIG


class NumericDiagnosticError(SimulationError):
    """Integrator diagnostics (trace drift, negativity) out of tolerance."""

    exit_code = EXIT_NUMERIC

    def __init__(self, message: str, dt: float | None = None) -> None:
        self.dt = dt
        super().__init__(message)


class CapacityError(SimulationError):
    exit_code = EXIT_CAPACITY

    def __init__(self, dimension: int, cap: int) -> None:
        self.dimension = dimension
        self.cap = cap
        super().__init__(f"Hilbert dimension {dimension} exceeds the configured cap of {cap}")


class DimensionMismatchError(SimulationError, ValueError):
    exit_code = EXIT_NUMERIC


class UnnormalizedStateError(SimulationError, ValueError):
    exit_code = EXIT_NUMERIC
