"""Centralized runtime configuration for simulations, services, and the CLI."""
from __future__ import annotations

import os
from pathlib import Path
from typing import Final

from dotenv import load_dotenv

BASE_DIR: Final[Path] = Path(__file__).resolve().parent.parent
ENV_PATH = BASE_DIR / ".env"

# Load environment variables once, prioritizing runtime env over file values
load_dotenv(dotenv_path=ENV_PATH, override=False)

POPULATION_RATE: Final[str] = "population-rate"
PAPER_LITERAL: Final[str] = "paper-literal"
LINDBLAD_CONVENTIONS: Final[tuple[str, ...]] = (POPULATION_RATE, PAPER_LITERAL)

RK4: Final[str] = "rk4"
PROPAGATOR: Final[str] = "propagator"
INTEGRATORS: Final[tuple[str, ...]] = (RK4, PROPAGATOR)


def _str_to_bool(value: str | bool | None, default: bool = False) -> bool:
    if isinstance(value, bool):
        return value
    if value is None:
        return default
    return str(value).strip().lower() in {"1", "true", "yes", "on"}


def _choice(value: str | None, options: tuple[str, ...], default: str) -> str:
    candidate = (value or default).strip().lower()
    return candidate if candidate in options else default


class Config:
    """Default numerics and process knobs shared by physics, services, and scripts."""

    APP_NAME: Final[str] = os.getenv("SIM_APP_NAME", "V-type collective emission simulator")

    # Observability
    STRUCTURED_LOGS_ENABLED: Final[bool] = _str_to_bool(os.getenv("SIM_STRUCTURED_LOGS"), default=True)
    LOG_LEVEL: Final[str] = os.getenv("SIM_LOG_LEVEL", "INFO")

    # Hilbert space and master equation
    DIMENSION_CAP: Final[int] = int(os.getenv("SIM_DIMENSION_CAP", "4096"))
    LINDBLAD_CONVENTION: Final[str] = _choice(os.getenv("SIM_LINDBLAD_CONVENTION"), LINDBLAD_CONVENTIONS, POPULATION_RATE)

    # Integrator
    INTEGRATOR: Final[str] = _choice(os.getenv("SIM_INTEGRATOR"), INTEGRATORS, RK4)
    DEFAULT_DT: Final[float] = float(os.getenv("SIM_DEFAULT_DT", "1e-3"))
    # RK4 steps with dt times the largest coherence frequency above this get a warning
    RK4_PHASE_LIMIT: Final[float] = float(os.getenv("SIM_RK4_PHASE_LIMIT", "1.0"))
    # RK4's stability region reaches |λ·dt| ≈ 2.8 on both axes; beyond it runs are refused
    RK4_STABILITY_LIMIT: Final[float] = float(os.getenv("SIM_RK4_STABILITY_LIMIT", "2.8"))
    # vec(ρ) propagators are dimension² square
    PROPAGATOR_DIMENSION_CAP: Final[int] = int(os.getenv("SIM_PROPAGATOR_DIMENSION_CAP", "64"))
    MAX_DT_HALVINGS: Final[int] = int(os.getenv("SIM_MAX_DT_HALVINGS", "3"))
    TRACE_TOLERANCE: Final[float] = float(os.getenv("SIM_TRACE_TOLERANCE", "1e-6"))
    NEGATIVITY_TOLERANCE: Final[float] = float(os.getenv("SIM_NEGATIVITY_TOLERANCE", "1e-6"))

    # Sweeps and optimizer
    GRID_RESOLUTION: Final[int] = int(os.getenv("SIM_GRID_RESOLUTION", "41"))
    SEED_GRID_RESOLUTION: Final[int] = int(os.getenv("SIM_SEED_GRID_RESOLUTION", "9"))
    OPTIMIZER_MAX_EVALUATIONS: Final[int] = int(os.getenv("SIM_OPTIMIZER_MAX_EVALUATIONS", "200"))
    MAX_WORKERS: Final[int] = int(os.getenv("SIM_MAX_WORKERS", "4"))

    # Output
    OUTPUT_DIR: Final[Path] = Path(os.getenv("SIM_OUTPUT_DIR", (BASE_DIR / "out").as_posix()))
