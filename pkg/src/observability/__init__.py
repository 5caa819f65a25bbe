"""Observability helpers: structured logging and in-process metrics."""

from .logging_config import configure_logging, current_run_context, run_context
from .metrics import (
    increment_counter,
    set_gauge,
    timed,
    get_metrics_snapshot,
    reset_metrics,
)

__all__ = [
    "configure_logging",
    "current_run_context",
    "run_context",
    "increment_counter",
    "set_gauge",
    "timed",
    "get_metrics_snapshot",
    "reset_metrics",
]
