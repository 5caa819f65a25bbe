from __future__ import annotations

import json
import logging
import sys
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional
from uuid import uuid4

from src.config import Config


@dataclass(frozen=True)
class RunContext:
    run_id: str
    config_hash: Optional[str] = None
    subcommand: Optional[str] = None


_run_context: ContextVar[Optional[RunContext]] = ContextVar("run_context", default=None)


class RunContextFilter(logging.Filter):
    """Inject the active run context into log records."""

    def filter(self, record: logging.LogRecord) -> bool:  # type: ignore[override]
        context = _run_context.get()
        record.run_id = context.run_id if context else None
        record.config_hash = context.config_hash if context else None
        record.subcommand = context.subcommand if context else None
        return True


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:  # type: ignore[override]
        payload: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "run_id": getattr(record, "run_id", None),
            "config_hash": getattr(record, "config_hash", None),
            "subcommand": getattr(record, "subcommand", None),
        }
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str)


def configure_logging(level: Optional[str] = None, structured: Optional[bool] = None) -> None:
    """Configure global logging once, respecting Config toggles."""
    level = level or Config.LOG_LEVEL
    structured = Config.STRUCTURED_LOGS_ENABLED if structured is None else structured

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    if not structured:
        return

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter())
    handler.addFilter(RunContextFilter())

    # Replace existing handlers to avoid duplicate lines when reconfigured
    root_logger.handlers = [handler]
    root_logger.debug("Structured logging configured.")


@contextmanager
def run_context(config_hash: Optional[str] = None, subcommand: Optional[str] = None) -> Iterator[RunContext]:
    """Bind a run id (and config hash) to every log line emitted inside the block."""
    context = RunContext(run_id=str(uuid4()), config_hash=config_hash, subcommand=subcommand)
    token = _run_context.set(context)
    try:
        yield context
    finally:
        _run_context.reset(token)


def current_run_context() -> Optional[Dict[str, Any]]:
    context = _run_context.get()
    return asdict(context) if context else None
