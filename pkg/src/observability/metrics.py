"""In-process counters, gauges and wall-time totals for one simulator run."""
from __future__ import annotations

import threading
import time
from collections import defaultdict
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional, Tuple

MetricKey = Tuple[str, Tuple[Tuple[str, str], ...]]


def _labels_tuple(labels: Optional[Dict[str, str]]) -> Tuple[Tuple[str, str], ...]:
    if not labels:
        return ()
    return tuple(sorted((str(k), str(v)) for k, v in labels.items()))


_lock = threading.Lock()
_counters: Dict[MetricKey, float] = defaultdict(float)
_gauges: Dict[MetricKey, float] = {}
# name -> [calls, total ms, slowest ms]
_timings: Dict[MetricKey, list[float]] = {}


def increment_counter(name: str, amount: float = 1.0, labels: Optional[Dict[str, str]] = None) -> None:
    with _lock:
        _counters[(name, _labels_tuple(labels))] += amount


def set_gauge(name: str, value: float, labels: Optional[Dict[str, str]] = None) -> None:
    with _lock:
        _gauges[(name, _labels_tuple(labels))] = value


@contextmanager
def timed(name: str, labels: Optional[Dict[str, str]] = None) -> Iterator[None]:
    """Add the wall time of the block, in milliseconds, to `name`."""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = (time.perf_counter() - start) * 1000.0
        with _lock:
            entry = _timings.setdefault((name, _labels_tuple(labels)), [0, 0.0, 0.0])
            entry[0] += 1
            entry[1] += elapsed
            entry[2] = max(entry[2], elapsed)


def get_metrics_snapshot(include_timings: bool = True) -> Dict[str, Any]:
    """Counters and gauges sorted by name; timings vary between runs and can be left out."""
    snapshot: Dict[str, Any] = {"counters": {}, "gauges": {}}
    with _lock:
        for (name, labels), value in sorted(_counters.items()):
            snapshot["counters"].setdefault(name, []).append({"labels": dict(labels), "value": value})
        for (name, labels), value in sorted(_gauges.items()):
            snapshot["gauges"].setdefault(name, []).append({"labels": dict(labels), "value": value})
        if include_timings:
            snapshot["timings"] = {}
            for (name, labels), (calls, total, slowest) in sorted(_timings.items()):
                snapshot["timings"].setdefault(name, []).append(
                    {"labels": dict(labels), "calls": int(calls), "total_ms": total, "max_ms": slowest}
                )
    return snapshot


def reset_metrics() -> None:
    """Testing helper."""
    with _lock:
        _counters.clear()
        _gauges.clear()
        _timings.clear()
