# src/services/export_service.py
"""CSV / JSON / DOT writers. Every file carries the run metadata (config hash, version, convention, dt)."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional

import numpy as np
import pandas as pd

from src.models import CascadeGraph, SweepResult, Trajectory
from src.observability import get_metrics_snapshot

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
DETERMINISM_NOTE = "deterministic: no random seeds; concurrent results merged in grid order"


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_to_jsonable(item) for item in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value) if np.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, Mapping):
        return {str(key): _to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(item) for item in value]
    if isinstance(value, Path):
        return value.as_posix()
    return value


def deterministic_metrics() -> Dict[str, Any]:
    """Counters and gauges only; timings vary between runs."""
    snapshot = get_metrics_snapshot(include_timings=False)
    return {"counters": snapshot["counters"], "gauges": snapshot["gauges"]}


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    frame = pd.DataFrame({"t": trajectory.times})
    for name in sorted(trajectory.observables):
        frame[name] = trajectory.observables[name]
    return frame


def sweep_frame(sweep: SweepResult) -> pd.DataFrame:
    names = list(sweep.axes)
    mesh = np.meshgrid(*sweep.axes.values(), indexing="ij")
    frame = pd.DataFrame({name: grid.ravel() for name, grid in zip(names, mesh)})
    frame["value"] = sweep.values.ravel()
    return frame


def cascade_payload(graph: CascadeGraph) -> Dict[str, Any]:
    return {
        "nodes": [
            {
                "id": node.node_id,
                "manifold": node.manifold,
                "position": node.position,
                "energy": node.energy,
                "total_rate": node.total_rate,
                "dominant_labels": list(node.dominant_labels),
            }
            for node in graph.nodes
        ],
        "edges": [{"source": edge.source, "target": edge.target, "rate": edge.rate} for edge in graph.edges],
        "rate_balance_error": graph.rate_balance_error(),
    }


def cascade_dot(graph: CascadeGraph, name: str = "cascade", min_rate: float = 0.0) -> str:
    lines = [f'digraph "{name}" {{', "  rankdir=TB;"]
    for manifold in sorted({node.manifold for node in graph.nodes}, reverse=True):
        members = " ".join(f'"{node.node_id}"' for node in graph.nodes if node.manifold == manifold)
        lines.append(f"  {{ rank=same; {members} }}")
    for node in graph.nodes:
        label = "\\n".join([node.node_id, f"E={node.energy:.6g}", f"rate={node.total_rate:.6g}"])
        lines.append(f'  "{node.node_id}" [label="{label}"];')
    for edge in graph.edges:
        if edge.rate > min_rate:
            lines.append(f'  "{edge.source}" -> "{edge.target}" [label="{edge.rate:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dump_matrix(path: str | Path, matrix: np.ndarray) -> Path:
    """Plain-text dump; complex matrices interleave real and imaginary columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.asarray(matrix)
    if np.iscomplexobj(matrix) and np.any(matrix.imag):
        table = np.empty((matrix.shape[0], 2 * matrix.shape[1]))
        table[:, 0::2] = matrix.real
        table[:, 1::2] = matrix.imag
        header = f"complex {matrix.shape[0]}x{matrix.shape[1]}; columns alternate real, imag"
    else:
        table = np.real(matrix)
        header = f"real {matrix.shape[0]}x{matrix.shape[1]}"
    np.savetxt(path, table, fmt=FLOAT_FORMAT, header=header)
    return path


class ExportService:
    """Writes run outputs under one directory with a shared file prefix and metadata block."""

    def __init__(self, output_dir: str | Path, prefix: str, metadata: Optional[Dict[str, Any]] = None):
        self.output_dir = Path(output_dir)
        self.prefix = prefix
        self.metadata = dict(metadata or {})
        self.metadata.setdefault("determinism", DETERMINISM_NOTE)
        self.logger = logging.getLogger(__name__)

    def path_for(self, suffix: str, extension: str) -> Path:
        name = f"{self.prefix}_{suffix}" if suffix else self.prefix
        return self.output_dir / f"{name}.{extension}"

    def _ensure_dir(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def write_table(self, frame: pd.DataFrame, suffix: str = "", extra: Optional[Dict[str, Any]] = None) -> Path:
        """CSV preceded by `# key: value` metadata lines."""
        self._ensure_dir()
        path = self.path_for(suffix, "csv")
        metadata = {**self.metadata, **(extra or {})}
        header = "".join(f"# {key}: {json.dumps(_to_jsonable(value), sort_keys=True)}\n" for key, value in sorted(metadata.items()))
        body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        path.write_text(header + body, encoding="utf-8")
        self.logger.info("Wrote %s (%d rows)", path, len(frame))
        return path

    def write_json(self, payload: Mapping[str, Any], suffix: str = "", extra: Optional[Dict[str, Any]] = None) -> Path:
        self._ensure_dir()
        path = self.path_for(suffix, "json")
        metadata = {**self.metadata, **(extra or {}), "metrics": deterministic_metrics()}
        document = {"metadata": _to_jsonable(metadata), "data": _to_jsonable(payload)}
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.logger.info("Wrote %s", path)
        return path

    def write_frame(self, frame: pd.DataFrame, fmt: str, suffix: str = "", extra: Optional[Dict[str, Any]] = None) -> Path:
        if fmt == "json":
            return self.write_json({column: frame[column].to_numpy() for column in frame.columns}, suffix, extra)
        return self.write_table(frame, suffix, extra)

    def write_trajectory(self, trajectory: Trajectory, fmt: str, suffix: str = "", extra: Optional[Dict[str, Any]] = None) -> Path:
        return self.write_frame(trajectory_frame(trajectory), fmt, suffix, {**trajectory.metadata, **(extra or {})})

    def write_sweep(self, sweep: SweepResult, fmt: str, suffix: str = "", extra: Optional[Dict[str, Any]] = None) -> Path:
        return self.write_frame(sweep_frame(sweep), fmt, suffix, {**sweep.metadata, **(extra or {})})

    def write_cascade(self, graph: CascadeGraph, summary: Iterable[Mapping[str, Any]], extra: Optional[Dict[str, Any]] = None) -> list[Path]:
        payload = {**cascade_payload(graph), "summary": list(summary)}
        paths = [self.write_json(payload, "cascade", extra)]
        self._ensure_dir()
        dot_path = self.path_for("cascade", "dot")
        dot_path.write_text(cascade_dot(graph, self.prefix), encoding="utf-8")
        paths.append(dot_path)
        self.logger.info("Wrote %s", dot_path)
        return paths
