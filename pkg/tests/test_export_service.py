import json

import numpy as np
import pandas as pd
import pytest

from src.models import CascadeEdge, CascadeGraph, CascadeNode, SweepResult, Trajectory
from src.observability import increment_counter, timed
from src.services.export_service import ExportService, cascade_dot, dump_matrix, sweep_frame

METADATA = {"config_hash": "f" * 64, "version": "0.1.0", "convention": "population-rate", "dt": 1e-3}


@pytest.fixture
def exporter(tmp_path):
    return ExportService(tmp_path / "out", "run", METADATA)


def _small_graph():
    nodes = [
        CascadeNode("n1.0", 1, 0, -0.5, 1.5, ("e1 g",)),
        CascadeNode("n0.0", 0, 0, 0.0, 0.0, ("g g",)),
    ]
    return CascadeGraph(nodes=nodes, edges=[CascadeEdge("n1.0", "n0.0", 1.5)])


def _csv_parts(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = [line for line in lines if line.startswith("# ")]
    body = [line for line in lines if not line.startswith("#")]
    return header, body


def test_csv_starts_with_sorted_metadata_lines(exporter):
    path = exporter.write_table(pd.DataFrame({"k0r": [0.5, 1.0]}), "couplings")
    header, body = _csv_parts(path)
    assert path.name == "run_couplings.csv"
    assert header[0].startswith("# config_hash: ")
    assert any(line.startswith("# determinism: ") for line in header)
    keys = [line[2:].split(":", 1)[0] for line in header]
    assert keys == sorted(keys)
    assert body[0] == "k0r"


def test_floats_are_written_with_round_trip_precision(exporter):
    value = 1.0 / 3.0
    path = exporter.write_table(pd.DataFrame({"x": [value]}))
    _, body = _csv_parts(path)
    assert float(body[1]) == value
    assert body[1] == "0.33333333333333331"


def test_json_output_embeds_only_deterministic_metrics(exporter):
    increment_counter("runs_total", labels={"subcommand": "evolve"})
    with timed("run_latency_ms"):
        pass
    path = exporter.write_json({"rates": np.array([1.0, 2.0]), "amplitude": 1 + 2j}, "rates")
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["data"] == {"rates": [1.0, 2.0], "amplitude": [1.0, 2.0]}
    assert document["metadata"]["config_hash"] == METADATA["config_hash"]
    assert set(document["metadata"]["metrics"]) == {"counters", "gauges"}
    assert document["metadata"]["metrics"]["counters"]["runs_total"][0]["value"] == 1.0


def test_trajectory_columns_are_time_then_sorted_observables(exporter):
    trajectory = Trajectory(
        times=np.array([0.0, 0.5]),
        observables={"trace": np.ones(2), "fidelity_dark": np.array([1.0, 0.5])},
        metadata={"experiment": "decay"},
    )
    path = exporter.write_trajectory(trajectory, "csv", "decay")
    header, body = _csv_parts(path)
    assert body[0] == "t,fidelity_dark,trace"
    assert '# experiment: "decay"' in header


def test_sweep_frame_flattens_grid_in_row_major_order():
    sweep = SweepResult(axes={"phi1": np.array([0.0, 1.0]), "phi2": np.array([0.0, 2.0])}, values=np.arange(4.0).reshape(2, 2))
    frame = sweep_frame(sweep)
    assert list(frame.columns) == ["phi1", "phi2", "value"]
    assert frame.iloc[1].tolist() == [0.0, 2.0, 1.0]
    assert frame.iloc[2].tolist() == [1.0, 0.0, 2.0]


def test_cascade_writes_json_and_dot(exporter):
    paths = exporter.write_cascade(_small_graph(), [{"state": "dark", "decay_rate": 1.5}])
    assert [path.suffix for path in paths] == [".json", ".dot"]
    payload = json.loads(paths[0].read_text(encoding="utf-8"))["data"]
    assert payload["rate_balance_error"] == 0.0
    assert payload["edges"] == [{"source": "n1.0", "target": "n0.0", "rate": 1.5}]
    assert '"n1.0" -> "n0.0"' in paths[1].read_text(encoding="utf-8")


def test_dot_ranks_manifolds_and_hides_small_edges():
    dot = cascade_dot(_small_graph(), "pair", min_rate=2.0)
    assert dot.startswith('digraph "pair" {')
    assert '{ rank=same; "n1.0" }' in dot
    assert "->" not in dot


def test_dump_matrix_interleaves_complex_columns(tmp_path):
    matrix = np.array([[1.0 + 2.0j, 0.0], [0.0, -1.0j]])
    path = dump_matrix(tmp_path / "h.txt", matrix)
    table = np.loadtxt(path)
    assert table.shape == (2, 4)
    assert np.allclose(table[:, 0::2], matrix.real)
    assert np.allclose(table[:, 1::2], matrix.imag)
    assert path.read_text(encoding="utf-8").startswith("# complex 2x2")


def test_dump_matrix_keeps_real_matrices_real(tmp_path):
    path = dump_matrix(tmp_path / "real.txt", np.eye(2))
    assert np.loadtxt(path).shape == (2, 2)
