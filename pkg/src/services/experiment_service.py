# src/services/experiment_service.py
"""Runs one RunConfig end to end: build the system, run the experiment, export the results."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from src import __version__
from src.config import Config
from src.models import Ensemble
from src.observability import increment_counter, timed
from src.physics import dynamics, spectral
from src.physics.couplings import coupling_tensors, kernels
from src.physics.hilbert import Dissipator, basis_for, hamiltonian
from src.services.config_loader import (
    RunConfig,
    build_ensemble,
    custom_amplitudes,
    lowest_rate_ensemble,
    scan_values,
)
from src.services.export_service import ExportService

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class ExperimentService:
    """Service class dispatching a validated RunConfig to the physics layer"""

    def __init__(self, config: RunConfig, exporter: Optional[ExportService] = None):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.exporter = exporter or ExportService(
            config.output_dir,
            config.output.get("prefix", config.name),
            self.metadata(),
        )
        self._handlers: Dict[str, Callable[[], List[Path]]] = {
            "couplings": self.run_couplings,
            "cascade": self.run_cascade,
            "lowest-rates": self.run_lowest_rates,
            "evolve": self.run_evolve,
            "prepare": self.run_prepare,
            "sweep": self.run_sweep,
            "optimize": self.run_optimize,
            "pulse": self.run_pulse,
            "rate-map": self.run_rate_map,
        }

    def metadata(self) -> Dict[str, Any]:
        config = self.config
        metadata: Dict[str, Any] = {
            "name": config.name,
            "subcommand": config.subcommand,
            "config_hash": config.config_hash,
            "version": __version__,
            "convention": config.convention,
            "dt": config.dt,
            "integrator": config.integrator,
        }
        if config.geometry:
            metadata["geometry"] = config.geometry
        return metadata

    def run(self) -> List[Path]:
        subcommand = self.config.subcommand
        self.logger.info("Running %s", subcommand)
        with timed("run_latency_ms", {"subcommand": subcommand}):
            paths = self._handlers[subcommand]()
        increment_counter("runs_total", labels={"subcommand": subcommand})
        self.logger.info("Finished %s: %d file(s) written", subcommand, len(paths))
        return paths

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------
    def _ensemble(self) -> Ensemble:
        return build_ensemble(self.config)

    def _model(self) -> dynamics.SystemModel:
        return dynamics.SystemModel.build(
            self._ensemble(), self.config.convention, self.config.dimension_cap, integrator=self.config.integrator
        )

    @property
    def _format(self) -> str:
        return self.config.output_format

    def _parallel(self, function: Callable[[Any], Any], items: List[Any]) -> List[Any]:
        with ThreadPoolExecutor(max_workers=self.config.max_workers) as pool:
            return list(pool.map(function, items))

    # ------------------------------------------------------------------
    # spectra
    # ------------------------------------------------------------------
    def run_couplings(self) -> List[Path]:
        """Kernel and pair-coupling curves versus k₀r."""
        k0r_values = scan_values(self.config.experiment["scan"])

        def row(k0r: float) -> Dict[str, float]:
            ensemble = build_ensemble(self.config, distance=k0r / TWO_PI)
            tensors = coupling_tensors(ensemble)
            values = kernels(k0r)
            entry = {"k0r": k0r, "P_R": values.p_r, "P_I": values.p_i, "Q_R": values.q_r, "Q_I": values.q_i}
            transitions = range(ensemble.n_transitions)
            for j, jp in product(transitions, transitions):
                entry[f"omega_{j + 1}{jp + 1}"] = float(tensors.omega[0, j, 1, jp])
                entry[f"gamma_{j + 1}{jp + 1}"] = float(tensors.gamma[0, j, 1, jp])
            return entry

        frame = pd.DataFrame(self._parallel(row, list(k0r_values)))
        return [self.exporter.write_frame(frame, self._format, "couplings")]

    def run_cascade(self) -> List[Path]:
        ensemble = self._ensemble()
        space = basis_for(ensemble, self.config.dimension_cap)
        tensors = coupling_tensors(ensemble)
        graph = spectral.cascade_graph(space, ensemble, tensors, self.config.convention, self.config.max_workers)
        summary = self.collective_summary(ensemble)
        extra: Dict[str, Any] = {"manifold_sizes": graph.manifold_sizes()}
        if ensemble.name == "triangle":
            gamma_1, gamma_2 = spectral.triangle_rate_constants(ensemble)
            extra["triangle_rate_constants"] = {"gamma_1": gamma_1, "gamma_2": gamma_2}
        self.logger.info("Cascade rate balance error %.3e", graph.rate_balance_error())
        return self.exporter.write_cascade(graph, summary, extra)

    def collective_summary(self, ensemble: Ensemble) -> List[Dict[str, Any]]:
        """Decay and feeding rates of the dark and superradiant states to every neighbouring eigenstate."""
        space = basis_for(ensemble, self.config.dimension_cap)
        if space.n_atoms != space.n_levels:
            return []
        tensors = coupling_tensors(ensemble)
        dissipator = Dissipator(space, tensors, self.config.convention)
        matrix = hamiltonian(space, ensemble, tensors)
        n_exc = space.n_atoms - 1
        above = spectral.diagonalize(space, matrix, n_exc + 1, dissipator)
        below = spectral.diagonalize(space, matrix, n_exc - 1, dissipator)

        rows = []
        for name, state in (("dark", spectral.dark_state(space)), ("superradiant", spectral.superradiant_state(space))):
            fed_by = {
                f"n{n_exc + 1}.{position}": spectral.feeding_rate(above.full_state(position, space.dimension), state, dissipator)
                for position in range(len(above))
            }
            feeds = {
                f"n{n_exc - 1}.{position}": spectral.feeding_rate(state, below.full_state(position, space.dimension), dissipator)
                for position in range(len(below))
            }
            rows.append(
                {
                    "state": name,
                    "energy": float(np.real(state.conj() @ matrix @ state)),
                    "decay_rate": spectral.decay_rate(state, dissipator),
                    "fed_by": fed_by,
                    "feeds": feeds,
                }
            )
        return rows

    def run_lowest_rates(self) -> List[Path]:
        """Lowest (N−1)-manifold decay rate per geometry versus k₀r."""
        experiment = self.config.experiment
        k0r_values = scan_values(experiment["scan"])
        rate = float(self.config.physics["rate"])
        frame = pd.DataFrame({"k0r": k0r_values})

        for name in experiment["geometries"]:

            def lowest(k0r: float, name: str = name) -> float:
                ensemble = lowest_rate_ensemble(name, k0r / TWO_PI, rate)
                return spectral.lowest_decay_rate(
                    ensemble, ensemble.n_atoms - 1, self.config.convention, self.config.dimension_cap
                )

            frame[name] = self._parallel(lowest, list(k0r_values))
            if name == "pair":
                closed = [spectral.pair_rates(lowest_rate_ensemble("pair", k / TWO_PI, rate), self.config.convention) for k in k0r_values]
                frame["pair_superradiant"] = [symmetric for symmetric, _ in closed]
                frame["pair_subradiant"] = [antisymmetric for _, antisymmetric in closed]
            increment_counter("sweep_points_total", len(k0r_values))

        return [self.exporter.write_frame(frame, self._format, "lowest_rates")]

    def run_rate_map(self) -> List[Path]:
        experiment = self.config.experiment
        sweep = spectral.lowest_rate_map(
            experiment["configuration"],
            scan_values(experiment["scan"]),
            scan_values(experiment["scan_b"]),
            n_exc=int(experiment.get("n_exc", 2)),
            convention=self.config.convention,
            max_workers=self.config.max_workers,
        )
        return [self.exporter.write_sweep(sweep, self._format, "rate_map")]

    # ------------------------------------------------------------------
    # dynamics
    # ------------------------------------------------------------------
    def run_evolve(self) -> List[Path]:
        experiment = self.config.experiment
        model = self._model()
        trajectory = dynamics.decay_experiment(
            model.ensemble,
            experiment["initial"],
            experiment["t_final"],
            dt=self.config.dt,
            custom=custom_amplitudes(experiment),
            samples=experiment.get("samples", 200),
            model=model,
        )
        return [self.exporter.write_trajectory(trajectory, self._format, "decay")]

    def run_prepare(self) -> List[Path]:
        experiment = self.config.experiment
        model = self._model()
        trajectory = dynamics.dissipative_preparation(
            model.ensemble,
            experiment["t_final"],
            initial=experiment.get("initial", dynamics.INVERTED_LABEL),
            dt=self.config.dt,
            samples=experiment.get("samples", 200),
            model=model,
        )
        return [self.exporter.write_trajectory(trajectory, self._format, "preparation")]

    def run_sweep(self) -> List[Path]:
        experiment = self.config.experiment
        model = self._model()
        grid = dynamics.phase_grid(int(experiment.get("resolution", Config.GRID_RESOLUTION)))
        sweep = dynamics.pump_sweep(
            model.ensemble,
            experiment["template"],
            experiment["eta"],
            (grid, grid),
            experiment["t_final"],
            experiment["target"],
            dt=self.config.dt,
            reference_phase=float(experiment.get("reference_phase", 0.0)),
            max_workers=self.config.max_workers,
            model=model,
        )
        best, value = sweep.argmax()
        self.logger.info("Sweep maximum %.4f at phases %s", value, best)
        return [self.exporter.write_sweep(sweep, self._format, "sweep", {"best_phases": best, "best_value": value})]

    def run_optimize(self) -> List[Path]:
        experiment = self.config.experiment
        model = self._model()
        result = dynamics.optimize_phases(
            model.ensemble,
            experiment["template"],
            experiment["eta"],
            experiment["t_final"],
            experiment["target"],
            seed_resolution=experiment.get("seed_resolution"),
            max_evaluations=experiment.get("max_evaluations"),
            dt=self.config.dt,
            max_workers=self.config.max_workers,
            model=model,
        )
        frame = pd.DataFrame(
            [
                {
                    "phi1": result.phases[0],
                    "phi2": result.phases[1],
                    "value": result.value,
                    "grid_phi1": result.grid_best_phases[0],
                    "grid_phi2": result.grid_best_phases[1],
                    "grid_value": result.grid_best_value,
                    "evaluations": result.evaluations,
                    "budget_exhausted": result.budget_exhausted,
                }
            ]
        )
        extra = {"template": experiment["template"], "eta": experiment["eta"], "target": experiment["target"]}
        return [self.exporter.write_frame(frame, self._format, "optimize", extra)]

    def run_pulse(self) -> List[Path]:
        experiment = self.config.experiment
        model = self._model()
        comparison = dynamics.pulsed_vs_continuous(
            model.ensemble,
            experiment["template"],
            experiment["eta"],
            tuple(experiment["phases"]),  # type: ignore[arg-type]
            experiment["pulse_duration"],
            experiment["t_final"],
            experiment["target"],
            dt=self.config.dt,
            samples=experiment.get("samples"),
            model=model,
        )
        comparison.pulsed.metadata["peaks"] = comparison.pulsed_peaks
        return [
            self.exporter.write_trajectory(comparison.continuous, self._format, "continuous"),
            self.exporter.write_trajectory(comparison.pulsed, self._format, "pulsed"),
        ]
