"""Master-equation time evolution and the decay / preparation / phase-control experiments.

dρ/dt = i[ρ, H + H_pump] + L[ρ], integrated with fixed steps in the frame
rotating at ω₀ with a resonant pump. Steps are RK4 by default; the
"propagator" integrator applies exp(𝓛·dt) of the Liouvillian superoperator,
which stays exact when near-field couplings make the coherences oscillate
much faster than 1/dt.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize, signal
from tenacity import RetryCallState, Retrying, retry_if_exception_type, stop_after_attempt, wait_none

from src.config import INTEGRATORS, PROPAGATOR, RK4, Config
from src.errors import CapacityError, NumericDiagnosticError
from src.models import (
    CouplingTensors,
    Ensemble,
    InitialState,
    OptimizationResult,
    PumpConfig,
    PumpTemplate,
    SweepResult,
    Trajectory,
)
from src.observability import increment_counter, timed
from src.physics.couplings import coupling_tensors
from src.physics.hilbert import (
    Dissipator,
    ManifoldBasis,
    basis_for,
    hamiltonian,
    pump_hamiltonian,
    pure_density,
    validate_density,
)
from src.physics.spectral import dark_state, superradiant_state

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
INVERTED_LABEL = "e1 e2 e1"

Target = Union[str, np.ndarray]


@dataclass
class SystemModel:
    """Basis, couplings, Hamiltonian, and dissipator of one ensemble."""

    ensemble: Ensemble
    basis: ManifoldBasis
    tensors: CouplingTensors
    hamiltonian: np.ndarray
    dissipator: Dissipator
    convention: str
    integrator: str = RK4

    @classmethod
    def build(
        cls,
        ensemble: Ensemble,
        convention: Optional[str] = None,
        dimension_cap: Optional[int] = None,
        tensors: Optional[CouplingTensors] = None,
        integrator: Optional[str] = None,
    ) -> "SystemModel":
        space = basis_for(ensemble, dimension_cap)
        tensors = tensors if tensors is not None else coupling_tensors(ensemble)
        dissipator = Dissipator(space, tensors, convention)
        return cls(
            ensemble=ensemble,
            basis=space,
            tensors=tensors,
            hamiltonian=hamiltonian(space, ensemble, tensors),
            dissipator=dissipator,
            convention=dissipator.convention,
            integrator=integrator or Config.INTEGRATOR,
        )

    def state(self, name: Target, custom: Optional[Mapping[str, complex]] = None) -> np.ndarray:
        if isinstance(name, np.ndarray):
            return name.astype(complex)
        return named_state(self.basis, name, custom)


# ----------------------------------------------------------------------
# States and observables
# ----------------------------------------------------------------------
def named_state(space: ManifoldBasis, name: str, custom: Optional[Mapping[str, complex]] = None) -> np.ndarray:
    try:
        kind = InitialState(name)
    except ValueError as exc:
        raise ValueError(f"Unknown state name {name!r}; expected one of {[s.value for s in InitialState]}") from exc

    if kind == InitialState.DARK:
        return dark_state(space)
    if kind == InitialState.SUPERRADIANT:
        return superradiant_state(space)
    if kind == InitialState.GROUND:
        return space.ground_state()
    if kind == InitialState.CUSTOM:
        if not custom:
            raise ValueError("Custom state needs a mapping of labels to amplitudes")
        return space.state(custom)

    if space.n_atoms != 3 or space.n_levels != 3:
        raise ValueError(f"State {name!r} is defined for three atoms with two transitions")
    if kind == InitialState.UNPOLARIZED:
        return space.state({"e1 e2 g": 1.0, "e2 e1 g": -1.0})
    if kind == InitialState.TRIPLE_EXCITED:
        return space.state({"e1 e2 e1": 1.0, "e2 e1 e1": -1.0})
    return space.product_state(INVERTED_LABEL)


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """⟨target|ρ|target⟩."""
    target = np.asarray(target, dtype=complex)
    return float(np.real(target.conj() @ rho @ target))


# ----------------------------------------------------------------------
# Integrator
# ----------------------------------------------------------------------
class MasterEquation:
    """Right-hand side i[ρ, H] + L[ρ] with an optional pump switched off at `pump_until`."""

    def __init__(
        self,
        hamiltonian_matrix: np.ndarray,
        dissipator: Dissipator,
        pump_matrix: Optional[np.ndarray] = None,
        pump_until: Optional[float] = None,
    ) -> None:
        loss = dissipator.anticommutator
        self.free = hamiltonian_matrix - 1j * loss
        self.driven = self.free + pump_matrix if pump_matrix is not None else self.free
        self.pump_until = pump_until
        if dissipator.jumps:
            self.jump_rates = np.array([2.0 * value for value, _ in dissipator.jumps]).reshape(-1, 1, 1)
            self.jump_ops = np.stack([operator for _, operator in dissipator.jumps])
            self.jump_ops_dagger = np.conj(np.transpose(self.jump_ops, (0, 2, 1)))
        else:
            self.jump_ops = None

    def generator(self, time: float) -> np.ndarray:
        if self.pump_until is not None and time >= self.pump_until:
            return self.free
        return self.driven

    def __call__(self, rho: np.ndarray, effective: np.ndarray) -> np.ndarray:
        drho = -1j * (effective @ rho) + 1j * (rho @ effective.conj().T)
        if self.jump_ops is not None:
            drho += np.sum(self.jump_rates * (self.jump_ops @ rho @ self.jump_ops_dagger), axis=0)
        return drho

    def superoperator(self, effective: np.ndarray) -> np.ndarray:
        """Matrix of the right-hand side acting on row-major vec(ρ)."""
        identity = np.eye(effective.shape[0])
        liouvillian = -1j * np.kron(effective, identity) + 1j * np.kron(identity, effective.conj())
        if self.jump_ops is not None:
            for rate, operator in zip(self.jump_rates.ravel(), self.jump_ops):
                liouvillian += rate * np.kron(operator, operator.conj())
        return liouvillian


def rk4_step(equation: MasterEquation, rho: np.ndarray, effective: np.ndarray, dt: float) -> np.ndarray:
    k1 = equation(rho, effective)
    k2 = equation(rho + 0.5 * dt * k1, effective)
    k3 = equation(rho + 0.5 * dt * k2, effective)
    k4 = equation(rho + dt * k3, effective)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


Observable = Callable[[np.ndarray], float]


def default_observables(space: ManifoldBasis, targets: Optional[Mapping[str, np.ndarray]] = None) -> Dict[str, Observable]:
    observables: Dict[str, Observable] = {}
    for name, vector in (targets or {}).items():
        observables[f"fidelity_{name}"] = lambda rho, vector=vector: fidelity(rho, vector)
    for n in range(space.n_atoms + 1):
        indices = space.block(n)
        observables[f"population_{n}"] = lambda rho, indices=indices: float(np.real(np.sum(np.diag(rho)[indices])))
    excitations = space.excitations
    observables["excitation_number"] = lambda rho: float(np.real(np.diag(rho) @ excitations))
    return observables


def _integrate(
    rho0: np.ndarray,
    equation: MasterEquation,
    t_final: float,
    dt: float,
    observables: Mapping[str, Observable],
    samples: Optional[int],
    method: str = RK4,
) -> Trajectory:
    n_steps = max(1, int(round(t_final / dt)))
    step = t_final / n_steps
    stride = 1 if samples is None else max(1, n_steps // max(1, samples))
    sample_steps = set(range(0, n_steps + 1, stride)) | {n_steps}

    # per-step roundoff of each cached propagator, eps·‖𝓛·dt‖₁
    roundoff: Dict[int, float] = {}

    if method == PROPAGATOR:
        propagators: Dict[int, np.ndarray] = {}

        def advance(rho: np.ndarray, effective: np.ndarray) -> np.ndarray:
            key = id(effective)
            if key not in propagators:
                exponent = equation.superoperator(effective) * step
                propagators[key] = linalg.expm(exponent)
                roundoff[key] = float(np.finfo(float).eps * np.linalg.norm(exponent, 1))
            return (propagators[key] @ rho.reshape(-1)).reshape(rho.shape)

    else:

        def advance(rho: np.ndarray, effective: np.ndarray) -> np.ndarray:
            return rk4_step(equation, rho, effective, step)

    # the propagator is exact up to roundoff, so its tolerances grow with the accumulated budget
    accumulated = 0.0
    times: list[float] = []
    series: Dict[str, list[float]] = {name: [] for name in observables}
    series["trace"] = []
    series["min_eigenvalue"] = []

    rho = rho0.astype(complex).copy()
    for index in range(n_steps + 1):
        time = index * step
        trace = float(np.real(np.trace(rho)))
        if abs(trace - 1.0) > Config.TRACE_TOLERANCE + accumulated:
            raise NumericDiagnosticError(f"Trace drifted to {trace:.12f} at t={time:.6g}; {_remedy(method)}", dt=step)
        if index in sample_steps:
            smallest = float(np.linalg.eigvalsh(rho).min())
            if smallest < -(Config.NEGATIVITY_TOLERANCE + accumulated):
                raise NumericDiagnosticError(
                    f"Density matrix eigenvalue {smallest:.3e} at t={time:.6g}; {_remedy(method)}", dt=step
                )
            times.append(time)
            series["trace"].append(trace)
            series["min_eigenvalue"].append(smallest)
            for name, observable in observables.items():
                series[name].append(observable(rho))
        if index == n_steps:
            break
        effective = equation.generator(time + 0.5 * step)
        rho = advance(rho, effective)
        rho = 0.5 * (rho + rho.conj().T)
        accumulated += roundoff.get(id(effective), 0.0)

    increment_counter(f"{method}_steps_total", n_steps)
    return Trajectory(
        times=np.array(times),
        observables={name: np.array(values) for name, values in series.items()},
        metadata={"dt": step, "steps": n_steps, "integrator": method},
        final_state=rho,
    )


def _remedy(method: str) -> str:
    if method == PROPAGATOR:
        return "accumulated roundoff exceeds the tolerance; loosen SIM_TRACE_TOLERANCE or shorten t_final"
    return "use a smaller dt or the propagator integrator"


def _generators(equation: MasterEquation) -> Tuple[np.ndarray, ...]:
    return tuple({id(matrix): matrix for matrix in (equation.free, equation.driven)}.values())


def _coherence_bandwidth(equation: MasterEquation) -> float:
    """Largest |E_a − E_b| over the Hermitian parts of the generators."""
    widths = []
    for effective in _generators(equation):
        energies = np.linalg.eigvalsh(0.5 * (effective + effective.conj().T))
        widths.append(float(energies[-1] - energies[0]))
    return max(widths)


def _spectral_scale(equation: MasterEquation) -> float:
    """Bound on |λ| of the Liouvillian: coherence bandwidth plus twice the fastest loss rate."""
    scales = []
    for effective in _generators(equation):
        energies = np.linalg.eigvalsh(0.5 * (effective + effective.conj().T))
        losses = np.linalg.eigvalsh(0.5j * (effective - effective.conj().T))
        scales.append(float(energies[-1] - energies[0]) + 2.0 * float(np.abs(losses).max()))
    return max(scales)


def _log_halving(retry_state: RetryCallState) -> None:
    error = retry_state.outcome.exception() if retry_state.outcome else None
    increment_counter("dt_halvings_total")
    logger.warning("Integration failed diagnostics (%s); halving dt", error)


def evolve(
    rho0: np.ndarray,
    hamiltonian_matrix: np.ndarray,
    source: Union[Dissipator, CouplingTensors],
    t_final: float,
    dt: Optional[float] = None,
    *,
    pump_matrix: Optional[np.ndarray] = None,
    pump_until: Optional[float] = None,
    observables: Optional[Mapping[str, Observable]] = None,
    samples: Optional[int] = None,
    convention: Optional[str] = None,
    max_halvings: Optional[int] = None,
    method: Optional[str] = None,
) -> Trajectory:
    """Integrate the master equation from ρ₀ up to `t_final`.

    On a diagnostic failure RK4 retries with dt halved, at most `max_halvings`
    times, before the NumericDiagnosticError propagates. RK4 runs whose
    smallest reachable step is still outside the stability region are refused
    before integrating. Propagator runs are never retried.
    """
    dt = Config.DEFAULT_DT if dt is None else dt
    method = method or Config.INTEGRATOR
    if dt <= 0 or t_final <= 0:
        raise ValueError(f"dt and t_final must be positive, got dt={dt}, t_final={t_final}")
    if method not in INTEGRATORS:
        raise ValueError(f"Unknown integrator {method!r}; expected one of {list(INTEGRATORS)}")
    validate_density(rho0)

    if isinstance(source, CouplingTensors):
        n_atoms, n_transitions = source.dims
        source = Dissipator(ManifoldBasis(n_atoms, n_transitions + 1), source, convention)
    if method == PROPAGATOR and source.basis.dimension > Config.PROPAGATOR_DIMENSION_CAP:
        raise CapacityError(source.basis.dimension, Config.PROPAGATOR_DIMENSION_CAP)
    equation = MasterEquation(hamiltonian_matrix, source, pump_matrix, pump_until)
    observables = observables if observables is not None else default_observables(source.basis)
    halvings = Config.MAX_DT_HALVINGS if max_halvings is None else max_halvings

    if method == PROPAGATOR:
        # smaller steps only add roundoff to an exact propagator
        halvings = 0
    else:
        scale = _spectral_scale(equation)
        if dt / 2**halvings * scale > Config.RK4_STABILITY_LIMIT:
            raise NumericDiagnosticError(
                f"RK4 is unstable here: dt·‖𝓛‖ = {dt * scale:.3g} stays above "
                f"{Config.RK4_STABILITY_LIMIT} even after {halvings} halvings; use the propagator integrator",
                dt=dt,
            )
        phase_per_step = dt * _coherence_bandwidth(equation)
        if phase_per_step > Config.RK4_PHASE_LIMIT:
            logger.warning(
                "RK4 step dt=%.3g advances the fastest coherence by %.2f rad; "
                "lower dt or use the propagator integrator",
                dt,
                phase_per_step,
            )

    retryer = Retrying(
        retry=retry_if_exception_type(NumericDiagnosticError),
        stop=stop_after_attempt(1 + halvings),
        wait=wait_none(),
        before_sleep=_log_halving,
        reraise=True,
    )
    with timed("integration_latency_ms", {"integrator": method}):
        for attempt in retryer:
            with attempt:
                step = dt / 2 ** (attempt.retry_state.attempt_number - 1)
                trajectory = _integrate(rho0, equation, t_final, step, observables, samples, method)
    increment_counter("integrations_total")
    trajectory.metadata.update({"t_final": t_final, "convention": source.convention, "requested_dt": dt})
    return trajectory


# ----------------------------------------------------------------------
# Experiments
# ----------------------------------------------------------------------
def decay_experiment(
    ensemble: Ensemble,
    initial: str,
    t_final: float,
    *,
    dt: Optional[float] = None,
    custom: Optional[Mapping[str, complex]] = None,
    convention: Optional[str] = None,
    samples: Optional[int] = 200,
    model: Optional[SystemModel] = None,
) -> Trajectory:
    """Free decay of a named initial state: its fidelity and the manifold populations."""
    model = model or SystemModel.build(ensemble, convention)
    psi = model.state(initial, custom)
    observables = default_observables(model.basis, {"initial": psi})
    trajectory = evolve(
        pure_density(psi),
        model.hamiltonian,
        model.dissipator,
        t_final,
        dt,
        observables=observables,
        samples=samples,
        method=model.integrator,
    )
    trajectory.metadata.update({"experiment": "decay", "initial": initial, "geometry": ensemble.name})
    return trajectory


def dissipative_preparation(
    ensemble: Ensemble,
    t_final: float,
    *,
    initial: str = INVERTED_LABEL,
    dt: Optional[float] = None,
    convention: Optional[str] = None,
    samples: Optional[int] = 200,
    model: Optional[SystemModel] = None,
) -> Trajectory:
    """Decay from a fully inverted product state, tracking dark, superradiant, ground, and initial fractions."""
    model = model or SystemModel.build(ensemble, convention)
    space = model.basis
    start = space.product_state(initial)
    if space.excitations[space.index_of(initial)] != space.n_atoms:
        raise ValueError(f"Initial state {initial!r} is not fully inverted")
    targets = {
        "dark": dark_state(space),
        "superradiant": superradiant_state(space),
        "ground": space.ground_state(),
        "initial": start,
    }
    observables = default_observables(space, targets)
    trajectory = evolve(
        pure_density(start),
        model.hamiltonian,
        model.dissipator,
        t_final,
        dt,
        observables=observables,
        samples=samples,
        method=model.integrator,
    )
    trajectory.metadata.update({"experiment": "dissipative-preparation", "initial": initial, "geometry": ensemble.name})
    return trajectory


def pump_amplitudes(
    template: PumpTemplate | str,
    eta: float,
    phi1: float,
    phi2: float,
    n_atoms: int = 3,
    n_transitions: int = 2,
    reference_phase: float = 0.0,
) -> PumpConfig:
    """Drive amplitudes for the per-atom and per-transition phase templates.

    per-atom: atoms 1..3 carry phases (c, φ₁, φ₂) on both transitions.
    per-transition: η¹_j = η, η²₁ = ηe^{iφ₁}, η³₁ = ηe^{2iφ₁}, η²₂ = η³₂ = ηe^{2iφ₂},
    all shifted by the reference phase c.
    """
    template = PumpTemplate(template)
    if template == PumpTemplate.PER_ATOM:
        if n_atoms > 3:
            raise ValueError("The per-atom template addresses at most three atoms")
        phases = np.array([reference_phase, phi1, phi2][:n_atoms])
        eta_matrix = eta * np.exp(1j * phases)[:, None] * np.ones((1, n_transitions))
        return PumpConfig(eta=eta_matrix.astype(complex))

    if n_atoms != 3 or n_transitions != 2:
        raise ValueError("The per-transition template is defined for three atoms with two transitions")
    phases = np.array(
        [
            [0.0, 0.0],
            [phi1, 2.0 * phi2],
            [2.0 * phi1, 2.0 * phi2],
        ]
    )
    return PumpConfig(eta=(eta * np.exp(1j * (phases + reference_phase))).astype(complex))


def _final_fidelity(
    model: SystemModel,
    template: PumpTemplate | str,
    eta: float,
    phases: Tuple[float, float],
    t_final: float,
    target: np.ndarray,
    dt: Optional[float],
    reference_phase: float = 0.0,
) -> float:
    pump = pump_amplitudes(template, eta, phases[0], phases[1], model.basis.n_atoms, model.basis.n_transitions, reference_phase)
    trajectory = evolve(
        pure_density(model.basis.ground_state()),
        model.hamiltonian,
        model.dissipator,
        t_final,
        dt,
        pump_matrix=pump_hamiltonian(model.basis, pump),
        observables={"fidelity": lambda rho: fidelity(rho, target)},
        samples=1,
        method=model.integrator,
    )
    return float(trajectory.observables["fidelity"][-1])


def phase_grid(resolution: int) -> np.ndarray:
    """`resolution` equally spaced phases covering [0, 2π)."""
    if resolution < 2:
        raise ValueError("Phase grids need at least two points per axis")
    return np.linspace(0.0, TWO_PI, resolution, endpoint=False)


def pump_sweep(
    ensemble: Ensemble,
    template: PumpTemplate | str,
    eta: float,
    phase_axes: Tuple[Sequence[float], Sequence[float]],
    t_final: float,
    target: Target,
    *,
    dt: Optional[float] = None,
    convention: Optional[str] = None,
    reference_phase: float = 0.0,
    max_workers: Optional[int] = None,
    model: Optional[SystemModel] = None,
) -> SweepResult:
    """Target fidelity after pumping |g…g⟩ for `t_final`, over a (φ₁, φ₂) grid."""
    phi1_axis, phi2_axis = (np.asarray(axis, dtype=float) for axis in phase_axes)
    if len(phi1_axis) < 2 or len(phi2_axis) < 2:
        raise ValueError("Sweep axes need at least two points")
    model = model or SystemModel.build(ensemble, convention)
    target_vector = model.state(target)
    points = [(a, b) for a in phi1_axis for b in phi2_axis]

    def run(point: Tuple[float, float]) -> float:
        value = _final_fidelity(model, template, eta, point, t_final, target_vector, dt, reference_phase)
        increment_counter("sweep_points_total")
        return value

    with timed("sweep_latency_ms"), ThreadPoolExecutor(max_workers=max_workers or Config.MAX_WORKERS) as pool:
        values = list(pool.map(run, points))

    result = SweepResult(
        axes={"phi1": phi1_axis, "phi2": phi2_axis},
        values=np.array(values).reshape(len(phi1_axis), len(phi2_axis)),
        metadata={
            "experiment": "pump-sweep",
            "geometry": ensemble.name,
            "template": PumpTemplate(template).value,
            "eta": eta,
            "t_final": t_final,
            "target": target if isinstance(target, str) else "custom",
            "convention": model.convention,
        },
    )
    best, value = result.argmax()
    logger.info("Pump sweep maximum %.4f at phases %s", value, best)
    return result


@dataclass
class PulseComparison:
    continuous: Trajectory
    pulsed: Trajectory
    pulsed_peaks: list[Tuple[float, float]] = field(default_factory=list)


def pulsed_vs_continuous(
    ensemble: Ensemble,
    template: PumpTemplate | str,
    eta: float,
    phases: Tuple[float, float],
    pulse_duration: float,
    t_final: float,
    target: Target,
    *,
    dt: Optional[float] = None,
    convention: Optional[str] = None,
    samples: Optional[int] = None,
    model: Optional[SystemModel] = None,
) -> PulseComparison:
    """Target fidelity under a continuous pump and under a pump switched off at `pulse_duration`."""
    if pulse_duration > t_final:
        raise ValueError("pulse_duration must not exceed t_final")
    model = model or SystemModel.build(ensemble, convention)
    target_vector = model.state(target)
    pump = pump_amplitudes(template, eta, phases[0], phases[1], model.basis.n_atoms, model.basis.n_transitions)
    pump_matrix = pump_hamiltonian(model.basis, pump)
    rho0 = pure_density(model.basis.ground_state())
    observables = default_observables(model.basis, {"target": target_vector})

    runs = {}
    for label, until in (("continuous", None), ("pulsed", pulse_duration)):
        runs[label] = evolve(
            rho0,
            model.hamiltonian,
            model.dissipator,
            t_final,
            dt,
            pump_matrix=pump_matrix,
            pump_until=until,
            observables=observables,
            samples=samples,
            method=model.integrator,
        )
        runs[label].metadata.update({"experiment": f"{label}-pump", "pulse_duration": until, "geometry": ensemble.name})

    pulsed = runs["pulsed"]
    series = pulsed.observables["fidelity_target"]
    peak_indices, _ = signal.find_peaks(series, prominence=1e-3)
    peaks = [(float(pulsed.times[i]), float(series[i])) for i in peak_indices]
    return PulseComparison(continuous=runs["continuous"], pulsed=pulsed, pulsed_peaks=peaks)


def optimize_phases(
    ensemble: Ensemble,
    template: PumpTemplate | str,
    eta: float,
    t_final: float,
    target: Target,
    *,
    seed_resolution: Optional[int] = None,
    max_evaluations: Optional[int] = None,
    tolerance: float = 1e-4,
    dt: Optional[float] = None,
    convention: Optional[str] = None,
    max_workers: Optional[int] = None,
    model: Optional[SystemModel] = None,
) -> OptimizationResult:
    """Coarse phase grid followed by Nelder-Mead refinement; never worse than the grid."""
    model = model or SystemModel.build(ensemble, convention)
    resolution = seed_resolution or Config.SEED_GRID_RESOLUTION
    budget = max_evaluations or Config.OPTIMIZER_MAX_EVALUATIONS
    grid = phase_grid(resolution)
    coarse = pump_sweep(
        ensemble, template, eta, (grid, grid), t_final, target, dt=dt, max_workers=max_workers, model=model
    )
    (seed_phi1, seed_phi2), seed_value = coarse.argmax()
    target_vector = model.state(target)

    def objective(point: np.ndarray) -> float:
        increment_counter("optimizer_evaluations_total")
        wrapped = tuple(float(x) for x in np.mod(point, TWO_PI))
        return -_final_fidelity(model, template, eta, wrapped, t_final, target_vector, dt)  # type: ignore[arg-type]

    step = TWO_PI / resolution
    simplex = np.array([[seed_phi1, seed_phi2], [seed_phi1 + step / 2, seed_phi2], [seed_phi1, seed_phi2 + step / 2]])
    result = optimize.minimize(
        objective,
        x0=np.array([seed_phi1, seed_phi2]),
        method="Nelder-Mead",
        options={"maxfev": budget, "xatol": tolerance, "fatol": tolerance * 1e-2, "initial_simplex": simplex},
    )
    exhausted = bool(result.nfev >= budget or not result.success)
    if exhausted:
        logger.warning("Phase optimizer stopped after %d evaluations: %s", result.nfev, result.message)

    refined_value = -float(result.fun)
    if refined_value > seed_value:
        phases = tuple(float(x) for x in np.mod(result.x, TWO_PI))
        value = refined_value
    else:
        phases, value = (seed_phi1, seed_phi2), seed_value
    return OptimizationResult(
        phases=phases,  # type: ignore[arg-type]
        value=value,
        grid_best_phases=(seed_phi1, seed_phi2),
        grid_best_value=seed_value,
        evaluations=int(result.nfev) + coarse.values.size,
        budget_exhausted=exhausted,
    )
