import numpy as np
import pytest

from src.config import Config
from src.errors import CapacityError, NumericDiagnosticError
from src.models import PumpTemplate
from src.observability.metrics import get_metrics_snapshot
from src.physics import dynamics, geometry
from src.physics.couplings import coupling_tensors
from src.physics.hilbert import pure_density


def _counter(name):
    entries = get_metrics_snapshot(include_timings=False)["counters"].get(name, [])
    return sum(entry["value"] for entry in entries)


@pytest.fixture
def chain():
    """Three-atom chain at λ₀/10; coherent couplings stay well resolved by dt = 1e-3"""
    return geometry.make_chain(3, 0.1)


def _single_atom_decay(single_atom, convention, t_final, dt, method="rk4"):
    model = dynamics.SystemModel.build(single_atom, convention)
    rho0 = pure_density(model.basis.product_state("e1"))
    return dynamics.evolve(rho0, model.hamiltonian, model.dissipator, t_final, dt, method=method)


def test_single_atom_decays_exponentially(single_atom):
    trajectory = _single_atom_decay(single_atom, "population-rate", 1.0, 1e-3)
    assert trajectory.times[-1] == pytest.approx(1.0)
    assert trajectory.series("population_1")[-1] == pytest.approx(np.exp(-1.0), abs=1e-6)
    assert trajectory.series("excitation_number")[0] == pytest.approx(1.0)


def test_literal_convention_single_atom_decays_at_twice_the_rate(single_atom):
    trajectory = _single_atom_decay(single_atom, "paper-literal", 1.0, 1e-3)
    assert trajectory.series("population_1")[-1] == pytest.approx(np.exp(-2.0), abs=1e-6)


def test_rk4_error_shrinks_at_fourth_order(single_atom):
    coarse = _single_atom_decay(single_atom, "population-rate", 1.0, 0.2)
    fine = _single_atom_decay(single_atom, "population-rate", 1.0, 0.1)
    coarse_error = abs(coarse.series("population_1")[-1] - np.exp(-1.0))
    fine_error = abs(fine.series("population_1")[-1] - np.exp(-1.0))
    assert 8 <= coarse_error / fine_error <= 32


def test_trace_and_positivity_diagnostics_are_recorded(chain):
    trajectory = dynamics.decay_experiment(chain, "dark", 0.5, dt=1e-3, samples=10)
    assert np.allclose(trajectory.series("trace"), 1.0, atol=1e-7)
    assert trajectory.series("min_eigenvalue").min() > -1e-9
    assert trajectory.metadata["steps"] == 500
    assert trajectory.metadata["initial"] == "dark"
    assert len(trajectory.times) == 11


def test_excitations_are_conserved_without_dissipation(triangle):
    tensors = coupling_tensors(triangle).without_dissipation()
    model = dynamics.SystemModel.build(triangle, tensors=tensors)
    trajectory = dynamics.decay_experiment(triangle, "product-unpolarized", 1.0, dt=1e-3, samples=20, model=model)
    assert np.allclose(trajectory.series("excitation_number"), 2.0, atol=1e-9)
    assert np.allclose(trajectory.series("population_2"), 1.0, atol=1e-9)


def test_triple_excited_state_starts_in_top_manifold(chain):
    trajectory = dynamics.decay_experiment(chain, "triple-excited", 0.2, dt=1e-3, samples=5)
    assert trajectory.series("excitation_number")[0] == pytest.approx(3.0)
    assert trajectory.series("fidelity_initial")[0] == pytest.approx(1.0)
    assert trajectory.series("excitation_number")[-1] < 3.0


def test_dissipative_preparation_starts_inverted_and_fills_ground(chain):
    trajectory = dynamics.dissipative_preparation(chain, 2.0, dt=1e-3, samples=40)
    assert trajectory.series("fidelity_initial")[0] == pytest.approx(1.0)
    assert trajectory.series("fidelity_dark")[0] == pytest.approx(0.0, abs=1e-15)
    ground = trajectory.series("fidelity_ground")
    assert np.all(np.diff(ground) >= -1e-10)
    assert ground[-1] > 0.0
    populations = sum(trajectory.series(f"population_{n}") for n in range(4))
    assert np.allclose(populations, 1.0, atol=1e-7)


def test_dissipative_preparation_needs_fully_inverted_start(chain):
    with pytest.raises(ValueError):
        dynamics.dissipative_preparation(chain, 0.1, initial="e1 e2 g")


def test_named_states():
    space = dynamics.SystemModel.build(geometry.make_chain(3, 0.05)).basis
    unpolarized = dynamics.named_state(space, "product-unpolarized")
    assert unpolarized[space.index_of("e1 e2 g")] == pytest.approx(1 / np.sqrt(2))
    assert unpolarized[space.index_of("e2 e1 g")] == pytest.approx(-1 / np.sqrt(2))
    assert dynamics.named_state(space, "inverted")[space.index_of("e1 e2 e1")] == 1.0
    custom = dynamics.named_state(space, "custom", {"e1 g g": 1, "g g e2": 1j})
    assert np.linalg.norm(custom) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dynamics.named_state(space, "sideways")
    with pytest.raises(ValueError):
        dynamics.named_state(space, "custom")


def test_three_atom_states_are_rejected_for_a_pair(parallel_pair):
    space = dynamics.SystemModel.build(parallel_pair).basis
    with pytest.raises(ValueError):
        dynamics.named_state(space, "inverted")


def test_evolve_rejects_non_positive_times(single_atom):
    model = dynamics.SystemModel.build(single_atom)
    rho0 = pure_density(model.basis.ground_state())
    with pytest.raises(ValueError):
        dynamics.evolve(rho0, model.hamiltonian, model.dissipator, 0.0)
    with pytest.raises(ValueError):
        dynamics.evolve(rho0, model.hamiltonian, model.dissipator, 1.0, dt=-1e-3)


def test_failed_diagnostics_halve_dt_then_give_up(single_atom, monkeypatch):
    monkeypatch.setattr(Config, "TRACE_TOLERANCE", -1.0)
    with pytest.raises(NumericDiagnosticError):
        _single_atom_decay_with_halvings(single_atom, max_halvings=2)
    assert _counter("dt_halvings_total") == 2
    assert _counter("integrations_total") == 0


def _single_atom_decay_with_halvings(single_atom, max_halvings):
    model = dynamics.SystemModel.build(single_atom)
    rho0 = pure_density(model.basis.product_state("e1"))
    return dynamics.evolve(rho0, model.hamiltonian, model.dissipator, 0.1, 1e-2, max_halvings=max_halvings)


def test_halved_dt_is_used_after_a_failure(single_atom, monkeypatch):
    original = dynamics._integrate

    def fail_on_coarse_steps(rho0, equation, t_final, dt, observables, samples, method):
        if dt > 6e-3:
            raise NumericDiagnosticError("forced", dt=dt)
        return original(rho0, equation, t_final, dt, observables, samples, method)

    monkeypatch.setattr(dynamics, "_integrate", fail_on_coarse_steps)
    trajectory = _single_atom_decay_with_halvings(single_atom, max_halvings=3)
    assert trajectory.metadata["dt"] == pytest.approx(5e-3)
    assert trajectory.metadata["requested_dt"] == pytest.approx(1e-2)
    assert _counter("dt_halvings_total") == 1


def test_pump_amplitudes_per_transition_template():
    pump = dynamics.pump_amplitudes(PumpTemplate.PER_TRANSITION, 2.0, 0.3, 0.7)
    expected_phases = np.array([[0.0, 0.0], [0.3, 1.4], [0.6, 1.4]])
    assert np.allclose(pump.eta, 2.0 * np.exp(1j * expected_phases))


def test_pump_amplitudes_per_atom_template_with_reference_phase():
    pump = dynamics.pump_amplitudes("per-atom", 1.5, 0.4, 0.9, reference_phase=0.2)
    assert np.allclose(np.angle(pump.eta[:, 0]), [0.2, 0.4, 0.9])
    assert np.allclose(pump.eta[:, 0], pump.eta[:, 1])
    assert np.allclose(np.abs(pump.eta), 1.5)


def test_per_transition_template_needs_three_v_atoms():
    with pytest.raises(ValueError):
        dynamics.pump_amplitudes("per-transition", 1.0, 0.0, 0.0, n_atoms=2, n_transitions=1)


def test_phase_grid_excludes_endpoint():
    grid = dynamics.phase_grid(41)
    assert len(grid) == 41
    assert grid[0] == 0.0
    assert grid[-1] < 2 * np.pi
    with pytest.raises(ValueError):
        dynamics.phase_grid(1)


def test_sweep_is_invariant_under_a_global_drive_phase(chain):
    model = dynamics.SystemModel.build(chain)
    axes = ([0.0, 2.1], [0.0, 4.0])
    shift = 0.8
    shifted_axes = tuple([value + shift for value in axis] for axis in axes)
    kwargs = dict(dt=1e-3, max_workers=2, model=model)
    base = dynamics.pump_sweep(chain, "per-atom", 8.5, axes, 0.1, "superradiant", **kwargs)
    moved = dynamics.pump_sweep(chain, "per-atom", 8.5, shifted_axes, 0.1, "superradiant", reference_phase=shift, **kwargs)
    assert base.values.shape == (2, 2)
    assert base.values.max() > 1e-3
    assert np.allclose(base.values, moved.values, atol=1e-8)
    assert _counter("sweep_points_total") == 8


def test_sweep_rejects_single_point_axes(chain):
    with pytest.raises(ValueError):
        dynamics.pump_sweep(chain, "per-atom", 1.0, ([0.0], [0.0, 1.0]), 0.1, "dark")


def test_pulsed_run_matches_continuous_run_during_the_pulse(chain):
    comparison = dynamics.pulsed_vs_continuous(
        chain, "per-atom", 8.5, (0.7 * np.pi, 0.7 * np.pi), 0.3, 0.6, "superradiant", dt=1e-3
    )
    times = comparison.continuous.times
    during = times <= 0.3 + 1e-12
    continuous = comparison.continuous.series("fidelity_target")
    pulsed = comparison.pulsed.series("fidelity_target")
    assert continuous[during].max() > 1e-3
    assert np.allclose(continuous[during], pulsed[during], atol=1e-12)
    assert comparison.pulsed.metadata["pulse_duration"] == 0.3
    assert comparison.continuous.metadata["pulse_duration"] is None
    assert all(0.0 <= value <= 1.0 for _, value in comparison.pulsed_peaks)


def test_pulse_longer_than_run_is_rejected(chain):
    with pytest.raises(ValueError):
        dynamics.pulsed_vs_continuous(chain, "per-atom", 1.0, (0.0, 0.0), 1.0, 0.5, "dark")


def test_optimizer_without_drive_stays_at_zero(chain):
    result = dynamics.optimize_phases(
        chain, "per-atom", 0.0, 0.05, "dark", seed_resolution=2, max_evaluations=10, dt=1e-3, max_workers=2
    )
    assert result.value == 0.0
    assert result.grid_best_value == 0.0
    assert result.evaluations >= 4


def test_optimizer_is_never_worse_than_its_grid_seed(chain):
    result = dynamics.optimize_phases(
        chain, "per-atom", 8.5, 0.1, "superradiant", seed_resolution=3, max_evaluations=15, dt=1e-3, max_workers=2
    )
    assert result.grid_best_value > 1e-3
    assert result.value >= result.grid_best_value
    assert all(0.0 <= phase < 2 * np.pi for phase in result.phases)
    assert result.evaluations <= 15 + 9 + 1
    assert _counter("optimizer_evaluations_total") >= 1


def test_propagator_reproduces_single_atom_decay(single_atom):
    trajectory = _single_atom_decay(single_atom, "population-rate", 1.0, 0.1, method="propagator")
    assert trajectory.series("population_1")[-1] == pytest.approx(np.exp(-1.0), abs=1e-12)
    assert trajectory.metadata["integrator"] == "propagator"
    assert _counter("propagator_steps_total") == 10


def test_propagator_agrees_with_rk4_on_a_driven_chain(chain):
    results = {}
    for method in ("rk4", "propagator"):
        model = dynamics.SystemModel.build(chain, integrator=method)
        comparison = dynamics.pulsed_vs_continuous(
            chain, "per-atom", 8.5, (0.5 * np.pi, np.pi), 0.1, 0.2, "superradiant", dt=1e-3, samples=20, model=model
        )
        results[method] = comparison.pulsed.series("fidelity_target")
    assert results["propagator"].max() > 1e-3
    assert np.allclose(results["rk4"], results["propagator"], atol=1e-5)


def test_propagator_refuses_large_spaces(chain, monkeypatch):
    monkeypatch.setattr(Config, "PROPAGATOR_DIMENSION_CAP", 9)
    with pytest.raises(CapacityError):
        dynamics.decay_experiment(chain, "dark", 0.1, model=dynamics.SystemModel.build(chain, integrator="propagator"))


def test_unknown_integrator_is_rejected(single_atom):
    with pytest.raises(ValueError):
        _single_atom_decay(single_atom, "population-rate", 0.1, 1e-2, method="euler")


@pytest.mark.slow
def test_full_default_phase_grid(chain):
    grid = dynamics.phase_grid(Config.GRID_RESOLUTION)
    sweep = dynamics.pump_sweep(chain, "per-atom", 8.5, (grid, grid), 0.1, "superradiant", dt=1e-3)
    assert sweep.values.shape == (len(grid), len(grid))
    assert sweep.values.max() > 1e-3
    assert np.all((sweep.values >= -1e-9) & (sweep.values <= 1 + 1e-9))
    assert _counter("sweep_points_total") == len(grid) ** 2
    _, best = sweep.argmax()
    assert best == pytest.approx(sweep.values.max())


def test_fidelity_of_pure_and_mixed_states():
    up, down = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    plus = (up + 1j * down) / np.sqrt(2)
    assert dynamics.fidelity(pure_density(plus), plus) == pytest.approx(1.0)
    assert dynamics.fidelity(pure_density(up), down) == 0.0
    assert dynamics.fidelity(np.eye(2) / 2, plus) == pytest.approx(0.5)


def test_per_atom_drive_on_a_chain_never_reaches_the_dark_state(chain):
    # equal drive on e1 and e2 plus the chain's e1 <-> e2 symmetry; the dark state is odd under that swap
    sweep = dynamics.pump_sweep(chain, "per-atom", 8.5, ([0.5 * np.pi, 2.1], [np.pi, 4.0]), 0.3, "dark", dt=1e-3)
    assert sweep.values.max() < 1e-10


def test_excitation_number_never_grows_without_a_drive(triangle_system, rng):
    space, _, hamiltonian_matrix, dissipator = triangle_system
    equation = dynamics.MasterEquation(hamiltonian_matrix, dissipator)
    for _ in range(5):
        amplitudes = rng.normal(size=(space.dimension, space.dimension)) + 1j * rng.normal(
            size=(space.dimension, space.dimension)
        )
        rho = amplitudes @ amplitudes.conj().T
        rho /= np.trace(rho)
        drho = equation(rho, equation.free)
        assert float(np.real(np.diag(drho) @ space.excitations)) <= 1e-12


def test_near_field_chain_superradiant_state_decays_fast_and_dark_state_survives():
    chain = geometry.make_chain(3, 0.02)
    model = dynamics.SystemModel.build(chain, integrator="propagator")
    bright = dynamics.decay_experiment(chain, "superradiant", 5.0, samples=500, model=model)
    dark = dynamics.decay_experiment(chain, "dark", 5.0, samples=500, model=model)

    late = bright.times >= 1.5
    assert bright.series("fidelity_initial")[late].max() < 0.01
    assert bright.value_at("fidelity_initial", 0.5) == pytest.approx(0.147, abs=0.03)
    assert dark.value_at("fidelity_initial", 5.0) == pytest.approx(0.6525, abs=0.02)
    assert dark.value_at("fidelity_initial", 5.0) > bright.value_at("fidelity_initial", 0.5)


def test_dissipative_preparation_at_twentieth_wavelength_favours_the_dark_state():
    chain = geometry.make_chain(3, 0.05)
    trajectory = dynamics.dissipative_preparation(chain, 10.0, samples=500)
    dark = trajectory.value_at("fidelity_dark", 5.0)
    bright = trajectory.value_at("fidelity_superradiant", 5.0)
    assert dark > 10 * bright


@pytest.mark.parametrize("distance, max_loss", [(1e-3, 1e-3), (1e-4, 1e-4)])
def test_pair_antisymmetric_state_freezes_at_short_distance(distance, max_loss):
    pair = geometry.make_pair(distance)
    model = dynamics.SystemModel.build(pair, integrator="propagator")
    trajectory = dynamics.decay_experiment(pair, "dark", 10.0, samples=100, model=model)
    loss = 1.0 - trajectory.series("fidelity_initial")[-1]
    assert abs(loss) < max_loss
    assert np.allclose(trajectory.series("trace"), 1.0, atol=1e-4)


def test_propagator_is_not_retried_with_smaller_steps(single_atom, monkeypatch):
    monkeypatch.setattr(Config, "TRACE_TOLERANCE", -1.0)
    with pytest.raises(NumericDiagnosticError, match="roundoff"):
        _single_atom_decay(single_atom, "population-rate", 0.1, 1e-2, method="propagator")
    assert _counter("dt_halvings_total") == 0


def test_rk4_refuses_stiff_runs_up_front():
    pair = geometry.make_pair(1e-4)
    model = dynamics.SystemModel.build(pair, integrator="rk4")
    with pytest.raises(NumericDiagnosticError, match="propagator"):
        dynamics.decay_experiment(pair, "dark", 1.0, model=model)
    assert _counter("rk4_steps_total") == 0
    assert _counter("dt_halvings_total") == 0


@pytest.mark.slow
def test_phase_controlled_drive_is_blockaded_at_fiftieth_wavelength():
    chain = geometry.make_chain(3, 0.02)
    chain_model = dynamics.SystemModel.build(chain, integrator="propagator")
    per_atom = dynamics.pulsed_vs_continuous(
        chain, "per-atom", 8.5, (0.5 * np.pi, np.pi), 0.3, 0.3, "dark", model=chain_model
    )
    assert per_atom.continuous.series("fidelity_target").max() < 1e-10

    per_transition = dynamics.pulsed_vs_continuous(
        chain, "per-transition", 10.0, (0.7 * np.pi, 0.7 * np.pi), 0.3, 0.3, "dark", model=chain_model
    )
    assert per_transition.continuous.value_at("fidelity_target", 0.3) < 0.01

    triangle = geometry.make_triangle(0.02)
    grid = dynamics.phase_grid(Config.SEED_GRID_RESOLUTION)
    sweep = dynamics.pump_sweep(
        triangle,
        "per-atom",
        8.5,
        (grid, grid),
        0.3,
        "superradiant",
        model=dynamics.SystemModel.build(triangle, integrator="propagator"),
    )
    assert sweep.values.max() < 0.01
