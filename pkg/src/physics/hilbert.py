"""Product-basis operator algebra: ladder operators, Hamiltonians, and the Lindblad dissipator.

Level 0 of every atom is the ground state g, level j+1 the excited state e_{j+1}
of transition j. Basis states are enumerated with atom 0 as the most significant
digit, so operators agree with Kronecker products taken in atom order.
"""
from __future__ import annotations

import logging
from functools import cached_property
from itertools import product
from math import comb
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import PAPER_LITERAL, POPULATION_RATE, Config
from src.errors import CapacityError, DimensionMismatchError
from src.models import CouplingTensors, Ensemble, PumpConfig
from src.observability import set_gauge

logger = logging.getLogger(__name__)

StateKey = Union[str, Sequence[int]]

_CONVENTION_FACTORS = {POPULATION_RATE: 0.5, PAPER_LITERAL: 1.0}

# Ω enters H with this sign; the antisymmetric collective state is then the lowest-lying one.
# +1 mirrors the rotating-frame spectrum and puts it on top instead.
COHERENT_SIGN = -1.0


def convention_factor(convention: Optional[str] = None) -> float:
    """Scale applied to Γ inside the dissipator.

    The population-rate convention halves Γ so an isolated excited level decays
    as exp(-γt); the paper-literal form decays at 2γ.
    """
    convention = convention or Config.LINDBLAD_CONVENTION
    try:
        return _CONVENTION_FACTORS[convention]
    except KeyError as exc:
        raise ValueError(f"Unknown Lindblad convention {convention!r}") from exc


class ManifoldBasis:
    """Enumeration of the M^N product states grouped by excitation number."""

    def __init__(self, n_atoms: int, n_levels: int, dimension_cap: Optional[int] = None) -> None:
        if n_atoms < 1 or n_levels < 2:
            raise ValueError(f"Need at least one atom and two levels, got N={n_atoms}, M={n_levels}")
        cap = Config.DIMENSION_CAP if dimension_cap is None else dimension_cap
        dimension = n_levels ** n_atoms
        if dimension > cap:
            logger.warning("Refusing basis of dimension %d (cap %d)", dimension, cap)
            raise CapacityError(dimension, cap)

        self.n_atoms = n_atoms
        self.n_levels = n_levels
        self.dimension = dimension
        self.states = np.array(list(product(range(n_levels), repeat=n_atoms)), dtype=int).reshape(dimension, n_atoms)
        self.place_values = n_levels ** np.arange(n_atoms - 1, -1, -1)
        self.excitations = np.count_nonzero(self.states, axis=1)
        self.blocks: Dict[int, np.ndarray] = {
            n: np.flatnonzero(self.excitations == n) for n in range(n_atoms + 1)
        }
        set_gauge("hilbert_dimension", dimension)

    @property
    def n_transitions(self) -> int:
        return self.n_levels - 1

    def block(self, n_exc: int) -> np.ndarray:
        if n_exc not in self.blocks:
            raise ValueError(f"No manifold with {n_exc} excitations for {self.n_atoms} atoms")
        return self.blocks[n_exc]

    def block_sizes(self) -> Dict[int, int]:
        return {n: len(indices) for n, indices in self.blocks.items()}

    @staticmethod
    def expected_block_size(n_atoms: int, n_levels: int, n_exc: int) -> int:
        return comb(n_atoms, n_exc) * (n_levels - 1) ** n_exc

    # ------------------------------------------------------------------
    # Labels and states
    # ------------------------------------------------------------------
    def label(self, index: int) -> str:
        return " ".join("g" if level == 0 else f"e{level}" for level in self.states[index])

    def index_of(self, key: StateKey) -> int:
        levels = _parse_levels(key) if isinstance(key, str) else list(key)
        if len(levels) != self.n_atoms or any(not 0 <= level < self.n_levels for level in levels):
            raise ValueError(f"State {key!r} does not fit {self.n_atoms} atoms with {self.n_levels} levels")
        return int(np.dot(levels, self.place_values))

    def product_state(self, key: StateKey) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=complex)
        vector[self.index_of(key)] = 1.0
        return vector

    def state(self, amplitudes: Mapping[StateKey, complex]) -> np.ndarray:
        """Normalized superposition of labelled product states, e.g. {"e1 e2 g": 1, "e2 e1 g": -1}."""
        vector = np.zeros(self.dimension, dtype=complex)
        for key, amplitude in amplitudes.items():
            vector[self.index_of(key)] += complex(amplitude)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ValueError("State has zero norm")
        return vector / norm

    def ground_state(self) -> np.ndarray:
        return self.product_state([0] * self.n_atoms)

    def restrict(self, operator: np.ndarray, n_exc: int) -> np.ndarray:
        indices = self.block(n_exc)
        return operator[np.ix_(indices, indices)]

    def excitation_operator(self) -> np.ndarray:
        return np.diag(self.excitations.astype(complex))

    def manifold_projector_diagonal(self, n_exc: int) -> np.ndarray:
        return (self.excitations == n_exc).astype(float)

    # ------------------------------------------------------------------
    # Ladder operators
    # ------------------------------------------------------------------
    def transfer_indices(self, i: int, j: int, k: int, jp: int) -> Tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of the unit entries of σ_j^{i+} σ_{j'}^{k-}."""
        self._check_indices(i, j)
        self._check_indices(k, jp)
        if i == k:
            cols = np.flatnonzero(self.states[:, i] == jp + 1)
            rows = cols + (j - jp) * self.place_values[i]
        else:
            cols = np.flatnonzero((self.states[:, k] == jp + 1) & (self.states[:, i] == 0))
            rows = cols - (jp + 1) * self.place_values[k] + (j + 1) * self.place_values[i]
        return rows, cols

    def lowering_indices(self, i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of the unit entries of σ_j^{i-}."""
        self._check_indices(i, j)
        cols = np.flatnonzero(self.states[:, i] == j + 1)
        rows = cols - (j + 1) * self.place_values[i]
        return rows, cols

    @cached_property
    def lowering_operators(self) -> Tuple[np.ndarray, ...]:
        """σ_j^{i-} for flat index a = i·(M-1) + j, matching CouplingTensors matrices."""
        return tuple(sigma_minus(self, i, j) for i in range(self.n_atoms) for j in range(self.n_transitions))

    def _check_indices(self, atom: int, transition: int) -> None:
        if not 0 <= atom < self.n_atoms:
            raise IndexError(f"Atom index {atom} out of range for {self.n_atoms} atoms")
        if not 0 <= transition < self.n_transitions:
            raise IndexError(f"Transition index {transition} out of range for {self.n_transitions} transitions")


def _parse_levels(label: str) -> list[int]:
    levels = []
    for token in label.replace(",", " ").split():
        token = token.strip().lower()
        if token == "g":
            levels.append(0)
        elif token.startswith("e") and token[1:].isdigit():
            levels.append(int(token[1:]))
        else:
            raise ValueError(f"Unrecognized level token {token!r} in {label!r}")
    return levels


def basis(n_atoms: int, n_levels: int, dimension_cap: Optional[int] = None) -> ManifoldBasis:
    return ManifoldBasis(n_atoms, n_levels, dimension_cap)


def basis_for(ensemble: Ensemble, dimension_cap: Optional[int] = None) -> ManifoldBasis:
    return ManifoldBasis(ensemble.n_atoms, ensemble.n_levels, dimension_cap)


def sigma_minus(basis: ManifoldBasis, i: int, j: int) -> np.ndarray:
    """Lowering operator of transition j (0-based) on atom i."""
    rows, cols = basis.lowering_indices(i, j)
    operator = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    operator[rows, cols] = 1.0
    return operator


def sigma_plus(basis: ManifoldBasis, i: int, j: int) -> np.ndarray:
    return sigma_minus(basis, i, j).T.copy()


def _check_dimensions(basis: ManifoldBasis, tensors: CouplingTensors, ensemble: Optional[Ensemble] = None) -> None:
    if tensors.dims != (basis.n_atoms, basis.n_transitions):
        raise DimensionMismatchError(
            f"Coupling tensors {tensors.dims} do not match basis ({basis.n_atoms}, {basis.n_transitions})"
        )
    if ensemble is not None and (ensemble.n_atoms, ensemble.n_transitions) != tensors.dims:
        raise DimensionMismatchError("Ensemble and coupling tensors disagree on dimensions")


def pair_operator(basis: ManifoldBasis, weights: np.ndarray, include_same_atom: bool) -> np.ndarray:
    """Σ_ab w_ab σ_a^+ σ_b^- for a weight matrix over flat transition indices."""
    operator = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    n_transitions = basis.n_transitions
    for i, j, k, jp in product(range(basis.n_atoms), range(n_transitions), range(basis.n_atoms), range(n_transitions)):
        if i == k and not include_same_atom:
            continue
        weight = weights[i * n_transitions + j, k * n_transitions + jp]
        if weight == 0:
            continue
        rows, cols = basis.transfer_indices(i, j, k, jp)
        operator[rows, cols] += weight
    return operator


def hamiltonian(
    basis: ManifoldBasis,
    ensemble: Ensemble,
    tensors: CouplingTensors,
    *,
    rotating_frame: bool = True,
    omega0: float = 1.0,
    coherent_sign: float = COHERENT_SIGN,
) -> np.ndarray:
    """Effective Hamiltonian Σ ω_j σ⁺σ⁻ + s·Σ_{i≠k} Ω σ⁺σ⁻ with s = `coherent_sign`.

    `omega0` is ω₀ expressed in Γ_ref; in the rotating frame only detunings from
    the mean transition frequency remain on the diagonal.
    """
    _check_dimensions(basis, tensors, ensemble)
    frequencies = ensemble.frequencies()
    if rotating_frame:
        frequencies = frequencies - frequencies.mean()
    energies = omega0 * frequencies

    diagonal = np.zeros(basis.dimension)
    for i in range(basis.n_atoms):
        levels = basis.states[:, i]
        excited = levels > 0
        diagonal[excited] += energies[i, levels[excited] - 1]

    operator = pair_operator(basis, coherent_sign * tensors.omega_matrix(), include_same_atom=False)
    operator[np.diag_indices(basis.dimension)] += diagonal
    return operator


def hamiltonian_block(
    basis: ManifoldBasis,
    ensemble: Ensemble,
    tensors: CouplingTensors,
    n_exc: int,
    **kwargs,
) -> np.ndarray:
    """Hamiltonian restricted to one excitation manifold."""
    return basis.restrict(hamiltonian(basis, ensemble, tensors, **kwargs), n_exc)


def pump_hamiltonian(basis: ManifoldBasis, pump: PumpConfig) -> np.ndarray:
    """Σ η σ⁺ + conj(η) σ⁻, Hermitian by construction."""
    if pump.eta.shape != (basis.n_atoms, basis.n_transitions):
        raise DimensionMismatchError(
            f"Pump shape {pump.eta.shape} does not match ({basis.n_atoms}, {basis.n_transitions})"
        )
    operator = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    for i, j in product(range(basis.n_atoms), range(basis.n_transitions)):
        eta = complex(pump.eta[i, j])
        if eta == 0:
            continue
        rows, cols = basis.lowering_indices(i, j)
        operator[cols, rows] += eta
        operator[rows, cols] += np.conj(eta)
    if pump.detuning:
        operator -= pump.detuning * basis.excitation_operator()
    return operator


class Dissipator:
    """Lindblad dissipator built from the Γ tensor.

    L[ρ] = Σ w_ab (2 σ_a ρ σ_b⁺ − σ_a⁺σ_b ρ − ρ σ_a⁺σ_b) with w = factor·Γ.
    The jump part is evaluated through the eigenmodes of w, so no superoperator
    is ever formed.
    """

    def __init__(self, basis: ManifoldBasis, tensors: CouplingTensors, convention: Optional[str] = None) -> None:
        _check_dimensions(basis, tensors)
        self.basis = basis
        self.convention = convention or Config.LINDBLAD_CONVENTION
        self.weights = convention_factor(self.convention) * tensors.gamma_matrix()
        self.anticommutator = pair_operator(basis, self.weights, include_same_atom=True)

        eigenvalues, modes = np.linalg.eigh(self.weights)
        lowering = basis.lowering_operators
        self.jumps: list[Tuple[float, np.ndarray]] = []
        for value, mode in zip(eigenvalues, modes.T):
            if abs(value) < 1e-15:
                continue
            collective = sum(coefficient * operator for coefficient, operator in zip(mode, lowering))
            self.jumps.append((float(value), collective))

    def jump(self, rho: np.ndarray) -> np.ndarray:
        result = np.zeros_like(rho, dtype=complex)
        for value, operator in self.jumps:
            result += (2.0 * value) * (operator @ rho @ operator.conj().T)
        return result

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape != (self.basis.dimension, self.basis.dimension):
            raise DimensionMismatchError(f"Density matrix shape {rho.shape} does not match the basis")
        return self.jump(rho) - self.anticommutator @ rho - rho @ self.anticommutator

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return self.apply(rho)


def dissipator(
    basis: ManifoldBasis,
    tensors: CouplingTensors,
    rho: np.ndarray,
    convention: Optional[str] = None,
) -> np.ndarray:
    return Dissipator(basis, tensors, convention).apply(rho)


def pure_density(state: np.ndarray) -> np.ndarray:
    vector = np.asarray(state, dtype=complex)
    return np.outer(vector, vector.conj())


def validate_density(rho: np.ndarray, tolerance: float = 1e-9) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatchError("Density matrix must be square")
    if abs(np.trace(rho).real - 1.0) > tolerance:
        raise ValueError(f"Density matrix trace {np.trace(rho).real} differs from 1")
    if np.max(np.abs(rho - rho.conj().T)) > 10 * tolerance:
        raise ValueError("Density matrix is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tolerance:
        raise ValueError("Density matrix has negative eigenvalues")
