"""Domain types shared by the physics modules, services, and exporters.

Units: positions in reference wavelengths λ₀, rates and drive amplitudes in the
reference rate Γ_ref, transition frequencies in the reference frequency ω₀,
times in 1/Γ_ref.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DimensionMismatchError, GeometryError

DIPOLE_NORM_TOLERANCE = 1e-12
ORTHOGONALITY_TOLERANCE = 1e-10


class DipoleScheme(str, Enum):
    """Named dipole orientation patterns understood by the geometry builders."""

    PARALLEL = "parallel"  # every dipole along ẑ
    PERPENDICULAR = "perpendicular"  # transitions fanned out in the plane orthogonal to the x axis
    CARTESIAN = "cartesian"  # ŷ, ẑ, x̂ in transition order
    C3 = "c3"  # ẑ plus an in-plane radial dipole, rotated with the atom


class PumpTemplate(str, Enum):
    PER_ATOM = "per-atom"
    PER_TRANSITION = "per-transition"


class InitialState(str, Enum):
    DARK = "dark"
    SUPERRADIANT = "superradiant"
    UNPOLARIZED = "product-unpolarized"
    TRIPLE_EXCITED = "triple-excited"
    INVERTED = "inverted"
    GROUND = "ground"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Transition:
    label: int
    frequency: float
    rate: float
    dipole: Tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise GeometryError(f"Transition {self.label} has negative rate {self.rate}")
        norm = float(np.linalg.norm(self.dipole))
        if abs(norm - 1.0) > DIPOLE_NORM_TOLERANCE:
            raise GeometryError(f"Transition {self.label} dipole is not a unit vector (norm={norm})")

    @property
    def dipole_vector(self) -> np.ndarray:
        return np.asarray(self.dipole, dtype=float)


@dataclass(frozen=True)
class Atom:
    position: Tuple[float, float, float]
    transitions: Tuple[Transition, ...]

    @property
    def position_vector(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    def dipoles_orthogonal(self) -> bool:
        for first, second in combinations(self.transitions, 2):
            if abs(float(np.dot(first.dipole_vector, second.dipole_vector))) > ORTHOGONALITY_TOLERANCE:
                return False
        return True


@dataclass(frozen=True)
class Ensemble:
    """Fixed atomic positions with per-transition dipoles and single-atom rates."""

    atoms: Tuple[Atom, ...]
    reference_wavelength: float = 1.0
    enforce_orthogonality: bool = True
    name: str = "custom"

    def __post_init__(self) -> None:
        if len(self.atoms) < 1:
            raise GeometryError("An ensemble needs at least one atom")
        counts = {len(atom.transitions) for atom in self.atoms}
        if len(counts) != 1 or 0 in counts:
            raise GeometryError("All atoms must carry the same, non-zero number of transitions")
        if self.reference_wavelength <= 0:
            raise GeometryError("reference_wavelength must be positive")
        for i, k in combinations(range(len(self.atoms)), 2):
            if self.distance(i, k) <= 0:
                raise GeometryError(f"Atoms {i} and {k} coincide")
        if self.enforce_orthogonality:
            for index, atom in enumerate(self.atoms):
                if not atom.dipoles_orthogonal():
                    raise GeometryError(f"Atom {index} dipoles are not mutually orthogonal")

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_transitions(self) -> int:
        return len(self.atoms[0].transitions)

    @property
    def n_levels(self) -> int:
        return self.n_transitions + 1

    @property
    def k0(self) -> float:
        return 2.0 * np.pi / self.reference_wavelength

    def positions(self) -> np.ndarray:
        return np.array([atom.position for atom in self.atoms], dtype=float)

    def dipoles(self) -> np.ndarray:
        """Array of shape (N, M-1, 3)."""
        return np.array([[t.dipole for t in atom.transitions] for atom in self.atoms], dtype=float)

    def rates(self) -> np.ndarray:
        return np.array([[t.rate for t in atom.transitions] for atom in self.atoms], dtype=float)

    def frequencies(self) -> np.ndarray:
        return np.array([[t.frequency for t in atom.transitions] for atom in self.atoms], dtype=float)

    def distance(self, i: int, k: int) -> float:
        return float(np.linalg.norm(self.atoms[i].position_vector - self.atoms[k].position_vector))

    def min_distance(self) -> float:
        if self.n_atoms < 2:
            return float("inf")
        return min(self.distance(i, k) for i, k in combinations(range(self.n_atoms), 2))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "reference_wavelength": self.reference_wavelength,
            "enforce_orthogonality": self.enforce_orthogonality,
            "atoms": [
                {
                    "position": list(atom.position),
                    "transitions": [
                        {"label": t.label, "frequency": t.frequency, "rate": t.rate, "dipole": list(t.dipole)}
                        for t in atom.transitions
                    ],
                }
                for atom in self.atoms
            ],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Ensemble":
        atoms = tuple(
            Atom(
                position=tuple(float(x) for x in atom["position"]),
                transitions=tuple(
                    Transition(
                        label=int(t["label"]),
                        frequency=float(t.get("frequency", 1.0)),
                        rate=float(t["rate"]),
                        dipole=tuple(float(x) for x in t["dipole"]),
                    )
                    for t in atom["transitions"]
                ),
            )
            for atom in payload["atoms"]
        )
        return cls(
            atoms=atoms,
            reference_wavelength=float(payload.get("reference_wavelength", 1.0)),
            enforce_orthogonality=bool(payload.get("enforce_orthogonality", True)),
            name=str(payload.get("name", "custom")),
        )


@dataclass(frozen=True)
class KernelValues:
    p_r: float
    p_i: float
    q_r: float
    q_i: float


@dataclass(frozen=True)
class CouplingTensors:
    """Ω and Γ indexed [i, j, k, j'] (atoms i, k; transitions j, j')."""

    omega: np.ndarray
    gamma: np.ndarray

    def __post_init__(self) -> None:
        if self.omega.shape != self.gamma.shape or self.gamma.ndim != 4:
            raise DimensionMismatchError("omega and gamma must share a 4-index shape")

    @property
    def dims(self) -> Tuple[int, int]:
        return self.gamma.shape[0], self.gamma.shape[1]

    def gamma_matrix(self) -> np.ndarray:
        n_atoms, n_transitions = self.dims
        size = n_atoms * n_transitions
        return self.gamma.reshape(size, size)

    def omega_matrix(self) -> np.ndarray:
        n_atoms, n_transitions = self.dims
        size = n_atoms * n_transitions
        return self.omega.reshape(size, size)

    def without_dissipation(self) -> "CouplingTensors":
        return CouplingTensors(omega=self.omega.copy(), gamma=np.zeros_like(self.gamma))


@dataclass(frozen=True)
class PumpConfig:
    """Complex drive amplitudes η[i, j] in the frame rotating with the drive."""

    eta: np.ndarray
    detuning: float = 0.0

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.eta)):
            raise ValueError("Pump amplitudes must be finite")

    @classmethod
    def zero(cls, n_atoms: int, n_transitions: int) -> "PumpConfig":
        return cls(eta=np.zeros((n_atoms, n_transitions), dtype=complex))

    def is_zero(self) -> bool:
        return not np.any(self.eta)


@dataclass
class EigenManifold:
    n_exc: int
    energies: np.ndarray
    states: np.ndarray  # columns are eigenvectors over the block
    decay_rates: np.ndarray
    indices: Sequence[int]  # full-space indices of the block

    def full_state(self, column: int, dimension: int) -> np.ndarray:
        vector = np.zeros(dimension, dtype=complex)
        vector[list(self.indices)] = self.states[:, column]
        return vector

    def __len__(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class CascadeNode:
    node_id: str
    manifold: int
    position: int
    energy: float
    total_rate: float
    dominant_labels: Tuple[str, ...] = ()


@dataclass(frozen=True)
class CascadeEdge:
    source: str
    target: str
    rate: float


@dataclass
class CascadeGraph:
    nodes: List[CascadeNode]
    edges: List[CascadeEdge]

    def node(self, node_id: str) -> CascadeNode:
        for candidate in self.nodes:
            if candidate.node_id == node_id:
                return candidate
        raise KeyError(node_id)

    def outgoing(self, node_id: str) -> List[CascadeEdge]:
        return [edge for edge in self.edges if edge.source == node_id]

    def incoming(self, node_id: str) -> List[CascadeEdge]:
        return [edge for edge in self.edges if edge.target == node_id]

    def rate_balance_error(self) -> float:
        """Largest |total rate − Σ outgoing| over all nodes."""
        worst = 0.0
        for node in self.nodes:
            outgoing = sum(edge.rate for edge in self.outgoing(node.node_id))
            worst = max(worst, abs(node.total_rate - outgoing))
        return worst

    def manifold_sizes(self) -> Dict[int, int]:
        sizes: Dict[int, int] = {}
        for node in self.nodes:
            sizes[node.manifold] = sizes.get(node.manifold, 0) + 1
        return dict(sorted(sizes.items()))


@dataclass
class Trajectory:
    times: np.ndarray
    observables: Dict[str, np.ndarray]
    metadata: Dict[str, Any] = field(default_factory=dict)
    final_state: Optional[np.ndarray] = None

    def series(self, name: str) -> np.ndarray:
        return self.observables[name]

    def value_at(self, name: str, time: float) -> float:
        index = int(np.argmin(np.abs(self.times - time)))
        return float(self.observables[name][index])


@dataclass
class SweepResult:
    axes: Dict[str, np.ndarray]
    values: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = tuple(len(axis) for axis in self.axes.values())
        if self.values.shape != expected:
            raise DimensionMismatchError(f"Sweep grid shape {self.values.shape} does not match axes {expected}")

    def argmax(self) -> Tuple[Tuple[float, ...], float]:
        flat = int(np.argmax(self.values))
        index = np.unravel_index(flat, self.values.shape)
        point = tuple(float(axis[i]) for axis, i in zip(self.axes.values(), index))
        return point, float(self.values[index])


@dataclass(frozen=True)
class OptimizationResult:
    phases: Tuple[float, float]
    value: float
    grid_best_phases: Tuple[float, float]
    grid_best_value: float
    evaluations: int
    budget_exhausted: bool
