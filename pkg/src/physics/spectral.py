"""Manifold diagonalization, collective states, decay/feeding rates, and the decay cascade."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import permutations
from math import factorial, sqrt
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from src.config import Config
from src.errors import DimensionMismatchError, UnnormalizedStateError
from src.models import (
    CascadeEdge,
    CascadeGraph,
    CascadeNode,
    CouplingTensors,
    EigenManifold,
    Ensemble,
    SweepResult,
)
from src.observability import increment_counter, timed
from src.physics import geometry
from src.physics.couplings import coupling_tensors, kernels
from src.physics.hilbert import Dissipator, ManifoldBasis, basis_for, convention_factor, hamiltonian

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9
NEGATIVE_RATE_CLIP = 1e-12
DEGENERACY_TOLERANCE = 1e-9

RateSource = Union[Dissipator, CouplingTensors]


def _dissipator_for(source: RateSource, dimension: int, convention: Optional[str]) -> Dissipator:
    if isinstance(source, Dissipator):
        if source.basis.dimension != dimension:
            raise DimensionMismatchError("State does not live in the dissipator's basis")
        return source
    n_atoms, n_transitions = source.dims
    space = ManifoldBasis(n_atoms, n_transitions + 1)
    if space.dimension != dimension:
        raise DimensionMismatchError(f"State of length {dimension} does not match tensors {source.dims}")
    return Dissipator(space, source, convention)


def _check_normalized(state: np.ndarray) -> None:
    norm = float(np.linalg.norm(state))
    if abs(norm - 1.0) > NORMALIZATION_TOLERANCE:
        raise UnnormalizedStateError(f"State norm {norm} differs from 1")


def _clip(rate: float) -> float:
    if -NEGATIVE_RATE_CLIP < rate < 0.0:
        return 0.0
    if rate < 0.0:
        logger.warning("Negative rate %.3e beyond round-off", rate)
    return rate


# ----------------------------------------------------------------------
# Rates
# ----------------------------------------------------------------------
def decay_rate(state: np.ndarray, source: RateSource, convention: Optional[str] = None) -> float:
    """−⟨ψ|L[|ψ⟩⟨ψ|]|ψ⟩, positive for a decaying state."""
    state = np.asarray(state, dtype=complex)
    _check_normalized(state)
    liouvillian = _dissipator_for(source, state.size, convention)
    loss = 2.0 * float(np.real(state.conj() @ liouvillian.anticommutator @ state))
    regain = sum(2.0 * value * abs(state.conj() @ operator @ state) ** 2 for value, operator in liouvillian.jumps)
    return _clip(loss - float(regain))


def feeding_rate(
    upper: np.ndarray,
    lower: np.ndarray,
    source: RateSource,
    convention: Optional[str] = None,
) -> float:
    """⟨ψ_lower|L[|ψ_upper⟩⟨ψ_upper|]|ψ_lower⟩."""
    upper = np.asarray(upper, dtype=complex)
    lower = np.asarray(lower, dtype=complex)
    _check_normalized(upper)
    _check_normalized(lower)
    liouvillian = _dissipator_for(source, upper.size, convention)

    excitations = liouvillian.basis.excitations
    upper_n = float(np.sum(np.abs(upper) ** 2 * excitations))
    lower_n = float(np.sum(np.abs(lower) ** 2 * excitations))
    if abs(upper_n - lower_n - 1.0) > 1e-9:
        logger.warning("Feeding rate requested between manifolds %.3g and %.3g; rate is structurally zero", upper_n, lower_n)
        return 0.0

    gain = sum(2.0 * value * abs(lower.conj() @ operator @ upper) ** 2 for value, operator in liouvillian.jumps)
    overlap = lower.conj() @ upper
    loss = 2.0 * np.real((lower.conj() @ liouvillian.anticommutator @ upper) * np.conj(overlap))
    return _clip(float(gain) - float(loss))


# ----------------------------------------------------------------------
# Collective states
# ----------------------------------------------------------------------
def _permutation_parity(perm: Sequence[int]) -> int:
    sign, seen = 1, [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length, cursor = 0, start
        while not seen[cursor]:
            seen[cursor] = True
            cursor = perm[cursor]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _permutation_state(space: ManifoldBasis, signed: bool) -> np.ndarray:
    if space.n_levels != space.n_atoms:
        raise ValueError(
            f"Collective permutation states need as many levels as atoms (N={space.n_atoms}, M={space.n_levels})"
        )
    vector = np.zeros(space.dimension, dtype=complex)
    for perm in permutations(range(space.n_atoms)):
        sign = _permutation_parity(perm) if signed else 1
        vector[space.index_of(perm)] += sign
    return vector / sqrt(factorial(space.n_atoms))


def dark_state(space: ManifoldBasis) -> np.ndarray:
    """Totally antisymmetric state (1/√N!) Σ_π sgn(π) ⊗_i |s_π(i)⟩ with s_0 = g."""
    return _permutation_state(space, signed=True)


def superradiant_state(space: ManifoldBasis) -> np.ndarray:
    return _permutation_state(space, signed=False)


# ----------------------------------------------------------------------
# Diagonalization
# ----------------------------------------------------------------------
def _fix_phase(vectors: np.ndarray) -> np.ndarray:
    for column in range(vectors.shape[1]):
        magnitudes = np.abs(vectors[:, column])
        anchor = int(np.flatnonzero(magnitudes > magnitudes.max() - 1e-12)[0])
        value = vectors[anchor, column]
        if abs(value) > 0:
            vectors[:, column] *= np.conj(value) / abs(value)
    return vectors


def _degenerate_groups(energies: np.ndarray, tolerance: float) -> List[np.ndarray]:
    scale = max(1.0, float(np.max(np.abs(energies)))) if energies.size else 1.0
    groups: List[List[int]] = []
    for index, energy in enumerate(energies):
        if groups and energy - energies[groups[-1][-1]] <= tolerance * scale:
            groups[-1].append(index)
        else:
            groups.append([index])
    return [np.array(group) for group in groups]


def diagonalize(
    space: ManifoldBasis,
    hamiltonian_matrix: np.ndarray,
    n_exc: int,
    dissipator: Optional[Dissipator] = None,
    degeneracy_tolerance: float = DEGENERACY_TOLERANCE,
) -> EigenManifold:
    """Eigenstates of one excitation manifold, energies ascending.

    Inside an energy-degenerate subspace the states diagonalize the dissipation
    matrix 2⟨ψ_a|K|ψ_b⟩, so reported decay rates do not depend on the
    eigensolver's choice of basis. Ties are ordered by rate, then by the
    index of the dominant product state.
    """
    indices = space.block(n_exc)
    block = hamiltonian_matrix[np.ix_(indices, indices)]
    with timed("diagonalization_latency_ms", {"n_exc": str(n_exc)}):
        energies, vectors = linalg.eigh(block)
    increment_counter("diagonalizations_total")

    rates = np.full(len(energies), np.nan)
    if dissipator is not None:
        loss = dissipator.anticommutator[np.ix_(indices, indices)]
        for group in _degenerate_groups(energies, degeneracy_tolerance):
            subspace = vectors[:, group]
            dissipation = 2.0 * (subspace.conj().T @ loss @ subspace)
            dissipation = 0.5 * (dissipation + dissipation.conj().T)
            group_rates, rotation = linalg.eigh(dissipation)
            vectors[:, group] = subspace @ rotation
            rates[group] = group_rates
            if len(group) > 1:
                energies[group] = float(np.mean(energies[group]))

    vectors = _fix_phase(vectors)
    dominant = np.argmax(np.abs(vectors), axis=0)
    order = np.lexsort((dominant, np.nan_to_num(rates), energies))
    return EigenManifold(
        n_exc=n_exc,
        energies=energies[order],
        states=vectors[:, order],
        decay_rates=np.array([_clip(float(r)) if not np.isnan(r) else r for r in rates[order]]),
        indices=indices,
    )


def manifold_spectrum(
    ensemble: Ensemble,
    n_exc: int,
    convention: Optional[str] = None,
    dimension_cap: Optional[int] = None,
) -> EigenManifold:
    space = basis_for(ensemble, dimension_cap)
    tensors = coupling_tensors(ensemble)
    return diagonalize(space, hamiltonian(space, ensemble, tensors), n_exc, Dissipator(space, tensors, convention))


def lowest_decay_rate(
    ensemble: Ensemble,
    n_exc: int,
    convention: Optional[str] = None,
    dimension_cap: Optional[int] = None,
) -> float:
    """Smallest eigenstate decay rate in a manifold, minimized over degenerate subspaces."""
    return float(np.min(manifold_spectrum(ensemble, n_exc, convention, dimension_cap).decay_rates))


# ----------------------------------------------------------------------
# Cascade
# ----------------------------------------------------------------------
def _dominant_labels(space: ManifoldBasis, manifold: EigenManifold, column: int, count: int = 3) -> Tuple[str, ...]:
    weights = np.abs(manifold.states[:, column]) ** 2
    top = np.argsort(-weights, kind="stable")[:count]
    return tuple(space.label(int(manifold.indices[i])) for i in top if weights[i] > 1e-6)


def _edge_rates(dissipator: Dissipator, upper: EigenManifold, lower: EigenManifold) -> np.ndarray:
    """Feeding rates [upper state, lower state] for adjacent manifolds."""
    rates = np.zeros((len(upper), len(lower)))
    rows, cols = lower.indices, upper.indices
    for value, operator in dissipator.jumps:
        amplitudes = lower.states.conj().T @ operator[np.ix_(rows, cols)] @ upper.states
        rates += 2.0 * value * (np.abs(amplitudes) ** 2).T
    return rates


def cascade_graph(
    space: ManifoldBasis,
    ensemble: Ensemble,
    tensors: CouplingTensors,
    convention: Optional[str] = None,
    max_workers: Optional[int] = None,
) -> CascadeGraph:
    """Every eigenstate of every manifold with its feeding rates into the manifold below."""
    dissipator = Dissipator(space, tensors, convention)
    matrix = hamiltonian(space, ensemble, tensors)
    workers = max_workers or Config.MAX_WORKERS

    manifold_numbers = list(range(space.n_atoms + 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        manifolds: Dict[int, EigenManifold] = dict(
            zip(manifold_numbers, pool.map(lambda n: diagonalize(space, matrix, n, dissipator), manifold_numbers))
        )
        pairs = [(n, n - 1) for n in manifold_numbers if n > 0]
        edge_blocks = list(pool.map(lambda pair: _edge_rates(dissipator, manifolds[pair[0]], manifolds[pair[1]]), pairs))

    nodes: List[CascadeNode] = []
    for n in manifold_numbers:
        manifold = manifolds[n]
        for position in range(len(manifold)):
            nodes.append(
                CascadeNode(
                    node_id=f"n{n}.{position}",
                    manifold=n,
                    position=position,
                    energy=float(manifold.energies[position]),
                    total_rate=float(manifold.decay_rates[position]),
                    dominant_labels=_dominant_labels(space, manifold, position),
                )
            )

    edges: List[CascadeEdge] = []
    for (upper_n, lower_n), block in zip(pairs, edge_blocks):
        for upper_position, lower_position in np.ndindex(block.shape):
            edges.append(
                CascadeEdge(
                    source=f"n{upper_n}.{upper_position}",
                    target=f"n{lower_n}.{lower_position}",
                    rate=_clip(float(block[upper_position, lower_position])),
                )
            )

    graph = CascadeGraph(nodes=nodes, edges=edges)
    balance = graph.rate_balance_error()
    if balance > 1e-9:
        logger.warning("Cascade rate balance violated by %.3e", balance)
    logger.info("Cascade built: %d nodes, %d edges", len(nodes), len(edges))
    return graph


# ----------------------------------------------------------------------
# Closed forms and scans
# ----------------------------------------------------------------------
def pair_rates(ensemble: Ensemble, convention: Optional[str] = None) -> Tuple[float, float]:
    """(symmetric, antisymmetric) single-excitation rates γ ± Γ¹² for a two-level pair."""
    if ensemble.n_atoms != 2 or ensemble.n_transitions != 1:
        raise ValueError("Pair rates need two single-transition atoms")
    tensors = coupling_tensors(ensemble)
    scale = 2.0 * convention_factor(convention)
    gamma, collective = tensors.gamma[0, 0, 0, 0], tensors.gamma[0, 0, 1, 0]
    return float(scale * (gamma + collective)), float(scale * (gamma - collective))


def triangle_rate_constants(ensemble: Ensemble) -> Tuple[float, float]:
    """(γ₁, γ₂) = ((3/2)ΓP_I, −(3/4)ΓP_I + (9/8)ΓQ_I) at the triangle side."""
    rate = ensemble.atoms[0].transitions[0].rate
    values = kernels(ensemble.k0 * ensemble.distance(0, 1))
    return 1.5 * rate * values.p_i, -0.75 * rate * values.p_i + 1.125 * rate * values.q_i


EnsembleFactory = Callable[[float, float], Ensemble]


def _two_distance_factory(configuration: str) -> EnsembleFactory:
    if configuration == "triangle":
        return lambda a, b: geometry.make_triangle(a, True, side_13=b)
    if configuration == "chain":
        return lambda a, b: geometry.make_chain(3, a, spacings=[a, b])
    raise ValueError(f"No two-distance scan for configuration {configuration!r}")


def lowest_rate_map(
    configuration: str,
    distances_a: Sequence[float],
    distances_b: Sequence[float],
    n_exc: int = 2,
    convention: Optional[str] = None,
    max_workers: Optional[int] = None,
) -> SweepResult:
    """Lowest manifold decay rate over two independent interatomic distances.

    Triangle: r₁₂ and r₁₃. Chain: r₁₂ and r₂₃.
    """
    factory = _two_distance_factory(configuration)
    grid = [(a, b) for a in distances_a for b in distances_b]
    with ThreadPoolExecutor(max_workers=max_workers or Config.MAX_WORKERS) as pool:
        values = list(pool.map(lambda point: lowest_decay_rate(factory(*point), n_exc, convention), grid))
    return SweepResult(
        axes={"r_a": np.asarray(distances_a, dtype=float), "r_b": np.asarray(distances_b, dtype=float)},
        values=np.array(values).reshape(len(distances_a), len(distances_b)),
        metadata={"configuration": configuration, "n_exc": n_exc},
    )
