"""Green-function kernels and the coherent (Ω) / dissipative (Γ) coupling tensors."""
from __future__ import annotations

import logging
from itertools import product

import numpy as np

from src.errors import GeometryError
from src.models import CouplingTensors, Ensemble, KernelValues

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-9

SERIES_THRESHOLD = 1e-2


def kernels(xi: float) -> KernelValues:
    """P_R, P_I, Q_R, Q_I at ξ = k₀r.

    Below SERIES_THRESHOLD the imaginary kernels use their Taylor series, since
    the direct form cancels 1/ξ² terms.
    """
    if not xi > 0:
        raise ValueError(f"Kernels require xi > 0, got {xi}")

    sin, cos = np.sin(xi), np.cos(xi)
    xi2, xi3 = xi * xi, xi * xi * xi
    p_r = cos / xi - sin / xi2 - cos / xi3
    q_r = cos / xi - 3.0 * sin / xi2 - 3.0 * cos / xi3

    if xi < SERIES_THRESHOLD:
        xi4 = xi2 * xi2
        p_i = 2.0 / 3.0 - 2.0 * xi2 / 15.0 + xi4 / 140.0
        q_i = -xi2 / 15.0 + xi4 / 210.0
    else:
        p_i = sin / xi + cos / xi2 - sin / xi3
        q_i = sin / xi + 3.0 * cos / xi2 - 3.0 * sin / xi3

    return KernelValues(p_r=float(p_r), p_i=float(p_i), q_r=float(q_r), q_i=float(q_i))


def _pair_geometry(ensemble: Ensemble, i: int, j: int, k: int, jp: int) -> tuple[float, float, float, float]:
    """(prefactor, μ·μ', (μ·r̂)(μ'·r̂), ξ) for transitions (i, j) and (k, j')."""
    first = ensemble.atoms[i].transitions[j]
    second = ensemble.atoms[k].transitions[jp]
    separation = ensemble.atoms[k].position_vector - ensemble.atoms[i].position_vector
    distance = float(np.linalg.norm(separation))
    if distance <= 0:
        raise GeometryError(f"Atoms {i} and {k} coincide")
    axis = separation / distance

    mu, mu_prime = first.dipole_vector, second.dipole_vector
    pair_frequency = 0.5 * (first.frequency + second.frequency)
    xi = ensemble.k0 * pair_frequency * distance
    prefactor = 1.5 * np.sqrt(first.rate * second.rate)
    return prefactor, float(mu @ mu_prime), float((mu @ axis) * (mu_prime @ axis)), xi


def gamma_coupling(ensemble: Ensemble, i: int, j: int, k: int, jp: int) -> float:
    """Collective dissipation Γ^{ik}_{jj'} (0-based atom and transition indices)."""
    if i == k:
        first = ensemble.atoms[i].transitions[j]
        second = ensemble.atoms[i].transitions[jp]
        # Equals γ_j δ_jj' for orthogonal dipoles; keeps Γ positive semidefinite otherwise.
        return float(np.sqrt(first.rate * second.rate) * (first.dipole_vector @ second.dipole_vector))
    prefactor, overlap, projection, xi = _pair_geometry(ensemble, i, j, k, jp)
    values = kernels(xi)
    return float(prefactor * (overlap * values.p_i - projection * values.q_i))


def omega_coupling(ensemble: Ensemble, i: int, j: int, k: int, jp: int) -> float:
    """Coherent shift Ω^{ik}_{jj'}; there is no single-atom shift in this model."""
    if i == k:
        raise ValueError("Omega is only defined between different atoms")
    prefactor, overlap, projection, xi = _pair_geometry(ensemble, i, j, k, jp)
    values = kernels(xi)
    return float(prefactor * (overlap * values.p_r - projection * values.q_r))


def coupling_tensors(ensemble: Ensemble) -> CouplingTensors:
    n_atoms, n_transitions = ensemble.n_atoms, ensemble.n_transitions
    omega = np.zeros((n_atoms, n_transitions, n_atoms, n_transitions))
    gamma = np.zeros_like(omega)

    for i, k in product(range(n_atoms), repeat=2):
        if k < i:
            continue
        for j, jp in product(range(n_transitions), repeat=2):
            gamma[i, j, k, jp] = gamma_coupling(ensemble, i, j, k, jp)
            gamma[k, jp, i, j] = gamma[i, j, k, jp]
            if i != k:
                omega[i, j, k, jp] = omega_coupling(ensemble, i, j, k, jp)
                omega[k, jp, i, j] = omega[i, j, k, jp]

    tensors = CouplingTensors(omega=omega, gamma=gamma)
    if not is_positive_semidefinite(tensors, PSD_TOLERANCE * max(1.0, float(np.abs(gamma).max()))):
        smallest = float(np.linalg.eigvalsh(tensors.gamma_matrix()).min())
        logger.error("Dissipation matrix of %s has a negative eigenvalue %.3e", ensemble.name, smallest)
        raise GeometryError(f"Collective decay matrix is not positive semidefinite (eigenvalue {smallest:.3e})")
    return tensors


def is_positive_semidefinite(tensors: CouplingTensors, tolerance: float = 1e-9) -> bool:
    return bool(np.linalg.eigvalsh(tensors.gamma_matrix()).min() >= -tolerance)
