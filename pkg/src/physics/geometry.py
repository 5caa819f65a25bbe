"""Builders for the atomic configurations: pair, chain, triangle, square.

The x axis is the separation axis of pairs and chains; planar configurations
lie in the xy plane. Dipole angles are polar (θ) from the x axis and
azimuthal (φ) around it.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import GeometryError
from src.models import Atom, DipoleScheme, Ensemble, Transition

logger = logging.getLogger(__name__)

Vector = Tuple[float, float, float]
AngleSpec = Union[Sequence[Tuple[float, float]], Sequence[Sequence[Tuple[float, float]]]]

_X_AXIS: Vector = (1.0, 0.0, 0.0)
_Y_AXIS: Vector = (0.0, 1.0, 0.0)
_Z_AXIS: Vector = (0.0, 0.0, 1.0)


def dipole_from_angles(theta: float, phi: float) -> Vector:
    """Unit dipole (cos θ, sin θ cos φ, sin θ sin φ)."""
    return (
        float(np.cos(theta)),
        float(np.sin(theta) * np.cos(phi)),
        float(np.sin(theta) * np.sin(phi)),
    )


def _unit(vector: Sequence[float]) -> Vector:
    array = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(array)
    if norm == 0:
        raise GeometryError("Dipole vector must be non-zero")
    array = array / norm
    return (float(array[0]), float(array[1]), float(array[2]))


def _scheme_dipoles(scheme: DipoleScheme, n_transitions: int, enforce_orthogonality: bool) -> list[Vector]:
    if scheme == DipoleScheme.PARALLEL:
        if n_transitions > 1 and enforce_orthogonality:
            raise GeometryError("Parallel dipoles on one atom violate the orthogonality assumption")
        return [_Z_AXIS] * n_transitions

    if scheme == DipoleScheme.PERPENDICULAR:
        if n_transitions > 2 and enforce_orthogonality:
            raise GeometryError(
                f"{n_transitions} mutually orthogonal dipoles cannot all be perpendicular to the "
                "separation axis in three dimensions; disable orthogonality to fan them out"
            )
        return [dipole_from_angles(np.pi / 2, j * np.pi / n_transitions) for j in range(n_transitions)]

    if scheme == DipoleScheme.CARTESIAN:
        if n_transitions > 3:
            raise GeometryError("At most three mutually orthogonal dipoles exist in three dimensions")
        return [_Y_AXIS, _Z_AXIS, _X_AXIS][:n_transitions]

    raise GeometryError(f"Dipole scheme {scheme.value!r} is only available for the triangle builder")


def _dipoles_from_angles(angles: AngleSpec, n_atoms: int) -> list[list[Vector]]:
    first = angles[0]
    nested = isinstance(first[0], (list, tuple))
    if nested:
        if len(angles) != n_atoms:
            raise GeometryError(f"Per-atom angles given for {len(angles)} atoms, expected {n_atoms}")
        return [[dipole_from_angles(theta, phi) for theta, phi in atom_angles] for atom_angles in angles]  # type: ignore[misc]
    shared = [dipole_from_angles(theta, phi) for theta, phi in angles]  # type: ignore[misc]
    return [list(shared) for _ in range(n_atoms)]


def _build(
    positions: Sequence[Sequence[float]],
    dipoles: Sequence[Sequence[Vector]],
    *,
    name: str,
    rates: Optional[Sequence[float]] = None,
    frequencies: Optional[Sequence[float]] = None,
    enforce_orthogonality: bool = True,
    reference_wavelength: float = 1.0,
) -> Ensemble:
    n_transitions = len(dipoles[0])
    rates = list(rates) if rates is not None else [1.0] * n_transitions
    frequencies = list(frequencies) if frequencies is not None else [1.0] * n_transitions
    if len(rates) != n_transitions or len(frequencies) != n_transitions:
        raise GeometryError("rates and frequencies need one entry per transition")

    atoms = tuple(
        Atom(
            position=tuple(float(x) for x in position),  # type: ignore[arg-type]
            transitions=tuple(
                Transition(label=j + 1, frequency=float(frequencies[j]), rate=float(rates[j]), dipole=_unit(dipole))
                for j, dipole in enumerate(atom_dipoles)
            ),
        )
        for position, atom_dipoles in zip(positions, dipoles)
    )
    ensemble = Ensemble(
        atoms=atoms,
        reference_wavelength=reference_wavelength,
        enforce_orthogonality=enforce_orthogonality,
        name=name,
    )
    logger.debug("Built %s ensemble with %d atoms", name, ensemble.n_atoms)
    return ensemble


def make_pair(
    distance: float,
    dipole_scheme: DipoleScheme | str = DipoleScheme.PARALLEL,
    *,
    angles: Optional[AngleSpec] = None,
    rates: Optional[Sequence[float]] = None,
    frequencies: Optional[Sequence[float]] = None,
) -> Ensemble:
    """Two atoms on the x axis, `distance` apart.

    The default is one transition per atom with both dipoles along ẑ. Passing
    `angles` as (θ, φ) pairs gives one transition per pair, shared by both atoms
    unless given per atom.
    """
    if distance <= 0:
        raise GeometryError(f"Pair distance must be positive, got {distance}")
    positions = [(0.0, 0.0, 0.0), (float(distance), 0.0, 0.0)]
    if angles is not None:
        dipoles = _dipoles_from_angles(angles, 2)
    else:
        dipoles = [_scheme_dipoles(DipoleScheme(dipole_scheme), 1, True)] * 2
    return _build(positions, dipoles, name="pair", rates=rates, frequencies=frequencies)


def make_chain(
    n_atoms: int,
    spacing: float,
    dipole_scheme: DipoleScheme | str = DipoleScheme.PERPENDICULAR,
    *,
    enforce_orthogonality: bool = True,
    spacings: Optional[Sequence[float]] = None,
    n_transitions: Optional[int] = None,
    angles: Optional[AngleSpec] = None,
    rates: Optional[Sequence[float]] = None,
    frequencies: Optional[Sequence[float]] = None,
) -> Ensemble:
    """Equally spaced atoms on the x axis carrying `n_atoms - 1` transitions each.

    `spacings` overrides the uniform spacing with one gap per neighbouring pair.
    """
    if n_atoms < 2:
        raise GeometryError(f"A chain needs at least two atoms, got {n_atoms}")
    gaps = list(spacings) if spacings is not None else [spacing] * (n_atoms - 1)
    if len(gaps) != n_atoms - 1:
        raise GeometryError(f"Expected {n_atoms - 1} spacings, got {len(gaps)}")
    if any(gap <= 0 for gap in gaps):
        raise GeometryError("Chain spacings must be positive")

    offsets = np.concatenate([[0.0], np.cumsum(gaps)])
    positions = [(float(x), 0.0, 0.0) for x in offsets]
    transitions = n_transitions if n_transitions is not None else n_atoms - 1
    if angles is not None:
        dipoles = _dipoles_from_angles(angles, n_atoms)
    else:
        dipoles = [_scheme_dipoles(DipoleScheme(dipole_scheme), transitions, enforce_orthogonality)] * n_atoms
    return _build(
        positions,
        dipoles,
        name=f"chain{n_atoms}",
        rates=rates,
        frequencies=frequencies,
        enforce_orthogonality=enforce_orthogonality,
    )


def _rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def make_triangle(
    side: float,
    c3_symmetric: bool = True,
    *,
    side_13: Optional[float] = None,
    rates: Optional[Sequence[float]] = None,
    frequencies: Optional[Sequence[float]] = None,
) -> Ensemble:
    """Three atoms on an equilateral triangle in the xy plane, two transitions each.

    With `c3_symmetric` atom 1 carries (ẑ, outward radial) and atom k the same
    pair rotated by 2π(k-1)/3 about the ẑ axis through the centroid. Otherwise
    every atom carries (ẑ, x̂). `side_13` stretches the 1-3 edge while keeping
    the apex angle and the dipoles, which gives the two-distance scans.
    """
    if side <= 0 or (side_13 is not None and side_13 <= 0):
        raise GeometryError(f"Triangle sides must be positive, got {side} / {side_13}")

    radius = side / np.sqrt(3.0)
    base = np.array([0.0, radius, 0.0])
    rotations = [_rotation_z(2.0 * np.pi * k / 3.0) for k in range(3)]
    positions = np.array([rotation @ base for rotation in rotations])

    if c3_symmetric:
        radial = base / np.linalg.norm(base)
        dipoles = [[_unit(rotation @ np.array(_Z_AXIS)), _unit(rotation @ radial)] for rotation in rotations]
    else:
        dipoles = [[_Z_AXIS, _X_AXIS] for _ in range(3)]

    if side_13 is not None:
        apex = positions[0]
        positions[2] = apex + (positions[2] - apex) * (side_13 / side)

    return _build(
        [tuple(p) for p in positions],
        dipoles,
        name="triangle" if c3_symmetric else "triangle-plain",
        rates=rates,
        frequencies=frequencies,
    )


def make_square(
    side: float,
    dipole_scheme: DipoleScheme | str = DipoleScheme.CARTESIAN,
    *,
    n_transitions: int = 3,
    enforce_orthogonality: bool = True,
    rates: Optional[Sequence[float]] = None,
    frequencies: Optional[Sequence[float]] = None,
) -> Ensemble:
    """Four atoms on the corners of a square in the xy plane."""
    if side <= 0:
        raise GeometryError(f"Square side must be positive, got {side}")
    positions = [(0.0, 0.0, 0.0), (side, 0.0, 0.0), (side, side, 0.0), (0.0, side, 0.0)]
    dipoles = [_scheme_dipoles(DipoleScheme(dipole_scheme), n_transitions, enforce_orthogonality)] * 4
    return _build(positions, dipoles, name="square", rates=rates, frequencies=frequencies, enforce_orthogonality=enforce_orthogonality)


BUILDERS = {
    "pair": make_pair,
    "chain": make_chain,
    "triangle": make_triangle,
    "square": make_square,
}
