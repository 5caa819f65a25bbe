import numpy as np
import pytest

from src.errors import GeometryError
from src.models import Atom, Ensemble, Transition
from src.physics import geometry


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def test_pair_places_atoms_on_x_axis_with_z_dipoles():
    pair = geometry.make_pair(0.25)
    assert pair.n_atoms == 2
    assert pair.n_transitions == 1
    assert pair.distance(0, 1) == pytest.approx(0.25)
    assert np.allclose(pair.dipoles()[:, 0], [0.0, 0.0, 1.0])


def test_pair_from_angles_shares_dipoles_between_atoms():
    pair = geometry.make_pair(0.1, angles=[(np.pi / 4, 0.0), (3 * np.pi / 4, 0.0)])
    assert pair.n_transitions == 2
    dipoles = pair.dipoles()
    assert np.allclose(dipoles[0], dipoles[1])
    assert abs(dipoles[0, 0] @ dipoles[0, 1]) < 1e-12


def test_chain_perpendicular_dipoles_are_orthogonal_to_axis():
    chain = geometry.make_chain(3, 0.05)
    assert chain.name == "chain3"
    assert chain.n_transitions == 2
    assert np.allclose(chain.positions()[:, 0], [0.0, 0.05, 0.1])
    assert np.allclose(chain.dipoles()[..., 0], 0.0)


def test_chain_spacings_override_uniform_spacing():
    chain = geometry.make_chain(3, 0.05, spacings=[0.05, 0.2])
    assert chain.distance(1, 2) == pytest.approx(0.2)
    assert chain.distance(0, 2) == pytest.approx(0.25)


def test_four_atom_chain_needs_orthogonality_disabled():
    with pytest.raises(GeometryError):
        geometry.make_chain(4, 0.05)
    chain = geometry.make_chain(4, 0.05, enforce_orthogonality=False)
    assert chain.n_transitions == 3


def test_triangle_is_equilateral():
    triangle = geometry.make_triangle(0.1)
    for i, k in [(0, 1), (1, 2), (0, 2)]:
        assert triangle.distance(i, k) == pytest.approx(0.1, abs=1e-12)


def test_triangle_c3_rotation_maps_each_atom_to_the_next():
    triangle = geometry.make_triangle(0.3)
    rotation = _rotation(2 * np.pi / 3)
    positions, dipoles = triangle.positions(), triangle.dipoles()
    for k in range(3):
        following = (k + 1) % 3
        assert np.allclose(rotation @ positions[k], positions[following], atol=1e-12)
        for j in range(2):
            assert np.allclose(rotation @ dipoles[k, j], dipoles[following, j], atol=1e-12)


def test_triangle_dipoles_are_z_and_outward_radial():
    triangle = geometry.make_triangle(0.2)
    centroid = triangle.positions().mean(axis=0)
    for atom, position in zip(triangle.dipoles(), triangle.positions()):
        outward = (position - centroid) / np.linalg.norm(position - centroid)
        assert np.allclose(atom[0], [0.0, 0.0, 1.0])
        assert np.allclose(atom[1], outward, atol=1e-12)


def test_triangle_side_13_stretches_one_edge():
    triangle = geometry.make_triangle(0.1, side_13=0.3)
    assert triangle.distance(0, 1) == pytest.approx(0.1)
    assert triangle.distance(0, 2) == pytest.approx(0.3)


def test_square_carries_three_cartesian_dipoles():
    square = geometry.make_square(0.1)
    assert square.n_atoms == 4
    assert square.n_transitions == 3
    assert square.min_distance() == pytest.approx(0.1)
    assert all(atom.dipoles_orthogonal() for atom in square.atoms)


@pytest.mark.parametrize(
    "build",
    [
        lambda: geometry.make_pair(0.0),
        lambda: geometry.make_chain(1, 0.1),
        lambda: geometry.make_chain(3, 0.1, spacings=[0.1]),
        lambda: geometry.make_triangle(-1.0),
        lambda: geometry.make_square(0.1, n_transitions=4),
        lambda: geometry.make_pair(0.1, rates=[1.0, 2.0]),
    ],
)
def test_invalid_geometries_raise(build):
    with pytest.raises(GeometryError):
        build()


def test_non_orthogonal_dipoles_are_rejected_by_default():
    transitions = (
        Transition(1, 1.0, 1.0, (0.0, 0.0, 1.0)),
        Transition(2, 1.0, 1.0, (0.0, np.sqrt(0.5), np.sqrt(0.5))),
    )
    atoms = (Atom((0.0, 0.0, 0.0), transitions), Atom((0.1, 0.0, 0.0), transitions))
    with pytest.raises(GeometryError):
        Ensemble(atoms=atoms)
    assert Ensemble(atoms=atoms, enforce_orthogonality=False).n_atoms == 2


def test_coincident_atoms_are_rejected():
    transition = (Transition(1, 1.0, 1.0, (0.0, 0.0, 1.0)),)
    with pytest.raises(GeometryError):
        Ensemble(atoms=(Atom((0.0, 0.0, 0.0), transition), Atom((0.0, 0.0, 0.0), transition)))


def test_ensemble_dict_round_trip_preserves_geometry():
    triangle = geometry.make_triangle(0.15, rates=[1.0, 0.5])
    restored = Ensemble.from_dict(triangle.to_dict())
    assert restored == triangle


@pytest.mark.parametrize(
    "theta, phi, expected",
    [
        (0.0, 0.0, (1.0, 0.0, 0.0)),
        (np.pi / 2, 0.0, (0.0, 1.0, 0.0)),
        (np.pi / 2, np.pi / 2, (0.0, 0.0, 1.0)),
    ],
)
def test_dipole_from_angles_axes(theta, phi, expected):
    assert np.allclose(geometry.dipole_from_angles(theta, phi), expected, atol=1e-15)


def test_dipole_from_angles_is_unit_length(rng):
    for theta, phi in rng.uniform(0.0, 2 * np.pi, size=(10, 2)):
        assert np.linalg.norm(geometry.dipole_from_angles(theta, phi)) == pytest.approx(1.0)
