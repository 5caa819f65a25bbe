# tests/conftest.py
"""
Pytest configuration and fixtures shared by the physics, service, and CLI tests.
"""

import json
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from src.observability.metrics import reset_metrics
from src.physics import geometry
from src.physics.couplings import coupling_tensors
from src.physics.hilbert import Dissipator, basis_for, hamiltonian


@pytest.fixture(autouse=True)
def clean_metrics():
    """Every test starts from an empty metrics registry"""
    reset_metrics()
    yield
    reset_metrics()


@pytest.fixture
def triangle():
    return geometry.make_triangle(0.1)


@pytest.fixture
def parallel_pair():
    return geometry.make_pair(0.02)


@pytest.fixture
def triangle_system(triangle):
    """(basis, tensors, hamiltonian, dissipator) for the C3 triangle at side λ₀/10"""
    space = basis_for(triangle)
    tensors = coupling_tensors(triangle)
    return space, tensors, hamiltonian(space, triangle, tensors), Dissipator(space, tensors)


@pytest.fixture
def single_atom():
    """One two-level atom; Γ reduces to γ and there are no pair couplings"""
    from src.models import Atom, Ensemble, Transition

    atom = Atom(position=(0.0, 0.0, 0.0), transitions=(Transition(1, 1.0, 1.0, (0.0, 0.0, 1.0)),))
    return Ensemble(atoms=(atom,), name="single")


@pytest.fixture
def write_config(tmp_path):
    """Write a RunConfig document to a temp file and return its path"""

    def _write(document, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
