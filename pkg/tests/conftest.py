from __future__ import annotations

import numpy as np
import pytest

from dmifilm.fem import FemOperators, assemble_operators
from dmifilm.mesh import TriMesh, generate_disk, generate_square
from dmifilm.model import MaterialParams, dimensionless_params, fege_params


@pytest.fixture
def reference_triangle() -> TriMesh:
    """
    Единичный прямоугольный треугольник (0,0), (1,0), (0,1).
    """

    return TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


@pytest.fixture
def unit_square() -> TriMesh:
    return generate_square(1)


@pytest.fixture
def small_disk() -> TriMesh:
    return generate_disk(3.0, 0.9)


@pytest.fixture
def small_disk_operators(small_disk: TriMesh) -> FemOperators:
    return assemble_operators(small_disk)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)


@pytest.fixture
def dmi_params() -> MaterialParams:
    return dimensionless_params(kappa=0.876, alpha=1.0)


@pytest.fixture
def fege() -> MaterialParams:
    return fege_params()
