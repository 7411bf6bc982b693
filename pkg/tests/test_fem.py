from __future__ import annotations

import numpy as np
import pytest

from dmifilm.exceptions import AssemblyError, PointOutsideMeshError, SizeMismatchError
from dmifilm.fem import (
    FemOperators,
    as_nodal_field,
    assemble_consistent_mass,
    assemble_curl_form,
    assemble_lumped_mass,
    assemble_operators,
    assemble_stiffness,
    constant_field,
    interpolate_at,
)
from dmifilm.mesh import TriMesh, generate_disk, generate_square
from dmifilm.oracle import dense_assemble


class TestLumpedMass:
    """
    Веса трапеций w_z = сумма |K|/3
    """

    def test_reference_triangle(self, reference_triangle: TriMesh) -> None:
        weights = assemble_lumped_mass(reference_triangle).weights

        assert np.allclose(weights, [1 / 6, 1 / 6, 1 / 6]), "check weights"

    def test_unit_square(self, unit_square: TriMesh) -> None:
        weights = assemble_lumped_mass(unit_square).weights

        assert sorted(np.round(weights * 6).astype(int).tolist()) == [1, 1, 2, 2], "corner weights 1/6 or 2/6"
        assert weights.sum() == pytest.approx(1.0), "check total"

    @pytest.mark.parametrize(("diameter", "target_h"), [(3.0, 0.9), (10.0, 0.4)])
    def test_total_area(self, diameter: float, target_h: float) -> None:
        mesh = generate_disk(diameter, target_h)
        weights = assemble_lumped_mass(mesh).weights

        assert np.all(weights > 0), "positive weights"
        assert weights.sum() == pytest.approx(mesh.total_area, rel=1e-12), "check total"

    def test_dominates_consistent_mass(self, small_disk: TriMesh, rng: np.random.Generator) -> None:
        lumped = assemble_lumped_mass(small_disk)
        consistent = assemble_consistent_mass(small_disk)

        for _ in range(20):
            v = rng.standard_normal((small_disk.n_vertices, 3))
            exact = sum(float(v[:, c] @ (consistent @ v[:, c])) for c in range(3))
            assert lumped.norm_sq(v) >= exact - 1e-12, "lumped L2 norm dominates exact"


class TestStiffness:
    """
    Матрица жесткости P1
    """

    def test_reference_element(self, reference_triangle: TriMesh) -> None:
        stiffness = assemble_stiffness(reference_triangle).toarray()
        expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])

        assert np.allclose(stiffness, expected, atol=1e-15), "check element matrix"

    def test_symmetric_with_constant_kernel(self, small_disk: TriMesh) -> None:
        stiffness = assemble_stiffness(small_disk)

        assert abs(stiffness - stiffness.T).max() < 1e-14, "symmetric"
        assert np.max(np.abs(stiffness @ np.ones(small_disk.n_vertices))) < 1e-13, "constants in kernel"

    def test_positive_semidefinite(self, small_disk: TriMesh) -> None:
        eigenvalues = np.linalg.eigvalsh(assemble_stiffness(small_disk).toarray())

        assert eigenvalues.min() > -1e-12, "PSD"
        assert np.sum(np.abs(eigenvalues) < 1e-10) == 1, "one-dimensional kernel on a connected mesh"

    def test_linear_field_energy(self) -> None:
        """
        u = x_1 на квадрате: int |grad u|^2 = 1.
        """

        mesh = generate_square(3)
        u = mesh.vertices[:, 0]

        assert float(u @ (assemble_stiffness(mesh) @ u)) == pytest.approx(1.0), "check energy"

    def test_degenerate_triangle(self) -> None:
        mesh = TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1e-16]]), np.array([[0, 1, 2]]))

        with pytest.raises(AssemblyError) as exc:
            assemble_stiffness(mesh)

        assert exc.value.triangle == 0, "check triangle index"


class TestCurlForm:
    """
    phi^T C v = int curl v . phi, curl v = e_1 x d_1 v + e_2 x d_2 v
    """

    def test_hand_example(self, reference_triangle: TriMesh) -> None:
        """
        v = (0, 0, x_1): curl v = e_1 x e_3 = (0, -1, 0); phi = (0, -1, 0) дает площадь 0.5.
        """

        curl = assemble_curl_form(reference_triangle)
        v = np.zeros((3, 3))
        v[:, 2] = reference_triangle.vertices[:, 0]
        phi = constant_field(reference_triangle, (0.0, -1.0, 0.0))

        assert float(phi.ravel() @ (curl @ v.ravel())) == pytest.approx(0.5), "check integral"

    def test_constant_field_in_kernel(self, small_disk: TriMesh) -> None:
        curl = assemble_curl_form(small_disk)
        v = constant_field(small_disk, (0.3, -0.2, 0.9))

        assert np.max(np.abs(curl @ v.ravel())) < 1e-14, "curl of constant vanishes"

    def test_in_plane_rotation_field(self) -> None:
        """
        v = (-x_2, x_1, 0): curl v = (0, 0, 2), int curl v . e_3 = 2 |omega|.
        """

        mesh = generate_disk(4.0, 0.5)
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        v = np.column_stack([-y, x, np.zeros_like(x)])
        phi = constant_field(mesh, (0.0, 0.0, 1.0))

        value = float(phi.ravel() @ (assemble_curl_form(mesh) @ v.ravel()))
        assert value == pytest.approx(2.0 * mesh.total_area, rel=1e-12), "check integral"


class TestDenseOracle:
    """
    Разреженная сборка совпадает с наивной поэлементной
    """

    @pytest.mark.parametrize("mesh", [generate_square(1), generate_square(3), generate_disk(3.0, 0.9)])
    def test_equivalence(self, mesh: TriMesh) -> None:
        operators: FemOperators = assemble_operators(mesh)
        dense = dense_assemble(mesh)

        assert np.linalg.norm(operators.stiffness.toarray() - dense.stiffness) <= 1e-13, "stiffness"
        assert np.linalg.norm(np.diag(operators.lumped.weights) - dense.mass_lumped) <= 1e-13, "lumped mass"
        assert np.linalg.norm(operators.consistent_mass.toarray() - dense.mass_consistent) <= 1e-13, "mass"
        assert np.linalg.norm(operators.curl.toarray() - dense.curl_form) <= 1e-13, "curl form"

    def test_operator_bundle(self, small_disk_operators: FemOperators) -> None:
        n = small_disk_operators.mesh.n_vertices

        assert small_disk_operators.stiffness3.shape == (3 * n, 3 * n), "check stiffness3 shape"
        assert abs(small_disk_operators.curl_sym - small_disk_operators.curl_sym.T).max() < 1e-14, "curl_sym symmetric"


class TestInterpolation:
    def test_vertex_value(self, small_disk: TriMesh, rng: np.random.Generator) -> None:
        field = rng.standard_normal((small_disk.n_vertices, 3))
        point = small_disk.vertices[7]

        value = interpolate_at(small_disk, field, (float(point[0]), float(point[1])))
        assert np.allclose(value, field[7], atol=1e-14), "exact nodal value"

    def test_centroid(self, reference_triangle: TriMesh) -> None:
        field = np.array([[1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 6.0]])

        value = interpolate_at(reference_triangle, field, (1 / 3, 1 / 3))
        assert np.allclose(value, [1 / 3, 1.0, 2.0]), "barycentric mean"

    def test_outside(self, reference_triangle: TriMesh) -> None:
        with pytest.raises(PointOutsideMeshError) as exc:
            interpolate_at(reference_triangle, np.zeros((3, 3)), (2.0, 2.0))

        assert exc.value.point == (2.0, 2.0), "check point"

    def test_size_mismatch(self, reference_triangle: TriMesh) -> None:
        with pytest.raises(SizeMismatchError) as exc:
            as_nodal_field(reference_triangle, np.zeros((4, 3)))

        assert exc.value.expected == 3, "check expected"
        assert exc.value.received == 4, "check received"
