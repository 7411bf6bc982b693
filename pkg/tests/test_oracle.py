from __future__ import annotations

import numpy as np
import pytest

from dmifilm.exceptions import InvalidParameterError
from dmifilm.fem import FemOperators, assemble_operators, normalize_nodal
from dmifilm.analysis import fit_order
from dmifilm.fields import AnalyticField, nodal_interpolant, uniform
from dmifilm.mesh import TriMesh, generate_disk, generate_square
from dmifilm.model import AppliedField, MaterialParams, energy
from dmifilm.oracle import dense_assemble, fd_gradient_check, quad_energy


class TestDenseAssemble:
    def test_reference_triangle(self, reference_triangle: TriMesh) -> None:
        dense = dense_assemble(reference_triangle)

        expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        assert np.allclose(dense.stiffness, expected), "element stiffness"
        assert np.allclose(np.diag(dense.mass_lumped), 1.0 / 6.0), "lumped weights |K| / 3"
        assert dense.mass_consistent.sum() == pytest.approx(0.5), "sum of the mass matrix is the area"

    def test_matches_sparse(self, small_disk: TriMesh, small_disk_operators: FemOperators) -> None:
        dense = dense_assemble(small_disk)

        assert np.allclose(small_disk_operators.stiffness.toarray(), dense.stiffness, atol=1e-13), "stiffness"
        assert np.allclose(small_disk_operators.curl.toarray(), dense.curl_form, atol=1e-13), "curl form"

    def test_size_limit(self) -> None:
        with pytest.raises(InvalidParameterError) as exc:
            dense_assemble(generate_disk(10.0, 0.5))

        assert exc.value.parameter == "mesh", "check parameter"


class TestGradientCheck:
    def test_quadratic_energy_is_exact(
        self, unit_square: TriMesh, dmi_params: MaterialParams, rng: np.random.Generator
    ) -> None:
        m = normalize_nodal(rng.standard_normal((unit_square.n_vertices, 3)))
        report = fd_gradient_check(
            unit_square, m, dmi_params, [1e-1, 1e-2], operators=assemble_operators(unit_square)
        )

        assert report.max_deviation <= 1e-10, "central differences of a quadratic"
        assert len(report.deviations) == 2, "one deviation per step"

    def test_with_applied_field(
        self, unit_square: TriMesh, dmi_params: MaterialParams, rng: np.random.Generator
    ) -> None:
        m = normalize_nodal(rng.standard_normal((unit_square.n_vertices, 3)))
        report = fd_gradient_check(
            unit_square,
            m,
            dmi_params,
            [1e-2],
            operators=assemble_operators(unit_square),
            applied=AppliedField((0.0, 0.0, 0.5)),
        )

        assert report.max_deviation <= 1e-10, "applied field term"


class TestQuadEnergy:
    def test_uniform_out_of_plane(self, small_disk: TriMesh, dmi_params: MaterialParams) -> None:
        """
        m = e_3: только pi-слагаемое и постоянная, (1 + kappa^2)/2 - kappa^2/2 = 1/2 на единицу площади.
        """

        energy = quad_energy(uniform((0.0, 0.0, 1.0)), small_disk, dmi_params.kappa)

        assert energy.exchange == 0.0, "no exchange"
        assert energy.dmi == 0.0, "no DMI"
        assert energy.total == pytest.approx(0.5 * small_disk.total_area), "check total"

    def test_uniform_in_plane(self, small_disk: TriMesh, dmi_params: MaterialParams) -> None:
        energy = quad_energy(uniform((1.0, 0.0, 0.0)), small_disk, dmi_params.kappa)

        assert energy.total == pytest.approx(-0.5 * dmi_params.kappa**2 * small_disk.total_area), "check total"

    def test_zeeman(self, small_disk: TriMesh) -> None:
        energy = quad_energy(uniform((0.0, 1.0, 1.0)), small_disk, 0.0, AppliedField((0.0, 0.0, 2.0)))

        assert energy.applied_term == pytest.approx(-np.sqrt(2.0) * small_disk.total_area), "-f . m"

    def test_interpolated_energy_converges(self, dmi_params: MaterialParams) -> None:
        """
        Поле Блоха u = (x_2, 0, 1) / sqrt(1 + x_2^2) без аналитических производных: каждый вклад
        P1-энергии узловой интерполяции сходится к квадратуре со вторым порядком.
        """

        field = AnalyticField(
            name="bloch-x2",
            evaluate=lambda points: normalize_nodal(
                np.stack([points[:, 1], np.zeros(len(points)), np.ones(len(points))], axis=1)
            ),
        )
        steps: list[float] = []
        errors: dict[str, list[float]] = {"exchange": [], "dmi": [], "pi_term": []}
        for n in (4, 8, 16, 32):
            mesh = generate_square(n)
            discrete = energy(mesh, nodal_interpolant(mesh, field), dmi_params)
            reference = quad_energy(field, mesh, dmi_params.kappa)
            steps.append(1.0 / n)
            for term, values in errors.items():
                values.append(abs(getattr(discrete, term) - getattr(reference, term)))

        assert abs(reference.dmi) > 0.1, "DMI term is present"
        for term, values in errors.items():
            order = fit_order(steps, values)
            assert order is not None and order >= 1.9, f"{term}: observed order {order}"
