from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from dmifilm.exceptions import InvalidParameterError
from dmifilm.fields import PRESETS, tilted_x, uniform
from dmifilm.gamma import (
    RecoveryField,
    f0_reference,
    gamma_study,
    gauss_unit_interval,
    helical_jacobian_sq,
    local_energy_3d,
    triangle_quadrature,
    write_gamma_table,
)
from dmifilm.mesh import TriMesh, generate_disk

KAPPA = 0.876
EPS = [0.2, 0.1, 0.05, 0.025]


@pytest.fixture
def omega() -> TriMesh:
    return generate_disk(2.0, 0.5)


class TestQuadrature:
    def test_triangle_rule_is_exact_for_quadratics(self, reference_triangle: TriMesh) -> None:
        points, weights = triangle_quadrature(reference_triangle)

        assert weights.sum() == pytest.approx(0.5, rel=1e-12), "area"
        assert float(weights @ points[:, 0] ** 2) == pytest.approx(1.0 / 12.0, rel=1e-12), "int x^2"
        assert float(weights @ (points[:, 0] * points[:, 1])) == pytest.approx(1.0 / 24.0, rel=1e-12), "int xy"

    def test_gauss_on_unit_interval(self) -> None:
        nodes, weights = gauss_unit_interval(4)

        assert np.all((nodes > 0.0) & (nodes < 1.0)), "nodes inside (0, 1)"
        assert weights.sum() == pytest.approx(1.0), "check weights"
        assert float(weights @ nodes**7) == pytest.approx(1.0 / 8.0), "exact up to degree 7"


class TestRecoveryField:
    """
    u*_eps = (u_0 + eps s kappa e_3 x u_0) / |...|
    """

    def test_unit_length(self) -> None:
        recovery = RecoveryField(base=tilted_x(), kappa=KAPPA)
        points = np.array([[0.2, 0.1], [-0.5, 0.3]])

        values = recovery.value(0.3, points, np.array([0.25, 0.9]))
        assert np.allclose(np.linalg.norm(values, axis=1), 1.0), "unit length"

    def test_derivatives_match_differences(self) -> None:
        recovery = RecoveryField(base=tilted_x(), kappa=KAPPA)
        points = np.array([[0.2, 0.1], [-0.5, 0.3], [0.7, -0.4]])
        s = np.array([0.1, 0.5, 0.9])

        analytic = recovery.derivatives(0.1, points, s)
        numeric = recovery.derivatives(0.1, points, s, finite_difference=True)
        assert np.allclose(analytic, numeric, atol=1e-7), "check (d_1, d_2, d_s)"

    def test_helical_jacobian_out_of_plane(self) -> None:
        recovery = RecoveryField(base=uniform((0.0, 0.0, 1.0)), kappa=KAPPA)
        points = np.array([[0.2, 0.1], [-0.5, 0.3]])

        values = helical_jacobian_sq(recovery, 0.1, points, np.array([0.25, 0.9]))
        assert np.allclose(values, 2.0 * KAPPA**2), "columns kappa e_2, -kappa e_1 and zero"

    @pytest.mark.parametrize(("kappa", "expected"), [(KAPPA, KAPPA**2), (0.0, 0.0)])
    def test_helical_jacobian_in_plane(self, kappa: float, expected: float) -> None:
        recovery = RecoveryField(base=uniform((1.0, 0.0, 0.0)), kappa=kappa)
        points = np.array([[0.2, 0.1], [-0.5, 0.3]])

        values = helical_jacobian_sq(recovery, 0.01, points, 0.5)
        assert np.allclose(values, expected, atol=1e-6), "third column vanishes as eps -> 0"

    def test_limit_is_base_field(self) -> None:
        recovery = RecoveryField(base=tilted_x(), kappa=KAPPA)
        points = np.array([[0.4, 0.0]])

        assert np.allclose(recovery.value(1e-12, points, 1.0), tilted_x().value(points)), "eps -> 0"


class TestLimitReference:
    def test_constant_terms(self, omega: TriMesh) -> None:
        """
        Две формы предела совпадают; форма с -kappa^2 |omega| / 2 больше на kappa^2 |omega| / 2.
        """

        reference = f0_reference(tilted_x(), omega, KAPPA)

        assert reference.helical_expansion == pytest.approx(reference.canonical, abs=1e-10), "expansion"
        difference = reference.helical_as_stated - reference.canonical
        assert difference == pytest.approx(0.5 * KAPPA**2 * omega.total_area, rel=1e-10), "as stated"

    def test_helical_identity(self, omega: TriMesh) -> None:
        reference = f0_reference(PRESETS["radial"](), omega, KAPPA)
        expected = reference.local_part - 0.5 * KAPPA**2 * (reference.area + 2.0 * reference.out_of_plane)

        assert reference.exchange + reference.dmi == pytest.approx(expected, abs=1e-10), "check identity"


class TestGammaStudy:
    """
    Сходимость E_local(eps) к локальной части предельной энергии
    """

    def test_const_z_is_exact(self, omega: TriMesh) -> None:
        table = gamma_study(PRESETS["const-z"](), omega, EPS, KAPPA)

        assert table.exact, "sequence is constant"
        assert table.fitted_order is None, "no order for exact sequence"
        assert table.e_limit == pytest.approx(KAPPA**2 * omega.total_area), "|D u|^2 = 2 kappa^2"
        assert table.render_csv().splitlines()[-1] == "# fitted_order=exact", "check footer"

    def test_const_x_fourth_order(self, omega: TriMesh) -> None:
        table = gamma_study(PRESETS["const-x"](), omega, EPS, KAPPA)

        assert table.fitted_order is not None, "check order"
        assert table.fitted_order >= 3.5, "error ~ eps^4"
        assert table.monotone, "errors decrease"

    def test_finite_differences_agree(self, omega: TriMesh) -> None:
        analytic = gamma_study(tilted_x(), omega, EPS, KAPPA)
        numeric = gamma_study(tilted_x(), omega, EPS, KAPPA, finite_difference=True)

        for a, n in zip(analytic.rows, numeric.rows, strict=True):
            assert n.e_local == pytest.approx(a.e_local, rel=1e-7), f"eps={a.eps}"

    def test_render_csv(self, omega: TriMesh) -> None:
        lines = gamma_study(PRESETS["const-x"](), omega, EPS, KAPPA).render_csv().splitlines()

        assert lines[0] == "eps,E_local,E_limit,abs_error", "check header"
        assert len(lines) == 6, "header, four rows, footer"
        assert lines[1].startswith("0.2,"), "check first row"
        assert lines[-1].startswith("# fitted_order=3."), "check footer"

    def test_write_table(self, tmp_path: Path, omega: TriMesh) -> None:
        table = gamma_study(PRESETS["const-z"](), omega, EPS, KAPPA)
        path = tmp_path / "out" / "gamma_const-z.csv"
        write_gamma_table(table, path)

        assert path.read_text(encoding="ascii") == table.render_csv(), "check content"

    @pytest.mark.parametrize(
        "eps", [[0.2, 0.1], [0.1, 0.2, 0.05], [0.2, 0.1, 0.1], [0.2, 0.1, 0.0]]
    )
    def test_invalid_eps(self, omega: TriMesh, eps: list[float]) -> None:
        with pytest.raises(InvalidParameterError) as exc:
            gamma_study(PRESETS["const-z"](), omega, eps, KAPPA)

        assert exc.value.parameter == "eps", "check parameter"

    @pytest.mark.parametrize("n_gauss", [1, 11])
    def test_gauss_points_bounds(self, omega: TriMesh, n_gauss: int) -> None:
        recovery = RecoveryField(base=tilted_x(), kappa=KAPPA)

        with pytest.raises(InvalidParameterError) as exc:
            local_energy_3d(recovery, 0.1, omega, n_gauss_s=n_gauss)

        assert exc.value.parameter == "n_gauss_s", "check parameter"
