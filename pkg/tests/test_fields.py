from __future__ import annotations

import math

import numpy as np
import pytest

from dmifilm.exceptions import InvalidParameterError
from dmifilm.fields import PRESETS, AnalyticField, nodal_interpolant, radial_skyrmion, tilted_x, uniform
from dmifilm.mesh import TriMesh

INNER_POINTS = np.array([[0.3, 0.1], [-0.2, 0.45], [0.05, -0.6], [0.5, 0.5]])


class TestAnalyticFields:
    def test_uniform_is_normalized(self) -> None:
        field = uniform((0.0, 3.0, 4.0))

        assert np.allclose(field.value(INNER_POINTS), [0.0, 0.6, 0.8]), "check value"
        assert np.all(field.derivatives(INNER_POINTS) == 0.0), "constant field"

    def test_non_unit_values_are_rejected(self) -> None:
        field = AnalyticField(name="twice-e3", evaluate=lambda points: np.tile([0.0, 0.0, 2.0], (len(points), 1)))

        with pytest.raises(InvalidParameterError) as exc:
            field.value(INNER_POINTS)

        assert exc.value.parameter == "twice-e3", "check parameter"

    def test_tilted_x(self) -> None:
        value = tilted_x().value(np.array([[1.0, 7.0]]))

        assert np.allclose(value, [[1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)]]), "check value"

    @pytest.mark.parametrize("field", [tilted_x(), radial_skyrmion(1.0)])
    def test_analytic_derivatives_match_differences(self, field: AnalyticField) -> None:
        analytic = field.derivatives(INNER_POINTS)
        numeric = field.derivatives(INNER_POINTS, finite_difference=True)

        assert np.allclose(analytic, numeric, atol=1e-7), "check jacobian"

    def test_fields_without_jacobian_use_differences(self) -> None:
        base = tilted_x()
        field = AnalyticField(name="tilted-x-numeric", evaluate=base.evaluate)

        assert not field.has_derivatives, "no analytic jacobian"
        assert np.allclose(field.derivatives(INNER_POINTS), base.derivatives(INNER_POINTS), atol=1e-7), "jacobian"


class TestRadialSkyrmion:
    """
    m_3 = 1 в центре, -1 на краю и вне радиуса
    """

    def test_center_and_rim(self) -> None:
        field = radial_skyrmion(2.0)
        values = field.value(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, -3.0]]))

        assert np.allclose(values[0], [0.0, 0.0, 1.0]), "center"
        assert np.allclose(values[1:], [0.0, 0.0, -1.0]), "rim and outside"

    def test_series_near_center(self) -> None:
        field = radial_skyrmion(1.0)
        jacobian = field.derivatives(np.array([[0.0, 0.0], [1e-10, 0.0]]))

        assert np.all(np.isfinite(jacobian)), "finite at the center"
        assert jacobian[0, 0, 0] == pytest.approx(math.pi), "d m_1 / d x_1 = pi / R"
        assert jacobian[0, 1, 1] == pytest.approx(math.pi), "d m_2 / d x_2 = pi / R"

    def test_rotation_symmetry(self) -> None:
        field = radial_skyrmion(1.0)
        values = field.value(np.array([[0.4, 0.0], [0.0, 0.4], [-0.4, 0.0]]))

        assert np.allclose(values[:, 2], values[0, 2]), "m_3 depends on the radius only"

    @pytest.mark.parametrize("radius", [0.0, -1.0])
    def test_invalid_radius(self, radius: float) -> None:
        with pytest.raises(InvalidParameterError):
            radial_skyrmion(radius)


class TestPresetsAndInterpolation:
    def test_presets(self) -> None:
        assert set(PRESETS) == {"const-x", "const-z", "tilted-x", "radial"}, "check preset names"
        assert PRESETS["const-z"]().name == "const-z", "check name"

    def test_nodal_interpolant(self, small_disk: TriMesh) -> None:
        m = nodal_interpolant(small_disk, radial_skyrmion(1.5))

        assert m.shape == (small_disk.n_vertices, 3), "check shape"
        assert np.allclose(np.linalg.norm(m, axis=1), 1.0, atol=1e-15), "unit nodal values"
        assert np.allclose(m[0], [0.0, 0.0, 1.0]), "center vertex points up"
