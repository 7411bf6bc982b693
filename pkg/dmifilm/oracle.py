"""
Независимые эталоны для тестов: поэлементная плотная сборка, энергия аналитического поля по
квадратуре степени 5 и проверка градиента центральными разностями.

Код модуля не использует процедуры сборки из dmifilm.fem и квадратуру из dmifilm.gamma.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from dmifilm.exceptions import InvalidParameterError
from dmifilm.model import AppliedField, EnergyBreakdown, assemble_rhs, energy_lumped

if TYPE_CHECKING:
    from dmifilm.fem import FemOperators, NodalVectorField
    from dmifilm.fields import AnalyticField
    from dmifilm.mesh import TriMesh
    from dmifilm.model import MaterialParams, PiOperator

MAX_TRIANGLES = 50
MAX_UNKNOWNS = 200

_REFERENCE_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

# Правило Данавана степени 5: (вес, барицентрические координаты)
_DUNAVANT_5 = (
    (0.225, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)),
    (0.132394152788506, (0.059715871789770, 0.470142064105115, 0.470142064105115)),
    (0.132394152788506, (0.470142064105115, 0.059715871789770, 0.470142064105115)),
    (0.132394152788506, (0.470142064105115, 0.470142064105115, 0.059715871789770)),
    (0.125939180544827, (0.797426985353087, 0.101286507323456, 0.101286507323456)),
    (0.125939180544827, (0.101286507323456, 0.797426985353087, 0.101286507323456)),
    (0.125939180544827, (0.101286507323456, 0.101286507323456, 0.797426985353087)),
)


@dataclass(frozen=True)
class DenseForms:
    """
    Плотные матрицы малой сетки: скалярные N x N (mass_lumped, mass_consistent, stiffness)
    и 3N x 3N форма ротора в нумерации 3*z + c.
    """

    mass_lumped: np.ndarray
    mass_consistent: np.ndarray
    stiffness: np.ndarray
    curl_form: np.ndarray


def _element(corners: np.ndarray) -> tuple[float, np.ndarray]:
    """
    Площадь и градиенты барицентрических функций через обратную матрицу Якоби аффинного отображения.
    """

    jacobian = np.column_stack([corners[1] - corners[0], corners[2] - corners[0]])
    determinant = np.linalg.det(jacobian)
    if determinant <= 0:
        raise InvalidParameterError(parameter="mesh", message="треугольник с неположительной площадью")
    gradients = _REFERENCE_GRADIENTS @ np.linalg.inv(jacobian)
    return 0.5 * determinant, gradients


def dense_assemble(mesh: TriMesh) -> DenseForms:
    """
    Наивная поэлементная сборка без учета разреженности.

    :raise InvalidParameterError: Сетка больше 50 треугольников или 200 неизвестных.
    """

    n = mesh.n_vertices
    if mesh.n_triangles > MAX_TRIANGLES or 3 * n > MAX_UNKNOWNS:
        raise InvalidParameterError(
            parameter="mesh",
            message=f"эталон ограничен {MAX_TRIANGLES} треугольниками и {MAX_UNKNOWNS} неизвестными",
        )

    mass_lumped = np.zeros((n, n))
    mass_consistent = np.zeros((n, n))
    stiffness = np.zeros((n, n))
    curl_form = np.zeros((3 * n, 3 * n))
    axes = np.eye(3)

    for triangle in mesh.triangles:
        area, gradients = _element(mesh.vertices[triangle])
        for a in range(3):
            za = int(triangle[a])
            mass_lumped[za, za] += area / 3.0
            gradient3 = np.array([gradients[a, 0], gradients[a, 1], 0.0])
            for b in range(3):
                zb = int(triangle[b])
                stiffness[za, zb] += area * float(gradients[a] @ gradients[b])
                mass_consistent[za, zb] += area / 12.0 * (2.0 if a == b else 1.0)
                # int_K curl(l_a e_c) . (l_b e_r) = (grad l_a x e_c)_r * |K| / 3
                for c in range(3):
                    column = np.cross(gradient3, axes[c])
                    for r in range(3):
                        curl_form[3 * zb + r, 3 * za + c] += column[r] * area / 3.0

    return DenseForms(
        mass_lumped=mass_lumped,
        mass_consistent=mass_consistent,
        stiffness=stiffness,
        curl_form=curl_form,
    )


@dataclass(frozen=True)
class GradientCheckReport:
    deltas: list[float]
    deviations: list[float]
    observed_order: float | None

    @property
    def max_deviation(self) -> float:
        return max(self.deviations)


def fd_gradient_check(
    mesh: TriMesh,
    m: NodalVectorField,
    params: MaterialParams,
    deltas: list[float],
    *,
    operators: FemOperators,
    applied: AppliedField | None = None,
    pi: PiOperator | None = None,
    n_directions: int = 3,
    seed: int = 0,
) -> GradientCheckReport:
    """
    Сравнение (G(m + d phi) - G(m - d phi)) / (2d) с -b . phi для случайных узловых направлений phi,
    G - энергия с квадратурой трапеций, b - правая часть схемы.
    """

    applied = applied or AppliedField()
    rng = np.random.default_rng(seed)
    rhs = assemble_rhs(mesh, m, params, applied, operators, pi)
    directions = [rng.standard_normal(m.shape) for _ in range(n_directions)]

    def total(field: NodalVectorField) -> float:
        return energy_lumped(mesh, field, params, applied, operators, pi).total

    deviations: list[float] = []
    for delta in deltas:
        worst = 0.0
        for phi in directions:
            central = (total(m + delta * phi) - total(m - delta * phi)) / (2.0 * delta)
            worst = max(worst, abs(central + float(rhs @ phi.ravel())))
        deviations.append(worst)

    usable = [(d, e) for d, e in zip(deltas, deviations, strict=True) if e > 0]
    order = None
    if len(usable) >= 2:
        order = float(np.polyfit(np.log([d for d, _ in usable]), np.log([e for _, e in usable]), 1)[0])
    return GradientCheckReport(deltas=list(deltas), deviations=deviations, observed_order=order)


def quad_energy(
    field: AnalyticField, mesh: TriMesh, kappa: float, applied: AppliedField | None = None
) -> EnergyBreakdown:
    """
    Энергия тонкой пленки аналитического поля: каждый интеграл по 7-точечному правилу степени 5.
    """

    f = np.asarray((applied or AppliedField()).f, dtype=np.float64)
    exchange = dmi = out_of_plane = zeeman = area_total = 0.0

    for triangle in mesh.triangles:
        corners = mesh.vertices[triangle]
        area = 0.5 * abs(
            (corners[1, 0] - corners[0, 0]) * (corners[2, 1] - corners[0, 1])
            - (corners[2, 0] - corners[0, 0]) * (corners[1, 1] - corners[0, 1])
        )
        area_total += area
        for weight, barycentric in _DUNAVANT_5:
            point = np.asarray(barycentric) @ corners
            u = field.value(point[None, :])[0]
            du = field.derivatives(point[None, :])[0]
            d1, d2 = du[:, 0], du[:, 1]
            curl = np.array([d2[2], -d1[2], d1[1] - d2[0]])
            scale = weight * area
            exchange += scale * 0.5 * (d1 @ d1 + d2 @ d2)
            dmi += scale * kappa * (curl @ u)
            out_of_plane += scale * u[2] ** 2
            zeeman += scale * (f @ u)

    return EnergyBreakdown.from_terms(
        exchange=exchange,
        dmi=dmi,
        pi_term=0.5 * (1.0 + kappa**2) * out_of_plane,
        applied_term=-zeeman,
        constant_term=-0.5 * kappa**2 * area_total,
    )
