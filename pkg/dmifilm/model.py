"""
Материальные параметры, обезразмеривание и энергия тонкой пленки

    G(m) = 1/2 int |grad m|^2 + kappa int curl m . m - 1/2 int pi[m] . m - int f . m  (+ постоянная предела),

а также правая часть (эффективное поле в слабой форме) для схемы касательной плоскости.

Внутренние единицы: длины в l_ex, энергии в mu0*Ms^2*l_ex^3 на единицу безразмерной толщины.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from dmifilm.exceptions import InvalidParameterError, SizeMismatchError
from dmifilm.fem import as_nodal_field, assemble_operators

if TYPE_CHECKING:
    from dmifilm.fem import FemOperators, LumpedMass, NodalVectorField
    from dmifilm.mesh import TriMesh

MU0 = 4e-7 * math.pi
GAMMA0 = 1.760859630e11


@dataclass(frozen=True)
class MaterialParams:
    """
    Физические константы (A [J/m], D [J/m^2], Ms [A/m], alpha) и производные величины:
    обменная длина ell_ex [m], безразмерная константа DMI kappa, единица времени time_unit [s].
    """

    A: float
    D: float
    Ms: float
    alpha: float
    ell_ex: float
    kappa: float
    time_unit: float

    @property
    def energy_density(self) -> float:
        """
        mu0 * Ms^2 [J/m^3].
        """

        return MU0 * self.Ms**2

    def length_to_dimensionless(self, meters: float) -> float:
        return meters / self.ell_ex

    def length_to_si(self, value: float) -> float:
        return value * self.ell_ex

    def time_to_dimensionless(self, seconds: float) -> float:
        return seconds / self.time_unit

    def time_to_si(self, value: float) -> float:
        return value * self.time_unit

    def energy_scale_si(self, thickness_m: float) -> float:
        """
        Джоули на безразмерную единицу двумерной энергии для пленки толщины thickness_m.
        """

        return self.energy_density * self.ell_ex**2 * thickness_m


def derive_params(A: float, D: float, Ms: float, alpha: float = 1.0) -> MaterialParams:
    """
    ell_ex = sqrt(2A/(mu0 Ms^2)), kappa = D/(mu0 Ms^2 ell_ex), time_unit = 1/(gamma0 mu0 Ms).

    :raise InvalidParameterError: A <= 0, Ms <= 0, alpha <= 0 или нечисловые значения.
    """

    for name, value in (("A", A), ("D", D), ("Ms", Ms), ("alpha", alpha)):
        if not math.isfinite(value):
            raise InvalidParameterError(parameter=name, message="значение должно быть конечным")
    if not A > 0:
        raise InvalidParameterError(parameter="A", message="обменная жесткость должна быть положительной")
    if not Ms > 0:
        raise InvalidParameterError(parameter="Ms", message="намагниченность насыщения должна быть положительной")
    if not alpha > 0:
        raise InvalidParameterError(parameter="alpha", message="параметр затухания должен быть положительным")

    energy_density = MU0 * Ms**2
    ell_ex = math.sqrt(2.0 * A / energy_density)
    return MaterialParams(
        A=A,
        D=D,
        Ms=Ms,
        alpha=alpha,
        ell_ex=ell_ex,
        kappa=D / (energy_density * ell_ex),
        time_unit=1.0 / (GAMMA0 * MU0 * Ms),
    )


def fege_params(alpha: float = 1.0) -> MaterialParams:
    """
    FeGe: A = 8.78e-12 J/m, D = 1.58e-3 J/m^2, Ms = 3.84e5 A/m (ell_ex ~ 9.73 нм, kappa ~ 0.876).
    """

    return derive_params(8.78e-12, 1.58e-3, 3.84e5, alpha)


def dimensionless_params(kappa: float, alpha: float) -> MaterialParams:
    """
    Параметры, заданные сразу в безразмерном виде (ell_ex = time_unit = 1), для тестов и исследований.
    """

    if not alpha > 0:
        raise InvalidParameterError(parameter="alpha", message="параметр затухания должен быть положительным")
    return MaterialParams(A=0.5, D=kappa, Ms=1.0, alpha=alpha, ell_ex=1.0, kappa=kappa, time_unit=1.0)


@dataclass(frozen=True)
class AppliedField:
    """
    Постоянное внешнее поле f (безразмерное).
    """

    f: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if len(self.f) != 3 or not all(math.isfinite(c) for c in self.f):
            raise InvalidParameterError(parameter="f", message="ожидались три конечные компоненты")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.f, dtype=np.float64)


class PiOperator:
    """
    Линейный ограниченный самосопряженный оператор pi из функционала энергии, действующий поточечно
    симметричной матрицей 3x3. Подклассы задают matrix, constant_density и dissipation_bound.
    """

    matrix: np.ndarray

    @property
    def constant_density(self) -> float:
        """
        Плотность постоянного слагаемого энергии на единицу площади.
        """

        return 0.0

    @property
    def dissipation_bound(self) -> float:
        """
        Наибольшее собственное значение -pi (ноль, если -pi неположителен).
        """

        return max(0.0, float(np.max(np.linalg.eigvalsh(-self.matrix))))

    def apply(self, field: NodalVectorField) -> NodalVectorField:
        return field @ self.matrix.T

    def quadratic_lumped(self, u: NodalVectorField, lumped: LumpedMass) -> float:
        """
        int I_h[pi[u] . u] по квадратуре трапеций.
        """

        return lumped.inner(self.apply(u), u)

    def quadratic_exact(self, u: NodalVectorField, operators: FemOperators) -> float:
        """
        Точный интеграл int pi[u] . u для P1-поля: sum_cd P_cd u_c^T M u_d.
        """

        mass = operators.consistent_mass
        total = 0.0
        for c in range(3):
            mass_u = mass @ u[:, c]
            for d in range(3):
                if self.matrix[d, c] != 0.0:
                    total += self.matrix[d, c] * float(u[:, d] @ mass_u)
        return total


@dataclass(frozen=True)
class ThinFilmPi(PiOperator):
    """
    pi[m] = -(1 + kappa^2)(e_3 (x) e_3) m - эффективная анизотропия формы предела тонкой пленки.

    Постоянное слагаемое предельной энергии: -kappa^2/2 на единицу площади.
    """

    kappa: float
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        matrix = np.zeros((3, 3))
        matrix[2, 2] = -(1.0 + self.kappa**2)
        object.__setattr__(self, "matrix", matrix)

    @property
    def constant_density(self) -> float:
        return -0.5 * self.kappa**2


@dataclass(frozen=True)
class UniaxialAnisotropy(PiOperator):
    """
    pi[m] = 2q (a (x) a) m, энергия -q int (a . m)^2; при q > 0 ось a - легкая.
    """

    q: float
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.axis, dtype=np.float64)
        norm = np.linalg.norm(a)
        if not norm > 0:
            raise InvalidParameterError(parameter="axis", message="ось анизотропии не может быть нулевой")
        a = a / norm
        object.__setattr__(self, "matrix", 2.0 * self.q * np.outer(a, a))


def pi_thinfilm(field: NodalVectorField, kappa: float) -> NodalVectorField:
    """
    Поузловое значение (0, 0, -(1 + kappa^2) u_3).
    """

    return ThinFilmPi(kappa).apply(np.asarray(field, dtype=np.float64))


@dataclass(frozen=True)
class EnergyBreakdown:
    """
    Вклады энергии (безразмерные). total = exchange + dmi + pi_term + applied_term + constant_term,
    сумма в фиксированном порядке слева направо.
    """

    exchange: float
    dmi: float
    pi_term: float
    applied_term: float
    constant_term: float
    total: float

    @classmethod
    def from_terms(
        cls, *, exchange: float, dmi: float, pi_term: float, applied_term: float, constant_term: float
    ) -> EnergyBreakdown:
        total = exchange + dmi + pi_term + applied_term + constant_term
        return cls(
            exchange=exchange,
            dmi=dmi,
            pi_term=pi_term,
            applied_term=applied_term,
            constant_term=constant_term,
            total=total,
        )

    def scaled(self, factor: float) -> EnergyBreakdown:
        return EnergyBreakdown.from_terms(
            exchange=self.exchange * factor,
            dmi=self.dmi * factor,
            pi_term=self.pi_term * factor,
            applied_term=self.applied_term * factor,
            constant_term=self.constant_term * factor,
        )


def _resolve(
    mesh: TriMesh, params: MaterialParams, operators: FemOperators | None, pi: PiOperator | None
) -> tuple[FemOperators, PiOperator]:
    if operators is None:
        operators = assemble_operators(mesh)
    elif operators.mesh is not mesh:
        raise SizeMismatchError(expected=mesh.n_vertices, received=operators.mesh.n_vertices)
    return operators, pi if pi is not None else ThinFilmPi(params.kappa)


def _local_terms(
    field: NodalVectorField, params: MaterialParams, applied: AppliedField, operators: FemOperators
) -> tuple[float, float, float]:
    flat = field.ravel()
    exchange = 0.5 * float(flat @ (operators.stiffness3 @ flat))
    dmi = params.kappa * float(flat @ (operators.curl @ flat))
    # int f . u точен при весах w_z, поскольку int phi_z = w_z
    applied_term = -float(applied.vector @ (operators.lumped.weights @ field))
    return exchange, dmi, applied_term


def energy(
    mesh: TriMesh,
    field: NodalVectorField,
    params: MaterialParams,
    applied: AppliedField | None = None,
    operators: FemOperators | None = None,
    pi: PiOperator | None = None,
) -> EnergyBreakdown:
    """
    Энергия P1-поля с точной поэлементной квадратурой всех слагаемых (для отчетов).

    :raise SizeMismatchError: Поле не согласовано с сеткой.
    """

    field = as_nodal_field(mesh, field)
    applied = applied or AppliedField()
    operators, pi = _resolve(mesh, params, operators, pi)

    exchange, dmi, applied_term = _local_terms(field, params, applied, operators)
    return EnergyBreakdown.from_terms(
        exchange=exchange,
        dmi=dmi,
        pi_term=-0.5 * pi.quadratic_exact(field, operators),
        applied_term=applied_term,
        constant_term=pi.constant_density * mesh.total_area,
    )


def energy_lumped(
    mesh: TriMesh,
    field: NodalVectorField,
    params: MaterialParams,
    applied: AppliedField | None = None,
    operators: FemOperators | None = None,
    pi: PiOperator | None = None,
) -> EnergyBreakdown:
    """
    Энергия в квадратуре самой схемы: слагаемые с pi и f - по правилу трапеций.
    Именно для нее дискретный энергетический закон выполняется точно.

    :raise SizeMismatchError: Поле не согласовано с сеткой.
    """

    field = as_nodal_field(mesh, field)
    applied = applied or AppliedField()
    operators, pi = _resolve(mesh, params, operators, pi)

    exchange, dmi, applied_term = _local_terms(field, params, applied, operators)
    return EnergyBreakdown.from_terms(
        exchange=exchange,
        dmi=dmi,
        pi_term=-0.5 * pi.quadratic_lumped(field, operators.lumped),
        applied_term=applied_term,
        constant_term=pi.constant_density * mesh.total_area,
    )


def assemble_rhs(
    mesh: TriMesh,
    m: NodalVectorField,
    params: MaterialParams,
    applied: AppliedField | None,
    operators: FemOperators,
    pi: PiOperator | None = None,
) -> np.ndarray:
    """
    Вектор нагрузки b длины 3N:

        b . phi = -int grad m : grad phi + int I_h[pi[m] . phi] + int I_h[f . phi]
                  - kappa int curl m . phi - kappa int m . curl phi,

    т.е. b = -dG_lumped/dm.
    """

    m = as_nodal_field(mesh, m)
    applied = applied or AppliedField()
    operators, pi = _resolve(mesh, params, operators, pi)

    flat = m.ravel()
    weights = operators.lumped.weights[:, None]
    lumped_terms = weights * (pi.apply(m) + applied.vector[None, :])

    return -(operators.stiffness3 @ flat) - params.kappa * (operators.curl_sym @ flat) + lumped_terms.ravel()
