"""
Численная проверка предела тонкой пленки (3D -> 2D) вдоль явной последовательности восстановления

    u*_eps(sigma, s) = (u_0 + eps s kappa (e_3 x u_0)) / |u_0 + eps s kappa (e_3 x u_0)|

на цилиндре M = omega x (0, 1). Вычисляется только локальная часть энергии
1/2 int_M |D_eps u|^2 с масштабированными геликоидальными производными

    D_eps u = (d_1 u - kappa e_1 x u, d_2 u - kappa e_2 x u, eps^-1 d_s u - kappa e_3 x u);

нелокальный вклад поля рассеяния учитывается только своим аналитическим пределом 1/2 int u_3^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from numpy.polynomial.legendre import leggauss

from dmifilm.analysis import fit_order
from dmifilm.exceptions import InvalidParameterError, OutputError

if TYPE_CHECKING:
    from dmifilm.fields import AnalyticField
    from dmifilm.mesh import TriMesh

logger = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])
AXES = np.eye(3)

# Правило степени 5 на треугольнике: барицентрические координаты и веса (сумма весов 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
TRIANGLE_RULE_POINTS = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRIANGLE_RULE_WEIGHTS = np.array([0.225, *[0.132394152788506] * 3, *[0.125939180544827] * 3])

EXACT_TOLERANCE = 1e-12


def triangle_quadrature(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """
    Узлы (P, 2) и веса (P,) 7-точечной квадратуры по всем треугольникам сетки.
    """

    corners = mesh.vertices[mesh.triangles]
    points = np.einsum("qa,kad->kqd", TRIANGLE_RULE_POINTS, corners).reshape(-1, 2)
    weights = (mesh.signed_areas[:, None] * TRIANGLE_RULE_WEIGHTS[None, :]).ravel()
    return points, weights


def gauss_unit_interval(n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Правило Гаусса-Лежандра на (0, 1).
    """

    nodes, weights = leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def helical_columns(u: np.ndarray, derivatives: np.ndarray, kappa: float, eps: float = 1.0) -> np.ndarray:
    """
    Столбцы D_eps u формы (K, 3, 3); derivatives[:, :, i] - производная по i-й переменной
    (третья - по s, без масштаба).
    """

    columns = derivatives.copy()
    columns[:, :, 2] /= eps
    for i in range(3):
        columns[:, :, i] -= kappa * np.cross(AXES[i], u)
    return columns


@dataclass(frozen=True)
class RecoveryField:
    """
    Последовательность восстановления u*_eps, построенная по полю u_0 и константе kappa.
    """

    base: AnalyticField
    kappa: float

    def _perturbed(self, eps: float, points: np.ndarray, s: np.ndarray) -> np.ndarray:
        u0 = self.base.value(points)
        return u0 + (eps * self.kappa * s)[:, None] * np.cross(E3, u0)

    def value(self, eps: float, points: np.ndarray, s: np.ndarray) -> np.ndarray:
        points, s = _broadcast(points, s)
        w = self._perturbed(eps, points, s)
        return w / np.linalg.norm(w, axis=1, keepdims=True)

    def derivatives(self, eps: float, points: np.ndarray, s: np.ndarray, finite_difference: bool = False) -> np.ndarray:
        """
        Производные (d_1, d_2, d_s) формы (K, 3, 3).

        Аналитически: d u* = u* x (dw x u*) / |w| для w = u_0 + eps s kappa (e_3 x u_0), если у u_0
        есть аналитические производные; иначе центральные разности с шагом 1e-6 * min(1, eps).
        """

        points, s = _broadcast(points, s)
        if finite_difference or not self.base.has_derivatives:
            return self._finite_difference(eps, points, s)

        w = self._perturbed(eps, points, s)
        norm = np.linalg.norm(w, axis=1, keepdims=True)
        u = w / norm

        jacobian = self.base.derivatives(points)
        dw = np.empty((points.shape[0], 3, 3))
        for i in range(2):
            dw[:, :, i] = jacobian[:, :, i] + (eps * self.kappa * s)[:, None] * np.cross(E3, jacobian[:, :, i])
        dw[:, :, 2] = eps * self.kappa * np.cross(E3, self.base.value(points))

        # проекция на касательную плоскость к u*: dw - (u* . dw) u*
        tangential = dw - u[:, :, None] * np.einsum("kc,kci->ki", u, dw)[:, None, :]
        return tangential / norm[:, :, None]

    def _finite_difference(self, eps: float, points: np.ndarray, s: np.ndarray) -> np.ndarray:
        step = 1e-6 * min(1.0, eps)
        result = np.empty((points.shape[0], 3, 3))
        for i in range(2):
            shift = np.zeros(2)
            shift[i] = step
            result[:, :, i] = (self.value(eps, points + shift, s) - self.value(eps, points - shift, s)) / (2 * step)
        result[:, :, 2] = (self.value(eps, points, s + step) - self.value(eps, points, s - step)) / (2 * step)
        return result


def _broadcast(points: np.ndarray, s: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (points.shape[0],))
    return points, s


def helical_jacobian_sq(
    field: RecoveryField, eps: float, points: np.ndarray, s: np.ndarray | float, finite_difference: bool = False
) -> np.ndarray:
    """
    |D_eps u*|^2 (квадрат нормы Фробениуса) в точках (sigma, s).
    """

    points, s = _broadcast(points, s)
    u = field.value(eps, points, s)
    columns = helical_columns(u, field.derivatives(eps, points, s, finite_difference), field.kappa, eps)
    return np.einsum("kci,kci->k", columns, columns)


def local_energy_3d(
    field: RecoveryField, eps: float, mesh: TriMesh, n_gauss_s: int = 4, finite_difference: bool = False
) -> float:
    """
    1/2 int_M |D_eps u*|^2: 7-точечное правило на треугольниках omega x n_gauss_s-точечное правило
    Гаусса по s из (0, 1).

    :raise InvalidParameterError: n_gauss_s вне 2..10 или eps <= 0.
    """

    if not 2 <= n_gauss_s <= 10:
        raise InvalidParameterError(parameter="n_gauss_s", message=f"ожидалось 2..10, передано {n_gauss_s}")
    if not eps > 0:
        raise InvalidParameterError(parameter="eps", message="eps должен быть положительным")

    points, weights = triangle_quadrature(mesh)
    nodes, gauss_weights = gauss_unit_interval(n_gauss_s)

    total = 0.0
    for s, gauss_weight in zip(nodes, gauss_weights, strict=True):
        density = helical_jacobian_sq(field, eps, points, s, finite_difference)
        total += gauss_weight * float(weights @ density)
    return 0.5 * total


@dataclass(frozen=True)
class F0Reference:
    """
    Предельная энергия F_0(u_0) и ее части.

    canonical = exchange + dmi + (1 + kappa^2)/2 int u_3^2 - kappa^2 |omega| / 2;
    helical_expansion = local_part + 1/2 int u_3^2 - kappa^2 |omega| (совпадает с canonical);
    helical_as_stated = local_part + 1/2 int u_3^2 - kappa^2 |omega| / 2 (больше canonical на kappa^2 |omega| / 2).
    """

    local_part: float
    exchange: float
    dmi: float
    out_of_plane: float
    area: float
    kappa: float

    @property
    def canonical(self) -> float:
        return (
            self.exchange
            + self.dmi
            + (1.0 + self.kappa**2) * self.out_of_plane
            - 0.5 * self.kappa**2 * self.area
        )

    @property
    def helical_expansion(self) -> float:
        return self.local_part + self.out_of_plane - self.kappa**2 * self.area

    @property
    def helical_as_stated(self) -> float:
        return self.local_part + self.out_of_plane - 0.5 * self.kappa**2 * self.area


def f0_reference(field: AnalyticField, mesh: TriMesh, kappa: float, finite_difference: bool = False) -> F0Reference:
    """
    Части F_0 по 7-точечной квадратуре: local_part = 1/2 sum_{i=1,2} int |d_i u_0 - kappa e_i x u_0|^2,
    обмен, DMI и 1/2 int u_3^2 - по отдельности.
    """

    points, weights = triangle_quadrature(mesh)
    u = field.value(points)
    jacobian = field.derivatives(points, finite_difference)

    helical = jacobian - kappa * np.stack([np.cross(AXES[0], u), np.cross(AXES[1], u)], axis=2)
    curl = np.cross(AXES[0], jacobian[:, :, 0]) + np.cross(AXES[1], jacobian[:, :, 1])

    return F0Reference(
        local_part=0.5 * float(weights @ np.einsum("kci,kci->k", helical, helical)),
        exchange=0.5 * float(weights @ np.einsum("kci,kci->k", jacobian, jacobian)),
        dmi=kappa * float(weights @ np.einsum("kc,kc->k", curl, u)),
        out_of_plane=0.5 * float(weights @ u[:, 2] ** 2),
        area=mesh.total_area,
        kappa=kappa,
    )


@dataclass(frozen=True)
class GammaRow:
    eps: float
    e_local: float
    abs_error: float


@dataclass(frozen=True)
class GammaTable:
    """
    fitted_order = None означает, что все ошибки не превышают 1e-12 (последовательность постоянна).
    """

    rows: list[GammaRow]
    e_limit: float
    fitted_order: float | None
    reference: F0Reference

    @property
    def exact(self) -> bool:
        return all(row.abs_error <= EXACT_TOLERANCE for row in self.rows)

    @property
    def monotone(self) -> bool:
        errors = [row.abs_error for row in self.rows]
        return all(b < a for a, b in zip(errors, errors[1:], strict=False))

    @property
    def order_label(self) -> str:
        if self.exact:
            return "exact"
        return "nan" if self.fitted_order is None else f"{self.fitted_order:.6f}"

    def render_csv(self) -> str:
        lines = ["eps,E_local,E_limit,abs_error"]
        lines += [
            f"{row.eps!r},{row.e_local!r},{self.e_limit!r},{row.abs_error!r}" for row in self.rows
        ]
        lines.append(f"# fitted_order={self.order_label}")
        return "\n".join(lines) + "\n"


def gamma_study(
    field: AnalyticField,
    mesh: TriMesh,
    eps_list: list[float],
    kappa: float,
    n_gauss_s: int = 4,
    finite_difference: bool = False,
) -> GammaTable:
    """
    E_local(eps) = local_energy_3d(u*_eps) против E_limit = local_part(u_0), порядок - наклон
    наименьших квадратов log|error| от log eps.

    :raise InvalidParameterError: Меньше трех eps, eps не убывают строго или не положительны.
    """

    if len(eps_list) < 3:
        raise InvalidParameterError(parameter="eps", message="нужно не меньше трех значений")
    if any(e <= 0 or not math.isfinite(e) for e in eps_list):
        raise InvalidParameterError(parameter="eps", message="значения должны быть положительными")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:], strict=False)):
        raise InvalidParameterError(parameter="eps", message="значения должны строго убывать")

    reference = f0_reference(field, mesh, kappa, finite_difference)
    recovery = RecoveryField(base=field, kappa=kappa)

    rows: list[GammaRow] = []
    for eps in eps_list:
        e_local = local_energy_3d(recovery, eps, mesh, n_gauss_s, finite_difference)
        rows.append(GammaRow(eps=eps, e_local=e_local, abs_error=abs(e_local - reference.local_part)))
        logger.debug("gamma: eps=%g E_local=%.15e error=%.3e", eps, e_local, rows[-1].abs_error)

    order = fit_order([row.eps for row in rows], [row.abs_error for row in rows], floor=EXACT_TOLERANCE)
    logger.info("gamma study %s: fitted order %s", field.name, "exact" if order is None else f"{order:.3f}")
    return GammaTable(rows=rows, e_limit=reference.local_part, fitted_order=order, reference=reference)


def write_gamma_table(table: GammaTable, path: Path) -> None:
    """
    :raise OutputError: Ошибка записи.
    """

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table.render_csv(), encoding="ascii")
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc
