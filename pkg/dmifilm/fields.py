"""
Аналитические поля единичной длины на omega с (необязательными) аналитическими производными:
начальные условия динамики и входные данные исследования предела тонкой пленки.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from dmifilm.exceptions import InvalidParameterError
from dmifilm.fem import normalize_nodal

if TYPE_CHECKING:
    from collections.abc import Callable

    from dmifilm.fem import NodalVectorField
    from dmifilm.mesh import TriMesh

type Evaluator = Callable[[np.ndarray], np.ndarray]

UNIT_TOLERANCE = 1e-12
FD_STEP = 1e-6
SERIES_RADIUS = 1e-8


@dataclass(frozen=True)
class AnalyticField:
    """
    sigma -> u_0(sigma) из S^2. evaluate: (K, 2) -> (K, 3); jacobian: (K, 2) -> (K, 3, 2),
    столбец i - производная по x_i.
    """

    name: str
    evaluate: Evaluator
    jacobian: Evaluator | None = None

    @property
    def has_derivatives(self) -> bool:
        return self.jacobian is not None

    def value(self, points: np.ndarray) -> np.ndarray:
        """
        :raise InvalidParameterError: Поле не единичной длины в какой-либо точке.
        """

        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        values = self.evaluate(points)
        deviation = np.abs(np.linalg.norm(values, axis=1) - 1.0)
        if np.any(deviation > UNIT_TOLERANCE):
            raise InvalidParameterError(
                parameter=self.name, message=f"|u| отличается от 1 на {float(np.max(deviation)):.3e}"
            )
        return values

    def derivatives(self, points: np.ndarray, finite_difference: bool = False) -> np.ndarray:
        """
        Производные по x_1, x_2: аналитические, если заданы, иначе центральные разности с шагом 1e-6.
        """

        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.jacobian is not None and not finite_difference:
            return self.jacobian(points)

        result = np.empty((points.shape[0], 3, 2))
        for i in range(2):
            shift = np.zeros(2)
            shift[i] = FD_STEP
            result[:, :, i] = (self.evaluate(points + shift) - self.evaluate(points - shift)) / (2.0 * FD_STEP)
        return result


def uniform(vector: tuple[float, float, float], name: str | None = None) -> AnalyticField:
    direction = np.asarray(vector, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)

    def evaluate(points: np.ndarray) -> np.ndarray:
        return np.tile(direction, (points.shape[0], 1))

    def jacobian(points: np.ndarray) -> np.ndarray:
        return np.zeros((points.shape[0], 3, 2))

    return AnalyticField(name=name or f"uniform{tuple(direction)}", evaluate=evaluate, jacobian=jacobian)


def tilted_x() -> AnalyticField:
    """
    u = (x_1, 0, 1) / sqrt(1 + x_1^2).
    """

    def evaluate(points: np.ndarray) -> np.ndarray:
        x = points[:, 0]
        norm = np.sqrt(1.0 + x**2)
        return np.stack([x / norm, np.zeros_like(x), 1.0 / norm], axis=1)

    def jacobian(points: np.ndarray) -> np.ndarray:
        x = points[:, 0]
        cube = (1.0 + x**2) ** 1.5
        result = np.zeros((points.shape[0], 3, 2))
        result[:, 0, 0] = 1.0 / cube
        result[:, 2, 0] = -x / cube
        return result

    return AnalyticField(name="tilted-x", evaluate=evaluate, jacobian=jacobian)


def radial_skyrmion(radius: float = 1.0) -> AnalyticField:
    """
    u = (sin t cos phi, sin t sin phi, cos t), t(rho) = pi * min(rho / R, 1): m_3 = 1 в центре, -1 на краю.
    """

    if not radius > 0:
        raise InvalidParameterError(parameter="radius", message="радиус должен быть положительным")

    slope = math.pi / radius

    def profile(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        inside = rho < radius
        theta = np.where(inside, slope * rho, math.pi)
        dtheta = np.where(inside, slope, 0.0)
        sin_theta = np.where(inside, np.sin(theta), 0.0)
        small = rho < SERIES_RADIUS
        safe_rho = np.where(small, 1.0, rho)
        # s = sin(t)/rho и ds/drho / rho с рядами Тейлора в окрестности центра
        s = np.where(small, slope * (1.0 - (slope * rho) ** 2 / 6.0), sin_theta / safe_rho)
        ds_over_rho = np.where(
            small,
            -(slope**3) / 3.0,
            (dtheta * np.cos(theta) * safe_rho - sin_theta) / safe_rho**3,
        )
        return theta, dtheta, s, ds_over_rho

    def evaluate(points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        theta, _, s, _ = profile(np.hypot(x, y))
        return np.stack([s * x, s * y, np.cos(theta)], axis=1)

    def jacobian(points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        rho = np.hypot(x, y)
        _, dtheta, s, ds_over_rho = profile(rho)
        result = np.empty((points.shape[0], 3, 2))
        result[:, 0, 0] = s + ds_over_rho * x * x
        result[:, 0, 1] = ds_over_rho * x * y
        result[:, 1, 0] = ds_over_rho * x * y
        result[:, 1, 1] = s + ds_over_rho * y * y
        # d cos t / dx_i = -sin t * t' * x_i / rho = -s * t' * x_i
        result[:, 2, 0] = -s * dtheta * x
        result[:, 2, 1] = -s * dtheta * y
        return result

    return AnalyticField(name=f"radial-skyrmion(R={radius:g})", evaluate=evaluate, jacobian=jacobian)


def nodal_interpolant(mesh: TriMesh, field: AnalyticField) -> NodalVectorField:
    """
    Узловая интерполяция аналитического поля с последующей поузловой нормировкой: |m(z)| = 1.
    """

    return normalize_nodal(field.evaluate(mesh.vertices))


PRESETS: dict[str, Callable[[], AnalyticField]] = {
    "const-x": lambda: uniform((1.0, 0.0, 0.0), name="const-x"),
    "const-z": lambda: uniform((0.0, 0.0, 1.0), name="const-z"),
    "tilted-x": tilted_x,
    "radial": radial_skyrmion,
}
