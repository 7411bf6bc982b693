"""
Постобработка: средние значения, профиль m_3 вдоль диаметра, классификация скирмионных состояний
и запись результатов (CSV временных рядов, снимки VTK legacy ASCII, файлы узловых полей).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Literal, Self

import numpy as np

from dmifilm.exceptions import (
    DegenerateMagnetizationError,
    InvalidParameterError,
    OutputError,
    PointOutsideMeshError,
    SizeMismatchError,
)
from dmifilm.fem import as_nodal_field, assemble_lumped_mass, element_geometry, interpolate_at

if TYPE_CHECKING:
    from collections.abc import Iterable
    from types import TracebackType

    from dmifilm.dynamics import StepDiagnostics
    from dmifilm.fem import ElementGeometry, LumpedMass, NodalVectorField
    from dmifilm.mesh import TriMesh

logger = logging.getLogger(__name__)

type SkyrmionKind = Literal["incomplete", "isolated", "target"]

SERIES_COLUMNS = (
    "step",
    "time",
    "exchange",
    "dmi",
    "pi",
    "applied",
    "constant",
    "total",
    "avg_m1",
    "avg_m2",
    "avg_m3",
    "vmax",
    "constraint_l1",
    "energy_residual",
)

PROFILE_DRIFT = 0.05
MIN_PROFILE_SAMPLES = 16
VTK_FLOAT = "%.9e"


def average_m(mesh: TriMesh, field: NodalVectorField, lumped: LumpedMass | None = None) -> np.ndarray:
    """
    Среднее |omega|^-1 int m по всем трем компонентам. Для P1-поля int phi_z = w_z,
    поэтому сумма с весами трапеций точна.
    """

    field = as_nodal_field(mesh, field)
    lumped = lumped or assemble_lumped_mass(mesh)
    return (lumped.weights @ field) / mesh.total_area


def average_m3(mesh: TriMesh, field: NodalVectorField, lumped: LumpedMass | None = None) -> float:
    return float(average_m(mesh, field, lumped)[2])


@dataclass(frozen=True)
class Profile:
    """
    Значения m_3 в точках отрезка, упорядоченных по абсциссе (расстояние от середины отрезка).
    """

    abscissa: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.abscissa.shape != self.values.shape or self.abscissa.ndim != 1:
            raise InvalidParameterError(parameter="profile", message="абсциссы и значения не согласованы")
        if np.any(np.diff(self.abscissa) <= 0):
            raise InvalidParameterError(parameter="profile", message="абсциссы должны строго возрастать")
        if np.any(np.abs(self.values) > 1.0 + PROFILE_DRIFT):
            raise InvalidParameterError(parameter="profile", message="значения m_3 вне [-1.05, 1.05]")

    def reversed(self) -> Profile:
        return Profile(abscissa=-self.abscissa[::-1], values=self.values[::-1])


def _boundary_crossings(mesh: TriMesh, start: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """
    Параметры t в [0, 1] точек пересечения отрезка start + t*direction с граничными ребрами.
    """

    edges = mesh.boundary_edges
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    edge = b - a

    denominator = direction[0] * edge[:, 1] - direction[1] * edge[:, 0]
    offset = a - start
    regular = np.abs(denominator) > 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (offset[:, 0] * edge[:, 1] - offset[:, 1] * edge[:, 0]) / denominator
        s = (offset[:, 0] * direction[1] - offset[:, 1] * direction[0]) / denominator

    hits = regular & (s >= 0.0) & (s <= 1.0) & (t >= 0.0) & (t <= 1.0)
    return np.sort(t[hits])


def extract_profile(
    mesh: TriMesh,
    field: NodalVectorField,
    n_samples: int,
    half_length: float | None = None,
) -> Profile:
    """
    Профиль m_3 на n_samples равноотстоящих точках отрезка (-d/2, 0)-(d/2, 0).
    По умолчанию d/2 - наибольшее расстояние от начала координат до вершины сетки.

    Точки, оказавшиеся вне многоугольной границы, переносятся в ближайшую точку пересечения
    отрезка с границей.

    :raise InvalidParameterError: n_samples < 16.
    :raise PointOutsideMeshError: Весь отрезок вне сетки.
    """

    if n_samples < MIN_PROFILE_SAMPLES:
        raise InvalidParameterError(
            parameter="n_samples", message=f"нужно не меньше {MIN_PROFILE_SAMPLES} точек, передано {n_samples}"
        )

    field = as_nodal_field(mesh, field)
    if half_length is None:
        half_length = float(np.max(np.linalg.norm(mesh.vertices, axis=1)))

    start = np.array([-half_length, 0.0])
    direction = np.array([2.0 * half_length, 0.0])
    geometry = element_geometry(mesh)
    parameters = np.linspace(0.0, 1.0, n_samples)

    values = np.empty(n_samples)
    outside: list[int] = []
    for i, t in enumerate(parameters):
        point = start + t * direction
        try:
            values[i] = _sample_m3(mesh, field, point, geometry)
        except PointOutsideMeshError:
            outside.append(i)

    if len(outside) == n_samples:
        raise PointOutsideMeshError(point=(float(start[0]), float(start[1])))

    if outside:
        crossings = _boundary_crossings(mesh, start, direction)
        for i in outside:
            nearest = crossings[np.argmin(np.abs(crossings - parameters[i]))] if crossings.size else None
            if nearest is None:
                point = start + parameters[i] * direction
                raise PointOutsideMeshError(point=(float(point[0]), float(point[1])))
            values[i] = _sample_m3(mesh, field, start + nearest * direction, geometry)
        logger.info("profile: %d of %d samples clamped to the boundary", len(outside), n_samples)

    return Profile(abscissa=(parameters - 0.5) * direction[0], values=values)


def readout_profile(mesh: TriMesh, field: NodalVectorField, n_samples: int) -> Profile:
    """
    Профиль направления намагниченности: узловые значения делятся на свою длину, затем строится профиль.
    Итерации схемы не нормируются и |m| растет на tau^2 |v|^2 за шаг; классификация по полосам
    H/L относится к направлению, поэтому нормировка выполняется только здесь, при постобработке.

    :raise DegenerateMagnetizationError: Нулевой вектор в вершине.
    """

    field = as_nodal_field(mesh, field)
    lengths = np.linalg.norm(field, axis=1)
    shortest = int(np.argmin(lengths))
    if not lengths[shortest] > 0.0:
        raise DegenerateMagnetizationError(vertex=shortest, length=float(lengths[shortest]))

    drift = float(np.max(np.abs(lengths - 1.0)))
    if drift > PROFILE_DRIFT:
        logger.info("profile read-out: max ||m| - 1| = %.4g, nodal values normalized", drift)
    return extract_profile(mesh, field / lengths[:, None], n_samples)


def _sample_m3(mesh: TriMesh, field: NodalVectorField, point: np.ndarray, geometry: ElementGeometry) -> float:
    return float(interpolate_at(mesh, field, (float(point[0]), float(point[1])), geometry)[2])


@dataclass(frozen=True)
class SkyrmionClass:
    kind: SkyrmionKind
    alternations: int


def _alternations(values: Iterable[float], band_tol: float) -> int:
    bands: list[str] = []
    for value in values:
        if value >= 1.0 - band_tol:
            band = "H"
        elif value <= -1.0 + band_tol:
            band = "L"
        else:
            continue
        if not bands or bands[-1] != band:
            bands.append(band)
    return max(0, len(bands) - 1)


def classify_skyrmion(profile: Profile, band_tol: float = 0.1) -> SkyrmionClass:
    """
    Полосы H (m_3 >= 1 - band_tol), L (m_3 <= -1 + band_tol), N (остальное). На половине профиля
    от центра к краю повторы схлопываются, N пропускаются; a - число соседних пар HL/LH.
    Берутся обе половины диаметра, a - наибольшее из двух.

    a = 0 - incomplete, a = 1 - isolated, a >= 2 - target.
    """

    if not 0 < band_tol < 1:
        raise InvalidParameterError(parameter="band_tol", message="ожидалось значение из (0, 1)")

    center = 0.5 * (profile.abscissa[0] + profile.abscissa[-1])
    right = profile.values[profile.abscissa >= center]
    left = profile.values[profile.abscissa <= center][::-1]

    alternations = max(_alternations(right, band_tol), _alternations(left, band_tol))
    kind: SkyrmionKind
    if alternations == 0:
        kind = "incomplete"
    elif alternations == 1:
        kind = "isolated"
    else:
        kind = "target"
    return SkyrmionClass(kind=kind, alternations=alternations)


def fit_order(steps: Iterable[float], errors: Iterable[float], floor: float = 1e-14) -> float | None:
    """
    Наблюдаемый порядок сходимости: наклон прямой наименьших квадратов log(error) от log(step).
    Ошибки не выше floor исключаются; None, если осталось меньше двух точек.
    """

    pairs = [(s, e) for s, e in zip(steps, errors, strict=True) if e > floor]
    if len(pairs) < 2:
        return None
    x = np.log([s for s, _ in pairs])
    y = np.log([e for _, e in pairs])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="ascii")
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc


def render_vtk(mesh: TriMesh, field: NodalVectorField, title: str = "dmifilm magnetization") -> str:
    field = as_nodal_field(mesh, field)
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} float",
    ]
    row = f"{VTK_FLOAT} {VTK_FLOAT} {VTK_FLOAT}"
    lines += [row % (x, y, 0.0) for x, y in mesh.vertices]
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines += ["5"] * mesh.n_triangles
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    lines.append("VECTORS m float")
    lines += [row % tuple(value) for value in field]
    return "\n".join(lines) + "\n"


def write_vtk(mesh: TriMesh, field: NodalVectorField, path: Path) -> None:
    """
    Снимок поля в формате VTK legacy 2.0 ASCII (UNSTRUCTURED_GRID, треугольники типа 5).

    :raise OutputError: Ошибка записи.
    """

    _write_text(Path(path), render_vtk(mesh, field))


def series_row(diagnostics: StepDiagnostics, energy_scale: float = 1.0) -> list[str]:
    energy = diagnostics.energy if energy_scale == 1.0 else diagnostics.energy.scaled(energy_scale)
    values = [
        diagnostics.time,
        energy.exchange,
        energy.dmi,
        energy.pi_term,
        energy.applied_term,
        energy.constant_term,
        energy.total,
        *diagnostics.average,
        diagnostics.vmax,
        diagnostics.constraint_l1,
        diagnostics.energy_law_residual * energy_scale,
    ]
    return [str(diagnostics.step), *(repr(float(value)) for value in values)]


def write_csv(series: Iterable[StepDiagnostics], path: Path, energy_scale: float = 1.0) -> None:
    """
    Временной ряд диагностики с фиксированным заголовком SERIES_COLUMNS.

    :raise OutputError: Ошибка записи.
    """

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="ascii") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(SERIES_COLUMNS)
            writer.writerows(series_row(item, energy_scale) for item in series)
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc


class RunDirectorySink:
    """
    Потоковая запись результатов прогона в каталог: series.csv построчно
    и снимки snapshot_<шаг>.vtk.
    """

    def __init__(self, directory: Path, mesh: TriMesh, energy_scale: float = 1.0) -> None:
        """
        :raise OutputError: Каталог недоступен для записи.
        """

        self.directory = Path(directory)
        self.mesh = mesh
        self.energy_scale = energy_scale
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            self._stream = (self.directory / "series.csv").open("w", newline="", encoding="ascii")
        except OSError as exc:
            raise OutputError(f"{self.directory}: {exc.strerror or exc}") from exc
        self._writer = csv.writer(self._stream, lineterminator="\n")
        self._writer.writerow(SERIES_COLUMNS)

    def record(self, diagnostics: StepDiagnostics, m: NodalVectorField) -> None:
        self._writer.writerow(series_row(diagnostics, self.energy_scale))

    def snapshot(self, step: int, m: NodalVectorField) -> None:
        write_vtk(self.mesh, m, self.directory / f"snapshot_{step:06d}.vtk")

    def close(self) -> None:
        self._stream.close()

    def __enter__(self) -> Self:
        return self

    def __exit__(
        self, exc_type: type[BaseException] | None, exc: BaseException | None, traceback: TracebackType | None
    ) -> None:
        self.close()


def write_profile_csv(profile: Profile, path: Path, length_scale: float | None = None) -> None:
    """
    Профиль: столбцы x (в l_ex), m3 и, если задан масштаб длины, x_nm.
    """

    header = ["x", "m3"] + (["x_nm"] if length_scale is not None else [])
    rows = [",".join(header)]
    for x, value in zip(profile.abscissa, profile.values, strict=True):
        row = [repr(float(x)), repr(float(value))]
        if length_scale is not None:
            row.append(repr(float(x) * length_scale * 1e9))
        rows.append(",".join(row))
    _write_text(Path(path), "\n".join(rows) + "\n")


def write_field(field: NodalVectorField, path: Path) -> None:
    """
    Узловое поле: одна строка "m1 m2 m3" на вершину, кратчайшее точное представление чисел.
    """

    lines = [" ".join(repr(float(c)) for c in value) for value in np.asarray(field, dtype=np.float64)]
    _write_text(Path(path), "\n".join(lines) + "\n")


def read_field(mesh: TriMesh, path: Path) -> NodalVectorField:
    """
    :raise OutputError: Файл недоступен.
    :raise InvalidParameterError: Строка не содержит трех чисел.
    :raise SizeMismatchError: Число строк не совпадает с числом вершин.
    """

    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc

    rows: list[list[float]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [float(token) for token in line.split()]
        except ValueError:
            row = []
        if len(row) != 3 or not all(math.isfinite(c) for c in row):
            raise InvalidParameterError(parameter=f"{path}:{number}", message="ожидались три конечных числа")
        rows.append(row)

    if len(rows) != mesh.n_vertices:
        raise SizeMismatchError(expected=mesh.n_vertices, received=len(rows))
    return np.asarray(rows, dtype=np.float64)

