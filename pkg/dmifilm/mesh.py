"""
Треугольные сетки двумерной области пленки: генерация дисков, чтение внешних форматов, геометрия.

Все координаты безразмерные (в единицах обменной длины), индексы вершин нумеруются с нуля,
в том числе в файловых форматах.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from dmifilm.exceptions import EmptyMeshError, InvalidParameterError, MeshParseError, MeshTopologyError, OutputError

logger = logging.getLogger(__name__)

NATIVE_HEADER = "dmimesh 1"


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Неизменяемая конформная треугольная сетка.

    Инварианты проверяются при создании:
        - все треугольники ориентированы против часовой стрелки (строго положительная площадь);
        - индексы в диапазоне, каждая вершина принадлежит хотя бы одному треугольнику;
        - внутреннее ребро принадлежит ровно двум треугольникам, граничное - одному.

    :raise MeshTopologyError: Нарушен один из инвариантов.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64, copy=True)
        triangles = np.array(self.triangles, dtype=np.int64, copy=True)

        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshTopologyError(f"ожидался массив вершин формы (N, 2), получено {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshTopologyError(f"ожидался массив треугольников формы (M, 3), получено {triangles.shape}")

        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

        _check_topology(self)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.triangles[:, a]] for a in range(3))
        e1 = p1 - p0
        e2 = p2 - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def total_area(self) -> float:
        return float(math.fsum(self.signed_areas))

    @cached_property
    def directed_edges(self) -> np.ndarray:
        """
        Ориентированные ребра всех треугольников: (a, b), (b, c), (c, a) для каждого (a, b, c).
        """

        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)

    @cached_property
    def edges(self) -> np.ndarray:
        """
        Уникальные неориентированные ребра (i < j), отсортированные лексикографически.
        """

        return np.unique(np.sort(self.directed_edges, axis=1), axis=0)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """
        Ориентированные граничные ребра: обходят границу так, что область остается слева.
        """

        directed = self.directed_edges
        undirected = np.sort(directed, axis=1)
        _, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
        return directed[counts[inverse.ravel()] == 1]

    @cached_property
    def boundary_vertices(self) -> frozenset[int]:
        return frozenset(int(v) for v in np.unique(self.boundary_edges))

    @cached_property
    def h_max(self) -> float:
        return float(np.max(self.edge_lengths))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)


@dataclass(frozen=True)
class MeshStats:
    h_max: float
    h_min: float
    min_angle: float
    total_area: float
    n_vertices: int
    n_triangles: int

    def as_lines(self) -> list[str]:
        return [
            f"n_vertices={self.n_vertices}",
            f"n_triangles={self.n_triangles}",
            f"h_max={self.h_max!r}",
            f"h_min={self.h_min!r}",
            f"min_angle_deg={math.degrees(self.min_angle)!r}",
            f"total_area={self.total_area!r}",
        ]


def _check_topology(mesh: TriMesh) -> None:
    n_vertices = mesh.n_vertices
    triangles = mesh.triangles

    if mesh.n_triangles == 0:
        raise EmptyMeshError("сетка не содержит треугольников")

    if triangles.min() < 0 or triangles.max() >= n_vertices:
        raise MeshTopologyError("индекс вершины вне диапазона")

    if np.any(triangles[:, 0] == triangles[:, 1]) or np.any(triangles[:, 1] == triangles[:, 2]) or np.any(
        triangles[:, 0] == triangles[:, 2]
    ):
        raise MeshTopologyError("треугольник с повторяющимися вершинами")

    inverted = np.flatnonzero(~(mesh.signed_areas > 0))
    if inverted.size:
        raise MeshTopologyError(f"треугольник {int(inverted[0])} имеет неположительную ориентированную площадь")

    referenced = np.bincount(triangles.ravel(), minlength=n_vertices)
    orphans = np.flatnonzero(referenced == 0)
    if orphans.size:
        raise MeshTopologyError(f"вершина {int(orphans[0])} не принадлежит ни одному треугольнику")

    directed = mesh.directed_edges
    _, directed_counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(directed_counts > 1):
        raise MeshTopologyError("несогласованная ориентация соседних треугольников")

    _, undirected_counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    if np.any(undirected_counts > 2):
        raise MeshTopologyError("неконформная триангуляция: ребро принадлежит более чем двум треугольникам")


def mesh_stats(mesh: TriMesh) -> MeshStats:
    lengths = mesh.edge_lengths

    p = [mesh.vertices[mesh.triangles[:, a]] for a in range(3)]
    # стороны, противолежащие вершинам 0, 1, 2
    sides = np.stack(
        [
            np.linalg.norm(p[2] - p[1], axis=1),
            np.linalg.norm(p[0] - p[2], axis=1),
            np.linalg.norm(p[1] - p[0], axis=1),
        ],
        axis=1,
    )
    angles = []
    for a in range(3):
        opposite = sides[:, a]
        b, c = sides[:, (a + 1) % 3], sides[:, (a + 2) % 3]
        cosine = np.clip((b**2 + c**2 - opposite**2) / (2.0 * b * c), -1.0, 1.0)
        angles.append(np.arccos(cosine))

    return MeshStats(
        h_max=float(lengths.max()),
        h_min=float(lengths.min()),
        min_angle=float(np.min(angles)),
        total_area=mesh.total_area,
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
    )


def boundary_area(mesh: TriMesh) -> float:
    """
    Площадь, ограниченная граничным многоугольником (формула шнурования по ориентированным граничным ребрам).
    """

    edges = mesh.boundary_edges
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    return 0.5 * math.fsum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1])


def generate_disk(diameter: float, target_h: float) -> TriMesh:
    """
    Квазиравномерная сетка диска с центром в начале координат.

    Узлы лежат на концентрических окружностях r_j = j*dr, где dr ~ target_h*sqrt(3)/2 подобран так,
    что последняя окружность совпадает с границей; на окружности j ровно round(2*pi*r_j/dr) узлов.
    Соседние окружности соединяются обходом двумя указателями по возрастанию полярного угла.

    :raise InvalidParameterError: diameter <= 0 или target_h вне (0, diameter/2).
    """

    if not diameter > 0:
        raise InvalidParameterError(parameter="diameter", message="диаметр должен быть положительным")
    if not 0 < target_h < diameter / 2:
        raise InvalidParameterError(parameter="target_h", message="шаг сетки должен лежать в (0, diameter/2)")

    radius = diameter / 2
    n_rings = math.ceil(radius / (target_h * math.sqrt(3.0) / 2.0))
    dr = radius / n_rings

    ring_sizes = [round(2.0 * math.pi * j) for j in range(1, n_rings + 1)]

    coordinates: list[tuple[float, float]] = [(0.0, 0.0)]
    ring_offsets: list[int] = []
    for j, size in enumerate(ring_sizes, start=1):
        ring_offsets.append(len(coordinates))
        r = radius if j == n_rings else j * dr
        for k in range(size):
            theta = 2.0 * math.pi * k / size
            coordinates.append((r * math.cos(theta), r * math.sin(theta)))

    triangles: list[tuple[int, int, int]] = []

    first = ring_offsets[0]
    n_first = ring_sizes[0]
    for k in range(n_first):
        triangles.append((0, first + k, first + (k + 1) % n_first))

    for j in range(n_rings - 1):
        triangles.extend(
            _stitch_rings(ring_offsets[j], ring_sizes[j], ring_offsets[j + 1], ring_sizes[j + 1])
        )

    mesh = TriMesh(np.asarray(coordinates), np.asarray(triangles, dtype=np.int64))
    logger.info(
        "disk mesh: diameter=%.6g target_h=%.6g rings=%d vertices=%d triangles=%d",
        diameter,
        target_h,
        n_rings,
        mesh.n_vertices,
        mesh.n_triangles,
    )
    return mesh


def generate_square(n: int, side: float = 1.0) -> TriMesh:
    """
    Структурированная сетка квадрата [0, side]^2: n x n ячеек, каждая разбита диагональю на два треугольника.

    :raise InvalidParameterError: n < 1 или side <= 0.
    """

    if n < 1:
        raise InvalidParameterError(parameter="n", message="нужна хотя бы одна ячейка")
    if not side > 0:
        raise InvalidParameterError(parameter="side", message="сторона должна быть положительной")

    ticks = np.linspace(0.0, side, n + 1)
    x, y = np.meshgrid(ticks, ticks)
    vertices = np.column_stack([x.ravel(), y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    lower_left = (j * (n + 1) + i).ravel()
    lower_right = lower_left + 1
    upper_left = lower_left + n + 1
    upper_right = upper_left + 1
    triangles = np.concatenate(
        [
            np.column_stack([lower_left, lower_right, upper_right]),
            np.column_stack([lower_left, upper_right, upper_left]),
        ]
    )
    return TriMesh(vertices, triangles)


def _stitch_rings(inner: int, n_inner: int, outer: int, n_outer: int) -> list[tuple[int, int, int]]:
    """
    Триангуляция кольца между двумя окружностями. Углы сравниваются в целых числах:
    (k+1)/n_outer <= (i+1)/n_inner  <=>  (k+1)*n_inner <= (i+1)*n_outer.
    """

    result: list[tuple[int, int, int]] = []
    i = k = 0

    while i < n_inner or k < n_outer:
        a = inner + i % n_inner
        b = outer + k % n_outer
        if k < n_outer and (i == n_inner or (k + 1) * n_inner <= (i + 1) * n_outer):
            result.append((a, b, outer + (k + 1) % n_outer))
            k += 1
        else:
            result.append((a, b, inner + (i + 1) % n_inner))
            i += 1

    return result


class _LineReader:
    """
    Построчное чтение текста с учетом номеров строк (нумерация с единицы).
    """

    def __init__(self, text: bytes | str) -> None:
        if isinstance(text, bytes):
            try:
                text = text.decode("ascii")
            except UnicodeDecodeError as exc:
                raise MeshParseError(line=1, message="файл не является ASCII-текстом") from exc
        self._lines: list[str] = text.splitlines()
        self.line_no: int = 0

    def next(self, expected: str) -> str:
        if self.line_no >= len(self._lines):
            raise MeshParseError(line=self.line_no, message=f"неожиданный конец файла, ожидалось: {expected}")
        self.line_no += 1
        return self._lines[self.line_no - 1].strip()

    def at_end(self) -> bool:
        return all(not line.strip() for line in self._lines[self.line_no :])

    def error(self, message: str) -> MeshParseError:
        return MeshParseError(line=self.line_no, message=message)


def _parse_count(reader: _LineReader, keyword: str) -> int:
    parts = reader.next(f"'{keyword} N'").split()
    if len(parts) != 2 or parts[0] != keyword:
        raise reader.error(f"ожидалась строка '{keyword} N'")
    try:
        count = int(parts[1])
    except ValueError as exc:
        raise reader.error(f"некорректное количество: {parts[1]!r}") from exc
    if count < 0:
        raise reader.error("количество не может быть отрицательным")
    return count


def parse_native(text: bytes | str) -> TriMesh:
    """
    Чтение сетки в собственном формате:

        dmimesh 1
        vertices N
        x y            (N строк)
        triangles M
        i j k          (M строк, индексы с нуля)

    :raise MeshParseError: Синтаксическая ошибка (с номером строки).
    :raise MeshTopologyError: Треугольник с отрицательной площадью, неконформность и т.п.
    """

    reader = _LineReader(text)

    if reader.next(f"'{NATIVE_HEADER}'") != NATIVE_HEADER:
        raise reader.error(f"ожидался заголовок '{NATIVE_HEADER}'")

    n_vertices = _parse_count(reader, "vertices")
    vertices = np.empty((n_vertices, 2), dtype=np.float64)
    for index in range(n_vertices):
        parts = reader.next("координаты вершины").split()
        if len(parts) != 2:
            raise reader.error("ожидались две координаты 'x y'")
        try:
            vertices[index] = (float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise reader.error(f"некорректное число в {parts!r}") from exc

    n_triangles = _parse_count(reader, "triangles")
    triangles = np.empty((n_triangles, 3), dtype=np.int64)
    for index in range(n_triangles):
        parts = reader.next("индексы треугольника").split()
        if len(parts) != 3:
            raise reader.error("ожидались три индекса 'i j k'")
        try:
            triangles[index] = [int(p) for p in parts]
        except ValueError as exc:
            raise reader.error(f"некорректный индекс в {parts!r}") from exc

    if not reader.at_end():
        raise MeshParseError(line=reader.line_no + 1, message="лишние данные после блока треугольников")

    return TriMesh(vertices, triangles)


def write_native(mesh: TriMesh) -> str:
    """
    Сериализация в собственный формат. repr(float) дает кратчайшую запись, восстанавливающую число бит-в-бит.
    """

    lines = [NATIVE_HEADER, f"vertices {mesh.n_vertices}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    return "\n".join(lines) + "\n"


def parse_msh2(text: bytes | str) -> TriMesh:
    """
    Чтение подмножества Gmsh MSH 2.2 ASCII: секции $MeshFormat, $Nodes, $Elements.

    Используются только элементы типа 2 (трехузловой треугольник); прочие элементы пропускаются.
    Вершины перенумеровываются плотно в порядке следования узлов в файле; треугольники,
    ориентированные по часовой стрелке, переориентируются.

    :raise MeshParseError: Неподдерживаемая версия, поврежденная секция.
    :raise EmptyMeshError: В файле нет треугольников.
    """

    reader = _LineReader(text)
    nodes: dict[int, tuple[float, float]] = {}
    node_order: list[int] = []
    raw_triangles: list[tuple[int, int, int]] = []
    seen_format = False

    while not reader.at_end():
        section = reader.next("заголовок секции")
        if not section:
            continue

        if section == "$MeshFormat":
            parts = reader.next("версия формата").split()
            if len(parts) < 3 or not parts[0].startswith("2."):
                raise reader.error(f"unsupported version: {' '.join(parts)!r}")
            if parts[1] != "0":
                raise reader.error("поддерживается только ASCII-вариант формата")
            _expect_end(reader, "$EndMeshFormat")
            seen_format = True
        elif section == "$Nodes":
            count = _parse_int(reader, reader.next("число узлов"))
            for _ in range(count):
                parts = reader.next("узел").split()
                if len(parts) != 4:
                    raise reader.error("ожидалась строка 'id x y z'")
                node_id = _parse_int(reader, parts[0])
                try:
                    nodes[node_id] = (float(parts[1]), float(parts[2]))
                except ValueError as exc:
                    raise reader.error(f"некорректные координаты {parts!r}") from exc
                node_order.append(node_id)
            _expect_end(reader, "$EndNodes")
        elif section == "$Elements":
            count = _parse_int(reader, reader.next("число элементов"))
            for _ in range(count):
                parts = reader.next("элемент").split()
                if len(parts) < 3:
                    raise reader.error("поврежденная запись элемента")
                element_type = _parse_int(reader, parts[1])
                n_tags = _parse_int(reader, parts[2])
                node_ids = parts[3 + n_tags :]
                if element_type != 2:
                    continue
                if len(node_ids) != 3:
                    raise reader.error("треугольник должен ссылаться ровно на три узла")
                a, b, c = (_parse_int(reader, p) for p in node_ids)
                raw_triangles.append((a, b, c))
            _expect_end(reader, "$EndElements")
        elif section.startswith("$"):
            _skip_section(reader, "$End" + section[1:])
        else:
            raise reader.error(f"ожидался заголовок секции, получено {section!r}")

    if not seen_format:
        raise MeshParseError(line=1, message="отсутствует секция $MeshFormat")
    if not raw_triangles:
        raise EmptyMeshError("в файле нет треугольников (элементов типа 2)")

    referenced = {node for triangle in raw_triangles for node in triangle}
    missing = referenced - nodes.keys()
    if missing:
        raise MeshParseError(line=reader.line_no, message=f"ссылка на неизвестный узел {min(missing)}")

    renumber: dict[int, int] = {}
    for node_id in node_order:
        if node_id in referenced and node_id not in renumber:
            renumber[node_id] = len(renumber)

    vertices = np.empty((len(renumber), 2), dtype=np.float64)
    for node_id, index in renumber.items():
        vertices[index] = nodes[node_id]

    triangles = np.array([[renumber[n] for n in triangle] for triangle in raw_triangles], dtype=np.int64)

    p0, p1, p2 = (vertices[triangles[:, a]] for a in range(3))
    signed = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    clockwise = signed < 0
    if np.any(clockwise):
        logger.debug("msh: reoriented %d clockwise triangles", int(clockwise.sum()))
        triangles[clockwise] = triangles[clockwise][:, [0, 2, 1]]

    mesh = TriMesh(vertices, triangles)
    logger.info("msh mesh: vertices=%d triangles=%d", mesh.n_vertices, mesh.n_triangles)
    return mesh


def _parse_int(reader: _LineReader, token: str) -> int:
    try:
        return int(token)
    except ValueError as exc:
        raise reader.error(f"ожидалось целое число, получено {token!r}") from exc


def _expect_end(reader: _LineReader, marker: str) -> None:
    if reader.next(marker) != marker:
        raise reader.error(f"ожидался маркер {marker}")


def _skip_section(reader: _LineReader, marker: str) -> None:
    while reader.next(marker) != marker:
        pass


def load_mesh(path: Path) -> TriMesh:
    """
    Чтение сетки из файла: формат определяется по первой строке.

    :raise OutputError: Файл не читается.
    """

    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OutputError(f"не удалось прочитать {path}: {exc}") from exc

    if data.lstrip().startswith(b"$MeshFormat"):
        return parse_msh2(data)
    return parse_native(data)


def save_mesh(mesh: TriMesh, path: Path) -> None:
    try:
        path.write_text(write_native(mesh), encoding="ascii", newline="\n")
    except OSError as exc:
        raise OutputError(f"не удалось записать {path}: {exc}") from exc
