"""
P1 конечные элементы на треугольной сетке: интерполяция, диагональная (lumped) масса,
матрица жесткости и билинейная форма двумерного ротора.

Векторные поля хранятся массивами формы (N, 3); глобальные 3N-операторы используют блочную
нумерацию "вершина-старшая, компонента-младшая": неизвестная с индексом 3*z + c.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from dmifilm.exceptions import AssemblyError, PointOutsideMeshError, SizeMismatchError
from dmifilm.mesh import TriMesh

logger = logging.getLogger(__name__)

type NodalVectorField = np.ndarray

DEGENERATE_AREA_FACTOR = 1e-14

# e_1 x v и e_2 x v как матрицы 3x3
CROSS_E1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
CROSS_E2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])


def as_nodal_field(mesh: TriMesh, values: np.ndarray) -> NodalVectorField:
    """
    Приведение к узловому векторному полю формы (N, 3).

    :raise SizeMismatchError: Число строк не совпадает с числом вершин.
    """

    field = np.asarray(values, dtype=np.float64)
    if field.ndim == 1 and field.size == 3 * mesh.n_vertices:
        field = field.reshape(-1, 3)
    if field.ndim != 2 or field.shape[1] != 3:
        raise SizeMismatchError(expected=mesh.n_vertices, received=int(field.shape[0]) if field.ndim else 0)
    if field.shape[0] != mesh.n_vertices:
        raise SizeMismatchError(expected=mesh.n_vertices, received=int(field.shape[0]))
    return field


def constant_field(mesh: TriMesh, vector: tuple[float, float, float]) -> NodalVectorField:
    return np.tile(np.asarray(vector, dtype=np.float64), (mesh.n_vertices, 1))


def normalize_nodal(field: NodalVectorField) -> NodalVectorField:
    return field / np.linalg.norm(field, axis=1, keepdims=True)


@dataclass(frozen=True)
class LumpedMass:
    """
    Веса квадратуры трапеций: w_z = сумма |K|/3 по треугольникам, содержащим вершину z.
    """

    weights: np.ndarray

    def inner(self, u: NodalVectorField, w: NodalVectorField) -> float:
        """
        Дискретное скалярное произведение int I_h[u . w].
        """

        return float(np.dot(self.weights, np.einsum("ij,ij->i", u, w)))

    def norm_sq(self, u: NodalVectorField) -> float:
        return self.inner(u, u)

    def integrate(self, scalar: np.ndarray) -> float:
        return float(np.dot(self.weights, scalar))

    def as_matrix3(self) -> sp.csr_matrix:
        return sp.diags(np.repeat(self.weights, 3)).tocsr()


@dataclass(frozen=True)
class ElementGeometry:
    """
    Площади треугольников и градиенты барицентрических координат, форма (M, 3, 2).
    """

    areas: np.ndarray
    gradients: np.ndarray


def element_geometry(mesh: TriMesh) -> ElementGeometry:
    """
    :raise AssemblyError: Площадь треугольника меньше 1e-14 * h_max^2.
    """

    areas = mesh.signed_areas
    threshold = DEGENERATE_AREA_FACTOR * mesh.h_max**2
    degenerate = np.flatnonzero(areas < threshold)
    if degenerate.size:
        raise AssemblyError(triangle=int(degenerate[0]), message="вырожденный треугольник")

    p0, p1, p2 = (mesh.vertices[mesh.triangles[:, a]] for a in range(3))
    twice_area = (2.0 * areas)[:, None]

    gradients = np.empty((mesh.n_triangles, 3, 2))
    gradients[:, 0, :] = np.stack([p1[:, 1] - p2[:, 1], p2[:, 0] - p1[:, 0]], axis=1) / twice_area
    gradients[:, 1, :] = np.stack([p2[:, 1] - p0[:, 1], p0[:, 0] - p2[:, 0]], axis=1) / twice_area
    gradients[:, 2, :] = np.stack([p0[:, 1] - p1[:, 1], p1[:, 0] - p0[:, 0]], axis=1) / twice_area

    return ElementGeometry(areas=areas, gradients=gradients)


def assemble_lumped_mass(mesh: TriMesh) -> LumpedMass:
    weights = np.bincount(
        mesh.triangles.ravel(),
        weights=np.repeat(mesh.signed_areas / 3.0, 3),
        minlength=mesh.n_vertices,
    )
    return LumpedMass(weights=weights)


def assemble_consistent_mass(mesh: TriMesh) -> sp.csr_matrix:
    """
    Точная скалярная матрица масс: int_K l_a l_b = |K|(1 + delta_ab)/12.
    """

    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    values = mesh.signed_areas[:, None, None] * local[None, :, :]
    return _scalar_coo(mesh, values)


def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """
    Скалярная матрица жесткости N x N: элементные матрицы |K| grad l_a . grad l_b.

    :raise AssemblyError: Вырожденный треугольник.
    """

    geometry = element_geometry(mesh)
    values = geometry.areas[:, None, None] * np.einsum("kad,kbd->kab", geometry.gradients, geometry.gradients)
    return _scalar_coo(mesh, values)


def _scalar_coo(mesh: TriMesh, values: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((values.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_curl_form(mesh: TriMesh) -> sp.csr_matrix:
    """
    Оператор C размера 3N x 3N с phi^T C v = int curl v . phi, где curl v = e_1 x d_1 v + e_2 x d_2 v.

    Ротор P1-функции постоянен на элементе, поэтому интеграл против P1 phi точно равен
    |K| * curl v * phi(центр масс): блок (b, a) элемента равен |K|/3 * (g_a1 [e_1]x + g_a2 [e_2]x).

    :raise AssemblyError: Вырожденный треугольник.
    """

    geometry = element_geometry(mesh)
    g = geometry.gradients
    # (M, 3, 3, 3): треугольник, базисная функция a, строка r, столбец c
    blocks = g[:, :, 0, None, None] * CROSS_E1[None, None] + g[:, :, 1, None, None] * CROSS_E2[None, None]
    blocks *= (geometry.areas / 3.0)[:, None, None, None]

    nonzero_r, nonzero_c = np.nonzero(np.abs(CROSS_E1) + np.abs(CROSS_E2))
    t = mesh.triangles

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    values: list[np.ndarray] = []
    for b in range(3):
        for a in range(3):
            for r, c in zip(nonzero_r, nonzero_c, strict=True):
                rows.append(3 * t[:, b] + r)
                cols.append(3 * t[:, a] + c)
                values.append(blocks[:, a, r, c])

    n = 3 * mesh.n_vertices
    return sp.coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


@dataclass(frozen=True)
class FemOperators:
    """
    Предварительно собранные операторы одной сетки.

    stiffness - скалярная N x N; stiffness3 = stiffness (x) I_3; curl - 3N x 3N форма ротора;
    curl_sym = curl + curl^T; consistent_mass - точная скалярная масса.
    """

    mesh: TriMesh
    lumped: LumpedMass
    consistent_mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    stiffness3: sp.csr_matrix
    curl: sp.csr_matrix
    curl_sym: sp.csr_matrix


def assemble_operators(mesh: TriMesh) -> FemOperators:
    stiffness = assemble_stiffness(mesh)
    curl = assemble_curl_form(mesh)
    operators = FemOperators(
        mesh=mesh,
        lumped=assemble_lumped_mass(mesh),
        consistent_mass=assemble_consistent_mass(mesh),
        stiffness=stiffness,
        stiffness3=sp.kron(stiffness, sp.identity(3), format="csr"),
        curl=curl,
        curl_sym=(curl + curl.T).tocsr(),
    )
    logger.info("operators assembled: n=%d nnz(K)=%d nnz(C)=%d", mesh.n_vertices, stiffness.nnz, curl.nnz)
    return operators


def locate(mesh: TriMesh, point: tuple[float, float], geometry: ElementGeometry | None = None) -> tuple[int, np.ndarray]:
    """
    Поиск треугольника, содержащего точку (с допуском 1e-10 * h_max по расстоянию до сторон).

    :returns: Индекс треугольника, барицентрические координаты точки
    :raise PointOutsideMeshError: Точка вне сетки.
    """

    geometry = geometry or element_geometry(mesh)
    x = np.asarray(point, dtype=np.float64)
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)

    bary = 1.0 / 3.0 + np.einsum("kad,kd->ka", geometry.gradients, x[None, :] - centroids)
    # l_a / |grad l_a| - расстояние до стороны, противолежащей вершине a
    tolerance = 1e-10 * mesh.h_max * np.linalg.norm(geometry.gradients, axis=2)
    inside = np.flatnonzero(np.all(bary >= -tolerance, axis=1))

    if not inside.size:
        raise PointOutsideMeshError(point=(float(x[0]), float(x[1])))

    index = int(inside[0])
    return index, bary[index]


def interpolate_at(
    mesh: TriMesh,
    field: NodalVectorField,
    point: tuple[float, float],
    geometry: ElementGeometry | None = None,
) -> np.ndarray:
    """
    Значение P1-поля в точке (барицентрическая интерполяция в содержащем треугольнике).

    :raise PointOutsideMeshError: Точка вне сетки.
    """

    field = as_nodal_field(mesh, field)
    index, bary = locate(mesh, point, geometry)
    return bary @ field[mesh.triangles[index]]
