"""
Проекционно-свободная схема касательной плоскости для уравнения LLG:

    (i)  найти v в K_h(m_i):  alpha <v, phi>_h + <m_i x v, phi>_h + tau (grad v, grad phi)
                              + kappa tau/2 (<curl v, phi> + <v, curl phi>) = b(m_i) . phi,
    (ii) m_{i+1} = m_i + tau v.

Касательное пространство K_h параметризуется поузловыми ортонормированными реперами,
поэтому на каждом шаге решается несимметричная система размера 2N без множителей Лагранжа.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal, Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from dmifilm.analysis import average_m
from dmifilm.exceptions import (
    DegenerateMagnetizationError,
    EllipticityViolationError,
    InvalidParameterError,
    SolverFailureError,
)
from dmifilm.fem import as_nodal_field, assemble_operators
from dmifilm.model import AppliedField, ThinFilmPi, assemble_rhs, energy_lumped

if TYPE_CHECKING:
    from dmifilm.fem import FemOperators, NodalVectorField
    from dmifilm.mesh import TriMesh
    from dmifilm.model import EnergyBreakdown, MaterialParams, PiOperator

logger = logging.getLogger(__name__)

type SolverKind = Literal["direct", "iterative"]

DEGENERACY_THRESHOLD = 0.1
DIRECT_SOLVER_MAX_VERTICES = 50_000
UNIT_LENGTH_TOLERANCE = 1e-10
GMRES_RESTART = 50

_AXES = np.eye(3)


@dataclass(frozen=True)
class TangentFrame:
    """
    Поузловой ортонормированный репер (t1, t2) касательной плоскости к m(z)/|m(z)|.
    """

    t1: np.ndarray
    t2: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.t1.shape[0]

    def projection(self) -> sp.csr_matrix:
        """
        Матрица P размера 3N x 2N: v = P x, где x - коэффициенты (x_{2z}, x_{2z+1}) по реперу вершины z.
        """

        n = self.n_vertices
        vertex = np.arange(n)
        rows = (3 * vertex[:, None, None] + np.arange(3)[None, None, :]).repeat(2, axis=1)
        cols = (2 * vertex[:, None, None] + np.arange(2)[None, :, None]).repeat(3, axis=2)
        values = np.stack([self.t1, self.t2], axis=1)
        return sp.coo_matrix((values.ravel(), (rows.ravel(), cols.ravel())), shape=(3 * n, 2 * n)).tocsr()

    def lift(self, coefficients: np.ndarray) -> NodalVectorField:
        x = coefficients.reshape(-1, 2)
        return x[:, :1] * self.t1 + x[:, 1:] * self.t2


def build_tangent_frame(m: NodalVectorField) -> TangentFrame:
    """
    n = m/|m|; e_a - координатная ось с минимальным |e_a . n| (при равенстве - меньший индекс);
    t1 = normalize(e_a x n), t2 = n x t1.

    :raise DegenerateMagnetizationError: |m(z)| < 0.1 хотя бы в одной вершине.
    """

    m = np.asarray(m, dtype=np.float64)
    lengths = np.linalg.norm(m, axis=1)
    degenerate = np.flatnonzero(~(lengths >= DEGENERACY_THRESHOLD))
    if degenerate.size:
        vertex = int(degenerate[0])
        raise DegenerateMagnetizationError(vertex=vertex, length=float(lengths[vertex]))

    n = m / lengths[:, None]
    axis = _AXES[np.argmin(np.abs(n), axis=1)]
    t1 = np.cross(axis, n)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return TangentFrame(t1=t1, t2=t2)


@dataclass(frozen=True)
class SimConfig:
    """
    Параметры интегрирования в безразмерных единицах.

    stop_vmax - порог остановки релаксации по max|v(z)|; snapshot_every = 0 отключает промежуточные снимки.
    t_end = 0 допускается: траектория из одного начального состояния.
    """

    tau: float
    t_end: float
    solver_tol: float = 1e-10
    solver: SolverKind = "direct"
    stop_vmax: float | None = None
    snapshot_every: int = 0
    renormalize: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise InvalidParameterError(parameter="tau", message="шаг по времени должен быть положительным")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise InvalidParameterError(parameter="t_end", message="горизонт должен быть неотрицательным")
        if not 0 < self.solver_tol <= 1e-4:
            raise InvalidParameterError(parameter="solver_tol", message="ожидалось значение из (0, 1e-4]")
        if self.solver not in ("direct", "iterative"):
            raise InvalidParameterError(parameter="solver", message=f"неизвестный решатель {self.solver!r}")
        if self.stop_vmax is not None and not self.stop_vmax > 0:
            raise InvalidParameterError(parameter="stop_vmax", message="порог должен быть положительным")
        if self.snapshot_every < 0:
            raise InvalidParameterError(parameter="snapshot_every", message="период не может быть отрицательным")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_end / self.tau - 1e-9)


@dataclass(frozen=True)
class EllipticityResult:
    passed: bool
    max_tau: float


def ellipticity_check(params: MaterialParams, config: SimConfig) -> EllipticityResult:
    """
    Достаточное условие эллиптичности билинейной формы шага: tau <= alpha / kappa^2.
    """

    if params.kappa == 0:
        return EllipticityResult(passed=True, max_tau=math.inf)

    max_tau = params.alpha / params.kappa**2
    return EllipticityResult(passed=config.tau <= max_tau, max_tau=max_tau)


def monotonicity_bound(params: MaterialParams, pi: PiOperator | None = None) -> float:
    """
    Наибольший шаг, при котором слагаемое tau^2/2 int pi[v] . v энергетического закона
    поглощается диссипацией alpha tau |v|^2_h: tau <= 2 alpha / lambda_max(-pi).
    """

    pi = pi if pi is not None else ThinFilmPi(params.kappa)
    bound = pi.dissipation_bound
    return math.inf if bound == 0 else 2.0 * params.alpha / bound


@dataclass(frozen=True)
class StepDiagnostics:
    """
    Диагностика состояния m_i после шага i (для i = 0 - начальное состояние).

    energy_law_residual - невязка тождества
        G(m_{i+1}) + alpha tau |v|_h^2 + tau^2/2 |grad v|^2 + tau^2/2 <pi[v], v>_h - G(m_i);
    constraint_l1 = sum_z w_z ||m(z)|^2 - 1|; constraint_bound - накопитель
    constraint_l1(m_0) + tau^2 sum_i |v_i|_h^2.
    """

    step: int
    time: float
    energy: EnergyBreakdown
    energy_law_residual: float
    constraint_l1: float
    constraint_bound: float
    vmax: float
    solver_iterations: int
    average: tuple[float, float, float]


@dataclass(frozen=True)
class StepResult:
    m_next: NodalVectorField
    v: NodalVectorField
    solver_iterations: int
    relative_residual: float


@dataclass(frozen=True)
class SimulationState:
    """
    Состояние между шагами; значение можно передать в другой поток.
    """

    step: int
    time: float
    m: NodalVectorField
    energy: EnergyBreakdown
    constraint_bound: float


class DiagnosticsSink(Protocol):
    def record(self, diagnostics: StepDiagnostics, m: NodalVectorField) -> None: ...

    def snapshot(self, step: int, m: NodalVectorField) -> None: ...


@dataclass
class MemorySink:
    """
    Накопление диагностики в памяти.
    """

    series: list[StepDiagnostics] = field(default_factory=list)
    snapshots: dict[int, NodalVectorField] = field(default_factory=dict)

    def record(self, diagnostics: StepDiagnostics, m: NodalVectorField) -> None:
        self.series.append(diagnostics)

    def snapshot(self, step: int, m: NodalVectorField) -> None:
        self.snapshots[step] = m.copy()


def constraint_l1(m: NodalVectorField, weights: np.ndarray) -> float:
    return float(np.dot(weights, np.abs(np.einsum("ij,ij->i", m, m) - 1.0)))


class TangentPlaneScheme:
    """
    Шаг схемы касательной плоскости с предварительно собранной не зависящей от m частью матрицы:

        L = alpha W (x) I + tau K (x) I + kappa tau/2 (C + C^T),

    к которой на каждом шаге добавляется кососимметричный блок w_z [m(z)]x.
    """

    def __init__(
        self,
        mesh: TriMesh,
        params: MaterialParams,
        config: SimConfig,
        operators: FemOperators | None = None,
        pi: PiOperator | None = None,
        applied: AppliedField | None = None,
    ) -> None:
        """
        :raise EllipticityViolationError: tau превышает alpha / kappa^2.
        """

        check = ellipticity_check(params, config)
        if not check.passed:
            raise EllipticityViolationError(tau=config.tau, max_tau=check.max_tau)

        self.mesh = mesh
        self.params = params
        self.config = config
        self.operators = operators or assemble_operators(mesh)
        self.pi = pi if pi is not None else ThinFilmPi(params.kappa)
        self.applied = applied or AppliedField()

        tau = config.tau
        weights3 = np.repeat(self.operators.lumped.weights, 3)
        self._static = (
            sp.diags(params.alpha * weights3)
            + tau * self.operators.stiffness3
            + (0.5 * params.kappa * tau) * self.operators.curl_sym
        ).tocsr()

        self._solver: SolverKind = config.solver
        if self._solver == "direct" and mesh.n_vertices > DIRECT_SOLVER_MAX_VERTICES:
            logger.warning(
                "n=%d exceeds %d vertices, switching to iterative solver", mesh.n_vertices, DIRECT_SOLVER_MAX_VERTICES
            )
            self._solver = "iterative"

    def _skew(self, m: NodalVectorField) -> sp.csr_matrix:
        """
        Блочно-диагональная матрица w_z [m(z)]x (перекрестное произведение m x v).
        """

        n = self.mesh.n_vertices
        w = self.operators.lumped.weights
        zeros = np.zeros(n)
        blocks = np.stack(
            [
                np.stack([zeros, -m[:, 2], m[:, 1]], axis=1),
                np.stack([m[:, 2], zeros, -m[:, 0]], axis=1),
                np.stack([-m[:, 1], m[:, 0], zeros], axis=1),
            ],
            axis=1,
        ) * w[:, None, None]
        return _block_diag3(blocks)

    def system(self, m: NodalVectorField) -> tuple[sp.csc_matrix, np.ndarray, TangentFrame]:
        """
        Редуцированная система A x = r на касательном пространстве K_h(m).

        :returns: Матрица A (2N x 2N), правая часть r, репер
        :raise DegenerateMagnetizationError: |m(z)| < 0.1.
        """

        frame = build_tangent_frame(m)
        projection = frame.projection()
        full = self._static + self._skew(m)
        rhs = assemble_rhs(self.mesh, m, self.params, self.applied, self.operators, self.pi)
        matrix = (projection.T @ full @ projection).tocsc()
        return matrix, projection.T @ rhs, frame

    def step(self, m: NodalVectorField) -> StepResult:
        """
        Один шаг схемы: решение редуцированной системы и явное обновление m + tau v без проекции.

        :raise DegenerateMagnetizationError: Длина m(z) вышла из-под контроля.
        :raise SolverFailureError: Относительная невязка не достигла solver_tol.
        """

        m = as_nodal_field(self.mesh, m)
        matrix, rhs, frame = self.system(m)

        coefficients, iterations = self._solve(matrix, rhs)
        rhs_norm = float(np.linalg.norm(rhs))
        residual = float(np.linalg.norm(matrix @ coefficients - rhs)) / rhs_norm if rhs_norm > 0 else 0.0
        if not residual <= self.config.solver_tol:
            raise SolverFailureError(residual=residual, tolerance=self.config.solver_tol)

        v = frame.lift(coefficients)
        m_next = m + self.config.tau * v
        if self.config.renormalize:
            m_next /= np.linalg.norm(m_next, axis=1, keepdims=True)

        return StepResult(m_next=m_next, v=v, solver_iterations=iterations, relative_residual=residual)

    def _solve(self, matrix: sp.csc_matrix, rhs: np.ndarray) -> tuple[np.ndarray, int]:
        if not np.any(rhs):
            return np.zeros_like(rhs), 0

        if self._solver == "direct":
            try:
                return spla.splu(matrix).solve(rhs), 1
            except RuntimeError as exc:
                logger.warning("direct factorization failed (%s), falling back to GMRES", exc)

        return self._solve_iterative(matrix, rhs)

    def _solve_iterative(self, matrix: sp.csc_matrix, rhs: np.ndarray) -> tuple[np.ndarray, int]:
        tolerance = self.config.solver_tol
        try:
            ilu = spla.spilu(matrix, drop_tol=1e-6, fill_factor=20)
            preconditioner = spla.LinearOperator(matrix.shape, ilu.solve)
        except RuntimeError as exc:
            logger.warning("incomplete factorization failed (%s), running unpreconditioned GMRES", exc)
            preconditioner = None

        iterations = 0

        def count(_: float) -> None:
            nonlocal iterations
            iterations += 1

        solution, info = spla.gmres(
            matrix,
            rhs,
            rtol=0.1 * tolerance,
            atol=0.0,
            restart=GMRES_RESTART,
            maxiter=max(100, matrix.shape[0] // GMRES_RESTART),
            M=preconditioner,
            callback=count,
            callback_type="pr_norm",
        )
        if info < 0:
            raise SolverFailureError(residual=math.inf, tolerance=tolerance)
        return solution, iterations


def _block_diag3(blocks: np.ndarray) -> sp.csr_matrix:
    n = blocks.shape[0]
    base = 3 * np.arange(n)
    rows = (base[:, None, None] + np.arange(3)[None, :, None]).repeat(3, axis=2)
    cols = (base[:, None, None] + np.arange(3)[None, None, :]).repeat(3, axis=1)
    return sp.coo_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(3 * n, 3 * n)).tocsr()


def step(
    mesh: TriMesh,
    m: NodalVectorField,
    params: MaterialParams,
    config: SimConfig,
    operators: FemOperators | None = None,
    pi: PiOperator | None = None,
    applied: AppliedField | None = None,
) -> tuple[NodalVectorField, NodalVectorField, StepDiagnostics]:
    """
    Один шаг из состояния m с полной диагностикой (шаг считается первым).

    :returns: m_next, v, диагностика m_next
    """

    scheme = TangentPlaneScheme(mesh, params, config, operators, pi, applied)
    m = as_nodal_field(mesh, m)
    weights = scheme.operators.lumped.weights
    before = energy_lumped(mesh, m, params, scheme.applied, scheme.operators, scheme.pi)
    result = scheme.step(m)
    diagnostics = _diagnose(
        scheme,
        step_index=1,
        result=result,
        energy_before=before,
        constraint_bound=constraint_l1(m, weights) + config.tau**2 * scheme.operators.lumped.norm_sq(result.v),
    )
    return result.m_next, result.v, diagnostics


def energy_law_residual(
    scheme: TangentPlaneScheme, energy_before: EnergyBreakdown, energy_after: EnergyBreakdown, v: NodalVectorField
) -> float:
    tau = scheme.config.tau
    lumped = scheme.operators.lumped
    flat = v.ravel()
    dissipation = scheme.params.alpha * tau * lumped.norm_sq(v)
    stiffness_term = 0.5 * tau**2 * float(flat @ (scheme.operators.stiffness3 @ flat))
    pi_term = 0.5 * tau**2 * scheme.pi.quadratic_lumped(v, lumped)
    return energy_after.total + dissipation + stiffness_term + pi_term - energy_before.total


def _diagnose(
    scheme: TangentPlaneScheme,
    *,
    step_index: int,
    result: StepResult,
    energy_before: EnergyBreakdown,
    constraint_bound: float,
) -> StepDiagnostics:
    m_next = result.m_next
    energy_after = energy_lumped(scheme.mesh, m_next, scheme.params, scheme.applied, scheme.operators, scheme.pi)
    average = average_m(scheme.mesh, m_next, scheme.operators.lumped)
    return StepDiagnostics(
        step=step_index,
        time=step_index * scheme.config.tau,
        energy=energy_after,
        energy_law_residual=energy_law_residual(scheme, energy_before, energy_after, result.v),
        constraint_l1=constraint_l1(m_next, scheme.operators.lumped.weights),
        constraint_bound=constraint_bound,
        vmax=float(np.max(np.linalg.norm(result.v, axis=1))),
        solver_iterations=result.solver_iterations,
        average=(float(average[0]), float(average[1]), float(average[2])),
    )


@dataclass(frozen=True)
class EvolveResult:
    state: SimulationState
    series: list[StepDiagnostics]
    stopped_by: Literal["horizon", "relaxed"]


def evolve(
    mesh: TriMesh,
    m0: NodalVectorField,
    params: MaterialParams,
    config: SimConfig,
    sink: DiagnosticsSink | None = None,
    operators: FemOperators | None = None,
    pi: PiOperator | None = None,
    applied: AppliedField | None = None,
) -> EvolveResult:
    """
    Итерации схемы до t >= t_end либо (если задан stop_vmax) до max|v(z)| < stop_vmax.

    В sink передается диагностика начального состояния и каждого шага; снимки - каждые
    snapshot_every шагов и финальное состояние.

    :raise InvalidParameterError: Начальное поле не единичной длины в узлах.
    :raise EllipticityViolationError: Шаг по времени слишком велик.
    :raise DegenerateMagnetizationError, SolverFailureError: Ошибки шага.
    """

    m = as_nodal_field(mesh, m0).copy()
    lengths = np.linalg.norm(m, axis=1)
    if not np.all(np.abs(lengths - 1.0) <= UNIT_LENGTH_TOLERANCE):
        raise InvalidParameterError(parameter="m0", message="начальная намагниченность должна быть единичной в узлах")

    scheme = TangentPlaneScheme(mesh, params, config, operators, pi, applied)
    sink = sink if sink is not None else MemorySink()

    bound = monotonicity_bound(params, scheme.pi)
    if config.tau > bound:
        logger.warning("tau=%.6g exceeds monotonicity bound %.6g: energy decay is not guaranteed", config.tau, bound)

    weights = scheme.operators.lumped.weights
    energy = energy_lumped(mesh, m, params, scheme.applied, scheme.operators, scheme.pi)
    accumulated = constraint_l1(m, weights)
    average = average_m(mesh, m, scheme.operators.lumped)
    initial = StepDiagnostics(
        step=0,
        time=0.0,
        energy=energy,
        energy_law_residual=0.0,
        constraint_l1=accumulated,
        constraint_bound=accumulated,
        vmax=0.0,
        solver_iterations=0,
        average=(float(average[0]), float(average[1]), float(average[2])),
    )
    series = [initial]
    sink.record(initial, m)
    if config.snapshot_every:
        sink.snapshot(0, m)

    logger.info(
        "evolve: n=%d tau=%.6g steps<=%d kappa=%.6g alpha=%.6g",
        mesh.n_vertices,
        config.tau,
        config.n_steps,
        params.kappa,
        params.alpha,
    )

    stopped_by: Literal["horizon", "relaxed"] = "horizon"
    index = 0
    for index in range(1, config.n_steps + 1):
        result = scheme.step(m)
        accumulated += config.tau**2 * scheme.operators.lumped.norm_sq(result.v)
        diagnostics = _diagnose(
            scheme, step_index=index, result=result, energy_before=energy, constraint_bound=accumulated
        )

        if diagnostics.energy.total > energy.total + 1e-12 * abs(energy.total):
            logger.warning(
                "step %d: energy increased %.12e -> %.12e", index, energy.total, diagnostics.energy.total
            )
        logger.debug(
            "step %d: G=%.12e residual=%.3e vmax=%.3e constraint=%.3e",
            index,
            diagnostics.energy.total,
            diagnostics.energy_law_residual,
            diagnostics.vmax,
            diagnostics.constraint_l1,
        )

        m = result.m_next
        energy = diagnostics.energy
        series.append(diagnostics)
        sink.record(diagnostics, m)
        if config.snapshot_every and index % config.snapshot_every == 0:
            sink.snapshot(index, m)

        if config.stop_vmax is not None and diagnostics.vmax < config.stop_vmax:
            stopped_by = "relaxed"
            break

    if config.snapshot_every and index % config.snapshot_every != 0:
        sink.snapshot(index, m)

    state = SimulationState(step=index, time=index * config.tau, m=m, energy=energy, constraint_bound=accumulated)
    logger.info("evolve finished: step=%d t=%.6g G=%.12e (%s)", index, state.time, energy.total, stopped_by)
    return EvolveResult(state=state, series=series, stopped_by=stopped_by)
