"""
Наборы проверок инвариантов для команды check: эквивалентность сборки эталону, градиент энергии,
энергетический закон, закон длины, неподвижные точки и сходимость последовательности восстановления.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from dmifilm.analysis import fit_order
from dmifilm.dynamics import MemorySink, SimConfig, evolve, monotonicity_bound, step
from dmifilm.fem import assemble_operators, constant_field, normalize_nodal
from dmifilm.fields import PRESETS, radial_skyrmion, tilted_x, uniform
from dmifilm.gamma import f0_reference, gamma_study
from dmifilm.mesh import TriMesh, generate_disk, generate_square
from dmifilm.model import dimensionless_params, fege_params
from dmifilm.oracle import MAX_TRIANGLES, MAX_UNKNOWNS, dense_assemble, fd_gradient_check, quad_energy

if TYPE_CHECKING:
    from collections.abc import Callable

    from dmifilm.fem import NodalVectorField
    from dmifilm.model import MaterialParams

logger = logging.getLogger(__name__)

type CheckLevel = Literal["fast", "full"]

KAPPA = 0.876


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        suffix = f" ({self.detail})" if self.detail else ""
        return f"{status:4} {self.name}: {self.value:.3e} (threshold {self.threshold:.1e}){suffix}"


def random_unit_field(n: int, rng: np.random.Generator) -> NodalVectorField:
    return normalize_nodal(rng.standard_normal((n, 3)))


def perturbed(mesh: TriMesh, rng: np.random.Generator, amplitude: float = 0.1) -> TriMesh:
    """
    Сетка со случайно сдвинутыми внутренними вершинами (на долю amplitude кратчайшего ребра).
    """

    shift = amplitude * float(np.min(mesh.edge_lengths)) * rng.uniform(-1.0, 1.0, mesh.vertices.shape)
    boundary = np.fromiter(mesh.boundary_vertices, dtype=np.int64)
    shift[boundary] = 0.0
    return TriMesh(mesh.vertices + shift, mesh.triangles)


def check_assembly(meshes: list[TriMesh]) -> CheckResult:
    worst = 0.0
    for mesh in meshes:
        operators = assemble_operators(mesh)
        dense = dense_assemble(mesh)
        worst = max(
            worst,
            float(np.linalg.norm(operators.stiffness.toarray() - dense.stiffness)),
            float(np.linalg.norm(np.diag(operators.lumped.weights) - dense.mass_lumped)),
            float(np.linalg.norm(operators.consistent_mass.toarray() - dense.mass_consistent)),
            float(np.linalg.norm(operators.curl.toarray() - dense.curl_form)),
        )
    return CheckResult("sparse vs dense assembly", worst <= 1e-13, worst, 1e-13, f"{len(meshes)} meshes")


def check_gradient(mesh: TriMesh, params: MaterialParams, rng: np.random.Generator) -> CheckResult:
    operators = assemble_operators(mesh)
    m = random_unit_field(mesh.n_vertices, rng)
    report = fd_gradient_check(
        mesh, m, params, [1e-1, 1e-2, 1e-3], operators=operators, seed=int(rng.integers(2**31))
    )
    return CheckResult("fd gradient of lumped energy", report.max_deviation <= 1e-9, report.max_deviation, 1e-9)


def check_energy_law(
    mesh: TriMesh, params: MaterialParams, tau: float, n_steps: int, rng: np.random.Generator
) -> list[CheckResult]:
    """
    Энергетический закон, монотонность, закон длины и касательность на случайном начальном поле.
    """

    m0 = random_unit_field(mesh.n_vertices, rng)
    config = SimConfig(tau=tau, t_end=n_steps * tau)
    sink = MemorySink()
    result = evolve(mesh, m0, params, config, sink)
    series = result.series

    residual = max(
        abs(d.energy_law_residual) / max(1.0, abs(prev.energy.total))
        for prev, d in zip(series, series[1:], strict=False)
    )
    increase = max(
        (d.energy.total - prev.energy.total) / max(1.0, abs(prev.energy.total))
        for prev, d in zip(series, series[1:], strict=False)
    )
    last = series[-1]
    constraint = abs(last.constraint_l1 - last.constraint_bound) / max(last.constraint_bound, 1e-300)

    _, v, _ = step(mesh, result.state.m, params, config)
    tangency = float(np.max(np.abs(np.einsum("ij,ij->i", v, result.state.m))))

    monotone_expected = tau <= monotonicity_bound(params)
    return [
        CheckResult("discrete energy law", residual <= 1e-10, residual, 1e-10, f"{n_steps} steps"),
        CheckResult(
            "monotone energy decay",
            increase <= 1e-12 or not monotone_expected,
            max(increase, 0.0),
            1e-12,
            "" if monotone_expected else "tau above monotonicity bound",
        ),
        CheckResult("constraint accumulator equality", constraint <= 1e-12, constraint, 1e-12),
        CheckResult("tangency of v", tangency <= 1e-10, tangency, 1e-10),
    ]


def check_fixed_points(mesh: TriMesh) -> CheckResult:
    params = dimensionless_params(kappa=0.0, alpha=1.0)
    config = SimConfig(tau=0.5, t_end=0.5)
    worst = 0.0
    for vector in ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)):
        _, v, _ = step(mesh, constant_field(mesh, vector), params, config)
        worst = max(worst, float(np.max(np.abs(v))))
    return CheckResult("equilibrium fixed points (kappa = 0)", worst <= 1e-12, worst, 1e-12)


def check_lumped_domination(mesh: TriMesh, rng: np.random.Generator, n_fields: int = 100) -> CheckResult:
    operators = assemble_operators(mesh)
    worst = -math.inf
    for _ in range(n_fields):
        v = rng.standard_normal((mesh.n_vertices, 3))
        exact = sum(float(v[:, c] @ (operators.consistent_mass @ v[:, c])) for c in range(3))
        worst = max(worst, exact - operators.lumped.norm_sq(v))
    return CheckResult("lumped L2 dominates exact L2", worst <= 1e-14, worst, 1e-14, f"{n_fields} fields")


def check_helical_identity(mesh: TriMesh, kappa: float) -> CheckResult:
    worst = 0.0
    for field in (tilted_x(), radial_skyrmion(1.0), uniform((1.0, 0.0, 0.0))):
        reference = f0_reference(field, mesh, kappa)
        energy = quad_energy(field, mesh, kappa)
        expected = reference.local_part - 0.5 * kappa**2 * (reference.area + 2.0 * reference.out_of_plane)
        worst = max(worst, abs(energy.exchange + energy.dmi - expected))
    return CheckResult("2D helical identity", worst <= 1e-10, worst, 1e-10, "3 fields")


def check_constraint_order() -> CheckResult:
    """
    Нарушение длины в конце фиксированного горизонта 0.2 нс при dt = 1e-11, 5e-12, 2.5e-12 с
    (при alpha = 1 шаг 2e-11 с нарушает эллиптичность: dt <= alpha / kappa^2 * time_unit ~ 1.54e-11 с).

    |m_N|^2 - 1 = tau^2 sum_i |v_i|^2 содержит T/tau слагаемых, поэтому ожидаемый порядок по tau - первый.
    """

    params = fege_params(alpha=1.0)
    mesh = generate_disk(params.length_to_dimensionless(40e-9), params.length_to_dimensionless(4.45e-9))
    operators = assemble_operators(mesh)
    m0 = constant_field(mesh, (0.0, 0.0, 1.0))

    taus: list[float] = []
    errors: list[float] = []
    for dt in (1e-11, 5e-12, 2.5e-12):
        tau = params.time_to_dimensionless(dt)
        config = SimConfig(tau=tau, t_end=params.time_to_dimensionless(2e-10))
        result = evolve(mesh, m0, params, config, operators=operators)
        taus.append(tau)
        errors.append(result.series[-1].constraint_l1)

    order = fit_order(taus, errors)
    value = order if order is not None else math.nan
    detail = "errors " + ", ".join(f"{e:.3e}" for e in errors)
    return CheckResult("constraint order in tau", value >= 0.9, value, 0.9, detail)


def check_gamma() -> list[CheckResult]:
    mesh = generate_disk(2.0, 0.1)
    eps = [0.2, 0.1, 0.05, 0.025]

    const_z = gamma_study(PRESETS["const-z"](), mesh, eps, KAPPA)
    const_x = gamma_study(PRESETS["const-x"](), mesh, eps, KAPPA)
    radial = gamma_study(PRESETS["radial"](), mesh, eps, KAPPA)

    worst_z = max(row.abs_error for row in const_z.rows)
    order_x = const_x.fitted_order if const_x.fitted_order is not None else math.nan
    order_r = radial.fitted_order if radial.fitted_order is not None else math.nan
    return [
        CheckResult("gamma const-z exact", worst_z <= 1e-12, worst_z, 1e-12),
        CheckResult("gamma const-x order", order_x >= 3.5, order_x, 3.5),
        CheckResult(
            "gamma radial order",
            order_r >= 0.9 and radial.monotone,
            order_r,
            0.9,
            "monotone" if radial.monotone else "not monotone",
        ),
    ]


def run_checks(level: CheckLevel, seed: int = 0, mesh: TriMesh | None = None) -> list[CheckResult]:
    """
    fast - секунды на малых сетках; full - дополнительно исследования по tau и по eps.
    Пользовательская сетка (mesh) заменяет малый диск в проверках динамики; эталон плотной сборки
    используется для нее, только если она укладывается в ограничения эталона.
    """

    rng = np.random.default_rng(seed)
    square = generate_square(1)
    disk = generate_disk(3.0, 0.9)
    params = dimensionless_params(kappa=KAPPA, alpha=1.0)
    target = mesh if mesh is not None else disk

    small = [square, disk, *(perturbed(disk, rng) for _ in range(3))]
    if mesh is not None and mesh.n_triangles <= MAX_TRIANGLES and 3 * mesh.n_vertices <= MAX_UNKNOWNS:
        small.append(mesh)

    suites: list[Callable[[], list[CheckResult]]] = [
        lambda: [check_assembly(small)],
        lambda: [check_gradient(square, params, rng), check_gradient(disk, params, rng)],
        lambda: check_energy_law(square, params, 0.3, 5, rng),
        lambda: check_energy_law(target, params, 0.3, 5, rng),
        lambda: [check_fixed_points(target)],
        lambda: [check_lumped_domination(target, rng)],
        lambda: [check_helical_identity(generate_disk(2.0, 0.25), KAPPA)],
    ]
    if level == "full":
        suites += [lambda: [check_constraint_order()], check_gamma]

    results: list[CheckResult] = []
    for suite in suites:
        for result in suite():
            logger.info("%s", result.as_line())
            results.append(result)
    return results
