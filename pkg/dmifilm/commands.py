"""
Реализация подкоманд CLI. Каждая функция принимает разобранные аргументы и возвращает код завершения;
исключения пакета пробрасываются в dmifilm.cli, где отображаются на коды завершения.

Файлы сеток хранят координаты в единицах l_ex; перевод из нм выполняется только здесь и в dmifilm.config.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from dmifilm.analysis import (
    RunDirectorySink,
    classify_skyrmion,
    read_field,
    readout_profile,
    write_field,
    write_profile_csv,
)
from dmifilm.checks import run_checks
from dmifilm.config import dimensionless_to_nm, format_run_config, load_run_config, nm_to_dimensionless
from dmifilm.dynamics import SimConfig, ellipticity_check, evolve, monotonicity_bound
from dmifilm.exceptions import InvalidParameterError, OutputError
from dmifilm.fem import constant_field, normalize_nodal
from dmifilm.fields import PRESETS, nodal_interpolant, radial_skyrmion
from dmifilm.gamma import gamma_study, write_gamma_table
from dmifilm.mesh import generate_disk, load_mesh, mesh_stats, save_mesh
from dmifilm.model import fege_params

if TYPE_CHECKING:
    from argparse import Namespace

    from dmifilm.config import RunConfig
    from dmifilm.fem import NodalVectorField
    from dmifilm.mesh import TriMesh
    from dmifilm.model import MaterialParams

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1


def _emit(line: str) -> None:
    print(line)  # noqa: T201


def _material(args: Namespace) -> MaterialParams:
    if args.config is None:
        return fege_params()
    return load_run_config(Path(args.config)).material_params()


def mesh_disk(args: Namespace) -> int:
    """
    Сетка диска в файл нативного формата; диаметр и шаг задаются в нм и переводятся в l_ex
    материала из --config (по умолчанию FeGe).
    """

    params = _material(args)
    if not args.diameter_nm > 0:
        raise InvalidParameterError(parameter="diameter_nm", message="диаметр должен быть положительным")

    mesh = generate_disk(nm_to_dimensionless(args.diameter_nm, params), nm_to_dimensionless(args.h_nm, params))
    path = Path(args.out or "disk.mesh")
    if path.parent != Path():
        path.parent.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, path)

    for line in mesh_stats(mesh).as_lines():
        _emit(line)
    _emit(f"h_max_nm={dimensionless_to_nm(mesh.h_max, params)!r}")
    return EXIT_OK


def _run_mesh(config: RunConfig) -> TriMesh:
    if config.mesh.source == "disk":
        return generate_disk(*config.disk_geometry())
    return load_mesh(Path(config.mesh.path))


def _initial_state(config: RunConfig, mesh: TriMesh) -> NodalVectorField:
    preset = config.initial.preset
    if preset == "uniform_z":
        return constant_field(mesh, (0.0, 0.0, 1.0))
    if preset == "uniform_x":
        return constant_field(mesh, (1.0, 0.0, 0.0))
    if preset == "skyrmion":
        radius = float(np.max(np.linalg.norm(mesh.vertices, axis=1)))
        return nodal_interpolant(mesh, radial_skyrmion(radius))

    # сохраненное состояние не обязано быть единичным: схема не нормирует узловые значения
    field = read_field(mesh, Path(config.initial.path))
    if np.any(np.linalg.norm(field, axis=1) == 0.0):
        raise InvalidParameterError(parameter="initial.path", message="нулевой вектор в поле начального состояния")
    logger.info("initial state from %s normalized at vertices", config.initial.path)
    return normalize_nodal(field)


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc


def simulate(args: Namespace, *, relax: bool) -> int:
    """
    relax - прогон до stop_vmax или горизонта; evolve - фиксированный горизонт.
    В каталог результатов пишутся series.csv, снимки VTK, final_state.txt, profile.csv,
    classification.txt, копия конфигурации и сетка.
    """

    if args.config is None:
        raise InvalidParameterError(parameter="--config", message="для запуска нужен файл конфигурации")

    config = load_run_config(Path(args.config))
    params = config.material_params()
    sim_config = config.sim_config(relax=relax)
    if relax and sim_config.stop_vmax is None:
        logger.info("relax: relax_vmax is not set, running to the fixed horizon")

    mesh = _run_mesh(config)
    m0 = _initial_state(config, mesh)
    out = Path(args.out or config.output.dir)
    energy_scale = config.energy_scale_si() if args.si else 1.0

    with RunDirectorySink(out, mesh, energy_scale) as sink:
        result = evolve(mesh, m0, params, sim_config, sink)

    final = result.state
    write_field(final.m, out / "final_state.txt")
    save_mesh(mesh, out / "mesh.dmimesh")
    _write_text(out / "config.ini", format_run_config(config))

    profile = readout_profile(mesh, final.m, config.output.profile_samples)
    write_profile_csv(profile, out / "profile.csv", params.ell_ex)
    skyrmion = classify_skyrmion(profile)
    _write_text(out / "classification.txt", f"{skyrmion.kind}\nalternations={skyrmion.alternations}\n")
    logger.info("classification: %s (alternations=%d)", skyrmion.kind, skyrmion.alternations)

    _emit(f"steps={final.step}")
    _emit(f"time_s={params.time_to_si(final.time)!r}")
    _emit(f"stopped_by={result.stopped_by}")
    _emit(f"energy={final.energy.total * energy_scale!r}")
    _emit(f"classification={skyrmion.kind}")
    _emit(f"max_length={float(np.max(np.linalg.norm(final.m, axis=1)))!r}")
    return EXIT_OK


def relax(args: Namespace) -> int:
    return simulate(args, relax=True)


def evolve_fixed(args: Namespace) -> int:
    return simulate(args, relax=False)


def _parse_eps(text: str) -> list[float]:
    try:
        return [float(token) for token in text.split(",") if token.strip()]
    except ValueError as exc:
        raise InvalidParameterError(parameter="--eps", message=f"ожидался список чисел через запятую: {text}") from exc


def gamma(args: Namespace) -> int:
    """
    Исследование предела тонкой пленки на диске (--diameter, --h в l_ex) или на сетке из файла.
    """

    eps = _parse_eps(args.eps)
    mesh = load_mesh(Path(args.mesh)) if args.mesh else generate_disk(args.diameter, args.h)
    table = gamma_study(PRESETS[args.profile](), mesh, eps, args.kappa, n_gauss_s=args.n_gauss)

    path = Path(args.out or ".") / f"gamma_{args.profile}.csv"
    write_gamma_table(table, path)

    reference = table.reference
    _emit(f"fitted_order={table.order_label}")
    _emit(f"E_limit={table.e_limit!r}")
    _emit(f"F0_canonical={reference.canonical!r}")
    _emit(f"F0_helical_expansion={reference.helical_expansion!r}")
    _emit(f"F0_helical_as_stated={reference.helical_as_stated!r}")
    return EXIT_OK


def check(args: Namespace) -> int:
    mesh = load_mesh(Path(args.mesh)) if args.mesh else None
    results = run_checks(args.level, seed=args.seed, mesh=mesh)
    for result in results:
        _emit(result.as_line())
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.error("failed checks: %s", ", ".join(failed))
        return EXIT_CHECK_FAILED
    return EXIT_OK


def info(args: Namespace) -> int:
    """
    Производные параметры материала, границы шага по времени и масштаб энергии.
    """

    if args.config is None:
        params = fege_params()
        thickness_nm = 9.0
        dt_s = None
    else:
        config = load_run_config(Path(args.config))
        params = config.material_params()
        thickness_nm = config.mesh.thickness_nm
        dt_s = config.dynamics.dt_s

    max_tau = ellipticity_check(params, SimConfig(tau=1.0, t_end=0.0)).max_tau
    _emit(f"ell_ex_nm={params.ell_ex / 1e-9!r}")
    _emit(f"kappa={params.kappa!r}")
    _emit(f"time_unit_s={params.time_unit!r}")
    _emit(f"alpha={params.alpha!r}")
    _emit(f"ellipticity_max_dt_s={params.time_to_si(max_tau)!r}")
    _emit(f"monotonicity_max_dt_s={params.time_to_si(monotonicity_bound(params))!r}")
    _emit(f"energy_scale_J={params.energy_scale_si(thickness_nm * 1e-9)!r}")
    if dt_s is not None:
        _emit(f"tau={params.time_to_dimensionless(dt_s)!r}")
    return EXIT_OK
