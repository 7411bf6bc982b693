"""
Конфигурация прогона: INI-файл с секциями [material], [mesh], [dynamics], [initial], [output].

Все величины в файле заданы в СИ (нм, с, Дж/м, ...); перевод в безразмерные единицы
(длины в l_ex, время в 1/(gamma0 mu0 Ms)) выполняется только здесь.
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path
from types import MappingProxyType
from typing import Annotated, Literal

from dmifilm.dynamics import SimConfig, ellipticity_check
from dmifilm.exceptions import ConfigValidationError, FieldValidationError, InvalidParameterError
from dmifilm.model import MaterialParams, derive_params
from dmifilm.schema import Schema, at_least, at_most, finite, non_negative, positive

NM = 1e-9

_EMPTY_SECTION = MappingProxyType({})


class MaterialSection(Schema):
    A_J_per_m: Annotated[float, positive]
    D_J_per_m2: Annotated[float, finite]
    Ms_A_per_m: Annotated[float, positive]
    alpha: Annotated[float, positive]


class MeshSection(Schema):
    source: Literal["disk", "file"] = "disk"
    diameter_nm: Annotated[float | None, positive] = None
    target_h_nm: Annotated[float | None, positive] = None
    path: str | None = None
    thickness_nm: Annotated[float, positive] = 9.0


class DynamicsSection(Schema):
    dt_s: Annotated[float, positive]
    t_end_s: Annotated[float, non_negative, finite]
    relax_vmax: Annotated[float | None, positive] = None
    solver: Literal["direct", "iterative"] = "direct"
    solver_tol: Annotated[float, positive, at_most(1e-4)] = 1e-10
    renormalize: bool = False


class InitialSection(Schema):
    preset: Literal["uniform_z", "uniform_x", "skyrmion", "file"] = "uniform_z"
    path: str | None = None


class OutputSection(Schema):
    dir: str = "out"
    snapshot_every: Annotated[int, non_negative] = 0
    profile_samples: Annotated[int, at_least(16)] = 201


class RunConfig(Schema):
    """
    Полная конфигурация прогона. Помимо проверки секций проверяются межсекционные правила:
    ровно один источник сетки, path для файловых источников, допустимость dt по эллиптичности.
    """

    material: MaterialSection
    mesh: MeshSection
    dynamics: DynamicsSection
    initial: InitialSection = _EMPTY_SECTION
    output: OutputSection = _EMPTY_SECTION

    def __init__(self, **fields: object) -> None:
        """
        :raise ConfigValidationError: Ошибка валидации секций или межсекционных правил.
        """

        super().__init__(**fields)

        errors = self._cross_section_errors()
        if errors:
            raise ConfigValidationError(f"{type(self).__name__}: validation failed", errors)

    def _cross_section_errors(self) -> list[FieldValidationError]:
        errors: list[FieldValidationError] = []
        mesh = self.mesh

        def error(section: str, field: str, message: str) -> None:
            errors.append(FieldValidationError(field=field, message=message, location=[section, field]))

        if mesh.source == "disk":
            if mesh.diameter_nm is None:
                error("mesh", "diameter_nm", "Для source = disk нужен диаметр")
            if mesh.target_h_nm is None:
                error("mesh", "target_h_nm", "Для source = disk нужен шаг сетки")
            if mesh.path is not None:
                error("mesh", "path", "Для source = disk путь к файлу не задается")
            if (
                mesh.diameter_nm is not None
                and mesh.target_h_nm is not None
                and not mesh.target_h_nm < mesh.diameter_nm / 2
            ):
                error("mesh", "target_h_nm", "Шаг сетки должен быть меньше радиуса диска")
        else:
            if mesh.path is None:
                error("mesh", "path", "Для source = file нужен путь к файлу сетки")
            if mesh.diameter_nm is not None or mesh.target_h_nm is not None:
                error("mesh", "source", "Задано два источника сетки")

        if self.initial.preset == "file" and self.initial.path is None:
            error("initial", "path", "Для preset = file нужен путь к файлу поля")

        check = ellipticity_check(self.material_params(), SimConfig(tau=self.tau, t_end=self.t_end))
        if not check.passed:
            max_dt = check.max_tau * self.material_params().time_unit
            error(
                "dynamics",
                "dt_s",
                f"Шаг tau = {self.tau:.6g} нарушает эллиптичность; допустимый максимум dt_s = {max_dt:.6e}",
            )
        return errors

    def material_params(self) -> MaterialParams:
        m = self.material
        return derive_params(m.A_J_per_m, m.D_J_per_m2, m.Ms_A_per_m, m.alpha)

    @property
    def tau(self) -> float:
        return self.material_params().time_to_dimensionless(self.dynamics.dt_s)

    @property
    def t_end(self) -> float:
        return self.material_params().time_to_dimensionless(self.dynamics.t_end_s)

    def disk_geometry(self) -> tuple[float, float]:
        """
        Диаметр и шаг сетки диска в единицах l_ex.
        """

        params = self.material_params()
        if self.mesh.diameter_nm is None or self.mesh.target_h_nm is None:
            raise InvalidParameterError(parameter="mesh", message="источник сетки не является диском")
        return (
            nm_to_dimensionless(self.mesh.diameter_nm, params),
            nm_to_dimensionless(self.mesh.target_h_nm, params),
        )

    def sim_config(self, *, relax: bool) -> SimConfig:
        d = self.dynamics
        return SimConfig(
            tau=self.tau,
            t_end=self.t_end,
            solver_tol=d.solver_tol,
            solver=d.solver,
            stop_vmax=d.relax_vmax if relax else None,
            snapshot_every=self.output.snapshot_every,
            renormalize=d.renormalize,
        )

    def energy_scale_si(self) -> float:
        """
        Джоули на безразмерную единицу энергии для пленки толщины [mesh] thickness_nm.
        """

        return self.material_params().energy_scale_si(self.mesh.thickness_nm * NM)


def nm_to_dimensionless(value_nm: float, params: MaterialParams) -> float:
    return params.length_to_dimensionless(value_nm * NM)


def dimensionless_to_nm(value: float, params: MaterialParams) -> float:
    return params.length_to_si(value) / NM


def read_ini(path: Path) -> dict[str, dict[str, str]]:
    """
    Чтение INI-файла в словарь секций; имена ключей сохраняют регистр.

    :raise ConfigValidationError: Файл не читается или синтаксически некорректен.
    """

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as stream:
            parser.read_file(stream)
    except (OSError, configparser.Error) as exc:
        raise ConfigValidationError(
            "RunConfig: unreadable file",
            [FieldValidationError(field=str(path), message=str(exc), location=[str(path)])],
        ) from exc

    return {section: dict(parser.items(section)) for section in parser.sections()}


def load_run_config(path: Path) -> RunConfig:
    """
    :raise ConfigValidationError: Ошибки чтения, валидации секций или межсекционных правил.
    """

    return RunConfig.validate(read_ini(path))


def format_run_config(config: RunConfig) -> str:
    """
    Обратная запись конфигурации в INI (значения в СИ, числа - кратчайшим точным представлением).
    """

    lines: list[str] = []
    for section, values in config.as_dict().items():
        lines.append(f"[{section}]")
        for key, value in values.items():
            if value is None:
                text = ""
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value) if math.isfinite(value) else str(value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)
