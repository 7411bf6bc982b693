from __future__ import annotations

from pathlib import Path

import pytest

from dmifilm.config import (
    RunConfig,
    dimensionless_to_nm,
    format_run_config,
    load_run_config,
    nm_to_dimensionless,
    read_ini,
)
from dmifilm.exceptions import ConfigValidationError
from dmifilm.model import MaterialParams

FEGE_RUN = """
[material]
A_J_per_m = 8.78e-12
D_J_per_m2 = 1.58e-3
Ms_A_per_m = 3.84e5
alpha = 1.0

[mesh]
source = disk
diameter_nm = 80
target_h_nm = 4.45   # шаг порядка l_ex / 2

[dynamics]
dt_s = 1e-11
t_end_s = 1e-9
relax_vmax = 1e-6

[output]
dir = runs/d80
snapshot_every = 10
"""


@pytest.fixture
def run_file(tmp_path: Path) -> Path:
    path = tmp_path / "run.ini"
    path.write_text(FEGE_RUN, encoding="utf-8")
    return path


def errors_of(exc: pytest.ExceptionInfo[ConfigValidationError]) -> dict[tuple[str | int, ...], str]:
    return {tuple(error.location): error.message for error in exc.value.exceptions}


class TestLoadRunConfig:
    def test_fege_disk(self, run_file: Path) -> None:
        config = load_run_config(run_file)

        assert config.mesh.source == "disk", "check source"
        assert config.mesh.target_h_nm == 4.45, "inline comment is stripped"
        assert config.initial.preset == "uniform_z", "default section"
        assert config.output.snapshot_every == 10, "check int field"
        assert config.dynamics.solver == "direct", "check default solver"

    def test_dimensionless_values(self, run_file: Path) -> None:
        config = load_run_config(run_file)
        params = config.material_params()
        diameter, target_h = config.disk_geometry()

        assert diameter == pytest.approx(80e-9 / params.ell_ex), "diameter in l_ex"
        assert target_h == pytest.approx(4.45e-9 / params.ell_ex), "h in l_ex"
        assert config.tau == pytest.approx(1e-11 / params.time_unit), "tau"
        assert config.t_end == pytest.approx(100.0 * config.tau), "t_end"

    def test_sim_config(self, run_file: Path) -> None:
        config = load_run_config(run_file)

        assert config.sim_config(relax=True).stop_vmax == 1e-6, "relax stops on vmax"
        assert config.sim_config(relax=False).stop_vmax is None, "evolve runs to the horizon"
        assert config.sim_config(relax=False).snapshot_every == 10, "check snapshots"

    def test_energy_scale(self, run_file: Path) -> None:
        config = load_run_config(run_file)
        params = config.material_params()

        assert config.energy_scale_si() == pytest.approx(params.energy_density * params.ell_ex**2 * 9e-9), "9 nm"

    def test_unreadable_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(tmp_path / "absent.ini")

        assert exc.value.kind == "config-error", "check kind"
        assert exc.value.exit_code == 2, "check exit code"

    def test_syntax_error(self, tmp_path: Path) -> None:
        path = tmp_path / "broken.ini"
        path.write_text("alpha = 1\n", encoding="utf-8")

        with pytest.raises(ConfigValidationError):
            read_ini(path)

    def test_keys_keep_case(self, run_file: Path) -> None:
        assert "A_J_per_m" in read_ini(run_file)["material"], "check key case"


class TestValidation:
    """
    Ошибки отдельных ключей и межсекционных правил собираются в одну группу
    """

    def test_missing_section(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        path.write_text(FEGE_RUN.replace("[dynamics]", "[dynamic]"), encoding="utf-8")

        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)

        errors = errors_of(exc)
        assert ("dynamics",) in errors, "missing section"
        assert ("dynamic",) in errors, "unknown section"

    def test_invalid_values(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        text = FEGE_RUN.replace("alpha = 1.0", "alpha = -1").replace("snapshot_every = 10", "snapshot_every = x")
        path.write_text(text, encoding="utf-8")

        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)

        errors = errors_of(exc)
        assert "positive" in errors[("material", "alpha")], "check validator"
        assert "Ожидалось int" in errors[("output", "snapshot_every")], "check type error"

    def test_two_mesh_sources(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        path.write_text(FEGE_RUN.replace("source = disk", "source = file\npath = disk.mesh"), encoding="utf-8")

        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)

        assert errors_of(exc) == {("mesh", "source"): "Задано два источника сетки"}, "check error"

    def test_disk_without_diameter(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        path.write_text(FEGE_RUN.replace("diameter_nm = 80\n", ""), encoding="utf-8")

        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)

        assert ("mesh", "diameter_nm") in errors_of(exc), "check location"

    def test_file_preset_requires_path(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        path.write_text(FEGE_RUN + "\n[initial]\npreset = file\n", encoding="utf-8")

        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)

        assert ("initial", "path") in errors_of(exc), "check location"

    def test_ellipticity(self, tmp_path: Path) -> None:
        """
        Для FeGe при alpha = 1 допустимо dt <= ~1.54e-11 с.
        """

        path = tmp_path / "run.ini"
        path.write_text(FEGE_RUN.replace("dt_s = 1e-11", "dt_s = 2e-11"), encoding="utf-8")

        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)

        message = errors_of(exc)[("dynamics", "dt_s")]
        assert "эллиптичность" in message, "check message"
        assert "1.53" in message, "reports the admissible dt"

    def test_solver_tolerance_bound(self, tmp_path: Path) -> None:
        path = tmp_path / "run.ini"
        path.write_text(FEGE_RUN.replace("relax_vmax = 1e-6", "solver_tol = 1e-3"), encoding="utf-8")

        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)

        assert "at_most" in errors_of(exc)[("dynamics", "solver_tol")], "check validator"


class TestFormat:
    def test_round_trip(self, run_file: Path, tmp_path: Path) -> None:
        config = load_run_config(run_file)
        copy = tmp_path / "copy.ini"
        copy.write_text(format_run_config(config), encoding="utf-8")

        assert load_run_config(copy).as_dict() == config.as_dict(), "same configuration"

    def test_format(self, run_file: Path) -> None:
        text = format_run_config(load_run_config(run_file))

        assert "[material]\nA_J_per_m = 8.78e-12\n" in text, "check section"
        assert "path = \n" in text, "None as empty value"
        assert "renormalize = false" in text, "check bool"


class TestUnits:
    @pytest.mark.parametrize("value_nm", [4.45, 80.0, 180.0, 1e-3])
    def test_length_round_trip(self, fege: MaterialParams, value_nm: float) -> None:
        restored = dimensionless_to_nm(nm_to_dimensionless(value_nm, fege), fege)

        assert abs(restored - value_nm) <= 1e-12 * value_nm, "relative round trip"

    def test_time_round_trip(self, fege: MaterialParams) -> None:
        assert fege.time_to_si(fege.time_to_dimensionless(3e-12)) == pytest.approx(3e-12, rel=1e-12), "dt"

    def test_direct_construction(self) -> None:
        config = RunConfig(
            material={"A_J_per_m": 8.78e-12, "D_J_per_m2": 1.58e-3, "Ms_A_per_m": 3.84e5, "alpha": 0.28},
            mesh={"source": "disk", "diameter_nm": 140.0, "target_h_nm": 4.45},
            dynamics={"dt_s": 3e-12, "t_end_s": 1e-9},
        )

        assert config.material_params().alpha == 0.28, "check alpha"
        assert config.output.dir == "out", "default output directory"

    def test_direct_construction_strips_strings(self) -> None:
        config = RunConfig(
            material={"A_J_per_m": 8.78e-12, "D_J_per_m2": 1.58e-3, "Ms_A_per_m": 3.84e5, "alpha": 1.0},
            mesh={"source": "file", "path": "  meshes/d80.msh  "},
            dynamics={"dt_s": 1e-11, "t_end_s": 1e-9},
            output={"dir": " runs/d80\t"},
        )

        assert config.mesh.path == "meshes/d80.msh", "mesh path is stripped"
        assert config.output.dir == "runs/d80", "output directory is stripped"


class TestUsecaseConfigs:
    @pytest.mark.parametrize("name", ["relax_fege_d80", "relax_fege_d120", "relax_fege_d180", "evolve_fege_d140"])
    def test_step_in_seconds(self, name: str) -> None:
        path = Path(__file__).parent.parent / "usecases" / f"{name}.ini"
        config = load_run_config(path)

        assert config.dynamics.dt_s in (1e-11, 3e-12), "step is read in seconds"
        assert "1e-11 ps" in path.read_text(encoding="utf-8"), "unit note next to dt_s"
