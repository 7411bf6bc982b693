"""
Точка входа командной строки: подкоманды mesh-disk, relax, evolve, gamma-study, check, info.

Коды завершения: 0 - успех, 1 - не пройдены проверки check, 2 - ошибка конфигурации или входных
данных, 3 - отказ решателя, 4 - вырождение намагниченности, 5 - внутренняя ошибка.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import TYPE_CHECKING

from dmifilm.exceptions import ConfigValidationError, DmiFilmError, InvalidParameterError

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

logger = logging.getLogger(__name__)

EXIT_INTERNAL = 5

THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-файл прогона")
    common.add_argument("--out", help="каталог результатов (для mesh-disk - файл сетки)")
    common.add_argument("--threads", type=int, help="число потоков BLAS/LAPACK")
    common.add_argument("--seed", type=int, default=0, help="зерно случайных полей в check")
    common.add_argument("--si", action="store_true", help="энергии в CSV в джоулях")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v INFO, -vv DEBUG")

    parser = argparse.ArgumentParser(
        prog="dmifilm", description="LLG для тонких пленок с объемным DMI: P1 МКЭ и схема касательной плоскости"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    mesh_disk = subparsers.add_parser("mesh-disk", parents=[common], help="сетка диска в нативном формате")
    mesh_disk.add_argument("--diameter-nm", type=float, required=True)
    mesh_disk.add_argument("--h-nm", type=float, required=True)

    subparsers.add_parser("relax", parents=[common], help="релаксация к равновесию")
    subparsers.add_parser("evolve", parents=[common], help="динамика на фиксированном горизонте")

    gamma = subparsers.add_parser("gamma-study", parents=[common], help="сходимость к пределу тонкой пленки")
    gamma.add_argument("--profile", choices=("const-x", "const-z", "tilted-x", "radial"), required=True)
    gamma.add_argument("--kappa", type=float, default=0.876)
    gamma.add_argument("--eps", default="0.2,0.1,0.05,0.025")
    gamma.add_argument("--diameter", type=float, default=2.0, help="диаметр диска omega в l_ex")
    gamma.add_argument("--h", type=float, default=0.1, help="шаг сетки omega в l_ex")
    gamma.add_argument("--mesh", help="сетка omega из файла вместо диска")
    gamma.add_argument("--n-gauss", type=int, default=4, help="узлы Гаусса по толщине (2..10)")

    check = subparsers.add_parser("check", parents=[common], help="проверки инвариантов")
    check.add_argument("--level", choices=("fast", "full"), default="fast")
    check.add_argument("--mesh", help="сетка для проверок динамики")

    subparsers.add_parser("info", parents=[common], help="производные параметры материала")
    return parser


def _limit_threads(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise InvalidParameterError(parameter="--threads", message="число потоков должно быть положительным")
    for name in THREAD_VARIABLES:
        os.environ[name] = str(threads)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _report(message: str) -> None:
    print(message, file=sys.stderr)  # noqa: T201


def _dispatch(command: str) -> Callable[[argparse.Namespace], int]:
    # numpy читает переменные числа потоков при импорте
    from dmifilm import commands

    return {
        "mesh-disk": commands.mesh_disk,
        "relax": commands.relax,
        "evolve": commands.evolve_fixed,
        "gamma-study": commands.gamma,
        "check": commands.check,
        "info": commands.info,
    }[command]


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        _limit_threads(args.threads)
        return _dispatch(args.command)(args)
    except ConfigValidationError as group:
        for error in group.exceptions:
            _report(f"{group.kind}: {error}")
        return group.exit_code
    except DmiFilmError as exc:
        _report(str(exc))
        return exc.exit_code
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL
