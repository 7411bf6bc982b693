"""
Пример сопоставления ошибок конфигурации: все ошибки секций собираются в одну группу.
"""

from pprint import pprint

from dmifilm.config import RunConfig
from dmifilm.exceptions import ConfigValidationError

try:
    RunConfig(
        material={
            "A_J_per_m": 8.78e-12,
            "D_J_per_m2": 1.58e-3,
            "Ms_A_per_m": 3.84e5,
            "alpha": -0.28,  # Затухание должно быть положительным
        },
        mesh={
            "source": "disk",
            "diameter_nm": 140,
            "target_h_nm": 0,  # Шаг сетки должен быть положительным
        },
        dynamics={
            "dt_s": "3 ps",  # Некорректное значение
            "t_end_s": 1e-9,
        },
    )
except ConfigValidationError as exc:
    pprint(  # noqa T203
        [
            {
                "field": error.field,
                "message": error.message,
                "location": error.location,
            }
            for error in exc.exceptions
        ]
    )
