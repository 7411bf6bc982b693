from __future__ import annotations

import types
from typing import TYPE_CHECKING, Annotated, Any, Literal, Union, get_args, get_origin, get_type_hints

from dmifilm.exceptions import ConfigValidationError, FieldValidationError

if TYPE_CHECKING:
    from collections.abc import Callable
    from typing import Self


type FieldName = str
type FieldValue = Any

type FieldsMapping = dict[FieldName, FieldValue]
type TypeHintsMapping = dict[FieldName, Any]

_TRUE_STRINGS = frozenset({"1", "true", "yes", "on"})
_FALSE_STRINGS = frozenset({"0", "false", "no", "off"})


class Schema:
    """
    Базовый класс для описания секций конфигурации с использованием аннотаций типов,
    для валидации и нормализации значений, прочитанных из INI-файла.

    Значения по умолчанию задаются атрибутами класса; поле без значения по умолчанию обязательно.
    """

    def __init__(self, **fields: FieldValue) -> None:
        """
        Значения секции проверяются и нормализуются; ошибки всех ключей собираются в одну группу.

        :raise ConfigValidationError: Хотя бы один ключ не прошел проверку.
        """

        values, errors = type(self)._run_validation(fields)

        for k, v in values.items():
            setattr(self, k, v)

        if errors:
            raise ConfigValidationError(f"{type(self).__name__}: validation failed", errors)

    @classmethod
    def validate(cls, fields: FieldsMapping) -> Self:
        """
        Секция из отображения: dict или секция configparser.

        :raise ConfigValidationError: Хотя бы один ключ не прошел проверку.
        """

        return cls(**fields)

    def as_dict(self) -> FieldsMapping:
        result: FieldsMapping = {}
        for field in get_type_hints(type(self)):
            value = getattr(self, field)
            result[field] = value.as_dict() if isinstance(value, Schema) else value
        return result

    @classmethod
    def _defaults(cls, type_hints: TypeHintsMapping) -> FieldsMapping:
        return {field: getattr(cls, field) for field in type_hints if hasattr(cls, field)}

    @classmethod
    def _run_validation(cls, fields: FieldsMapping) -> tuple[FieldsMapping, list[FieldValidationError]]:
        errors: list[FieldValidationError] = []
        type_hints = get_type_hints(cls, include_extras=True)
        # значения по умолчанию подставляются до проверки обязательных ключей
        fields = {**cls._defaults(type_hints), **fields}

        errors += cls._validate_missing_fields(fields, type_hints)
        errors += cls._validate_disallowed_fields(fields, type_hints)

        validated_fields, fields_errors = cls._validate_allowed_fields(fields, type_hints)
        errors += fields_errors

        return validated_fields, errors

    @staticmethod
    def _validate_missing_fields(fields: FieldsMapping, type_hints: TypeHintsMapping) -> list[FieldValidationError]:
        errors: list[FieldValidationError] = []
        missing_fields: set[FieldName] = type_hints.keys() - fields.keys()

        for field in sorted(missing_fields):
            errors.append(
                FieldValidationError(
                    field=field,
                    message="Обязательный ключ не передан",
                    location=[field],
                )
            )
        return errors

    @staticmethod
    def _validate_disallowed_fields(fields: FieldsMapping, type_hints: TypeHintsMapping) -> list[FieldValidationError]:
        errors: list[FieldValidationError] = []
        disallowed_fields: set[FieldName] = fields.keys() - type_hints.keys()

        for field in sorted(disallowed_fields):
            errors.append(
                FieldValidationError(
                    field=field,
                    message="Ключ не предусмотрен схемой",
                    location=[field],
                )
            )
        return errors

    @classmethod
    def _validate_allowed_fields(
        cls, fields: FieldsMapping, type_hints: TypeHintsMapping
    ) -> tuple[FieldsMapping, list[FieldValidationError]]:
        """
        Метод для валидации разрешенных ключей. Порядок обхода совпадает с порядком аннотаций.

        :returns: Нормализованные значения полей, список ошибок валидации
        """

        errors: list[FieldValidationError] = []
        validated_fields: FieldsMapping = {}

        for field, expected_type in type_hints.items():
            if field not in fields:
                continue

            validated_value, validation_errors = cls._check_field_type(field, fields[field], expected_type)

            validated_fields[field] = validated_value
            errors += validation_errors

        return validated_fields, errors

    @classmethod
    def _check_field_type(
        cls, field: FieldName, value: FieldValue, expected_type: Any
    ) -> tuple[FieldValue | ellipsis, list[FieldValidationError]]:
        """
        Метод для проверки на соответствие типов и нормализации конкретного поля:
            - Any
            - Annotated с валидаторами
            - T | None
            - Literal
            - Schema (вложенные секции)
            - Скалярные значения: (int, float, str, bool) с приведением из строк INI

        Если поле провалидировано с ошибкой будет проставлен ellipsis (...)

        :returns: Нормализованное значение для поля, список ошибок валидации
        """

        if expected_type is Any:
            return value, []

        origin = get_origin(expected_type)

        # Annotated[T, validator, ...]
        if origin is Annotated:
            return cls._resolve_validators(field, value, expected_type)

        if origin is Union or origin is types.UnionType:
            return cls._resolve_optional_type(field, value, expected_type)

        if origin is Literal:
            return cls._resolve_literal_type(field, value, expected_type)

        # list, dict и прочие обобщенные типы в секциях INI не встречаются
        if origin is not None or not isinstance(expected_type, type):
            return cls._resolve_unsupported_type(field, value, expected_type)

        # Проверка вложенных схем
        if issubclass(expected_type, Schema):
            return cls._resolve_schema_type(field, value, expected_type)

        return cls._resolve_scalar_type(field, value, expected_type)

    @classmethod
    def _resolve_optional_type(
        cls, field: FieldName, value: FieldValue, expected_type: Any
    ) -> tuple[FieldValue | ellipsis, list[FieldValidationError]]:
        """
        Резолвер для T | None.

        Логика:
            - None и пустая строка (пустое значение в INI) нормализуются в None.
            - Иначе значение валидируется по единственному не-None аргументу.

        :returns: Нормализованное значение для поля, список ошибок валидации
        """

        if value is None or (isinstance(value, str) and not value.strip()):
            return None, []

        args = [arg for arg in get_args(expected_type) if arg is not type(None)]
        if len(args) != 1:
            return cls._resolve_unsupported_type(field, value, expected_type)

        return cls._check_field_type(field, value, args[0])

    @classmethod
    def _resolve_literal_type(
        cls, field: FieldName, value: FieldValue, expected_type: Any
    ) -> tuple[FieldValue | ellipsis, list[FieldValidationError]]:
        allowed = get_args(expected_type)
        normalized = value.strip() if isinstance(value, str) else value

        if normalized in allowed:
            return normalized, []

        return ..., [
            FieldValidationError(
                field=field,
                message=f"Ожидалось одно из {list(allowed)!r}, передано {value!r}",
                location=[field],
            )
        ]

    @classmethod
    def _resolve_unsupported_type(
        cls, field: FieldName, value: FieldValue, expected_type: Any
    ) -> tuple[FieldValue | ellipsis, list[FieldValidationError]]:
        return ..., [
            FieldValidationError(
                field=field,
                message=f"Переданный тип не поддерживается: {expected_type!r}",
                location=[field],
            )
        ]

    @classmethod
    def _resolve_schema_type(
        cls, field: FieldName, value: FieldValue, expected_type: Any
    ) -> tuple[FieldValue | ellipsis, list[FieldValidationError]]:
        """
        Резолвер для вложенных секций (подклассов Schema).

        Логика:
            - Если значение уже является экземпляром ожидаемой схемы - возвращается как есть.
            - Если значение является отображением (dict, секция configparser) - выполняется попытка
              сконструировать экземпляр expected_type(**value).
            - При возникновении ConfigValidationError из дочерней схемы ошибки разворачиваются
              в список FieldValidationError с добавлением текущего поля в location.

        :returns: Нормализованное значение для поля, список ошибок валидации
        """

        if isinstance(value, expected_type):
            return value, []

        if hasattr(value, "keys"):
            try:
                return expected_type(**dict(value)), []
            except ConfigValidationError as exc:
                return ..., [
                    FieldValidationError(
                        field=exc.field,
                        message=exc.message,
                        location=[field, *exc.location],
                    )
                    for exc in exc.exceptions
                ]

        return ..., [
            FieldValidationError(
                field=field,
                message=f"Ожидалась секция {expected_type.__name__}; передано {type(value).__name__}",
                location=[field],
            )
        ]

    @classmethod
    def _resolve_scalar_type(
        cls, field: FieldName, value: FieldValue, expected_type: Any
    ) -> tuple[FieldValue | ellipsis, list[FieldValidationError]]:
        """
        Резолвер для скалярных типов.

        Логика:
            - Строки, прочитанные из INI, обрезаются по краям и приводятся к str, int, float и bool.
            - Значение нужного типа возвращается как есть (bool не принимается вместо int/float).
            - int допускается там, где ожидается float.
            - Во всех остальных случаях формируется единичная ошибка FieldValidationError.

        :returns: Нормализованное значение для поля, список ошибок валидации
        """

        if isinstance(value, str):
            coerced = _coerce_string(value, expected_type)
            if coerced is not ...:
                return coerced, []

        elif isinstance(value, expected_type) and not (isinstance(value, bool) and expected_type is not bool):
            return value, []

        elif expected_type is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value), []

        return ..., [
            FieldValidationError(
                field=field,
                message=f"Ожидалось {expected_type.__name__}, передано {value!r}",
                location=[field],
            )
        ]

    @classmethod
    def _resolve_validators(
        cls, field: FieldName, value: FieldValue, expected_type: Any
    ) -> tuple[FieldValue | ellipsis, list[FieldValidationError]]:
        """
        Сначала базовый тип, затем валидаторы по порядку. Пустое значение T | None валидаторы не проверяют.
        """

        base_type, *validators = get_args(expected_type)
        value, errors = cls._check_field_type(field, value, base_type)

        if errors:
            return ..., errors

        if value is None:
            return None, []

        validator_errors: list[FieldValidationError] = []
        for validator in validators:
            try:
                value = validator(value)
            except Exception as exc:
                validator_errors.append(
                    FieldValidationError(
                        field=field,
                        message=f"Ошибка валидатора {validator.__name__}: {exc}",
                        location=[field],
                    )
                )

        if validator_errors:
            return ..., validator_errors

        return value, []


def _coerce_string(value: str, expected_type: type) -> FieldValue | ellipsis:
    text = value.strip()

    if expected_type is str:
        return text

    if expected_type is bool:
        if text.lower() in _TRUE_STRINGS:
            return True
        if text.lower() in _FALSE_STRINGS:
            return False
        return ...

    if expected_type in (int, float):
        try:
            return expected_type(text)
        except ValueError:
            return ...

    return ...


def positive(value: float) -> float:
    if not value > 0:
        raise ValueError("значение должно быть положительным")
    return value


def non_negative(value: float) -> float:
    if value < 0:
        raise ValueError("значение должно быть неотрицательным")
    return value


def finite(value: float) -> float:
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("значение должно быть конечным")
    return value


def at_most(bound: float) -> Callable[[float], float]:
    def validator(value: float) -> float:
        if value > bound:
            raise ValueError(f"значение не должно превышать {bound:g}")
        return value

    validator.__name__ = f"at_most_{bound:g}"
    return validator


def at_least(bound: float) -> Callable[[float], float]:
    def validator(value: float) -> float:
        if value < bound:
            raise ValueError(f"значение должно быть не меньше {bound:g}")
        return value

    validator.__name__ = f"at_least_{bound:g}"
    return validator
