from __future__ import annotations


class DmiFilmError(Exception):
    """
    Базовое исключение пакета.

    Атрибут kind задает машинно-читаемое имя ошибки, exit_code - код завершения CLI.
    """

    kind: str = "internal-error"
    exit_code: int = 5

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message: str = message

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class InvalidParameterError(DmiFilmError):
    """
    Нарушено предусловие операции (размер, шаг сетки, физическая константа и т.п.).
    """

    kind = "invalid-parameter"
    exit_code = 2

    def __init__(self, *, parameter: str, message: str) -> None:
        super().__init__(message)
        self.parameter: str = parameter

    def __str__(self) -> str:
        return f"{self.kind}: {self.parameter}: {self.message}"


class MeshParseError(DmiFilmError):
    """
    Синтаксическая ошибка во входном файле сетки.
    """

    kind = "parse-error"
    exit_code = 2

    def __init__(self, *, line: int, message: str) -> None:
        super().__init__(message)
        self.line: int = line

    def __str__(self) -> str:
        return f"{self.kind}: line {self.line}: {self.message}"


class MeshTopologyError(DmiFilmError):
    """
    Сетка синтаксически корректна, но нарушает инварианты триангуляции.
    """

    kind = "topology-error"
    exit_code = 2


class EmptyMeshError(DmiFilmError):
    """
    Во входных данных нет ни одного треугольника.
    """

    kind = "empty-mesh"
    exit_code = 2


class AssemblyError(DmiFilmError):
    """
    Вырожденный элемент при сборке конечно-элементных операторов.
    """

    kind = "assembly-error"
    exit_code = 2

    def __init__(self, *, triangle: int, message: str) -> None:
        super().__init__(message)
        self.triangle: int = triangle

    def __str__(self) -> str:
        return f"{self.kind}: triangle {self.triangle}: {self.message}"


class PointOutsideMeshError(DmiFilmError):
    kind = "point-outside-mesh"
    exit_code = 2

    def __init__(self, *, point: tuple[float, float]) -> None:
        super().__init__(f"точка {point} не принадлежит сетке")
        self.point: tuple[float, float] = point


class SizeMismatchError(DmiFilmError):
    kind = "size-mismatch"
    exit_code = 2

    def __init__(self, *, expected: int, received: int) -> None:
        super().__init__(f"ожидалось {expected} узловых значений, передано {received}")
        self.expected: int = expected
        self.received: int = received


class DegenerateMagnetizationError(DmiFilmError):
    """
    Длина узловой намагниченности упала ниже допустимого порога:
    нарушение единичной длины вышло из-под контроля (слишком большой шаг по времени).
    """

    kind = "degenerate-magnetization"
    exit_code = 4

    def __init__(self, *, vertex: int, length: float) -> None:
        super().__init__(f"|m(z)| = {length:.3e} в вершине {vertex}")
        self.vertex: int = vertex
        self.length: float = length


class EllipticityViolationError(DmiFilmError):
    """
    Шаг по времени не гарантирует эллиптичность билинейной формы схемы.
    """

    kind = "ellipticity-violation"
    exit_code = 2

    def __init__(self, *, tau: float, max_tau: float) -> None:
        super().__init__(f"tau = {tau:.6g} превышает допустимый максимум {max_tau:.6g}")
        self.tau: float = tau
        self.max_tau: float = max_tau


class SolverFailureError(DmiFilmError):
    kind = "solver-failure"
    exit_code = 3

    def __init__(self, *, residual: float, tolerance: float) -> None:
        super().__init__(f"относительная невязка {residual:.3e} не достигла {tolerance:.1e}")
        self.residual: float = residual
        self.tolerance: float = tolerance


class OutputError(DmiFilmError):
    kind = "io-error"
    exit_code = 2


class ConfigValidationError(ExceptionGroup):
    """
    Исключение (Группа исключений), описывающая ошибки валидации конфигурации.
    """

    kind = "config-error"
    exit_code = 2


class FieldValidationError(Exception):
    """
    Исключение, описывающее ошибку валидации конкретного ключа конфигурации.
    """

    def __init__(self, *, field: str, message: str, location: list[str | int]) -> None:
        self.field: str = field
        self.message: str = message
        self.location: list[str | int] = location

    def __str__(self) -> str:
        return f"({self.field}: {self.message}. {self.location})"
