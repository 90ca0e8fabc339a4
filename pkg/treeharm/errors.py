"""Исключения библиотеки treeharm"""


class TreeHarmError(ValueError):
    """Базовое исключение для всех ошибок библиотеки"""


class EmptyInput(TreeHarmError):
    """Пустой список родителей"""


class MultipleRoots(TreeHarmError):
    """Найдено больше одной вершины без родителя"""


class CycleDetected(TreeHarmError):
    """Ссылки на родителей образуют цикл"""


class MixedLeafLevels(TreeHarmError):
    """Листья находятся на разной высоте"""


class LevelUnderflow(TreeHarmError):
    """Запрошен уровень ниже листьев"""


class LevelOverflow(TreeHarmError):
    """Запрошен уровень выше верхней вершины"""


class DimensionMismatch(TreeHarmError):
    """Размерность данных не совпадает с деревом"""


class NoInternalVertices(TreeHarmError):
    """В дереве нет внутренних вершин"""


class RadiusOutOfRange(TreeHarmError):
    """Шар выходит за пределы усечения"""


class InvalidExponent(TreeHarmError):
    """Недопустимый показатель p"""


class RequiresLocallyDoubling(TreeHarmError):
    """Мера потока не является локально удваивающей (c2 <= 1)"""


class NonConvergence(TreeHarmError, RuntimeWarning):
    """
    Итерация не сошлась за отведенное число шагов

    Выдается через warnings.warn вместе с флагом converged=False, лучшая
    найденная оценка при этом остается в результате.
    """


class ParseError(TreeHarmError):
    """Ошибка разбора файла экземпляра"""

    def __init__(self, message: str, line: int = None, field: str = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"строка {line}")
        if field is not None:
            where.append(f"поле '{field}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(TreeHarmError):
    """Экземпляр нарушает инвариант"""

    def __init__(self, invariant: str, message: str):
        self.invariant = invariant
        super().__init__(f"[{invariant}] {message}")
