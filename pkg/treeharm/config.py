import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)

# Допуски проверок
FLOW_TOL = 1e-12
HARMONIC_TOL = 1e-10
ROUND_TRIP_TOL = 1e-12
VERDICT_SLACK = 1e-9

RNG_ALGORITHM = "numpy.PCG64"


@dataclass(frozen=True)
class IterationConfig:
    """
    Параметры степенной итерации для оценки нормы оператора Пуассона

    Args:
        max_iter: Максимальное число итераций на один старт
        tol: Порог разности соседних отношений для остановки
        restarts: Число случайных неотрицательных рестартов
        seed: Зерно генератора для рестартов
    """
    max_iter: int = 200
    tol: float = 1e-10
    restarts: int = 8
    seed: int = 0


@dataclass(frozen=True)
class Config:
    """Настройки запуска, собранные из значений по умолчанию и переменных окружения"""
    log_level: str = "WARNING"
    workers: int = 4
    iteration: IterationConfig = field(default_factory=IterationConfig)

    @classmethod
    def load(cls) -> "Config":
        """
        Загружает настройки из переменных окружения TREEHARM_*

        Returns:
            Config: Итоговая конфигурация
        """
        config = cls()
        iteration = config.iteration
        try:
            if "TREEHARM_MAX_ITER" in os.environ:
                iteration = replace(iteration, max_iter=int(os.environ["TREEHARM_MAX_ITER"]))
            if "TREEHARM_RESTARTS" in os.environ:
                iteration = replace(iteration, restarts=int(os.environ["TREEHARM_RESTARTS"]))
            workers = int(os.environ.get("TREEHARM_WORKERS", config.workers))
        except ValueError as e:
            logger.warning(f"Некорректное значение в окружении, используем значения по умолчанию: {e}")
            return config
        log_level = os.environ.get("TREEHARM_LOG_LEVEL", config.log_level).upper()
        return cls(log_level=log_level, workers=max(1, workers), iteration=iteration)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Генератор PCG64 для заданного зерна и номера потока

    Потоки с разными номерами независимы, поэтому параллельные задачи
    получают те же числа, что и при последовательном запуске.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))
