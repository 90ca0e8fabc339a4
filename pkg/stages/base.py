import asyncio
import itertools
import logging
import sys
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO

from treeharm.cli_io import Instance
from treeharm.config import Config
from treeharm.errors import ValidationError
from treeharm.measures import VertexMeasure

logger = logging.getLogger(__name__)


def status(message: str) -> None:
    """Строка прогресса для пользователя; stdout занят отчетом"""
    print(message, file=sys.stderr, flush=True)


def require_sigma(context: "VerificationContext") -> VertexMeasure:
    sigma = context.instance.sigma
    if sigma is None:
        raise ValidationError("sigma present", "в экземпляре нет меры sigma (добавьте ее через gen --sigma-law)")
    return sigma


@dataclass
class VerificationContext:
    """
    Общее состояние цепочки этапов одной команды

    Args:
        command: Имя подкоманды
        instance: Загруженный экземпляр
        config: Настройки запуска
        options: Разобранные параметры командной строки
        executor: Пул потоков для независимых задач
        output: Поток для отчета
    """
    command: str
    instance: Optional[Instance]
    config: Config
    options: Dict[str, Any] = field(default_factory=dict)
    executor: Optional[Executor] = None
    output: TextIO = sys.stdout
    constants: Dict[str, Any] = field(default_factory=dict)
    witnesses: Dict[str, Any] = field(default_factory=dict)
    table: List[Dict[str, Any]] = field(default_factory=list)
    seed: Optional[int] = None
    checks: Dict[str, bool] = field(default_factory=dict)
    error: Optional[BaseException] = None
    artefacts: Dict[str, Any] = field(default_factory=dict)

    def set_artefact(self, key: str, value: Any) -> None:
        self.artefacts[key] = value

    def get_artefact(self, key: str) -> Any:
        return self.artefacts.get(key)

    @property
    def verdict(self) -> Optional[str]:
        """PASS, если все проверки прошли; None, если команда ничего не проверяет"""
        if not self.checks:
            return None
        return "PASS" if all(self.checks.values()) else "FAIL"


class VerificationStage:
    """Базовый класс для всех этапов проверки"""

    def __init__(self):
        self.stage_name = self.__class__.__name__.replace('Stage', '')

    async def run(self, context: VerificationContext) -> bool:
        """
        Выполняет этап

        Args:
            context: Состояние цепочки

        Returns:
            bool: True если этап выполнен успешно, False в противном случае
        """
        try:
            status(f"📝 Этап: {self.stage_name}")
            result = await self.process(context)
            if result:
                status(f"✓ Этап {self.stage_name} завершен успешно")
            else:
                status(f"⚠ Этап {self.stage_name} завершился с ошибкой")
            return result
        except Exception as e:
            logger.exception(f"Ошибка в этапе {self.stage_name}")
            status(f"❌ Ошибка в этапе {self.stage_name}: {str(e)}")
            context.error = e
            return False

    async def process(self, context: VerificationContext) -> bool:
        """
        Основная логика этапа. Должна быть переопределена в наследниках.

        Returns:
            bool: True если этап выполнен успешно, False в противном случае
        """
        raise NotImplementedError("Метод process должен быть переопределен в наследнике")

    async def in_pool(self, context: VerificationContext, fn: Callable, *args) -> Any:
        """Выполняет синхронную функцию в пуле контекста (или в пуле цикла по умолчанию)"""
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(context.executor, fn, *args)

    async def show_spinner(self, message: str, coro):
        """
        Показывает анимированный спиннер во время выполнения корутины

        Args:
            message: Сообщение для отображения
            coro: Корутина для выполнения

        Returns:
            Any: Результат выполнения корутины
        """
        spinner = itertools.cycle(['⠋', '⠙', '⠹', '⠸', '⠼', '⠴', '⠦', '⠧', '⠇', '⠏'])
        task = asyncio.ensure_future(coro)
        interactive = sys.stderr.isatty()

        def clear():
            if interactive:
                print("\r" + " " * (len(message) + 10) + "\r", end='', file=sys.stderr, flush=True)

        try:
            while not task.done():
                if interactive:
                    print(f"\r{next(spinner)} {message}...", end='', file=sys.stderr, flush=True)
                await asyncio.sleep(0.1)
            clear()
            return await task
        except asyncio.CancelledError:
            task.cancel()
            clear()
            raise
        except Exception:
            clear()
            raise


class StageChain:
    """Последовательный запуск этапов до первой ошибки"""

    def __init__(self, stages: Sequence[VerificationStage]):
        self.stages = list(stages)

    async def run(self, context: VerificationContext) -> bool:
        for stage in self.stages:
            if not await stage.run(context):
                logger.error(f"Цепочка остановлена на этапе {stage.stage_name}")
                return False
        return True
