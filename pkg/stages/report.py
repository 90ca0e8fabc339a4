from .base import VerificationStage, VerificationContext, status
import logging

from treeharm.cli_io import render_report, rng_record, write_csv

logger = logging.getLogger(__name__)


def build_report(context: VerificationContext) -> dict:
    """Отчет с разделами command, verdict, constants, witnesses, rng"""
    return {
        "command": context.command,
        "verdict": context.verdict,
        "checks": dict(context.checks),
        "constants": dict(context.constants),
        "witnesses": dict(context.witnesses),
        "rng": rng_record(context.seed),
    }


class ReportAssemblyStage(VerificationStage):
    """Этап сборки отчета: stdout в формате json или text и таблица CSV"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Сборка отчета"

    async def process(self, context: VerificationContext) -> bool:
        report = build_report(context)
        context.output.write(render_report(report, context.options.get("format", "json")))
        context.output.flush()

        csv_path = context.options.get("csv")
        if csv_path:
            write_csv(context.table, csv_path)
            status(f"✓ Таблица по вершинам сохранена: {csv_path}")

        if context.verdict == "FAIL":
            status("❌ Проверка не пройдена")
        elif context.verdict == "PASS":
            status("✓ Все проверки пройдены")
        return True
