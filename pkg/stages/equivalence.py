from .base import VerificationStage, VerificationContext, require_sigma, status
import asyncio
import logging

from treeharm.carleson import (
    assemble_verdict,
    carleson_constant,
    verify_exponent,
    weak11_check,
)

logger = logging.getLogger(__name__)


class CarlesonStage(VerificationStage):
    """Константа Карлесона и отношения σ(T_x)/ν(∂T_x)"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Константа Карлесона"

    async def process(self, context: VerificationContext) -> bool:
        t = context.instance.tree
        report = carleson_constant(t, context.instance.nu, require_sigma(context))
        context.set_artefact("carleson", report)
        context.constants["carleson"] = report.constant
        context.witnesses["carleson_vertex"] = report.extremal_vertex
        context.table = [
            {"vertex": x, "level": int(t.level[x]), "ratio": float(report.per_vertex_ratios[x])}
            for x in range(t.n_vertices)
        ]
        status(f"C = {report.constant} (вершина {report.extremal_vertex})")
        return True


class Weak11Stage(VerificationStage):
    """Слабый тип (1,1) интеграла Пуассона со значениями в L^{1,∞}(σ)"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Слабый тип (1,1)"

    async def process(self, context: VerificationContext) -> bool:
        instance = context.instance
        report = await self.in_pool(
            context,
            weak11_check,
            instance.tree,
            instance.nu,
            require_sigma(context),
            context.options["trials"],
            context.options["seed"],
        )
        context.set_artefact("weak11", report)
        return True


class ExponentsStage(VerificationStage):
    """
    Оценки нормы 𝒫 и вложения H^p для всех показателей

    Показатели обрабатываются параллельно в пуле; результаты собираются
    в порядке списка, поэтому отчет совпадает с последовательным запуском.
    """

    def __init__(self):
        super().__init__()
        self.stage_name = "Показатели p"

    async def process(self, context: VerificationContext) -> bool:
        instance = context.instance
        sigma = require_sigma(context)
        options = context.options
        tasks = [
            self.in_pool(
                context,
                verify_exponent,
                instance.tree,
                instance.nu,
                sigma,
                p,
                options["trials"],
                options["seed"],
                options["iteration"],
            )
            for p in options["p"]
        ]
        verdicts = await self.show_spinner(
            f"Оценка норм для p = {', '.join(str(p) for p in options['p'])}",
            asyncio.gather(*tasks),
        )
        for verdict in verdicts:
            if not verdict.estimate.converged:
                status(f"⚠ p={verdict.p}: итерация не сошлась, использована лучшая оценка")
        context.set_artefact("exponents", verdicts)
        return True


class EquivalenceVerdictStage(VerificationStage):
    """Сборка итогового вердикта"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Вердикт"

    async def process(self, context: VerificationContext) -> bool:
        verdict = assemble_verdict(
            context.get_artefact("carleson"),
            context.get_artefact("weak11"),
            context.get_artefact("exponents"),
        )
        summary = verdict.to_dict()
        context.constants.update(summary["constants"])
        context.witnesses.update(summary["witnesses"])
        context.checks["weak11"] = verdict.weak11.ok
        for exponent in verdict.exponents:
            context.checks[f"p={exponent.p}"] = exponent.passed
        if verdict.failures:
            for failure in verdict.failures:
                status(f"❌ {failure}")
        return True
