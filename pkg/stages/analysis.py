from .base import VerificationStage, VerificationContext, require_sigma, status
import logging
import math

import numpy as np

from treeharm.carleson import opnorm_poisson
from treeharm.config import HARMONIC_TOL, VERDICT_SLACK
from treeharm.harmonic import (
    hl_maximal,
    is_harmonic,
    mean_value_gap,
    poisson_extend,
    radial_maximal,
    transition_row_sums,
)
from treeharm.norms import (
    bmo_norm,
    hardy_characterization,
    hardy_norm,
    lp_boundary,
    lp_tree,
    weak_l1_boundary,
    weak_l1_tree,
)

logger = logging.getLogger(__name__)


class ExtensionStage(VerificationStage):
    """Интеграл Пуассона именованной граничной функции и максимальные функции"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Интеграл Пуассона"

    async def process(self, context: VerificationContext) -> bool:
        instance = context.instance
        t, nu, m = instance.tree, instance.nu, instance.flow
        name = context.options["function"]
        g = instance.function(name, domain="leaves")

        f = poisson_extend(t, nu, g)
        harmonic = is_harmonic(t, m, f, HARMONIC_TOL)
        maximal = hl_maximal(t, nu, g)
        radial = radial_maximal(t, f)
        ones = poisson_extend(t, nu, np.ones(t.n_leaves))
        rows = transition_row_sums(t, m)

        context.constants.update({
            "harmonic_worst_residual": harmonic.worst_residual,
            "mean_value_gap": mean_value_gap(t, m, f),
            "sup_extension": float(np.max(np.abs(f))),
            "sup_boundary": float(np.max(np.abs(g))),
            "weak11_maximal": weak_l1_boundary(maximal, nu),
            "l1_boundary": lp_boundary(g, nu, 1),
            "transition_row_sum_gap": float(np.nanmax(np.abs(rows - 1))) if t.n_vertices > 1 else 0.0,
        })
        context.witnesses["harmonic_worst_vertex"] = harmonic.worst_vertex
        context.checks["harmonic"] = harmonic.ok
        context.checks["leaf_recovery"] = bool(np.array_equal(f[np.asarray(t.leaves)], g))
        context.checks["normalization"] = bool(np.all(ones == 1.0))
        context.checks["majorization"] = bool(np.all(radial <= maximal))
        context.checks["maximal_weak11"] = context.constants["weak11_maximal"] <= \
            context.constants["l1_boundary"] * (1 + VERDICT_SLACK)

        context.set_artefact("extension", f)
        context.table = [
            {"vertex": x, "level": int(t.level[x]), "value": float(f[x])} for x in range(t.n_vertices)
        ]
        return True


class NormsStage(VerificationStage):
    """L^p, слабая L^1, H^p и BMO нормы именованной функции"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Нормы"

    async def process(self, context: VerificationContext) -> bool:
        instance = context.instance
        t, nu, m, sigma = instance.tree, instance.nu, instance.flow, instance.sigma
        name = context.options["function"]
        values = instance.function(name)
        function = instance.functions[name]
        norms = []

        if function.domain == "leaves":
            f = poisson_extend(t, nu, values)
            bmo = bmo_norm(t, nu, values)
            context.constants["bmo"] = bmo.norm
            context.constants["weak_l1_boundary"] = weak_l1_boundary(values, nu)
            context.witnesses["bmo_vertex"] = bmo.vertex
            for p in context.options["p"]:
                lp = lp_boundary(values, nu, p)
                hp = hardy_norm(t, m, f, p)
                context.checks[f"jensen p={p}"] = hp <= lp * (1 + VERDICT_SLACK)
                norms.append({"p": p, "lp_boundary": lp, "hardy_extension": hp})
            context.table = [
                {"vertex": x, "level": int(t.level[x]), "oscillation": float(bmo.oscillations[x])}
                for x in range(t.n_vertices)
            ]
        else:
            f = values
            for p in context.options["p"]:
                entry = {"p": p, "hardy": hardy_norm(t, m, f, p)}
                if not math.isinf(p):
                    characterization = hardy_characterization(t, m, nu, f, p)
                    entry["lp_recovered"] = characterization.lp_recovered
                    if characterization.harmonic:
                        context.checks[f"recovery p={p}"] = characterization.inequality_holds
                norms.append(entry)
            context.constants["harmonic"] = is_harmonic(t, m, f).ok

        if sigma is not None:
            context.constants["weak_l1_tree"] = weak_l1_tree(f, sigma)
            for entry in norms:
                entry["lp_tree"] = lp_tree(f, sigma, entry["p"])
        context.constants["norms"] = norms
        return True


class OpNormStage(VerificationStage):
    """Двусторонняя оценка нормы 𝒫: L^p(ν) → L^p(σ)"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Норма оператора Пуассона"

    async def process(self, context: VerificationContext) -> bool:
        instance = context.instance
        p = context.options["p"][0]
        estimate = await self.show_spinner(
            f"Степенная итерация для p={p}",
            self.in_pool(context, opnorm_poisson, instance.tree, instance.nu, require_sigma(context), p, context.options["iteration"]),
        )
        context.constants.update({
            "p": estimate.p,
            "lower": estimate.lower,
            "upper": estimate.upper,
            "upper_kind": estimate.upper_kind,
            "iterations": estimate.iterations,
            "converged": estimate.converged,
        })
        context.witnesses["witness"] = estimate.witness
        context.checks["lower_le_upper"] = estimate.lower <= estimate.upper * (1 + VERDICT_SLACK)
        if not estimate.converged:
            status("⚠ Итерация не сошлась, в отчете лучшая найденная оценка")
        return True
