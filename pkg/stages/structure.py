from .base import VerificationStage, VerificationContext, status
import logging

import numpy as np

from treeharm.config import FLOW_TOL, VERDICT_SLACK
from treeharm.measures import (
    boundary_doubling_ratio,
    check_flow,
    doubling_constants,
    edge_ratios,
    implied_lower_ratio,
    iterated_conservation_gap,
)
from treeharm.tree_core import check_min_branching

logger = logging.getLogger(__name__)


class StructureStage(VerificationStage):
    """Сводка по дереву: размеры, глубина, ветвление"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Структура дерева"

    async def process(self, context: VerificationContext) -> bool:
        t = context.instance.tree
        branching = [len(c) for c in t.children if c]
        context.constants.update({
            "vertices": t.n_vertices,
            "leaves": t.n_leaves,
            "depth": t.depth,
            "min_branching": min(branching) if branching else 0,
            "max_branching": max(branching) if branching else 0,
            "branching_at_least_2": check_min_branching(t, 2),
        })
        logger.info(f"{t.n_vertices} вершин, {t.n_leaves} листьев, глубина {t.depth}")
        return True


class FlowStage(VerificationStage):
    """Закон сохранения для меры потока, индуцированной ν"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Мера потока"

    async def process(self, context: VerificationContext) -> bool:
        t = context.instance.tree
        m = context.instance.flow
        flow = check_flow(t, m, FLOW_TOL)
        gap = iterated_conservation_gap(t, m)

        context.constants["flow_worst_violation"] = flow.worst_violation
        context.constants["iterated_conservation_gap"] = gap
        context.witnesses["flow_worst_vertex"] = flow.worst_vertex
        context.checks["flow"] = flow.ok
        context.checks["iterated_conservation"] = gap <= FLOW_TOL * (t.depth + 1)
        context.table = [
            {"vertex": x, "level": int(t.level[x]), "m": float(m.m[x])} for x in range(t.n_vertices)
        ]
        return True


class DoublingStage(VerificationStage):
    """Константы локального удвоения и отношение удвоения шаров на границе"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Удвоение"

    async def process(self, context: VerificationContext) -> bool:
        t = context.instance.tree
        if t.n_vertices == 1:
            status("⚠ Дерево из одной вершины, константы удвоения не определены")
            context.constants["doubling"] = None
            return True

        m = context.instance.flow
        constants = doubling_constants(t, m)
        ratio = boundary_doubling_ratio(t, context.instance.nu)
        lower = implied_lower_ratio(constants.c1)

        context.constants.update({
            "c1": constants.c1,
            "c2": constants.c2,
            "locally_doubling": constants.locally_doubling,
            "boundary_doubling_ratio": ratio.ratio,
            "implied_lower_ratio": lower,
        })
        context.witnesses["doubling"] = {"leaf": ratio.leaf, "vertex": ratio.vertex, "radius": ratio.radius}

        ratios = edge_ratios(t, m)
        for row in context.table:
            value = ratios[row["vertex"]]
            row["edge_ratio"] = None if np.isnan(value) else float(value)

        if check_min_branching(t, 2):
            context.checks["doubling_ratio_le_c1"] = ratio.ratio <= constants.c1 * (1 + VERDICT_SLACK)
            context.checks["c2_ge_implied_lower"] = constants.c2 * (1 + VERDICT_SLACK) >= lower
            context.checks["c2_gt_1"] = constants.locally_doubling
        return True
