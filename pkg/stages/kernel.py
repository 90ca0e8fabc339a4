from .base import VerificationStage, VerificationContext, status
import logging

import numpy as np

from treeharm.config import ROUND_TRIP_TOL, make_rng
from treeharm.kernel_bmo import (
    Kernel,
    atom_integrals,
    audit_kernel,
    bmo_from_carleson,
    carleson_density,
    check_geometric_claims,
    example_kernel_delta,
    telescoping_gaps,
    verify_bmo_to_carleson,
)
from treeharm.norms import bmo_norm, mean_oscillations
from treeharm.tree_core import subtree_sums

logger = logging.getLogger(__name__)


def boundary_function(context: VerificationContext) -> np.ndarray:
    """Функция b: именованная из экземпляра или случайная из [-1, 1] по seed"""
    name = context.options.get("function")
    if name:
        return context.instance.function(name, domain="leaves")
    rng = make_rng(context.options["seed"])
    return rng.uniform(-1.0, 1.0, size=context.instance.tree.n_leaves)


class KernelAuditStage(VerificationStage):
    """Выбор ядра и проверка условий класса 𝒪"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Аудит ядра"

    async def process(self, context: VerificationContext) -> bool:
        instance = context.instance
        options = context.options
        m = instance.flow
        if instance.kernel is not None:
            kernel = instance.kernel
            if options.get("alpha") is not None:
                kernel = Kernel(kernel.entries, options["alpha"], kernel.degenerate_rows)
            source = "instance"
        else:
            kernel = example_kernel_delta(
                instance.tree, instance.nu, m, options["alpha"] or 1.0, options["delta"], options.get("kernel_seed")
            )
            source = "example_delta"
        audit = audit_kernel(instance.tree, instance.nu, m, kernel)

        context.set_artefact("kernel", kernel)
        context.set_artefact("audit", audit)
        context.constants["kernel_source"] = source
        context.witnesses["audit"] = audit.to_dict()
        context.checks["kernel_class"] = audit.passes
        if not audit.passes:
            status(f"❌ Ядро не принадлежит классу: пара {audit.worst_pair}, отношение {audit.worst_ratio}")
        return True


class BmoCarlesonStage(VerificationStage):
    """Оценка σ(T_v) ≤ ‖b‖_BMO (c1 C_K + C_α) m(v) для σ = |𝒦b| m"""

    def __init__(self):
        super().__init__()
        self.stage_name = "BMO → Карлесон"

    async def process(self, context: VerificationContext) -> bool:
        if not context.get_artefact("audit").passes:
            status("⚠ Оценка пропущена: ядро не прошло аудит")
            return True
        instance = context.instance
        t, nu, m = instance.tree, instance.nu, instance.flow
        kernel = context.get_artefact("kernel")
        b = boundary_function(context)

        verdict = await self.in_pool(context, verify_bmo_to_carleson, t, nu, m, kernel, b)
        claims = check_geometric_claims(t, m, kernel.alpha)
        telescoping = telescoping_gaps(t, nu, b)

        summary = verdict.to_dict()
        context.constants.update(summary["constants"])
        context.constants["sector_claim_ratio"] = claims.sector_ratio
        context.constants["tail_claim_ratio"] = claims.tail_ratio
        context.constants["telescoping_max_gap"] = telescoping.max_gap
        context.constants["telescoping_bound"] = telescoping.bound
        context.witnesses["bound_vertex"] = verdict.witness_vertex
        context.witnesses["telescoping_vertex"] = telescoping.vertex
        context.checks["forward_bound"] = verdict.passed
        context.checks["geometric_claims"] = claims.ok
        context.checks["telescoping"] = telescoping.ok

        sigma = carleson_density(t, nu, m, kernel, b)
        ratios = subtree_sums(t, sigma.sigma) / m.m
        context.table = [
            {"vertex": x, "level": int(t.level[x]), "sigma": float(sigma.sigma[x]), "ratio": float(ratios[x])}
            for x in range(t.n_vertices)
        ]
        return True


class AtomsStage(VerificationStage):
    """Восстановление ‖b‖_BMO через атомные ядра"""

    def __init__(self):
        super().__init__()
        self.stage_name = "Атомы"

    async def process(self, context: VerificationContext) -> bool:
        instance = context.instance
        t, nu, m = instance.tree, instance.nu, instance.flow
        b = boundary_function(context)

        integrals = atom_integrals(t, nu, m, b)
        numerators = mean_oscillations(t, nu, b) * m.m
        identity_gap = np.abs(2 * m.m * integrals - numerators) / np.maximum(1.0, numerators)
        bmo = bmo_norm(t, nu, b)
        reconstructed = 2 * bmo_from_carleson(t, nu, m, b)
        reconstruction_gap = abs(reconstructed - bmo.norm) / max(1.0, bmo.norm)

        context.constants.update({
            "bmo": bmo.norm,
            "bmo_from_atoms": reconstructed,
            "identity_max_gap": float(identity_gap.max()),
            "reconstruction_gap": reconstruction_gap,
        })
        context.witnesses["bmo_vertex"] = bmo.vertex
        context.witnesses["identity_worst_vertex"] = int(np.argmax(identity_gap))
        context.checks["atom_identity"] = bool(identity_gap.max() <= ROUND_TRIP_TOL)
        context.checks["bmo_reconstruction"] = reconstruction_gap <= ROUND_TRIP_TOL
        context.table = [
            {
                "vertex": y,
                "level": int(t.level[y]),
                "atom_integral": float(integrals[y]),
                "oscillation": float(bmo.oscillations[y]),
            }
            for y in range(t.n_vertices)
        ]
        return True
