from .base import StageChain, VerificationContext, VerificationStage, require_sigma, status
from .structure import StructureStage, FlowStage, DoublingStage
from .analysis import ExtensionStage, NormsStage, OpNormStage
from .equivalence import CarlesonStage, Weak11Stage, ExponentsStage, EquivalenceVerdictStage
from .kernel import KernelAuditStage, BmoCarlesonStage, AtomsStage
from .report import ReportAssemblyStage, build_report

__all__ = [
    'StageChain',
    'VerificationContext',
    'VerificationStage',
    'require_sigma',
    'status',
    'StructureStage',
    'FlowStage',
    'DoublingStage',
    'ExtensionStage',
    'NormsStage',
    'OpNormStage',
    'CarlesonStage',
    'Weak11Stage',
    'ExponentsStage',
    'EquivalenceVerdictStage',
    'KernelAuditStage',
    'BmoCarlesonStage',
    'AtomsStage',
    'ReportAssemblyStage',
    'build_report',
]
