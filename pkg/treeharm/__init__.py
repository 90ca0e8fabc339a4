"""
treeharm - гармонический анализ на конечных усечениях корневых деревьев

Меры потока, вероятностный лапласиан, интеграл Пуассона, максимальные
операторы, нормы H^p и BMO, проверка мер Карлесона и ядер класса 𝒪.
"""
from .carleson import carleson_constant, opnorm_poisson, verify_equivalence
from .cli_io import GenSpec, Instance, generate, load_instance, save_instance
from .config import Config, IterationConfig
from .errors import ParseError, TreeHarmError, ValidationError
from .harmonic import hl_maximal, laplacian_apply, poisson_extend, radial_maximal
from .kernel_bmo import Kernel, audit_kernel, verify_bmo_to_carleson
from .measures import BoundaryMeasure, FlowMeasure, VertexMeasure, induce_flow
from .norms import bmo_norm, hardy_norm, lp_boundary, lp_tree
from .tree_core import Tree, build_from_parents

__all__ = [
    'BoundaryMeasure',
    'Config',
    'FlowMeasure',
    'GenSpec',
    'Instance',
    'IterationConfig',
    'Kernel',
    'ParseError',
    'Tree',
    'TreeHarmError',
    'ValidationError',
    'VertexMeasure',
    'audit_kernel',
    'bmo_norm',
    'build_from_parents',
    'carleson_constant',
    'generate',
    'hardy_norm',
    'hl_maximal',
    'induce_flow',
    'laplacian_apply',
    'load_instance',
    'lp_boundary',
    'lp_tree',
    'opnorm_poisson',
    'poisson_extend',
    'radial_maximal',
    'save_instance',
    'verify_bmo_to_carleson',
    'verify_equivalence',
]
