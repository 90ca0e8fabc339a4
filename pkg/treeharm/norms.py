"""Нормы L^p, слабая L^1, норма Харди H^p и норма BMO"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import HARMONIC_TOL
from .errors import DimensionMismatch, InvalidExponent
from .harmonic import (
    BoundaryFunction,
    TreeFunction,
    as_boundary_function,
    as_tree_function,
    is_harmonic,
    poisson_extend,
    recover_boundary,
    sector_averages,
)
from .measures import BoundaryMeasure, FlowMeasure, VertexMeasure, induce_flow
from .tree_core import Tree, ancestor_table, successors_n

logger = logging.getLogger(__name__)


def check_exponent(p) -> float:
    """
    Проверяет показатель p ∈ [1, ∞]

    Raises:
        InvalidExponent
    """
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise InvalidExponent(f"Показатель не является числом: {p!r}")
    if math.isnan(p) or p < 1:
        raise InvalidExponent(f"Ожидалось p >= 1, получено {p}")
    return p


def dual_exponent(p: float) -> float:
    """q = p/(p-1)"""
    p = check_exponent(p)
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1)


def extremal_vertex(t: Tree, values: np.ndarray) -> int:
    """Вершина с наибольшим значением; при равенстве - меньший уровень, затем меньший номер"""
    best = np.max(values)
    candidates = np.flatnonzero(values == best)
    order = np.lexsort((candidates, t.level[candidates]))
    return int(candidates[order[0]])


def _check_shape(values: np.ndarray, weights: np.ndarray) -> None:
    if values.shape != weights.shape:
        raise DimensionMismatch(f"Функция длины {values.shape} не согласована с мерой длины {weights.shape}")


def _lp(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    p = check_exponent(p)
    _check_shape(values, weights)
    if math.isinf(p):
        support = weights > 0
        return float(np.max(np.abs(values[support]))) if np.any(support) else 0.0
    return float(np.sum(np.abs(values) ** p * weights) ** (1.0 / p))


def lp_boundary(g: BoundaryFunction, nu: BoundaryMeasure, p) -> float:
    """(Σ |g(ω)|^p ν(ω))^{1/p}, для p = ∞ - max |g|"""
    g = np.asarray(g, dtype=np.float64)
    return _lp(g, nu.nu, p)


def lp_tree(f: TreeFunction, sigma: VertexMeasure, p) -> float:
    """(Σ |f(x)|^p σ(x))^{1/p}, для p = ∞ - максимум |f| на носителе σ"""
    f = np.asarray(f, dtype=np.float64)
    return _lp(f, sigma.sigma, p)


def _weak_l1(values: np.ndarray, weights: np.ndarray) -> float:
    _check_shape(values, weights)
    magnitude = np.abs(values)
    order = np.argsort(-magnitude, kind="stable")
    sorted_values = magnitude[order]
    cumulative = np.cumsum(weights[order])
    # Последний индекс каждой группы равных значений дает меру {|f| >= v}
    last = np.flatnonzero(np.append(sorted_values[1:] != sorted_values[:-1], True))
    products = sorted_values[last] * cumulative[last]
    positive = sorted_values[last] > 0
    return float(np.max(products[positive])) if np.any(positive) else 0.0


def weak_l1_tree(f: TreeFunction, sigma: VertexMeasure) -> float:
    """
    Квазинорма sup_{λ>0} λ σ({|f| > λ})

    Супремум достигается при λ, стремящемся снизу к одному из значений |f|,
    поэтому перебираются только эти точки излома.
    """
    return _weak_l1(np.asarray(f, dtype=np.float64), sigma.sigma)


def weak_l1_boundary(g: BoundaryFunction, nu: BoundaryMeasure) -> float:
    """sup_{λ>0} λ ν({|g| > λ}) по точкам излома"""
    return _weak_l1(np.asarray(g, dtype=np.float64), nu.nu)


def level_sums(t: Tree, m: FlowMeasure, f: TreeFunction, p: float) -> np.ndarray:
    """Суммы Σ_{ℓ(x)=k} |f(x)|^p m(x) для k = 0..ℓ(top)"""
    p = check_exponent(p)
    if math.isinf(p):
        raise InvalidExponent("Суммы по уровням определены только для конечного p")
    f = as_tree_function(t, f)
    powered = np.abs(f) ** p * m.m
    return np.array([float(np.sum(powered[t.levels[k]])) for k in range(t.depth + 1)])


def hardy_norm(t: Tree, m: FlowMeasure, f: TreeFunction, p) -> float:
    """
    Норма Харди: max_k (Σ_{ℓ(x)=k} |f(x)|^p m(x))^{1/p}, для p = ∞ - max |f|

    Args:
        m: Мера потока
        f: Функция на вершинах
        p: Показатель из [1, ∞]
    """
    p = check_exponent(p)
    f = as_tree_function(t, f)
    if math.isinf(p):
        return float(np.max(np.abs(f)))
    return float(np.max(level_sums(t, m, f, p)) ** (1.0 / p))


def sector_level_profile(t: Tree, m: FlowMeasure, f: TreeFunction, x: int, p: float) -> np.ndarray:
    """n ↦ Σ_{y∈s_n(x)} |f(y)|^p m(y) для n = 0..ℓ(x); для гармонической f не убывает"""
    f = as_tree_function(t, f)
    profile = []
    for n in range(int(t.level[x]) + 1):
        ids = np.fromiter(successors_n(t, x, n), dtype=np.int64)
        profile.append(float(np.sum(np.abs(f[ids]) ** p * m.m[ids])))
    return np.array(profile)


def sector_mean(t: Tree, nu: BoundaryMeasure, b: BoundaryFunction, x: int) -> float:
    """b_{∂T_x}: ν-среднее b по границе сектора"""
    b = as_boundary_function(t, b)
    lo, hi = t.leaf_lo[x], t.leaf_hi[x]
    return float(np.sum(b[lo:hi] * nu.nu[lo:hi]) / np.sum(nu.nu[lo:hi]))


@dataclass(frozen=True, eq=False)
class BmoReport:
    norm: float
    vertex: int
    oscillations: np.ndarray


def mean_oscillations(t: Tree, nu: BoundaryMeasure, b: BoundaryFunction) -> np.ndarray:
    """Средние колебания (1/ν(∂T_x)) ∫_{∂T_x} |b - b_{∂T_x}| dν для всех вершин"""
    b = as_boundary_function(t, b)
    m = induce_flow(t, nu).m
    means = sector_averages(t, nu, b)
    table = ancestor_table(t)
    numerators = np.zeros(t.n_vertices)
    for k in range(1, t.depth + 1):
        np.add.at(numerators, table[k], np.abs(b - means[table[k]]) * nu.nu)
    return numerators / m


def bmo_norm(t: Tree, nu: BoundaryMeasure, b: BoundaryFunction) -> BmoReport:
    """
    Норма BMO: максимум среднего колебания b по всем секторам

    Returns:
        BmoReport: Норма, вершина экстремума и колебания по вершинам
    """
    oscillations = mean_oscillations(t, nu, b)
    vertex = extremal_vertex(t, oscillations)
    return BmoReport(norm=float(oscillations[vertex]), vertex=vertex, oscillations=oscillations)


@dataclass(frozen=True, eq=False)
class HardyCharacterization:
    """
    Конечная форма характеризации H^p: гармоническая f является интегралом
    Пуассона своих граничных значений, и их L^p норма не превосходит ‖f‖_{H^p}
    """
    harmonic: bool
    hardy: float
    recovered: np.ndarray
    lp_recovered: float
    reconstruction_gap: float
    inequality_holds: bool


def hardy_characterization(t: Tree, m: FlowMeasure, nu: BoundaryMeasure, f: TreeFunction, p) -> HardyCharacterization:
    """
    Проверяет, что гармоническая f равна 𝒫g для g = f|листья и ‖g‖_p ≤ ‖f‖_{H^p}
    """
    f = as_tree_function(t, f)
    harmonic = is_harmonic(t, m, f, HARMONIC_TOL).ok
    g = recover_boundary(t, f)
    hardy = hardy_norm(t, m, f, p)
    lp_g = lp_boundary(g, nu, p)
    gap = float(np.max(np.abs(poisson_extend(t, nu, g) - f) / np.maximum(1.0, np.abs(f))))
    return HardyCharacterization(
        harmonic=harmonic,
        hardy=hardy,
        recovered=g,
        lp_recovered=lp_g,
        reconstruction_gap=gap,
        inequality_holds=lp_g <= hardy * (1 + 1e-12),
    )

