"""Граничные меры, меры потока и константы удвоения"""
import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, Optional

import numpy as np

from .config import FLOW_TOL
from .errors import DimensionMismatch, NoInternalVertices, RadiusOutOfRange, ValidationError
from .tree_core import Tree, boundary_sector, children_sums, phi, subtree_sums

logger = logging.getLogger(__name__)


def _as_weights(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    if array.ndim != 1:
        raise DimensionMismatch(f"{name}: ожидался одномерный массив, получено {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{name} finite", "веса должны быть конечными")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BoundaryMeasure:
    """Строго положительные веса ν на листьях"""
    nu: np.ndarray

    def __post_init__(self):
        nu = _as_weights(self.nu, "nu")
        if np.any(nu <= 0):
            raise ValidationError("nu > 0", f"неположительный вес на листе {int(np.argmin(nu))}")
        object.__setattr__(self, "nu", nu)

    def check_tree(self, t: Tree) -> None:
        if self.nu.shape != (t.n_leaves,):
            raise DimensionMismatch(f"nu: ожидалось {t.n_leaves} весов, получено {self.nu.shape[0]}")

    @property
    def total(self) -> float:
        return float(np.sum(self.nu))


@dataclass(frozen=True, eq=False)
class FlowMeasure:
    """Положительные веса m на вершинах с законом сохранения m(x) = Σ_{y∈s(x)} m(y)"""
    m: np.ndarray

    def __post_init__(self):
        m = _as_weights(self.m, "m")
        if np.any(m <= 0):
            raise ValidationError("m > 0", f"неположительный вес в вершине {int(np.argmin(m))}")
        object.__setattr__(self, "m", m)

    def check_tree(self, t: Tree) -> None:
        if self.m.shape != (t.n_vertices,):
            raise DimensionMismatch(f"m: ожидалось {t.n_vertices} весов, получено {self.m.shape[0]}")


@dataclass(frozen=True, eq=False)
class VertexMeasure:
    """Неотрицательные веса σ на вершинах (кандидат в меры Карлесона)"""
    sigma: np.ndarray

    def __post_init__(self):
        sigma = _as_weights(self.sigma, "sigma")
        if np.any(sigma < 0):
            raise ValidationError("sigma >= 0", f"отрицательный вес в вершине {int(np.argmin(sigma))}")
        object.__setattr__(self, "sigma", sigma)

    def check_tree(self, t: Tree) -> None:
        if self.sigma.shape != (t.n_vertices,):
            raise DimensionMismatch(f"sigma: ожидалось {t.n_vertices} весов, получено {self.sigma.shape[0]}")

    @property
    def is_zero(self) -> bool:
        return not np.any(self.sigma > 0)


@dataclass(frozen=True)
class FlowCheck:
    ok: bool
    worst_vertex: Optional[int]
    worst_violation: float


@dataclass(frozen=True)
class DoublingConstants:
    """
    Экстремальные отношения m(x)/m(y) по ребрам

    Args:
        c1: Максимум отношения
        c2: Минимум отношения
        locally_doubling: c2 > 1 (требование для ядер класса 𝒪)
    """
    c1: float
    c2: float
    locally_doubling: bool


@dataclass(frozen=True)
class DoublingRatio:
    ratio: float
    leaf: Optional[int]
    vertex: Optional[int]
    radius: Optional[float]


def induce_flow(t: Tree, nu: BoundaryMeasure) -> FlowMeasure:
    """
    Мера потока m_ν(x) = ν(∂T_x), один проход снизу вверх

    Raises:
        DimensionMismatch
    """
    nu.check_tree(t)
    weights = np.zeros(t.n_vertices, dtype=np.float64)
    weights[np.asarray(t.leaves)] = nu.nu
    return FlowMeasure(subtree_sums(t, weights))


def check_flow(t: Tree, m: FlowMeasure, tol: float = FLOW_TOL) -> FlowCheck:
    """
    Проверяет закон сохранения во всех внутренних вершинах

    Args:
        tol: Относительный допуск

    Returns:
        FlowCheck: Результат и вершина с наибольшим нарушением
    """
    m.check_tree(t)
    internal = t.internal_vertices()
    if internal.size == 0:
        return FlowCheck(ok=True, worst_vertex=None, worst_violation=0.0)
    sums = children_sums(t, m.m)
    violation = np.abs(m.m[internal] - sums[internal]) / m.m[internal]
    worst = int(np.argmax(violation))
    return FlowCheck(
        ok=bool(violation[worst] <= tol),
        worst_vertex=int(internal[worst]),
        worst_violation=float(violation[worst]),
    )


def edge_ratios(t: Tree, m: FlowMeasure) -> np.ndarray:
    """Отношения m(p(y))/m(y) для всех вершин кроме верхней (у верхней nan)"""
    ratios = np.full(t.n_vertices, np.nan)
    child = np.array([y for y in range(t.n_vertices) if y != t.top], dtype=np.int64)
    if child.size:
        ratios[child] = m.m[t.parent_array[child]] / m.m[child]
    return ratios


def doubling_constants(t: Tree, m: FlowMeasure) -> DoublingConstants:
    """
    Константы локального удвоения c2 m(y) ≤ m(x) ≤ c1 m(y)

    Raises:
        NoInternalVertices: для дерева из одной вершины
    """
    m.check_tree(t)
    if t.n_vertices == 1:
        raise NoInternalVertices("Нет ребер для вычисления констант удвоения")
    ratios = edge_ratios(t, m)
    c1 = float(np.nanmax(ratios))
    c2 = float(np.nanmin(ratios))
    if c2 <= 1:
        logger.info(f"Мера потока не является локально удваивающей: c2={c2}")
    return DoublingConstants(c1=c1, c2=c2, locally_doubling=c2 > 1)


def implied_lower_ratio(c1: float) -> float:
    """Нижняя граница c1/(c1-1), вынужденная верхней границей при ветвлении не меньше двух"""
    if c1 <= 1:
        return math.inf
    return c1 / (c1 - 1)


def boundary_ball(t: Tree, m: FlowMeasure, omega: int, r: float) -> FrozenSet[int]:
    """
    Шар радиуса r в (∂T, ρ) с центром в листе omega: ∂T_{Φ(ω, ⌊log r⌋)}

    Raises:
        RadiusOutOfRange: если ⌊log r⌋ вне [0, ℓ(top)]
    """
    m.check_tree(t)
    if r <= 0:
        raise RadiusOutOfRange(f"Радиус должен быть положительным: {r}")
    k = math.floor(math.log(r))
    if not 0 <= k <= t.depth:
        raise RadiusOutOfRange(f"⌊log r⌋={k} вне [0, {t.depth}]")
    return boundary_sector(t, phi(t, omega, k))


def lemma_radius(t: Tree, x: int) -> float:
    """Радиус e^{ℓ(x)+1-log 2}: шар радиуса r в точке под x равен ∂T_x, шар радиуса 2r равен ∂T_{p(x)}"""
    return math.exp(int(t.level[x]) + 1 - math.log(2))


def boundary_doubling_ratio(t: Tree, nu: BoundaryMeasure) -> DoublingRatio:
    """
    Максимум ν(B(ω, 2r))/ν(B(ω, r)) по всем листьям и допустимым радиусам

    Для ⌊log r⌋ = k удвоенный шар имеет центр на уровне k или k+1, поэтому
    перебираются все пары (Φ(ω,k), Φ(ω,k+1)); ν(B) берется как m_ν центра шара.

    Returns:
        DoublingRatio: Отношение, лист, центр меньшего шара и радиус (см. lemma_radius)
    """
    m = induce_flow(t, nu).m
    best = DoublingRatio(ratio=1.0, leaf=t.leaves[0], vertex=t.leaves[0], radius=None)
    for omega in t.leaves:
        x = omega
        while t.parent[x] is not None:
            ratio = float(m[t.parent[x]] / m[x])
            if ratio > best.ratio:
                best = DoublingRatio(ratio=ratio, leaf=omega, vertex=x, radius=lemma_radius(t, x))
            x = t.parent[x]
    return best


def iterated_conservation_gap(t: Tree, m: FlowMeasure) -> float:
    """Наибольшее относительное отклонение m(x) от Σ_{y∈s_n(x)} m(y) по всем x и n"""
    m.check_tree(t)
    ancestors = np.arange(t.n_vertices)
    valid = np.ones(t.n_vertices, dtype=bool)
    gap = 0.0
    for step in range(1, t.depth + 1):
        valid &= ancestors != t.top
        ancestors = np.where(valid, t.parent_array[np.maximum(ancestors, 0)], -1)
        sums = np.zeros(t.n_vertices)
        np.add.at(sums, ancestors[valid], m.m[valid])
        reached = t.level >= step
        if np.any(reached):
            gap = max(gap, float(np.max(np.abs(sums[reached] - m.m[reached]) / m.m[reached])))
    return gap
