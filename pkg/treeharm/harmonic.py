"""
Вероятностный лапласиан, интеграл Пуассона и максимальные операторы

Функции на дереве и на границе представлены массивами numpy: TreeFunction
индексируется вершинами, BoundaryFunction - позициями листьев в Tree.leaves.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import HARMONIC_TOL
from .errors import DimensionMismatch, InvalidExponent, ValidationError
from .measures import BoundaryMeasure, FlowMeasure, induce_flow
from .tree_core import Tree, ancestor_table, children_sums, subtree_sums

logger = logging.getLogger(__name__)

TreeFunction = np.ndarray
BoundaryFunction = np.ndarray


def as_tree_function(t: Tree, values) -> TreeFunction:
    """Проверяет длину и конечность значений функции на вершинах"""
    f = np.asarray(values, dtype=np.float64)
    if f.shape != (t.n_vertices,):
        raise DimensionMismatch(f"Ожидалось {t.n_vertices} значений на вершинах, получено {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValidationError("finite values", "функция на дереве содержит бесконечные значения")
    return f


def as_boundary_function(t: Tree, values) -> BoundaryFunction:
    """Проверяет длину и конечность значений функции на листьях"""
    g = np.asarray(values, dtype=np.float64)
    if g.shape != (t.n_leaves,):
        raise DimensionMismatch(f"Ожидалось {t.n_leaves} значений на листьях, получено {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValidationError("finite values", "граничная функция содержит бесконечные значения")
    return g


@dataclass(frozen=True)
class HarmonicCheck:
    ok: bool
    worst_vertex: Optional[int]
    worst_residual: float


def transition_apply(t: Tree, m: FlowMeasure, f: TreeFunction) -> TreeFunction:
    """
    Оператор перехода Pf(x) = Σ_{y∈s(x)} f(y) m(y)/m(x)

    Вес p(x, y) = m(y)/m(x) направлен только вниз; в листьях Pf = f.
    """
    m.check_tree(t)
    f = as_tree_function(t, f)
    pf = children_sums(t, f * m.m) / m.m
    leaves = np.asarray(t.leaves)
    pf[leaves] = f[leaves]
    return pf


def transition_row_sums(t: Tree, m: FlowMeasure) -> np.ndarray:
    """Суммы весов p(x, ·) во внутренних вершинах (в листьях nan)"""
    sums = children_sums(t, m.m) / m.m
    sums[np.asarray(t.leaves)] = np.nan
    return sums


def laplacian_apply(t: Tree, m: FlowMeasure, f: TreeFunction) -> TreeFunction:
    """Δf = f - Pf, в листьях Δf = 0"""
    f = as_tree_function(t, f)
    return f - transition_apply(t, m, f)


def sector_averages(t: Tree, nu: BoundaryMeasure, g: BoundaryFunction) -> TreeFunction:
    """
    ν-средние g по всем секторам

    В листьях возвращается само значение g, так что среднее по одноточечному
    сектору не зависит от округления.
    """
    g = as_boundary_function(t, g)
    m = induce_flow(t, nu).m
    weights = np.zeros(t.n_vertices, dtype=np.float64)
    leaves = np.asarray(t.leaves)
    weights[leaves] = g * nu.nu
    averages = subtree_sums(t, weights) / m
    averages[leaves] = g
    return averages


def poisson_extend(t: Tree, nu: BoundaryMeasure, g: BoundaryFunction) -> TreeFunction:
    """
    Интеграл Пуассона (𝒫g)(x) = (1/m_ν(x)) Σ_{ω∈∂T_x} g(ω) ν(ω)

    Args:
        nu: Граничная мера
        g: Граничная функция

    Returns:
        TreeFunction: Гармоническое продолжение, совпадающее с g в листьях
    """
    return sector_averages(t, nu, g)


def poisson_matrix(t: Tree, nu: BoundaryMeasure) -> np.ndarray:
    """Плотная матрица P(x, ω) ν(ω) формы (n_vertices, n_leaves)"""
    m = induce_flow(t, nu).m
    matrix = np.zeros((t.n_vertices, t.n_leaves), dtype=np.float64)
    for x in range(t.n_vertices):
        lo, hi = t.leaf_lo[x], t.leaf_hi[x]
        matrix[x, lo:hi] = nu.nu[lo:hi] / m[x]
    return matrix


def is_harmonic(t: Tree, m: FlowMeasure, f: TreeFunction, tol: float = HARMONIC_TOL) -> HarmonicCheck:
    """
    Проверяет Δf = 0 во всех внутренних вершинах

    Невязка считается относительной: |Δf(x)| / max(1, |f(x)|).
    """
    f = as_tree_function(t, f)
    internal = t.internal_vertices()
    if internal.size == 0:
        return HarmonicCheck(ok=True, worst_vertex=None, worst_residual=0.0)
    delta = laplacian_apply(t, m, f)
    residual = np.abs(delta[internal]) / np.maximum(1.0, np.abs(f[internal]))
    worst = int(np.argmax(residual))
    return HarmonicCheck(
        ok=bool(residual[worst] <= tol),
        worst_vertex=int(internal[worst]),
        worst_residual=float(residual[worst]),
    )


def recover_boundary(t: Tree, f: TreeFunction) -> BoundaryFunction:
    """Граничные значения гармонической функции: значения в листьях"""
    f = as_tree_function(t, f)
    return f[np.asarray(t.leaves)].copy()


def hl_maximal(t: Tree, nu: BoundaryMeasure, g: BoundaryFunction) -> BoundaryFunction:
    """
    Максимальная функция Харди-Литтлвуда ℳg(ω)

    Максимум ν-средних |g| по всем секторам над ω, от самого листа до верхней вершины.
    """
    averages = sector_averages(t, nu, np.abs(as_boundary_function(t, g)))
    return averages[ancestor_table(t)].max(axis=0)


def radial_maximal(t: Tree, f: TreeFunction) -> BoundaryFunction:
    """𝒰f(ω) = max |f(x)| по пути от листа ω до верхней вершины"""
    f = as_tree_function(t, f)
    return np.abs(f)[ancestor_table(t)].max(axis=0)


def mean_value_gap(t: Tree, m: FlowMeasure, f: TreeFunction) -> float:
    """
    Наибольшее отклонение от тождества f(x)m(x) = Σ_{y∈s_n(x)} f(y)m(y)

    Returns:
        float: Отклонение, отнесенное к max(1, |f(x)|) m(x)
    """
    m.check_tree(t)
    f = as_tree_function(t, f)
    fm = f * m.m
    scale = np.maximum(1.0, np.abs(f)) * m.m
    ancestors = np.arange(t.n_vertices)
    valid = np.ones(t.n_vertices, dtype=bool)
    gap = 0.0
    for step in range(1, t.depth + 1):
        valid &= ancestors != t.top
        ancestors = np.where(valid, t.parent_array[np.maximum(ancestors, 0)], -1)
        sums = np.zeros(t.n_vertices)
        np.add.at(sums, ancestors[valid], fm[valid])
        reached = t.level >= step
        if np.any(reached):
            gap = max(gap, float(np.max(np.abs(sums[reached] - fm[reached]) / scale[reached])))
    return gap


def differentiation_profile(t: Tree, nu: BoundaryMeasure, g: BoundaryFunction, p: float) -> np.ndarray:
    """
    Профиль сходимости средних к граничным значениям

    Returns:
        np.ndarray: Для каждого уровня j величина Σ_ω |𝒫g(Φ(ω,j)) - g(ω)|^p ν(ω);
        на уровне 0 значение равно нулю
    """
    if not 1 <= p < np.inf:
        raise InvalidExponent(f"Ожидалось конечное p >= 1, получено {p}")
    g = as_boundary_function(t, g)
    extension = poisson_extend(t, nu, g)
    table = ancestor_table(t)
    return np.array([
        float(np.sum(np.abs(extension[table[j]] - g) ** p * nu.nu)) for j in range(t.depth + 1)
    ])
