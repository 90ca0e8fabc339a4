"""
Геометрия конечного усечения корневого дерева

Верхняя вершина заменяет луч к выделенной граничной точке, листья (все на
уровне 0) заменяют граничные точки. Листья упорядочены обходом в глубину с
сохранением порядка детей из входных данных, поэтому граница любого сектора
является непрерывным отрезком списка листьев.
"""
import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    CycleDetected,
    DimensionMismatch,
    EmptyInput,
    LevelOverflow,
    LevelUnderflow,
    MixedLeafLevels,
    MultipleRoots,
)

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Tree:
    """
    Неизменяемое конечное дерево

    Args:
        parent: Родитель каждой вершины (None только у верхней вершины)
        children: Упорядоченные списки детей
        level: Уровень каждой вершины, листья на уровне 0
        leaves: Листья в порядке обхода в глубину
        top: Верхняя вершина
        parent_array: Родители в виде массива (-1 у верхней вершины)
        leaf_position: Позиция листа в leaves (-1 у внутренних вершин)
        leaf_lo: Начало отрезка листьев сектора
        leaf_hi: Конец (не включительно) отрезка листьев сектора
        preorder: Вершины в порядке обхода в глубину
        preorder_index: Позиция вершины в preorder
        sector_size: Число вершин в секторе
        levels: Вершины каждого уровня, уровень 0 в порядке листьев
    """
    parent: Tuple[Optional[int], ...]
    children: Tuple[Tuple[int, ...], ...]
    level: np.ndarray
    leaves: Tuple[int, ...]
    top: int
    parent_array: np.ndarray
    leaf_position: np.ndarray
    leaf_lo: np.ndarray
    leaf_hi: np.ndarray
    preorder: np.ndarray
    preorder_index: np.ndarray
    sector_size: np.ndarray
    levels: Tuple[np.ndarray, ...]

    @property
    def n_vertices(self) -> int:
        return len(self.parent)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def depth(self) -> int:
        """Уровень верхней вершины"""
        return int(self.level[self.top])

    def is_leaf(self, x: int) -> bool:
        return not self.children[x]

    def internal_vertices(self) -> np.ndarray:
        return np.array([x for x in range(self.n_vertices) if self.children[x]], dtype=np.int64)


def build_from_parents(parents: Sequence[Optional[int]]) -> Tree:
    """
    Строит дерево по списку родителей

    Args:
        parents: parents[i] - родитель вершины i или None для верхней вершины

    Returns:
        Tree: Проверенное дерево с уровнями, отсчитанными от листьев

    Raises:
        EmptyInput, MultipleRoots, CycleDetected, MixedLeafLevels
    """
    n = len(parents)
    if n == 0:
        raise EmptyInput("Список родителей пуст")

    roots = [i for i, p in enumerate(parents) if p is None]
    if len(roots) > 1:
        raise MultipleRoots(f"Вершины без родителя: {roots}")
    if not roots:
        raise CycleDetected("Нет вершины без родителя, ссылки замкнуты в цикл")
    top = roots[0]

    children: List[List[int]] = [[] for _ in range(n)]
    for i, p in enumerate(parents):
        if p is None:
            continue
        p = int(p)
        if not 0 <= p < n:
            raise DimensionMismatch(f"Родитель {p} вершины {i} вне диапазона [0, {n})")
        if p == i:
            raise CycleDetected(f"Вершина {i} является своим родителем")
        children[p].append(i)

    # Обход в глубину от верхней вершины
    preorder: List[int] = []
    depth_from_top = [-1] * n
    depth_from_top[top] = 0
    stack = [top]
    while stack:
        v = stack.pop()
        preorder.append(v)
        for c in reversed(children[v]):
            depth_from_top[c] = depth_from_top[v] + 1
            stack.append(c)
    if len(preorder) != n:
        unreached = sorted(set(range(n)) - set(preorder))
        raise CycleDetected(f"Вершины недостижимы из верхней вершины (цикл): {unreached[:10]}")

    leaves = tuple(v for v in preorder if not children[v])
    leaf_depths = {depth_from_top[v] for v in leaves}
    if len(leaf_depths) > 1:
        raise MixedLeafLevels(f"Листья на разной глубине: {sorted(leaf_depths)}")
    total_depth = leaf_depths.pop()

    level = np.array([total_depth - d for d in depth_from_top], dtype=np.int64)
    parent_array = np.array([-1 if p is None else int(p) for p in parents], dtype=np.int64)

    leaf_position = np.full(n, -1, dtype=np.int64)
    for pos, v in enumerate(leaves):
        leaf_position[v] = pos

    preorder_arr = np.array(preorder, dtype=np.int64)
    preorder_index = np.empty(n, dtype=np.int64)
    preorder_index[preorder_arr] = np.arange(n)

    leaf_lo = np.empty(n, dtype=np.int64)
    leaf_hi = np.empty(n, dtype=np.int64)
    sector_size = np.ones(n, dtype=np.int64)
    for v in reversed(preorder):
        if children[v]:
            leaf_lo[v] = leaf_lo[children[v][0]]
            leaf_hi[v] = leaf_hi[children[v][-1]]
            sector_size[v] += sum(sector_size[c] for c in children[v])
        else:
            leaf_lo[v] = leaf_position[v]
            leaf_hi[v] = leaf_position[v] + 1

    levels = []
    for k in range(total_depth + 1):
        if k == 0:
            levels.append(np.array(leaves, dtype=np.int64))
        else:
            levels.append(preorder_arr[level[preorder_arr] == k])

    logger.debug(f"Построено дерево: {n} вершин, {len(leaves)} листьев, глубина {total_depth}")
    return Tree(
        parent=tuple(None if p is None else int(p) for p in parents),
        children=tuple(tuple(c) for c in children),
        level=_frozen(level),
        leaves=leaves,
        top=top,
        parent_array=_frozen(parent_array),
        leaf_position=_frozen(leaf_position),
        leaf_lo=_frozen(leaf_lo),
        leaf_hi=_frozen(leaf_hi),
        preorder=_frozen(preorder_arr),
        preorder_index=_frozen(preorder_index),
        sector_size=_frozen(sector_size),
        levels=tuple(_frozen(a) for a in levels),
    )


def _check_vertex(t: Tree, x: int) -> int:
    x = int(x)
    if not 0 <= x < t.n_vertices:
        raise DimensionMismatch(f"Вершина {x} вне диапазона [0, {t.n_vertices})")
    return x


def _check_leaf(t: Tree, omega: int) -> int:
    omega = _check_vertex(t, omega)
    if t.children[omega]:
        raise DimensionMismatch(f"Вершина {omega} не является листом")
    return omega


def successors_n(t: Tree, x: int, n: int) -> FrozenSet[int]:
    """
    Потомки x ровно на n уровней ниже, s_0(x) = {x}

    Raises:
        LevelUnderflow: если n > ℓ(x)
    """
    x = _check_vertex(t, x)
    if n < 0:
        raise LevelOverflow(f"Отрицательное n={n}")
    if n > t.level[x]:
        raise LevelUnderflow(f"n={n} больше уровня вершины {x} ({t.level[x]})")
    frontier = [x]
    for _ in range(n):
        frontier = [y for v in frontier for y in t.children[v]]
    return frozenset(frontier)


def predecessor_n(t: Tree, x: int, n: int) -> int:
    """
    Предок x ровно на n уровней выше

    Raises:
        LevelOverflow: если предок оказался бы выше верхней вершины
    """
    x = _check_vertex(t, x)
    if n < 0:
        raise LevelUnderflow(f"Отрицательное n={n}")
    if t.level[x] + n > t.depth:
        raise LevelOverflow(f"У вершины {x} нет предка на {n} уровней выше")
    for _ in range(n):
        x = t.parent[x]
    return x


def confluent(t: Tree, a: int, b: int) -> int:
    """Наименьший общий предок a ∧ b"""
    a = _check_vertex(t, a)
    b = _check_vertex(t, b)
    while t.level[a] < t.level[b]:
        a = t.parent[a]
    while t.level[b] < t.level[a]:
        b = t.parent[b]
    while a != b:
        a = t.parent[a]
        b = t.parent[b]
    return a


def gromov_distance(t: Tree, a: int, b: int) -> float:
    """ρ(a, b) = e^{ℓ(a∧b)}, ρ(a, a) = 0"""
    if int(a) == int(b):
        return 0.0
    return math.exp(int(t.level[confluent(t, a, b)]))


def sector(t: Tree, x: int) -> FrozenSet[int]:
    """Сектор T_x: все вершины не выше x, включая x"""
    x = _check_vertex(t, x)
    start = t.preorder_index[x]
    return frozenset(int(v) for v in t.preorder[start:start + t.sector_size[x]])


def leaf_range(t: Tree, x: int) -> Tuple[int, int]:
    """Полуоткрытый отрезок позиций листьев, лежащих под x"""
    x = _check_vertex(t, x)
    return int(t.leaf_lo[x]), int(t.leaf_hi[x])


def boundary_sector(t: Tree, x: int) -> FrozenSet[int]:
    """Граница сектора ∂T_x: листья под x"""
    lo, hi = leaf_range(t, x)
    return frozenset(t.leaves[lo:hi])


def phi(t: Tree, omega: int, j: int) -> int:
    """
    Единственная вершина уровня j над листом omega

    Raises:
        LevelUnderflow, LevelOverflow: если j вне [0, ℓ(top)]
    """
    omega = _check_leaf(t, omega)
    if j < 0:
        raise LevelUnderflow(f"Уровень {j} ниже листьев")
    if j > t.depth:
        raise LevelOverflow(f"Уровень {j} выше верхней вершины ({t.depth})")
    return predecessor_n(t, omega, j)


def check_min_branching(t: Tree, k: int) -> bool:
    """True, если у каждой внутренней вершины не меньше k детей"""
    return all(len(c) >= k for c in t.children if c)


def level_vertices(t: Tree, k: int) -> np.ndarray:
    """Вершины уровня k; уровень 0 идет в порядке листьев"""
    if k < 0:
        raise LevelUnderflow(f"Уровень {k} ниже листьев")
    if k > t.depth:
        raise LevelOverflow(f"Уровень {k} выше верхней вершины")
    return t.levels[k]


def ancestor_table(t: Tree) -> np.ndarray:
    """
    Таблица A[j, i] = phi(leaves[i], j)

    Returns:
        np.ndarray: Массив формы (depth + 1, n_leaves)
    """
    table = np.empty((t.depth + 1, t.n_leaves), dtype=np.int64)
    table[0] = np.asarray(t.leaves, dtype=np.int64)
    for j in range(1, t.depth + 1):
        table[j] = t.parent_array[table[j - 1]]
    return table


def confluent_table(t: Tree) -> np.ndarray:
    """
    Конфлюент каждой вершины с каждым листом

    Returns:
        np.ndarray: Массив C формы (n_vertices, n_leaves), C[x, i] = x ∧ leaves[i]
    """
    table = np.empty((t.n_vertices, t.n_leaves), dtype=np.int64)
    for x in range(t.n_vertices):
        chain = [x]
        while t.parent[chain[-1]] is not None:
            chain.append(t.parent[chain[-1]])
        # Сверху вниз: каждый следующий отрезок вложен в предыдущий
        for a in reversed(chain):
            table[x, t.leaf_lo[a]:t.leaf_hi[a]] = a
    return table


def subtree_sums(t: Tree, weights: np.ndarray) -> np.ndarray:
    """
    Суммы весов по секторам, один проход снизу вверх

    Порядок суммирования фиксирован: вершина, затем дети в порядке обхода.

    Args:
        weights: Вес каждой вершины

    Returns:
        np.ndarray: sums[x] = Σ_{y ∈ T_x} weights[y]
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (t.n_vertices,):
        raise DimensionMismatch(f"Ожидалось {t.n_vertices} весов, получено {weights.shape}")
    sums = weights.copy()
    for k in range(t.depth):
        idx = t.levels[k]
        np.add.at(sums, t.parent_array[idx], sums[idx])
    return sums


def children_sums(t: Tree, values: np.ndarray) -> np.ndarray:
    """Суммы значений по детям в том же порядке, что и в subtree_sums (у листьев 0)"""
    values = np.asarray(values, dtype=np.float64)
    sums = np.zeros(t.n_vertices, dtype=np.float64)
    for k in range(t.depth):
        idx = t.levels[k]
        np.add.at(sums, t.parent_array[idx], values[idx])
    return sums
