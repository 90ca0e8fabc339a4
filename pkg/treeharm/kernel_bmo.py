"""
Ядра класса 𝒪 и переход BMO → плотности мер Карлесона

Ядро K(x, ω) хранится плотной матрицей (вершины × позиции листьев).
Класс 𝒪 задается тремя условиями: нулевой интеграл каждой строки по ν,
равномерно ограниченная масса столбцов Σ_x |K(x,ω)| m(x) ≤ C_K и оценка
убывания |K(x,ω)| ≤ m(x)^α / m(x∧ω)^{α+1}.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .config import VERDICT_SLACK, make_rng
from .errors import DimensionMismatch, RequiresLocallyDoubling, ValidationError
from .harmonic import BoundaryFunction, TreeFunction, as_boundary_function, sector_averages
from .measures import BoundaryMeasure, FlowMeasure, VertexMeasure, doubling_constants, induce_flow
from .norms import bmo_norm, extremal_vertex, sector_mean
from .tree_core import Tree, ancestor_table, check_min_branching, confluent_table, subtree_sums

logger = logging.getLogger(__name__)

AUDIT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Kernel:
    """
    Плотное ядро с показателем убывания

    Args:
        entries: Матрица формы (n_vertices, n_leaves)
        alpha: Показатель убывания α > 0
        degenerate_rows: Строки, обнуленные из-за вырожденного профиля
    """
    entries: np.ndarray
    alpha: float
    degenerate_rows: Tuple[int, ...] = ()

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise DimensionMismatch(f"Ядро должно быть матрицей, получено {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValidationError("kernel finite", "ядро содержит бесконечные значения")
        if not self.alpha > 0:
            raise ValidationError("alpha > 0", f"показатель убывания {self.alpha}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "degenerate_rows", tuple(int(r) for r in self.degenerate_rows))

    def check_tree(self, t: Tree) -> None:
        if self.entries.shape != (t.n_vertices, t.n_leaves):
            raise DimensionMismatch(
                f"Ядро: ожидалась форма {(t.n_vertices, t.n_leaves)}, получено {self.entries.shape}"
            )


@dataclass(frozen=True)
class KernelAudit:
    """
    Результат проверки условий класса 𝒪

    Args:
        cancellation_max: max_x |Σ_ω K(x,ω) ν(ω)|
        scale: max_x Σ_ω |K(x,ω)| ν(ω)
        cancellation_ok: Нулевые интегралы строк с относительным допуском
        ck: Константа C_K = max_ω Σ_x |K(x,ω)| m(x)
        a3_ok: Выполнена оценка убывания
        worst_pair: (вершина, лист) с наибольшим отношением |K|/граница
        worst_ratio: Это отношение
        alpha: Показатель убывания
    """
    cancellation_max: float
    scale: float
    cancellation_ok: bool
    ck: float
    a3_ok: bool
    worst_pair: Optional[Tuple[int, int]]
    worst_ratio: float
    alpha: float

    @property
    def passes(self) -> bool:
        return self.cancellation_ok and self.a3_ok

    def to_dict(self) -> Dict:
        return {
            "cancellation_max": self.cancellation_max,
            "scale": self.scale,
            "cancellation_ok": self.cancellation_ok,
            "ck": self.ck,
            "a3_ok": self.a3_ok,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "worst_ratio": self.worst_ratio,
            "alpha": self.alpha,
        }


def decay_bound_matrix(t: Tree, m: FlowMeasure, alpha: float) -> np.ndarray:
    """Матрица m(x)^α / m(x∧ω)^{α+1}"""
    m.check_tree(t)
    return m.m[:, None] ** alpha / m.m[confluent_table(t)] ** (alpha + 1)


def decay_kernel(t: Tree, m: FlowMeasure, alpha: float) -> Kernel:
    """Ядро, равное границе убывания; на усечении его C_K растет с глубиной"""
    return Kernel(decay_bound_matrix(t, m, alpha), alpha)


def audit_kernel(t: Tree, nu: BoundaryMeasure, m: FlowMeasure, k: Kernel, tol: float = AUDIT_TOL) -> KernelAudit:
    """
    Проверяет условия сокращения, интегрируемости и убывания

    Args:
        tol: Относительный допуск для нулевых интегралов и оценки убывания

    Returns:
        KernelAudit: Замеренные величины и флаги

    Raises:
        DimensionMismatch
    """
    k.check_tree(t)
    nu.check_tree(t)
    m.check_tree(t)
    absolute = np.abs(k.entries)

    row_integrals = k.entries @ nu.nu
    cancellation_max = float(np.max(np.abs(row_integrals)))
    scale = float(np.max(absolute @ nu.nu))
    cancellation_ok = cancellation_max <= tol * scale or (cancellation_max == 0 and scale == 0)

    ck = float(np.max(m.m @ absolute))

    ratios = absolute / decay_bound_matrix(t, m, k.alpha)
    worst = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    worst_ratio = float(ratios[worst])
    worst_pair = (int(worst[0]), int(t.leaves[worst[1]])) if worst_ratio > 0 else None

    audit = KernelAudit(
        cancellation_max=cancellation_max,
        scale=scale,
        cancellation_ok=bool(cancellation_ok),
        ck=ck,
        a3_ok=bool(worst_ratio <= 1 + tol),
        worst_pair=worst_pair,
        worst_ratio=worst_ratio,
        alpha=k.alpha,
    )
    logger.debug(f"Аудит ядра: {audit}")
    return audit


def apply_kernel(t: Tree, nu: BoundaryMeasure, k: Kernel, b: BoundaryFunction) -> TreeFunction:
    """𝒦b(x) = Σ_ω K(x,ω) b(ω) ν(ω)"""
    k.check_tree(t)
    b = as_boundary_function(t, b)
    return k.entries @ (b * nu.nu)


def carleson_density(t: Tree, nu: BoundaryMeasure, m: FlowMeasure, k: Kernel, b: BoundaryFunction) -> VertexMeasure:
    """σ = |𝒦b| m"""
    m.check_tree(t)
    return VertexMeasure(np.abs(apply_kernel(t, nu, k, b)) * m.m)


def c_alpha(c1: float, c2: float, alpha: float) -> float:
    """
    Константа C_α = c1 · Σ_{k≥0}(k+1) c2^{-kα} · 1/(1 - c2^{-α})

    Raises:
        RequiresLocallyDoubling: если c2 <= 1
    """
    if c2 <= 1:
        raise RequiresLocallyDoubling(f"Для C_α нужно c2 > 1, получено {c2}")
    x = c2 ** (-alpha)
    return c1 / (1 - x) ** 2 / (1 - x)


def theorem3_bound(t: Tree, m: FlowMeasure, k_audit: KernelAudit, bmo: float) -> float:
    """
    Оценка ‖b‖_BMO (c1 C_K + C_α) для max_v σ(T_v)/m(v)

    Raises:
        RequiresLocallyDoubling
    """
    constants = doubling_constants(t, m)
    if not constants.locally_doubling:
        raise RequiresLocallyDoubling(f"Мера потока не локально удваивающая: c2={constants.c2}")
    return bmo * (constants.c1 * k_audit.ck + c_alpha(constants.c1, constants.c2, k_audit.alpha))


@dataclass(frozen=True)
class GeometricClaims:
    """Проверка двух геометрических оценок с константой C_α"""
    c_alpha: float
    sector_ratio: float
    sector_vertex: int
    tail_ratio: float
    tail_vertex: int

    @property
    def ok(self) -> bool:
        return self.sector_ratio <= self.c_alpha * (1 + VERDICT_SLACK) and \
            self.tail_ratio <= self.c_alpha * (1 + VERDICT_SLACK)


def check_geometric_claims(t: Tree, m: FlowMeasure, alpha: float) -> GeometricClaims:
    """
    Σ_{x∈T_v} m(x)^{1+α} ≤ C_α m(v)^{1+α} и Σ_k (k+1) m(p^{k+1}v)^{-α} ≤ C_α m(v)^{-α}

    Returns:
        GeometricClaims: Наибольшие отношения левой части к m(v)-множителю
    """
    constants = doubling_constants(t, m)
    constant = c_alpha(constants.c1, constants.c2, alpha)

    sector = subtree_sums(t, m.m ** (1 + alpha)) / m.m ** (1 + alpha)

    tail = np.zeros(t.n_vertices)
    ancestors = np.arange(t.n_vertices)
    valid = np.ones(t.n_vertices, dtype=bool)
    for k in range(t.depth):
        valid &= ancestors != t.top
        if not np.any(valid):
            break
        ancestors = np.where(valid, t.parent_array[np.maximum(ancestors, 0)], 0)
        tail += np.where(valid, (k + 1) * m.m[ancestors] ** (-alpha), 0.0)
    tail *= m.m ** alpha

    sector_vertex = extremal_vertex(t, sector)
    tail_vertex = extremal_vertex(t, tail)
    return GeometricClaims(
        c_alpha=constant,
        sector_ratio=float(sector[sector_vertex]),
        sector_vertex=sector_vertex,
        tail_ratio=float(tail[tail_vertex]),
        tail_vertex=tail_vertex,
    )


@dataclass(frozen=True)
class TelescopingReport:
    max_gap: float
    vertex: Optional[int]
    bound: float

    @property
    def ok(self) -> bool:
        return self.max_gap <= self.bound * (1 + VERDICT_SLACK)


def telescoping_gaps(t: Tree, nu: BoundaryMeasure, b: BoundaryFunction) -> TelescopingReport:
    """Наибольший скачок |b_{∂T_{p(x)}} - b_{∂T_x}| по ребрам и граница c1 ‖b‖_BMO"""
    m = induce_flow(t, nu)
    means = sector_averages(t, nu, b)
    bound = doubling_constants(t, m).c1 * bmo_norm(t, nu, b).norm
    gaps = np.zeros(t.n_vertices)
    child = np.flatnonzero(t.parent_array >= 0)
    gaps[child] = np.abs(means[t.parent_array[child]] - means[child])
    vertex = extremal_vertex(t, gaps) if child.size else None
    return TelescopingReport(max_gap=float(gaps.max()), vertex=vertex, bound=float(bound))


@dataclass
class BmoCarlesonVerdict:
    """Итог проверки оценки σ(T_v) ≤ ‖b‖_BMO (c1 C_K + C_α) m(v)"""
    max_ratio: float
    bound: float
    witness_vertex: int
    bmo: float
    audit: KernelAudit
    c1: float
    c2: float
    c_alpha: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.bound

    def to_dict(self) -> Dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "constants": {
                "max_ratio": self.max_ratio,
                "bound": self.bound,
                "bmo": self.bmo,
                "ck": self.audit.ck,
                "alpha": self.audit.alpha,
                "c1": self.c1,
                "c2": self.c2,
                "c_alpha": self.c_alpha,
                "c_alpha_kind": "derived",
            },
            "witnesses": {
                "vertex": self.witness_vertex,
                "audit": self.audit.to_dict(),
            },
        }


def verify_bmo_to_carleson(
    t: Tree, nu: BoundaryMeasure, m: FlowMeasure, k: Kernel, b: BoundaryFunction, slack: float = VERDICT_SLACK
) -> BmoCarlesonVerdict:
    """
    Проверяет, что σ = |𝒦b| m - мера Карлесона с константой ‖b‖_BMO (c1 C_K + C_α)

    Остаток интегралов строк ядра учитывается добавкой
    (ℓ(top)+1) · cancellation_max · max|b|, поскольку Σ_{x∈T_v} m(x) = (ℓ(v)+1) m(v).

    Raises:
        ValidationError: ядро не проходит аудит или ветвление меньше двух
    """
    if not check_min_branching(t, 2):
        raise ValidationError("min branching 2", "у некоторой вершины меньше двух детей")
    audit = audit_kernel(t, nu, m, k)
    if not audit.passes:
        raise ValidationError("kernel class", f"ядро не проходит аудит: {audit}")
    b = as_boundary_function(t, b)

    sigma = carleson_density(t, nu, m, k, b)
    ratios = subtree_sums(t, sigma.sigma) / m.m
    vertex = extremal_vertex(t, ratios)

    constants = doubling_constants(t, m)
    bmo = bmo_norm(t, nu, b).norm
    bound = theorem3_bound(t, m, audit, bmo)
    residual = (t.depth + 1) * audit.cancellation_max * float(np.max(np.abs(b)))
    return BmoCarlesonVerdict(
        max_ratio=float(ratios[vertex]),
        bound=float(bound * (1 + slack) + residual),
        witness_vertex=vertex,
        bmo=bmo,
        audit=audit,
        c1=constants.c1,
        c2=constants.c2,
        c_alpha=c_alpha(constants.c1, constants.c2, audit.alpha),
    )


def _atom_vector(t: Tree, nu: BoundaryMeasure, m: FlowMeasure, y: int, b: np.ndarray) -> np.ndarray:
    lo, hi = t.leaf_lo[y], t.leaf_hi[y]
    signs = np.where(b[lo:hi] >= sector_mean(t, nu, b, y), 1.0, -1.0)
    weights = nu.nu[lo:hi]
    atom = np.zeros(t.n_leaves)
    atom[lo:hi] = (signs - np.sum(signs * weights) / np.sum(weights)) / (2 * m.m[y])
    return atom


def atom_kernel(
    t: Tree, nu: BoundaryMeasure, m: FlowMeasure, y: int, b: BoundaryFunction
) -> Tuple[Kernel, BoundaryFunction]:
    """
    Атом a_y со знаком b - b_{∂T_y} и однострочное ядро K(y, ω) = a_y(ω)

    a_y = (a'_y - среднее a'_y) / (2 m(y)) на ∂T_y, где a'_y = ±1. Тогда
    ‖a_y‖_∞ ≤ 1/m(y), ∫ a_y dν = 0 и 2 m(y) |∫ a_y b dν| = ∫_{∂T_y} |b - b_{∂T_y}| dν.

    Returns:
        Tuple[Kernel, BoundaryFunction]: Ядро с α = 1 и сам атом
    """
    b = as_boundary_function(t, b)
    atom = _atom_vector(t, nu, m, y, b)
    entries = np.zeros((t.n_vertices, t.n_leaves))
    entries[y] = atom
    return Kernel(entries, alpha=1.0), atom


def atom_integrals(t: Tree, nu: BoundaryMeasure, m: FlowMeasure, b: BoundaryFunction) -> np.ndarray:
    """|∫ a_y b dν| для всех вершин y, то есть σ_y(T_y)/m(y) для однострочных ядер"""
    b = as_boundary_function(t, b)
    return np.array([
        abs(float(np.sum(_atom_vector(t, nu, m, y, b) * b * nu.nu))) for y in range(t.n_vertices)
    ])


def bmo_from_carleson(t: Tree, nu: BoundaryMeasure, m: FlowMeasure, b: BoundaryFunction) -> float:
    """
    sup_y σ_y(T_y)/m(y) по атомным ядрам; удвоенное значение равно ‖b‖_BMO
    """
    values = atom_integrals(t, nu, m, b)
    return float(values[extremal_vertex(t, values)])


def ring_series(t: Tree, m: FlowMeasure, omega: int, delta: float) -> Tuple[float, Optional[int]]:
    """
    Σ_k min{1/M_k, M_k}^{1+δ} по цепочке M_k = m(Φ(ω, k))

    Returns:
        Tuple[float, Optional[int]]: Сумма и k_0 - наибольший уровень с M_k < 1
        (None, если таких уровней нет)
    """
    chain = ancestor_table(t)[:, t.leaf_position[omega]]
    masses = m.m[chain]
    series = float(np.sum(np.minimum(1 / masses, masses) ** (1 + delta)))
    below = np.flatnonzero(masses < 1)
    return series, (int(below[-1]) if below.size else None)


def example_ck_bound(c2: float, alpha: float, delta: float) -> float:
    """2 / ((1 - c2^{-α})(1 - c2^{-(1+δ)})): оценка C_K для ядер K_δ"""
    if c2 <= 1:
        raise RequiresLocallyDoubling(f"Нужно c2 > 1, получено {c2}")
    return 2 / ((1 - c2 ** (-alpha)) * (1 - c2 ** (-(1 + delta))))


def example_kernel_delta(
    t: Tree, nu: BoundaryMeasure, m: FlowMeasure, alpha: float, delta: float, seed: Optional[int] = None
) -> Kernel:
    """
    Строит ядро K_δ(x,ω) = c_x(k) · base(x,ω), где k - номер кольца ω относительно x

    base(x,ω) = m(x)^α / m(x∧ω)^{α+1} · min{1/m(x∧ω), m(x∧ω)}^{1+δ}. Коэффициенты
    c_x постоянны на кольцах ∂T_{p^k x} \\ ∂T_{p^{k-1} x} и ортогональны профилю
    d_x(k) = Σ_{ω в кольце k} base(x,ω) ν(ω): для двух колец i, j с d_x(i) ≥ d_x(j)
    берется c_x(i) = -d_x(j)/d_x(i), c_x(j) = 1. Без seed выбираются два
    наибольших значения профиля, с seed - случайная пара колец.

    Строка с одним кольцом (верхняя вершина) обнуляется и помечается.

    Raises:
        ValidationError: ветвление меньше двух или глубина меньше двух
    """
    if not check_min_branching(t, 2):
        raise ValidationError("min branching 2", "K_δ строится только при ветвлении не меньше двух")
    if t.depth < 2:
        raise ValidationError("depth >= 2", f"глубина дерева {t.depth}")
    if not (alpha > 0 and delta > 0):
        raise ValidationError("alpha, delta > 0", f"alpha={alpha}, delta={delta}")
    m.check_tree(t)
    nu.check_tree(t)

    confluents = confluent_table(t)
    masses = m.m[confluents]
    base = m.m[:, None] ** alpha / masses ** (alpha + 1) * np.minimum(1 / masses, masses) ** (1 + delta)
    rings = t.level[confluents] - t.level[:, None]
    rng = make_rng(seed) if seed is not None else None

    entries = np.zeros_like(base)
    degenerate = []
    for x in range(t.n_vertices):
        profile = np.bincount(rings[x], weights=base[x] * nu.nu, minlength=t.depth - int(t.level[x]) + 1)
        nonzero = np.flatnonzero(profile > 0)
        if nonzero.size < 2:
            degenerate.append(x)
            continue
        if rng is None:
            order = nonzero[np.argsort(-profile[nonzero], kind="stable")]
            i, j = int(order[0]), int(order[1])
        else:
            i, j = (int(r) for r in rng.choice(nonzero, size=2, replace=False))
            if profile[i] < profile[j]:
                i, j = j, i
        coefficients = np.zeros(profile.size)
        coefficients[i] = -profile[j] / profile[i]
        coefficients[j] = 1.0
        entries[x] = coefficients[rings[x]] * base[x]

    if degenerate:
        logger.info(f"Вырожденный профиль, строки обнулены: {degenerate}")
    return Kernel(entries, alpha, degenerate_rows=tuple(degenerate))
