"""
Меры Карлесона и ограниченность интеграла Пуассона

Проверяется цепочка эквивалентностей: условие Карлесона σ(T_x) ≤ C ν(∂T_x),
ограниченность 𝒫: L^p(∂T, ν) → L^p(T, σ) и вложение H^p в L^p(T, σ).
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import svdvals
from scipy.sparse.linalg import ArpackError, LinearOperator, eigsh

from .config import VERDICT_SLACK, IterationConfig, make_rng
from .errors import InvalidExponent, NonConvergence
from .harmonic import poisson_extend, poisson_matrix
from .measures import BoundaryMeasure, VertexMeasure, induce_flow
from .norms import (
    check_exponent,
    dual_exponent,
    extremal_vertex,
    hardy_norm,
    level_sums,
    lp_boundary,
    lp_tree,
    weak_l1_tree,
)
from .tree_core import Tree, ancestor_table, subtree_sums

logger = logging.getLogger(__name__)

# Номера потоков генератора
_OPNORM_STREAM = 1
_WEAK11_STREAM = 2
_EMBEDDING_STREAM = 3

# До такого числа листьев матрица BᵀB строится явно
_DENSE_GRAM_LIMIT = 16


@dataclass(frozen=True, eq=False)
class CarlesonReport:
    """
    Константа Карлесона и отношения σ(T_x)/ν(∂T_x) по вершинам

    Args:
        constant: Максимум отношений
        extremal_vertex: Вершина, где максимум достигается
        per_vertex_ratios: Отношения для всех вершин
    """
    constant: float
    extremal_vertex: int
    per_vertex_ratios: np.ndarray


@dataclass(frozen=True, eq=False)
class OpNormEstimate:
    """
    Оценка нормы 𝒫: L^p(ν) → L^p(σ) с двух сторон

    Args:
        lower: Нижняя оценка, подтвержденная функцией witness
        upper: Верхняя оценка Марцинкевича (math.inf при C = ∞ не бывает на конечном дереве)
        witness: Граничная функция, на которой достигается lower
        p: Показатель
        iterations: Суммарное число итераций
        converged: Все старты сошлись за отведенное число итераций
        upper_kind: Происхождение верхней оценки
    """
    lower: float
    upper: float
    witness: np.ndarray
    p: float
    iterations: int
    converged: bool
    upper_kind: str = "marcinkiewicz"


@dataclass(frozen=True)
class Weak11Report:
    max_ratio: float
    constant: float
    trials: int
    worst_trial: Optional[int]
    ok: bool


def carleson_constant(t: Tree, nu: BoundaryMeasure, sigma: VertexMeasure) -> CarlesonReport:
    """
    Вычисляет константу Карлесона C = max_x σ(T_x)/ν(∂T_x)

    Args:
        nu: Граничная мера
        sigma: Мера на вершинах

    Returns:
        CarlesonReport: Константа, вершина экстремума и все отношения
    """
    sigma.check_tree(t)
    m = induce_flow(t, nu).m
    ratios = subtree_sums(t, sigma.sigma) / m
    vertex = extremal_vertex(t, ratios)
    logger.debug(f"Константа Карлесона {ratios[vertex]} в вершине {vertex}")
    return CarlesonReport(constant=float(ratios[vertex]), extremal_vertex=vertex, per_vertex_ratios=ratios)


def marcinkiewicz_bound(p: float, c: float) -> float:
    """Интерполяционная оценка 2 (p/(p-1))^{1/p} C^{1/p} между слабым типом (1,1) и L^∞"""
    p = _check_open_exponent(p)
    return 2.0 * (p / (p - 1)) ** (1.0 / p) * c ** (1.0 / p)


def _check_open_exponent(p) -> float:
    p = check_exponent(p)
    if p == 1 or math.isinf(p):
        raise InvalidExponent(f"Ожидалось 1 < p < ∞, получено {p}")
    return p


def _indicator(t: Tree, v: int) -> np.ndarray:
    g = np.zeros(t.n_leaves)
    g[t.leaf_lo[v]:t.leaf_hi[v]] = 1.0
    return g


def indicator_embedding_powers(t: Tree, nu: BoundaryMeasure, sigma: VertexMeasure, p: float) -> np.ndarray:
    """
    ‖𝒫χ_{∂T_v}‖^p_{L^p(σ)} для всех v

    На T_v функция равна 1, на строгих предках a равна m(v)/m(a), в остальных
    вершинах нулю. Сумма по T_v берется из σ(T_v), поэтому результат не меньше
    σ(T_v) без погрешности.
    """
    p = check_exponent(p)
    if math.isinf(p):
        raise InvalidExponent("Ожидалось конечное p")
    sigma.check_tree(t)
    m = induce_flow(t, nu).m
    total = subtree_sums(t, sigma.sigma)
    ancestors = np.arange(t.n_vertices)
    valid = np.ones(t.n_vertices, dtype=bool)
    for _ in range(t.depth):
        valid &= ancestors != t.top
        ancestors = np.where(valid, t.parent_array[np.maximum(ancestors, 0)], 0)
        if not np.any(valid):
            break
        tail = (m / m[ancestors]) ** p * sigma.sigma[ancestors]
        total = total + np.where(valid, tail, 0.0)
    return total


def indicator_lower_bound(
    t: Tree, nu: BoundaryMeasure, sigma: VertexMeasure, p, v: int
) -> Tuple[float, float]:
    """
    Оценки для f = χ_{∂T_v}

    Returns:
        Tuple[float, float]: (‖𝒫f‖^p_{H^p}, ‖𝒫f‖^p_{L^p(σ)}); первое равно m(v),
        второе не меньше σ(T_v)
    """
    p = check_exponent(p)
    if math.isinf(p):
        raise InvalidExponent("Оценка через индикаторы определена только для конечного p")
    m = induce_flow(t, nu)
    f = poisson_extend(t, nu, _indicator(t, v))
    hp = float(np.max(level_sums(t, m, f, p)))
    lp = float(indicator_embedding_powers(t, nu, sigma, p)[v])
    return hp, lp


def _weighted_operator(t: Tree, nu: BoundaryMeasure, sigma: VertexMeasure, p: float):
    """Операторы B h = σ^{1/p} 𝒫(ν^{-1/p} h) и Bᵀ без построения матрицы"""
    m = induce_flow(t, nu).m
    table = ancestor_table(t)
    sigma_root = sigma.sigma ** (1.0 / p)
    nu_root = nu.nu ** (1.0 / p)

    def forward(h: np.ndarray) -> np.ndarray:
        return sigma_root * poisson_extend(t, nu, h / nu_root)

    def adjoint(z: np.ndarray) -> np.ndarray:
        weights = sigma_root * z / m
        return nu.nu / nu_root * weights[table].sum(axis=0)

    return forward, adjoint


def _power_iteration(forward, adjoint, start: np.ndarray, p: float, cfg: IterationConfig) -> Tuple[float, np.ndarray, int, bool]:
    """
    Нелинейная степенная итерация для ‖B‖_{p→p} неотрицательной матрицы

    x ← ψ_q(Bᵀ ψ_p(Bx)), ψ_r(y) = y^{r-1}, с нормировкой в ℓ^p
    """
    q = dual_exponent(p)
    x = start / np.linalg.norm(start, p)
    estimate = np.linalg.norm(forward(x), p)
    best = x
    for iteration in range(1, cfg.max_iter + 1):
        y = forward(x)
        z = adjoint(np.abs(y) ** (p - 1))
        if not np.any(z > 0):
            return float(estimate), best, iteration, True
        x = np.abs(z) ** (q - 1)
        x /= np.linalg.norm(x, p)
        current = float(np.linalg.norm(forward(x), p))
        if current >= estimate:
            best = x
        if abs(current - estimate) <= cfg.tol * max(current, 1e-300):
            return max(current, estimate), best, iteration, True
        estimate = max(current, estimate)
    return float(estimate), best, cfg.max_iter, False


def _gram_leading_vector(forward, adjoint, start: np.ndarray) -> Optional[np.ndarray]:
    """
    Ведущий собственный вектор BᵀB методом Ланцоша (случай p = 2)

    Для неотрицательной BᵀB замена вектора на |v| не уменьшает отношение Рэлея,
    поэтому возвращается |v|. None, если ARPACK не сошелся.
    """
    n = start.size
    if n <= _DENSE_GRAM_LIMIT:
        gram = np.column_stack([adjoint(forward(e)) for e in np.eye(n)])
        _, vectors = np.linalg.eigh((gram + gram.T) / 2)
        return np.abs(vectors[:, -1])
    gram = LinearOperator((n, n), matvec=lambda h: adjoint(forward(np.ravel(h))), dtype=np.float64)
    try:
        _, vectors = eigsh(gram, k=1, which="LA", v0=start, tol=0.0)
    except ArpackError:
        logger.warning("Метод Ланцоша не сошелся, остается оценка степенной итерации")
        return None
    return np.abs(vectors[:, 0])


def _ratio(forward, h: np.ndarray, p: float) -> float:
    return float(np.linalg.norm(forward(h), p) / np.linalg.norm(h, p))


def opnorm_poisson(
    t: Tree, nu: BoundaryMeasure, sigma: VertexMeasure, p, cfg: IterationConfig = IterationConfig()
) -> OpNormEstimate:
    """
    Оценивает норму 𝒫: L^p(∂T, ν) → L^p(T, σ)

    Нижняя оценка получается степенной итерацией из единичного вектора и
    cfg.restarts случайных неотрицательных стартов. Лучший из них итерируется
    дальше с новым запасом в cfg.max_iter шагов; при p = 2 он уточняется
    методом Ланцоша для BᵀB. Затем сравнивается с индикаторами всех секторов и
    пересчитывается по лучшей функции witness. Верхняя оценка -
    marcinkiewicz_bound с константой Карлесона.

    Args:
        p: Показатель из (1, ∞)
        cfg: Параметры итерации

    Returns:
        OpNormEstimate: Двусторонняя оценка; при отсутствии сходимости
        converged=False и предупреждение NonConvergence, ошибка не выбрасывается
    """
    p = _check_open_exponent(p)
    sigma.check_tree(t)
    nu.check_tree(t)
    if sigma.is_zero:
        return OpNormEstimate(lower=0.0, upper=0.0, witness=np.ones(t.n_leaves), p=p, iterations=0, converged=True)

    forward, adjoint = _weighted_operator(t, nu, sigma, p)
    rng = make_rng(cfg.seed, _OPNORM_STREAM)
    starts = [np.ones(t.n_leaves)] + [rng.random(t.n_leaves) + 1e-3 for _ in range(cfg.restarts)]

    best_value, best_h = -1.0, None
    total_iterations = 0
    for start in starts:
        value, h, iterations, _ = _power_iteration(forward, adjoint, start, p, cfg)
        total_iterations += iterations
        if value > best_value:
            best_value, best_h = value, h

    # Продолжение от лидера
    value, h, iterations, converged = _power_iteration(forward, adjoint, best_h, p, cfg)
    total_iterations += iterations
    if value >= best_value:
        best_value, best_h = value, h

    if p == 2:
        leading = _gram_leading_vector(forward, adjoint, best_h)
        if leading is not None and np.any(leading > 0):
            converged = True
            value = _ratio(forward, leading, p)
            if value > best_value:
                best_value, best_h = value, leading
    best_g = best_h / nu.nu ** (1.0 / p)

    # Индикаторы секторов: ‖𝒫χ‖_p^p / ‖χ‖_p^p = embedding(v) / m(v)
    m = induce_flow(t, nu).m
    indicator_ratios = (indicator_embedding_powers(t, nu, sigma, p) / m) ** (1.0 / p)
    v = int(np.argmax(indicator_ratios))
    if indicator_ratios[v] > best_value:
        best_g = _indicator(t, v)

    lower = lp_tree(poisson_extend(t, nu, best_g), sigma, p) / lp_boundary(best_g, nu, p)
    upper = marcinkiewicz_bound(p, carleson_constant(t, nu, sigma).constant)
    if not converged:
        message = f"Степенная итерация не сошлась за {cfg.max_iter} шагов (p={p}), используется лучшая оценка"
        warnings.warn(message, NonConvergence, stacklevel=2)
    logger.debug(f"Норма 𝒫 при p={p}: {lower} <= ‖𝒫‖ <= {upper}, итераций {total_iterations}")
    return OpNormEstimate(
        lower=float(lower),
        upper=float(upper),
        witness=best_g,
        p=p,
        iterations=total_iterations,
        converged=bool(converged),
    )


def dense_opnorm_oracle(t: Tree, nu: BoundaryMeasure, sigma: VertexMeasure) -> float:
    """Наибольшее сингулярное число плотной матрицы σ^{1/2} 𝒫 ν^{-1/2} (p = 2)"""
    matrix = np.sqrt(sigma.sigma)[:, None] * poisson_matrix(t, nu) / np.sqrt(nu.nu)[None, :]
    return float(svdvals(matrix)[0])


def weak11_check(
    t: Tree, nu: BoundaryMeasure, sigma: VertexMeasure, trials: int, seed: int, slack: float = VERDICT_SLACK
) -> Weak11Report:
    """
    Проверяет слабый тип (1,1): λ σ({𝒫g > λ}) ≤ C ‖g‖_{L^1(ν)}

    Первая проба - g ≡ 1, остальные - случайные неотрицательные функции.
    """
    constant = carleson_constant(t, nu, sigma).constant
    rng = make_rng(seed, _WEAK11_STREAM)
    samples = [np.ones(t.n_leaves)] + [rng.random(t.n_leaves) for _ in range(max(0, trials - 1))]
    worst_ratio, worst_trial = 0.0, None
    for index, g in enumerate(samples):
        ratio = weak_l1_tree(poisson_extend(t, nu, g), sigma) / lp_boundary(g, nu, 1)
        if ratio > worst_ratio:
            worst_ratio, worst_trial = ratio, index
    return Weak11Report(
        max_ratio=float(worst_ratio),
        constant=constant,
        trials=len(samples),
        worst_trial=worst_trial,
        ok=worst_ratio <= constant * (1 + slack),
    )


@dataclass
class ExponentVerdict:
    """Результаты для одного показателя p"""
    p: float
    estimate: OpNormEstimate
    embedding_constant: float
    embedding_witness: str
    converse_worst_vertex: Optional[int]
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict:
        return {
            "p": self.p,
            "opnorm_lower": self.estimate.lower,
            "opnorm_upper": self.estimate.upper,
            "upper_kind": self.estimate.upper_kind,
            "iterations": self.estimate.iterations,
            "converged": self.estimate.converged,
            "embedding_constant": self.embedding_constant,
            "embedding_witness": self.embedding_witness,
            "converse_worst_vertex": self.converse_worst_vertex,
            "failures": list(self.failures),
        }


def verify_exponent(
    t: Tree,
    nu: BoundaryMeasure,
    sigma: VertexMeasure,
    p,
    trials: int,
    seed: int,
    cfg: IterationConfig = IterationConfig(),
    slack: float = VERDICT_SLACK,
) -> ExponentVerdict:
    """
    Проверки для одного p: оценка нормы, вложение H^p → L^p(σ) и обратная цепочка

    Args:
        trials: Число случайных граничных функций для вложения
        seed: Зерно генератора

    Returns:
        ExponentVerdict: Замеренные константы и список нарушений
    """
    p = _check_open_exponent(p)
    m = induce_flow(t, nu)
    failures = []

    estimate = opnorm_poisson(t, nu, sigma, p, cfg)
    if estimate.lower > estimate.upper * (1 + slack):
        failures.append(f"p={p}: нижняя оценка {estimate.lower} больше верхней {estimate.upper}")

    # Вложение: ‖𝒫g‖_{L^p(σ)} ≤ bound · ‖𝒫g‖_{H^p}
    rng = make_rng(seed, _EMBEDDING_STREAM, int(round(p * 1000)))
    best_ratio, best_witness = 0.0, "none"
    for trial in range(trials):
        g = rng.random(t.n_leaves)
        f = poisson_extend(t, nu, g)
        hardy = hardy_norm(t, m, f, p)
        if hardy == 0:
            continue
        ratio = lp_tree(f, sigma, p) / hardy
        if ratio > best_ratio:
            best_ratio, best_witness = ratio, f"random:{trial}"
    hp_indicators = np.array([
        np.max(level_sums(t, m, poisson_extend(t, nu, _indicator(t, v)), p)) for v in range(t.n_vertices)
    ])
    indicator_ratios = (indicator_embedding_powers(t, nu, sigma, p) / hp_indicators) ** (1.0 / p)
    v = extremal_vertex(t, indicator_ratios)
    if indicator_ratios[v] > best_ratio:
        best_ratio, best_witness = float(indicator_ratios[v]), f"indicator:{v}"
    if best_ratio > estimate.upper * (1 + slack):
        failures.append(f"p={p}: вложение {best_ratio} больше оценки {estimate.upper} ({best_witness})")

    # Обратное направление: σ(T_v) ≤ R^p m(v)
    excess = subtree_sums(t, sigma.sigma) / (best_ratio ** p * m.m * (1 + slack)) if best_ratio > 0 else None
    worst_vertex = None
    if excess is not None:
        worst_vertex = extremal_vertex(t, excess)
        if excess[worst_vertex] > 1:
            failures.append(f"p={p}: σ(T_v) > R^p m(v) в вершине {worst_vertex}")
    elif not sigma.is_zero:
        failures.append(f"p={p}: нулевая константа вложения при ненулевой σ")

    return ExponentVerdict(
        p=p,
        estimate=estimate,
        embedding_constant=float(best_ratio),
        embedding_witness=best_witness,
        converse_worst_vertex=worst_vertex,
        failures=failures,
    )


@dataclass
class EquivalenceVerdict:
    """Итог проверки эквивалентности условия Карлесона, ограниченности 𝒫 и вложения H^p"""
    carleson: CarlesonReport
    weak11: Weak11Report
    exponents: List[ExponentVerdict]
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "constants": {
                "carleson": self.carleson.constant,
                "weak11_max_ratio": self.weak11.max_ratio,
                "exponents": [e.to_dict() for e in self.exponents],
            },
            "witnesses": {
                "carleson_vertex": self.carleson.extremal_vertex,
                "weak11_worst_trial": self.weak11.worst_trial,
                "failures": list(self.failures),
            },
        }


def assemble_verdict(
    carleson: CarlesonReport, weak11: Weak11Report, exponents: Sequence[ExponentVerdict]
) -> EquivalenceVerdict:
    """Собирает итоговый вердикт из независимо посчитанных частей"""
    failures = []
    if not weak11.ok:
        failures.append(
            f"слабый тип (1,1): отношение {weak11.max_ratio} больше C={weak11.constant} (проба {weak11.worst_trial})"
        )
    for verdict in exponents:
        failures.extend(verdict.failures)
    return EquivalenceVerdict(carleson=carleson, weak11=weak11, exponents=list(exponents), failures=failures)


def verify_equivalence(
    t: Tree,
    nu: BoundaryMeasure,
    sigma: VertexMeasure,
    p_list: Sequence[float],
    trials: int,
    seed: int,
    cfg: IterationConfig = IterationConfig(),
) -> EquivalenceVerdict:
    """
    Проверяет все направления эквивалентности для списка показателей

    Returns:
        EquivalenceVerdict: PASS, если все неравенства выполнены с запасом 1e-9
    """
    carleson = carleson_constant(t, nu, sigma)
    weak11 = weak11_check(t, nu, sigma, trials, seed)
    exponents = [verify_exponent(t, nu, sigma, p, trials, seed, cfg) for p in p_list]
    return assemble_verdict(carleson, weak11, exponents)
