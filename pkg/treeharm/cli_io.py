"""
Файл экземпляра, генератор случайных экземпляров и сериализация отчетов

Формат экземпляра (JSON, UTF-8, переводы строк LF):

    {
      "format": "treeharm-instance",
      "version": 1,
      "tree": {"parents": [null, 0, 0, ...]},
      "nu": [...],                       веса листьев в порядке Tree.leaves
      "sigma": [...],                    необязательно, веса вершин
      "functions": {"g": {"domain": "leaves", "values": [...]}},
      "kernel": {"alpha": 1.0, "entries": [[...], ...], "degenerate_rows": []}
    }
"""
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from .config import RNG_ALGORITHM, make_rng
from .errors import DimensionMismatch, ParseError, TreeHarmError, ValidationError
from .kernel_bmo import Kernel
from .measures import BoundaryMeasure, FlowMeasure, VertexMeasure, induce_flow
from .tree_core import Tree, build_from_parents

logger = logging.getLogger(__name__)

INSTANCE_FORMAT = "treeharm-instance"
INSTANCE_VERSION = 1
DOMAINS = ("leaves", "vertices")
NU_LAWS = ("uniform", "loguniform")
SIGMA_LAWS = ("none", "flow", "random", "spike")

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"
templates = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


@dataclass(frozen=True, eq=False)
class NamedFunction:
    domain: str
    values: np.ndarray


@dataclass(eq=False)
class Instance:
    """
    Проверенный экземпляр: дерево, меры, функции и ядро

    Args:
        tree: Дерево
        nu: Граничная мера
        sigma: Мера на вершинах (необязательно)
        functions: Именованные функции на листьях или вершинах
        kernel: Плотное ядро (необязательно)
    """
    tree: Tree
    nu: BoundaryMeasure
    sigma: Optional[VertexMeasure] = None
    functions: Dict[str, NamedFunction] = field(default_factory=dict)
    kernel: Optional[Kernel] = None

    @property
    def flow(self) -> FlowMeasure:
        return induce_flow(self.tree, self.nu)

    def function(self, name: str, domain: Optional[str] = None) -> np.ndarray:
        """
        Возвращает значения функции по имени

        Raises:
            ValidationError: функции нет или она задана не на той области
        """
        if name not in self.functions:
            raise ValidationError("function exists", f"в экземпляре нет функции '{name}'")
        function = self.functions[name]
        if domain is not None and function.domain != domain:
            raise ValidationError("function domain", f"функция '{name}' задана на '{function.domain}', нужна '{domain}'")
        return function.values


@dataclass(frozen=True)
class GenSpec:
    """
    Параметры генератора

    Args:
        depth: Уровень верхней вершины
        branching: Диапазон числа детей [lo, hi]
        nu_law: uniform (все веса 1) или loguniform в nu_range
        nu_range: Границы логравномерного закона
        seed: Зерно PCG64
        sigma_law: none, flow (σ = m), random или spike (одна вершина с σ = 100 m)
    """
    depth: int
    branching: Tuple[int, int] = (2, 2)
    nu_law: str = "uniform"
    nu_range: Tuple[float, float] = (0.1, 10.0)
    seed: int = 0
    sigma_law: str = "none"

    def validate(self) -> None:
        lo, hi = self.branching
        if self.depth < 1:
            raise ValidationError("depth >= 1", f"глубина {self.depth}")
        if not 1 <= lo <= hi:
            raise ValidationError("hi >= lo >= 1", f"ветвление [{lo}, {hi}]")
        if self.nu_law not in NU_LAWS:
            raise ValidationError("nu_law", f"неизвестный закон '{self.nu_law}'")
        if self.sigma_law not in SIGMA_LAWS:
            raise ValidationError("sigma_law", f"неизвестный закон '{self.sigma_law}'")
        a, b = self.nu_range
        if not 0 < a <= b:
            raise ValidationError("nu_range", f"диапазон [{a}, {b}]")
        if self.seed < 0:
            raise ValidationError("seed >= 0", f"зерно {self.seed}")


def generate(spec: GenSpec) -> Instance:
    """
    Строит случайный экземпляр; при одинаковом seed результат одинаковый

    Вершины нумеруются в ширину от верхней вершины 0, все листья на уровне 0.
    """
    spec.validate()
    rng = make_rng(spec.seed)
    lo, hi = spec.branching

    parents: List[Optional[int]] = [None]
    frontier = [0]
    for _ in range(spec.depth):
        next_frontier = []
        for v in frontier:
            for _ in range(int(rng.integers(lo, hi + 1))):
                parents.append(v)
                next_frontier.append(len(parents) - 1)
        frontier = next_frontier
    tree = build_from_parents(parents)

    if spec.nu_law == "uniform":
        nu = np.ones(tree.n_leaves)
    else:
        a, b = spec.nu_range
        nu = np.exp(rng.uniform(math.log(a), math.log(b), size=tree.n_leaves))
    boundary = BoundaryMeasure(nu)

    sigma = None
    if spec.sigma_law == "flow":
        sigma = VertexMeasure(induce_flow(tree, boundary).m.copy())
    elif spec.sigma_law == "random":
        sigma = VertexMeasure(rng.random(tree.n_vertices))
    elif spec.sigma_law == "spike":
        weights = np.zeros(tree.n_vertices)
        v = int(rng.integers(tree.n_vertices))
        weights[v] = 100.0 * induce_flow(tree, boundary).m[v]
        sigma = VertexMeasure(weights)

    logger.info(f"Сгенерирован экземпляр: {tree.n_vertices} вершин, seed={spec.seed}")
    return Instance(tree=tree, nu=boundary, sigma=sigma)


def _require(data: Mapping, key: str, prefix: str = "") -> Any:
    if not isinstance(data, Mapping) or key not in data:
        raise ParseError("Отсутствует обязательное поле", field=f"{prefix}{key}")
    return data[key]


def _float_list(values: Any, name: str) -> np.ndarray:
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise ParseError("Ожидался список чисел", field=name)
    return np.array(values, dtype=np.float64)


def _parents_list(values: Any) -> List[Optional[int]]:
    if not isinstance(values, list) or not all(
        v is None or (isinstance(v, int) and not isinstance(v, bool)) for v in values
    ):
        raise ParseError("Ожидался список целых чисел или null", field="tree.parents")
    return values


def _wrap(invariant: str, e: TreeHarmError) -> ValidationError:
    if isinstance(e, ValidationError):
        return e
    return ValidationError(invariant, str(e))


def instance_from_dict(data: Any) -> Instance:
    """
    Строит и проверяет экземпляр из разобранного JSON

    Raises:
        ParseError: структура документа нарушена
        ValidationError: нарушен инвариант дерева, мер, функций или ядра
    """
    if not isinstance(data, dict):
        raise ParseError("Документ должен быть объектом", field="format")
    if data.get("format") != INSTANCE_FORMAT:
        raise ParseError(f"Ожидался формат '{INSTANCE_FORMAT}'", field="format")
    if data.get("version") != INSTANCE_VERSION:
        raise ParseError(f"Поддерживается только версия {INSTANCE_VERSION}", field="version")

    parents = _parents_list(_require(_require(data, "tree"), "parents", "tree."))
    try:
        tree = build_from_parents(parents)
    except TreeHarmError as e:
        raise _wrap("tree", e)

    try:
        nu = BoundaryMeasure(_float_list(_require(data, "nu"), "nu"))
        nu.check_tree(tree)
    except (DimensionMismatch, ValidationError) as e:
        raise _wrap("nu", e)

    sigma = None
    if data.get("sigma") is not None:
        try:
            sigma = VertexMeasure(_float_list(data["sigma"], "sigma"))
            sigma.check_tree(tree)
        except (DimensionMismatch, ValidationError) as e:
            raise _wrap("sigma", e)

    raw_functions = data.get("functions") or {}
    if not isinstance(raw_functions, dict):
        raise ParseError("Ожидался объект", field="functions")
    functions = {}
    for name, spec in raw_functions.items():
        domain = _require(spec, "domain", f"functions.{name}.")
        if domain not in DOMAINS:
            raise ParseError(f"Область должна быть одной из {DOMAINS}", field=f"functions.{name}.domain")
        values = _float_list(_require(spec, "values", f"functions.{name}."), f"functions.{name}.values")
        expected = tree.n_leaves if domain == "leaves" else tree.n_vertices
        if values.shape != (expected,):
            raise ValidationError(f"functions.{name} length", f"ожидалось {expected} значений, получено {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"functions.{name} finite", "значения должны быть конечными")
        functions[name] = NamedFunction(domain=domain, values=values)

    kernel = None
    if data.get("kernel") is not None:
        raw = data["kernel"]
        entries = _require(raw, "entries", "kernel.")
        if not isinstance(entries, list):
            raise ParseError("Ожидалась матрица", field="kernel.entries")
        alpha = _require(raw, "alpha", "kernel.")
        if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
            raise ParseError("Ожидалось число", field="kernel.alpha")
        rows = [_float_list(row, f"kernel.entries[{i}]") for i, row in enumerate(entries)]
        if len({row.size for row in rows}) > 1:
            raise ValidationError("kernel", "строки матрицы ядра разной длины")
        try:
            kernel = Kernel(np.array(rows) if rows else np.zeros((0, 0)), alpha, tuple(raw.get("degenerate_rows", ())))
            kernel.check_tree(tree)
        except (DimensionMismatch, ValidationError, ValueError) as e:
            raise ValidationError("kernel", str(e))

    return Instance(tree=tree, nu=nu, sigma=sigma, functions=functions, kernel=kernel)


def parse_instance(text: str) -> Instance:
    """Разбирает текст файла экземпляра"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Некорректный JSON: {e.msg}", line=e.lineno)
    return instance_from_dict(data)


def load_instance(path) -> Instance:
    """
    Загружает экземпляр из файла

    Raises:
        ParseError, ValidationError
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"Не удалось прочитать файл {path}: {e}")
    instance = parse_instance(text)
    logger.debug(f"Загружен экземпляр {path}: {instance.tree.n_vertices} вершин")
    return instance


def instance_to_dict(instance: Instance) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "format": INSTANCE_FORMAT,
        "version": INSTANCE_VERSION,
        "tree": {"parents": list(instance.tree.parent)},
        "nu": instance.nu.nu.tolist(),
    }
    if instance.sigma is not None:
        data["sigma"] = instance.sigma.sigma.tolist()
    if instance.functions:
        data["functions"] = {
            name: {"domain": f.domain, "values": f.values.tolist()} for name, f in instance.functions.items()
        }
    if instance.kernel is not None:
        data["kernel"] = {
            "alpha": instance.kernel.alpha,
            "entries": instance.kernel.entries.tolist(),
            "degenerate_rows": list(instance.kernel.degenerate_rows),
        }
    return data


def dump_instance(instance: Instance) -> str:
    """Текст файла экземпляра; числа записываются кратчайшим точным представлением"""
    return json.dumps(instance_to_dict(instance), ensure_ascii=False, indent=1) + "\n"


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(dump_instance(instance), encoding="utf-8", newline="\n")
    logger.debug(f"Экземпляр сохранен в {path}")


def to_jsonable(value: Any) -> Any:
    """Приводит значения отчета к типам JSON; бесконечности записываются строками"""
    if value is None or isinstance(value, (str, bool)):
        return value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Path):
        return value.as_posix()
    return str(value)


def rng_record(seed: Optional[int]) -> Dict[str, Any]:
    return {"algorithm": RNG_ALGORITHM, "seed": seed}


def render_report(report: Mapping[str, Any], fmt: str = "json") -> str:
    """
    Сериализует отчет

    Args:
        report: Отчет с ключами command, verdict, constants, witnesses, rng
        fmt: json или text (шаблон report.txt.jinja2)
    """
    payload = to_jsonable(report)
    if fmt == "json":
        return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    if fmt == "text":
        return templates.get_template("report.txt.jinja2").render(report=payload)
    raise ValueError(f"Неизвестный формат отчета: {fmt}")


def write_csv(table: Sequence[Mapping[str, Any]], path) -> None:
    """Записывает таблицу по вершинам (список строк с одинаковыми ключами)"""
    rows = [to_jsonable(row) for row in table]
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    logger.debug(f"Таблица из {len(rows)} строк записана в {path}")
