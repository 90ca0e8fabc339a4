import math
from pathlib import Path

import numpy as np
import pytest

from treeharm.cli_io import GenSpec, generate, load_instance
from treeharm.measures import BoundaryMeasure, VertexMeasure, induce_flow
from treeharm.tree_core import build_from_parents

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# Полное бинарное дерево глубины 2: верх 0, a = 1, b = 2, листья 3..6
BINARY_PARENTS = [None, 0, 0, 1, 1, 2, 2]
TOP, A, B = 0, 1, 2
A1, A2, B1, B2 = 3, 4, 5, 6


@pytest.fixture
def binary():
    return build_from_parents(BINARY_PARENTS)


@pytest.fixture
def uniform_nu():
    return BoundaryMeasure(np.ones(4))


@pytest.fixture
def binary_flow(binary, uniform_nu):
    return induce_flow(binary, uniform_nu)


@pytest.fixture
def sigma_flow(binary_flow):
    return VertexMeasure(binary_flow.m.copy())


@pytest.fixture
def cherry():
    return build_from_parents([None, 0, 0])


@pytest.fixture
def chain():
    return build_from_parents([None, 0, 1])


@pytest.fixture
def fixture_path():
    return FIXTURES / "binary_depth2.json"


@pytest.fixture
def fixture_instance(fixture_path):
    return load_instance(fixture_path)


def random_instances(
    count, depth=(2, 5), branching=(2, 4), sigma_law="random", nu_law="loguniform", seed=0, max_leaves=None
):
    """
    Воспроизводимый набор экземпляров

    Законы ν и σ можно задать кортежем, тогда они чередуются по номеру экземпляра.
    max_leaves ограничивает глубину так, чтобы hi^depth не превышало это число.
    """
    nu_laws = (nu_law,) if isinstance(nu_law, str) else tuple(nu_law)
    sigma_laws = (sigma_law,) if isinstance(sigma_law, str) else tuple(sigma_law)
    rng = np.random.default_rng(seed)
    for i in range(count):
        lo = int(rng.integers(branching[0], branching[1] + 1))
        hi = int(rng.integers(lo, branching[1] + 1))
        d = int(rng.integers(depth[0], depth[1] + 1))
        if max_leaves is not None and hi > 1:
            d = max(1, min(d, int(math.log(max_leaves) / math.log(hi))))
        yield generate(GenSpec(
            depth=d,
            branching=(lo, hi),
            nu_law=nu_laws[i % len(nu_laws)],
            seed=seed * 1000 + i,
            sigma_law=sigma_laws[i % len(sigma_laws)],
        ))
