import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treeharm.cli_io import GenSpec, generate
from treeharm.errors import (
    CycleDetected,
    EmptyInput,
    LevelOverflow,
    LevelUnderflow,
    MixedLeafLevels,
    MultipleRoots,
)
from treeharm.tree_core import (
    ancestor_table,
    boundary_sector,
    build_from_parents,
    check_min_branching,
    confluent,
    confluent_table,
    gromov_distance,
    leaf_range,
    level_vertices,
    phi,
    predecessor_n,
    sector,
    subtree_sums,
    successors_n,
)

from .conftest import A, A1, A2, B, B1, B2, TOP, random_instances


def test_single_vertex_tree():
    t = build_from_parents([None])
    assert t.n_vertices == 1
    assert t.top == 0
    assert t.leaves == (0,)
    assert t.depth == 0
    assert t.level[0] == 0


def test_binary_tree_levels(binary):
    assert binary.top == TOP
    assert binary.depth == 2
    assert binary.leaves == (A1, A2, B1, B2)
    assert list(binary.level) == [2, 1, 1, 0, 0, 0, 0]
    assert binary.children[A] == (A1, A2)


def test_chain_accepted(chain):
    assert chain.depth == 2
    assert chain.leaves == (2,)
    assert not check_min_branching(chain, 2)


@pytest.mark.parametrize("parents, error", [
    ([], EmptyInput),
    ([None, None], MultipleRoots),
    ([1, 0], CycleDetected),
    ([None, 2, 1], CycleDetected),
    ([None, 0, 0, 1], MixedLeafLevels),
])
def test_build_rejects_invalid_input(parents, error):
    with pytest.raises(error):
        build_from_parents(parents)


def test_successors(binary):
    assert successors_n(binary, TOP, 2) == {A1, A2, B1, B2}
    assert successors_n(binary, TOP, 1) == {A, B}
    for x in range(binary.n_vertices):
        assert successors_n(binary, x, 0) == {x}
    with pytest.raises(LevelUnderflow):
        successors_n(binary, A1, 1)


def test_predecessors(binary):
    assert predecessor_n(binary, A1, 2) == TOP
    assert predecessor_n(binary, A1, 1) == A
    assert predecessor_n(binary, B, 0) == B
    with pytest.raises(LevelOverflow):
        predecessor_n(binary, TOP, 1)


def test_confluent_and_distance(binary):
    assert confluent(binary, A1, A2) == A
    assert confluent(binary, A1, B2) == TOP
    assert confluent(binary, B, B) == B
    assert gromov_distance(binary, A1, A1) == 0
    assert gromov_distance(binary, A1, A2) == pytest.approx(math.e)
    assert gromov_distance(binary, A2, B1) == pytest.approx(math.e ** 2)


def test_sectors(binary):
    assert sector(binary, A1) == {A1}
    assert sector(binary, TOP) == set(range(7))
    assert sector(binary, A) == {A, A1, A2}
    assert boundary_sector(binary, TOP) == {A1, A2, B1, B2}
    assert boundary_sector(binary, A) == {A1, A2}
    assert boundary_sector(binary, B2) == {B2}
    assert leaf_range(binary, B) == (2, 4)


def test_phi(binary):
    assert phi(binary, A1, 1) == A
    assert phi(binary, A1, 2) == TOP
    assert phi(binary, B2, 0) == B2
    with pytest.raises(LevelOverflow):
        phi(binary, A1, 3)


def test_min_branching():
    ternary = build_from_parents([None, 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3])
    assert check_min_branching(ternary, 3)
    assert not check_min_branching(ternary, 4)


def test_level_vertices_keep_leaf_order(binary):
    assert list(level_vertices(binary, 0)) == [A1, A2, B1, B2]
    assert list(level_vertices(binary, 1)) == [A, B]
    assert list(level_vertices(binary, 2)) == [TOP]


def test_tables_agree_with_scalar_operations(binary):
    table = ancestor_table(binary)
    confluents = confluent_table(binary)
    for i, omega in enumerate(binary.leaves):
        for j in range(binary.depth + 1):
            assert table[j, i] == phi(binary, omega, j)
        for x in range(binary.n_vertices):
            assert confluents[x, i] == confluent(binary, x, omega)


def test_subtree_sums(binary):
    sums = subtree_sums(binary, np.arange(7, dtype=float))
    assert sums[A] == 1 + 3 + 4
    assert sums[TOP] == 21


def test_structural_invariants_on_generated_trees():
    for instance in random_instances(10, depth=(1, 4), branching=(1, 3)):
        t = instance.tree
        for x in range(t.n_vertices):
            if t.parent[x] is not None:
                assert t.level[t.parent[x]] == t.level[x] + 1
            whole = {x}.union(*(sector(t, y) for y in t.children[x]))
            assert sector(t, x) == whole
        for k in range(t.depth + 1):
            parts = [boundary_sector(t, y) for y in level_vertices(t, k)]
            assert sum(len(p) for p in parts) == t.n_leaves
            assert set().union(*parts) == set(t.leaves)
        for x, y in itertools.combinations(range(t.n_vertices), 2):
            sx, sy = sector(t, x), sector(t, y)
            if sx & sy:
                assert sx <= sy or sy <= sx


@settings(max_examples=25, deadline=None)
@given(
    depth=st.integers(min_value=1, max_value=4),
    lo=st.integers(min_value=1, max_value=2),
    extra=st.integers(min_value=0, max_value=1),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_gromov_distance_is_ultrametric(depth, lo, extra, seed):
    t = generate(GenSpec(depth=depth, branching=(lo, lo + extra), seed=seed)).tree
    leaves = np.asarray(t.leaves[:64])
    levels = t.level[confluent_table(t)[leaves][:, :leaves.size]]
    distance = np.where(leaves[:, None] == leaves[None, :], 0.0, np.exp(levels))
    assert distance[5 % leaves.size, 0] == pytest.approx(gromov_distance(t, int(leaves[5 % leaves.size]), int(leaves[0])))
    # ρ(a, c) <= max(ρ(a, b), ρ(b, c)) для всех троек
    bound = np.maximum(distance[:, :, None], distance[None, :, :])
    assert np.all(distance[:, None, :] <= bound)
