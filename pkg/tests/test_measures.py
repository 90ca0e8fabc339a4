import math

import numpy as np
import pytest

from treeharm.config import FLOW_TOL
from treeharm.errors import DimensionMismatch, NoInternalVertices, RadiusOutOfRange, ValidationError
from treeharm.measures import (
    BoundaryMeasure,
    FlowMeasure,
    VertexMeasure,
    boundary_ball,
    boundary_doubling_ratio,
    check_flow,
    doubling_constants,
    induce_flow,
    implied_lower_ratio,
    iterated_conservation_gap,
    lemma_radius,
)
from treeharm.tree_core import boundary_sector, build_from_parents, check_min_branching

from .conftest import A, A1, A2, B, TOP, random_instances


def test_induced_flow_on_binary_tree(binary_flow):
    assert list(binary_flow.m) == [4, 2, 2, 1, 1, 1, 1]


def test_induced_flow_on_cherry(cherry):
    m = induce_flow(cherry, BoundaryMeasure([1.0, 3.0]))
    assert m.m[cherry.top] == 4


def test_single_vertex_flow():
    t = build_from_parents([None])
    m = induce_flow(t, BoundaryMeasure([2.5]))
    assert list(m.m) == [2.5]
    assert check_flow(t, m).ok


def test_measure_validation(binary):
    with pytest.raises(ValidationError):
        BoundaryMeasure([1.0, 0.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        VertexMeasure([1.0, -1.0])
    with pytest.raises(DimensionMismatch):
        induce_flow(binary, BoundaryMeasure([1.0, 1.0]))


def test_check_flow_reports_violation(binary, binary_flow):
    assert check_flow(binary, binary_flow).ok
    perturbed = binary_flow.m.copy()
    perturbed[A] *= 1.01
    report = check_flow(binary, FlowMeasure(perturbed))
    assert not report.ok
    assert report.worst_vertex == A


def test_doubling_constants(binary, binary_flow, cherry, chain):
    uniform = doubling_constants(binary, binary_flow)
    assert (uniform.c1, uniform.c2) == (2, 2)
    assert uniform.locally_doubling

    skewed = doubling_constants(cherry, induce_flow(cherry, BoundaryMeasure([1.0, 3.0])))
    assert skewed.c1 == pytest.approx(4)
    assert skewed.c2 == pytest.approx(4 / 3)

    flat = doubling_constants(chain, induce_flow(chain, BoundaryMeasure([1.0])))
    assert (flat.c1, flat.c2) == (1, 1)
    assert not flat.locally_doubling

    with pytest.raises(NoInternalVertices):
        doubling_constants(build_from_parents([None]), FlowMeasure([1.0]))


def test_implied_lower_ratio():
    assert implied_lower_ratio(2.0) == 2.0
    assert implied_lower_ratio(4.0) == pytest.approx(4 / 3)
    assert implied_lower_ratio(1.0) == math.inf


def test_boundary_ball(binary, binary_flow):
    assert boundary_ball(binary, binary_flow, A1, math.exp(0.5)) == {A1}
    assert boundary_ball(binary, binary_flow, A1, math.exp(1.2)) == {A1, A2}
    assert boundary_ball(binary, binary_flow, A1, math.exp(2.01)) == boundary_sector(binary, TOP)
    with pytest.raises(RadiusOutOfRange):
        boundary_ball(binary, binary_flow, A1, math.exp(3.5))
    with pytest.raises(RadiusOutOfRange):
        boundary_ball(binary, binary_flow, A1, 0.5)


def test_lemma_radius_recovers_sector(binary, binary_flow):
    for x in (A, B):
        omega = binary.leaves[binary.leaf_lo[x]]
        r = lemma_radius(binary, x)
        assert boundary_ball(binary, binary_flow, omega, r) == boundary_sector(binary, x)
        assert boundary_ball(binary, binary_flow, omega, 2 * r * (1 + 1e-9)) == boundary_sector(binary, TOP)


def test_boundary_doubling_ratio(binary, uniform_nu, cherry):
    assert boundary_doubling_ratio(binary, uniform_nu).ratio == 2
    skewed = boundary_doubling_ratio(cherry, BoundaryMeasure([1.0, 3.0]))
    assert skewed.ratio == 4
    assert skewed.leaf == 1
    assert boundary_doubling_ratio(build_from_parents([None]), BoundaryMeasure([1.0])).ratio == 1


def test_flow_invariants_on_generated_instances():
    instances = random_instances(
        200, depth=(1, 8), branching=(2, 4), sigma_law="none", nu_law=("uniform", "loguniform"), max_leaves=512
    )
    for instance in instances:
        t, m = instance.tree, instance.flow
        assert t.depth <= 8
        assert check_flow(t, m, FLOW_TOL).ok
        if t.n_vertices <= 200:
            assert iterated_conservation_gap(t, m) <= FLOW_TOL * (t.depth + 1)
        constants = doubling_constants(t, m)
        assert boundary_doubling_ratio(t, instance.nu).ratio <= constants.c1
        assert constants.c2 > 1


def test_flow_invariants_with_unary_vertices():
    for instance in random_instances(20, depth=(1, 5), branching=(1, 3), sigma_law="none"):
        t, m = instance.tree, instance.flow
        assert check_flow(t, m, FLOW_TOL).ok
        assert iterated_conservation_gap(t, m) <= FLOW_TOL * (t.depth + 1)
        constants = doubling_constants(t, m)
        assert boundary_doubling_ratio(t, instance.nu).ratio <= constants.c1
        if check_min_branching(t, 2):
            assert constants.c2 > 1
