import math

import numpy as np
import pytest

from treeharm.carleson import (
    assemble_verdict,
    carleson_constant,
    dense_opnorm_oracle,
    indicator_embedding_powers,
    indicator_lower_bound,
    marcinkiewicz_bound,
    opnorm_poisson,
    verify_equivalence,
    Weak11Report,
    verify_exponent,
    weak11_check,
)
from treeharm.config import IterationConfig
from treeharm.errors import InvalidExponent, NonConvergence
from treeharm.harmonic import poisson_extend
from treeharm.measures import VertexMeasure
from treeharm.norms import hardy_norm, level_sums, lp_tree
from treeharm.tree_core import subtree_sums

from .conftest import A, A1, TOP, random_instances


def _indicator(t, v):
    g = np.zeros(t.n_leaves)
    g[t.leaf_lo[v]:t.leaf_hi[v]] = 1.0
    return g


def _top_spike():
    sigma = np.zeros(7)
    sigma[TOP] = 4.0
    return VertexMeasure(sigma)


def test_carleson_constant(binary, uniform_nu, sigma_flow):
    report = carleson_constant(binary, uniform_nu, sigma_flow)
    assert report.constant == 3
    assert report.extremal_vertex == TOP
    assert list(report.per_vertex_ratios) == [3, 2, 2, 1, 1, 1, 1]

    zero = carleson_constant(binary, uniform_nu, VertexMeasure(np.zeros(7)))
    assert zero.constant == 0
    assert carleson_constant(binary, uniform_nu, _top_spike()).constant == 1


def test_carleson_constant_monotone_and_homogeneous():
    rng = np.random.default_rng(3)
    for instance in random_instances(10):
        t, nu, sigma = instance.tree, instance.nu, instance.sigma
        base = carleson_constant(t, nu, sigma).constant
        larger = VertexMeasure(sigma.sigma + rng.random(t.n_vertices))
        assert carleson_constant(t, nu, larger).constant >= base
        assert carleson_constant(t, nu, VertexMeasure(3.0 * sigma.sigma)).constant == pytest.approx(3 * base)


def test_indicator_lower_bound(binary, uniform_nu, sigma_flow):
    hp, lp = indicator_lower_bound(binary, uniform_nu, sigma_flow, 2, A)
    assert hp == 2
    assert lp == pytest.approx(5)
    assert lp >= 4
    hp, _ = indicator_lower_bound(binary, uniform_nu, sigma_flow, 2, A1)
    assert hp == 1
    assert indicator_lower_bound(binary, uniform_nu, VertexMeasure(np.zeros(7)), 2, A)[1] == 0


def test_indicator_identities_on_random_instances():
    for instance in random_instances(10):
        t, nu, m, sigma = instance.tree, instance.nu, instance.flow, instance.sigma
        totals = subtree_sums(t, sigma.sigma)
        for p in (1, 2, 3):
            powers = indicator_embedding_powers(t, nu, sigma, p)
            assert np.all(powers >= totals)
            for v in range(t.n_vertices):
                f = poisson_extend(t, nu, _indicator(t, v))
                assert np.max(level_sums(t, m, f, p)) == pytest.approx(m.m[v], rel=1e-12)
                assert powers[v] == pytest.approx(lp_tree(f, sigma, p) ** p, rel=1e-10)


def test_marcinkiewicz_bound():
    assert marcinkiewicz_bound(2, 1) == pytest.approx(2 * math.sqrt(2))
    for p in (1, math.inf):
        with pytest.raises(InvalidExponent):
            marcinkiewicz_bound(p, 1)


def test_opnorm_for_top_spike(binary, uniform_nu):
    estimate = opnorm_poisson(binary, uniform_nu, _top_spike(), 2)
    assert estimate.lower == pytest.approx(1)
    assert estimate.lower <= estimate.upper
    assert estimate.upper == pytest.approx(2 * math.sqrt(2))
    assert estimate.converged


def test_opnorm_for_zero_measure(binary, uniform_nu):
    estimate = opnorm_poisson(binary, uniform_nu, VertexMeasure(np.zeros(7)), 3)
    assert estimate.lower == 0
    assert estimate.upper == 0


def test_opnorm_agrees_with_dense_oracle():
    instances = random_instances(
        20, depth=(3, 8), branching=(2, 4), sigma_law=("random", "flow", "spike"), seed=5, max_leaves=250
    )
    for instance in instances:
        t, nu, sigma = instance.tree, instance.nu, instance.sigma
        assert t.n_vertices <= 500
        oracle = dense_opnorm_oracle(t, nu, sigma)
        estimate = opnorm_poisson(t, nu, sigma, 2)
        assert estimate.converged
        assert estimate.lower == pytest.approx(oracle, rel=1e-6)
        assert estimate.lower <= oracle * (1 + 1e-9)


def test_opnorm_p2_refines_short_iterations():
    cfg = IterationConfig(max_iter=3, restarts=0)
    for instance in random_instances(5, depth=(3, 5), branching=(2, 3), seed=7):
        t, nu, sigma = instance.tree, instance.nu, instance.sigma
        estimate = opnorm_poisson(t, nu, sigma, 2, cfg)
        assert estimate.converged
        assert estimate.lower == pytest.approx(dense_opnorm_oracle(t, nu, sigma), rel=1e-6)


def test_opnorm_flags_nonconvergence():
    instance = next(random_instances(1, depth=(4, 4), branching=(2, 3)))
    t, nu, sigma = instance.tree, instance.nu, instance.sigma
    with pytest.warns(NonConvergence):
        estimate = opnorm_poisson(t, nu, sigma, 3, IterationConfig(max_iter=0, restarts=0))
    assert not estimate.converged
    assert 0 < estimate.lower <= estimate.upper
    g = estimate.witness
    ratio = lp_tree(poisson_extend(t, nu, g), sigma, 3) / np.sum(np.abs(g) ** 3 * nu.nu) ** (1 / 3)
    assert ratio == pytest.approx(estimate.lower, rel=1e-12)


def test_opnorm_lower_is_realized_by_witness():
    for instance in random_instances(6):
        t, nu, sigma = instance.tree, instance.nu, instance.sigma
        for p in (1.5, 3):
            estimate = opnorm_poisson(t, nu, sigma, p)
            g = estimate.witness
            ratio = lp_tree(poisson_extend(t, nu, g), sigma, p) / np.sum(np.abs(g) ** p * nu.nu) ** (1 / p)
            assert ratio == pytest.approx(estimate.lower, rel=1e-12)
            assert estimate.lower <= estimate.upper


def test_weak11(binary, uniform_nu, sigma_flow):
    report = weak11_check(binary, uniform_nu, sigma_flow, trials=10, seed=0)
    assert report.constant == 3
    assert report.max_ratio <= 3
    assert report.ok
    assert report.trials == 10
    only_ones = weak11_check(binary, uniform_nu, sigma_flow, trials=1, seed=0)
    # g ≡ 1: отношение σ(T)/ν(∂T)
    assert only_ones.max_ratio == pytest.approx(12 / 4)
    zero = weak11_check(binary, uniform_nu, VertexMeasure(np.zeros(7)), trials=5, seed=0)
    assert zero.max_ratio == 0
    assert zero.ok


def test_verify_exponent_on_flow_measure(binary, uniform_nu, sigma_flow):
    verdict = verify_exponent(binary, uniform_nu, sigma_flow, 2, trials=10, seed=0)
    assert verdict.passed, verdict.failures
    assert verdict.embedding_constant > 0
    assert verdict.to_dict()["p"] == 2


def test_equivalence_examples(binary, uniform_nu, sigma_flow):
    assert verify_equivalence(binary, uniform_nu, sigma_flow, [2], trials=10, seed=0).passed

    spike = np.zeros(7)
    spike[A1] = 1000.0
    verdict = verify_equivalence(binary, uniform_nu, VertexMeasure(spike), [1.5, 2, 3], trials=10, seed=0)
    assert verdict.passed, verdict.failures
    assert verdict.carleson.constant == 1000
    assert verdict.carleson.extremal_vertex == A1

    zero = verify_equivalence(binary, uniform_nu, VertexMeasure(np.zeros(7)), [2], trials=5, seed=0)
    assert zero.passed
    assert zero.to_dict()["verdict"] == "PASS"


def test_equivalence_on_random_instances():
    laws = ("flow", "random", "spike")
    instances = random_instances(50, depth=(2, 5), branching=(2, 4), sigma_law=laws, seed=2, max_leaves=250)
    for instance in instances:
        verdict = verify_equivalence(instance.tree, instance.nu, instance.sigma, [1.5, 2, 3], trials=5, seed=1)
        assert verdict.passed, verdict.failures


def test_assemble_verdict_collects_failures(binary, uniform_nu, sigma_flow):
    carleson = carleson_constant(binary, uniform_nu, sigma_flow)
    weak11 = weak11_check(binary, uniform_nu, sigma_flow, trials=3, seed=0)
    broken = Weak11Report(max_ratio=10.0, constant=3.0, trials=3, worst_trial=1, ok=False)
    verdict = assemble_verdict(carleson, broken, [])
    assert not verdict.passed
    assert verdict.to_dict()["verdict"] == "FAIL"
    assert assemble_verdict(carleson, weak11, []).passed


def test_hardy_embedding_chain(binary, binary_flow, uniform_nu, sigma_flow):
    f = poisson_extend(binary, uniform_nu, [1.0, 1.0, 0.0, 0.0])
    bound = marcinkiewicz_bound(2, carleson_constant(binary, uniform_nu, sigma_flow).constant)
    assert lp_tree(f, sigma_flow, 2) <= bound * hardy_norm(binary, binary_flow, f, 2)
