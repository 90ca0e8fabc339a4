import itertools

import numpy as np
import pytest

from treeharm.cli_io import GenSpec, generate
from treeharm.errors import RequiresLocallyDoubling, ValidationError
from treeharm.kernel_bmo import (
    Kernel,
    KernelAudit,
    apply_kernel,
    atom_integrals,
    atom_kernel,
    audit_kernel,
    bmo_from_carleson,
    c_alpha,
    carleson_density,
    check_geometric_claims,
    decay_kernel,
    example_ck_bound,
    example_kernel_delta,
    ring_series,
    telescoping_gaps,
    theorem3_bound,
    verify_bmo_to_carleson,
)
from treeharm.measures import BoundaryMeasure, doubling_constants, induce_flow
from treeharm.norms import bmo_norm, mean_oscillations
from treeharm.tree_core import build_from_parents, confluent_table

from .conftest import A, A1, B, TOP, random_instances


def _uniform_binary(depth):
    instance = generate(GenSpec(depth=depth, branching=(2, 2)))
    return instance.tree, instance.nu, instance.flow


def test_zero_kernel(binary, uniform_nu, binary_flow):
    kernel = Kernel(np.zeros((7, 4)), alpha=1.0)
    audit = audit_kernel(binary, uniform_nu, binary_flow, kernel)
    assert audit.passes
    assert audit.ck == 0
    assert audit.worst_pair is None
    b = np.array([1.0, -2.0, 0.5, 3.0])
    assert np.all(apply_kernel(binary, uniform_nu, kernel, b) == 0)
    verdict = verify_bmo_to_carleson(binary, uniform_nu, binary_flow, kernel, b)
    assert verdict.passed
    assert verdict.max_ratio == 0


def test_decay_kernel_fails_cancellation(binary, uniform_nu, binary_flow):
    audit = audit_kernel(binary, uniform_nu, binary_flow, decay_kernel(binary, binary_flow, 1.0))
    assert audit.a3_ok
    assert audit.worst_ratio == pytest.approx(1.0)
    assert not audit.cancellation_ok
    assert not audit.passes


def test_decay_kernel_mass_grows_with_depth():
    # для равномерного бинарного дерева: C_K = 1 + Σ_{j=1}^{d} (3/2 - 2^{-j-1})
    masses = []
    for depth in (3, 5, 7):
        t, nu, m = _uniform_binary(depth)
        ck = audit_kernel(t, nu, m, decay_kernel(t, m, 1.0)).ck
        expected = 1 + sum(1.5 - 2.0 ** (-j - 1) for j in range(1, depth + 1))
        assert ck == pytest.approx(expected)
        assert ck >= depth - 1
        masses.append(ck)
    assert masses[0] < masses[1] < masses[2]


def test_atom_example(binary, uniform_nu, binary_flow):
    b = np.array([1.0, 0.0, 0.0, 0.0])
    kernel, atom = atom_kernel(binary, uniform_nu, binary_flow, A, b)
    assert list(atom) == [0.25, -0.25, 0.0, 0.0]
    assert float(np.sum(atom * b * uniform_nu.nu)) == 0.25

    audit = audit_kernel(binary, uniform_nu, binary_flow, kernel)
    assert audit.passes
    assert audit.ck <= 1

    values = apply_kernel(binary, uniform_nu, kernel, b)
    assert values[A] == 0.25
    assert np.count_nonzero(values) == 1

    sigma = carleson_density(binary, uniform_nu, binary_flow, kernel, b)
    assert sigma.sigma[A] == 0.5
    assert np.count_nonzero(sigma.sigma) == 1

    # 2 m(y) |∫ a_y b dν| = ∫_{∂T_y} |b - b_{∂T_y}| dν
    assert 2 * binary_flow.m[A] * 0.25 == 1.0


def test_atom_degenerate_cases(binary, uniform_nu, binary_flow):
    b = np.array([2.0, 2.0, -1.0, 5.0])
    _, atom = atom_kernel(binary, uniform_nu, binary_flow, A1, b)
    assert np.all(atom == 0)
    _, atom = atom_kernel(binary, uniform_nu, binary_flow, A, b)
    assert float(np.sum(atom * b * uniform_nu.nu)) == pytest.approx(0)
    assert mean_oscillations(binary, uniform_nu, b)[A] == 0


def test_bmo_reconstruction(binary, uniform_nu, binary_flow, cherry):
    b = np.array([1.0, 0.0, 0.0, 0.0])
    integrals = atom_integrals(binary, uniform_nu, binary_flow, b)
    assert integrals[A] == 0.25
    assert bmo_from_carleson(binary, uniform_nu, binary_flow, b) == 0.25
    assert 2 * bmo_from_carleson(binary, uniform_nu, binary_flow, b) == bmo_norm(binary, uniform_nu, b).norm
    assert bmo_from_carleson(binary, uniform_nu, binary_flow, np.full(4, 3.0)) == 0

    nu = BoundaryMeasure([1.0, 1.0])
    assert 2 * bmo_from_carleson(cherry, nu, induce_flow(cherry, nu), [1.0, -1.0]) == 1


def test_atom_identity_on_random_instances():
    rng = np.random.default_rng(17)
    for instance in random_instances(50, depth=(1, 5), branching=(1, 3), max_leaves=250):
        t, nu, m = instance.tree, instance.nu, instance.flow
        for _ in range(10):
            b = rng.normal(size=t.n_leaves)
            numerators = mean_oscillations(t, nu, b) * m.m
            integrals = atom_integrals(t, nu, m, b)
            assert 2 * m.m * integrals == pytest.approx(numerators, rel=1e-12, abs=1e-12)
            assert 2 * bmo_from_carleson(t, nu, m, b) == pytest.approx(bmo_norm(t, nu, b).norm, rel=1e-12)
        for y in rng.choice(t.n_vertices, size=min(t.n_vertices, 12), replace=False):
            kernel, _ = atom_kernel(t, nu, m, int(y), b)
            audit = audit_kernel(t, nu, m, kernel)
            assert audit.passes
            assert audit.ck <= 1 + 1e-12


def test_c_alpha_and_bound(binary, binary_flow):
    assert c_alpha(2, 2, 1) == pytest.approx(16)
    with pytest.raises(RequiresLocallyDoubling):
        c_alpha(2, 1, 1)
    audit = KernelAudit(
        cancellation_max=0.0, scale=1.0, cancellation_ok=True, ck=1.0,
        a3_ok=True, worst_pair=None, worst_ratio=0.5, alpha=1.0,
    )
    assert theorem3_bound(binary, binary_flow, audit, 1.0) == pytest.approx(18)
    assert theorem3_bound(binary, binary_flow, audit, 0.0) == 0


def test_theorem3_bound_requires_doubling(chain):
    m = induce_flow(chain, BoundaryMeasure([1.0]))
    audit = KernelAudit(0.0, 0.0, True, 0.0, True, None, 0.0, 1.0)
    with pytest.raises(RequiresLocallyDoubling):
        theorem3_bound(chain, m, audit, 1.0)


def test_geometric_claims_and_telescoping():
    rng = np.random.default_rng(23)
    for instance in random_instances(15, depth=(1, 5), branching=(2, 4)):
        t, nu, m = instance.tree, instance.nu, instance.flow
        for alpha in (0.5, 1.0, 2.0):
            claims = check_geometric_claims(t, m, alpha)
            assert claims.ok, claims
        report = telescoping_gaps(t, nu, rng.normal(size=t.n_leaves))
        assert report.ok, report


def test_example_kernel_contract(binary, uniform_nu, binary_flow):
    kernel = example_kernel_delta(binary, uniform_nu, binary_flow, alpha=1.0, delta=0.5)
    assert kernel.degenerate_rows == (TOP,)
    assert np.all(kernel.entries[TOP] == 0)

    confluents = confluent_table(binary)
    masses = binary_flow.m[confluents]
    base = binary_flow.m[:, None] / masses ** 2 * np.minimum(1 / masses, masses) ** 1.5
    for x in (A, B, A1):
        nonzero = base[x] > 0
        coefficients = kernel.entries[x][nonzero] / base[x][nonzero]
        assert np.max(np.abs(coefficients)) == pytest.approx(1.0)
        assert float(kernel.entries[x] @ uniform_nu.nu) == pytest.approx(0, abs=1e-12)


def test_example_kernel_preconditions(chain, cherry):
    with pytest.raises(ValidationError):
        nu = BoundaryMeasure([1.0])
        example_kernel_delta(chain, nu, induce_flow(chain, nu), 1.0, 0.5)
    with pytest.raises(ValidationError):
        nu = BoundaryMeasure([1.0, 1.0])
        example_kernel_delta(cherry, nu, induce_flow(cherry, nu), 1.0, 0.5)


def test_example_kernel_audits_on_depth_four():
    t, nu, m = _uniform_binary(4)
    for seed in range(20):
        kernel = example_kernel_delta(t, nu, m, alpha=1.0, delta=0.5, seed=seed)
        audit = audit_kernel(t, nu, m, kernel)
        assert audit.passes, audit


def test_example_kernel_mass_within_series_constant():
    for instance in random_instances(10, depth=(2, 5), branching=(2, 3)):
        t, nu, m = instance.tree, instance.nu, instance.flow
        c2 = doubling_constants(t, m).c2
        for alpha, delta in ((1.0, 0.5), (0.5, 1.0)):
            kernel = example_kernel_delta(t, nu, m, alpha, delta, seed=3)
            audit = audit_kernel(t, nu, m, kernel)
            assert audit.passes
            assert audit.ck <= example_ck_bound(c2, alpha, delta) * (1 + 1e-12)


def test_ring_series(binary, binary_flow):
    series, k0 = ring_series(binary, binary_flow, A1, 0.5)
    assert series == pytest.approx(1 + 2 ** -1.5 + 4 ** -1.5)
    assert k0 is None
    small = BoundaryMeasure([0.3, 0.3, 0.3, 0.3])
    _, k0 = ring_series(binary, induce_flow(binary, small), A1, 0.5)
    assert k0 == 1


def test_forward_bound_on_random_triples():
    rng = np.random.default_rng(29)
    triples = 0
    for instance in random_instances(17, depth=(2, 5), branching=(2, 3)):
        t, nu, m = instance.tree, instance.nu, instance.flow
        for seed, (alpha, delta) in enumerate(itertools.product((0.5, 1.0, 2.0), (0.5, 1.0))):
            b = rng.uniform(-1, 1, size=t.n_leaves)
            kernel = example_kernel_delta(t, nu, m, alpha, delta, seed=seed)
            assert audit_kernel(t, nu, m, kernel).passes
            verdict = verify_bmo_to_carleson(t, nu, m, kernel, b)
            assert verdict.passed, verdict.to_dict()
            triples += 1
    assert triples >= 100


def test_forward_bound_with_atom_kernels(binary, uniform_nu, binary_flow):
    b = np.array([1.0, 0.0, 0.0, 0.0])
    for y in range(binary.n_vertices):
        kernel, _ = atom_kernel(binary, uniform_nu, binary_flow, y, b)
        assert verify_bmo_to_carleson(binary, uniform_nu, binary_flow, kernel, b).passed


def test_forward_bound_rejects_bad_kernels(binary, uniform_nu, binary_flow, chain):
    with pytest.raises(ValidationError):
        verify_bmo_to_carleson(binary, uniform_nu, binary_flow, decay_kernel(binary, binary_flow, 1.0), np.ones(4))
    nu = BoundaryMeasure([1.0])
    m = induce_flow(chain, nu)
    with pytest.raises(ValidationError):
        verify_bmo_to_carleson(chain, nu, m, Kernel(np.zeros((3, 1)), 1.0), np.ones(1))


def test_single_vertex_kernel_tree():
    t = build_from_parents([None])
    nu = BoundaryMeasure([1.0])
    audit = audit_kernel(t, nu, induce_flow(t, nu), Kernel(np.zeros((1, 1)), 1.0))
    assert audit.passes
