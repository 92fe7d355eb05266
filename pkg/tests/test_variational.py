# tests/test_variational.py

import numpy as np
import pytest

from cdforge.agp_ansatz import NC, WNC, assemble, enumerate_terms
from cdforge.exceptions import DegenerateSystemError, DomainError
from cdforge.operator_core import PAULI_Y, LocalOperator, OperatorSum, SiteWindow, embed, materialize
from cdforge.variational import (
    GramSystem,
    RegionPlan,
    action_value,
    build_gram,
    build_term_set,
    optimize_global,
    optimize_local,
    solve,
)


def test_solve_drops_null_directions():
    alpha = solve(GramSystem(np.array([[2.0, 0.0], [0.0, 0.0]]), np.array([4.0, 0.0]), 10.0))
    np.testing.assert_allclose(alpha, [2.0, 0.0])


def test_solve_identity_returns_b():
    b = np.array([0.3, -1.2, 5.0])
    np.testing.assert_allclose(solve(GramSystem(np.eye(3), b, 1.0)), b)


def test_solve_recovers_known_solution(rng):
    m = rng.normal(size=(6, 6))
    G = m @ m.T + 6 * np.eye(6)
    expected = rng.normal(size=6)
    gram = GramSystem(G, G @ expected, 1.0)
    alpha = solve(gram)
    np.testing.assert_allclose(alpha, expected, atol=1e-10)
    assert gram.residual(alpha) < 1e-9


def test_solve_zero_rhs_gives_zero_coefficients():
    np.testing.assert_array_equal(solve(GramSystem(np.array([[2.0, 0.0], [0.0, 0.0]]), np.zeros(2), 0.0)), 0.0)
    np.testing.assert_array_equal(solve(GramSystem(np.zeros((2, 2)), np.zeros(2), 0.0)), 0.0)


def test_solve_raises_on_vanishing_gram_with_nonzero_rhs():
    with pytest.raises(DegenerateSystemError):
        solve(GramSystem(np.zeros((2, 2)), np.array([1.0, 0.0]), 1.0))


def test_gram_system_validation():
    with pytest.raises(DomainError):
        GramSystem(np.array([[1.0, 0.0], [0.0, -1.0]]), np.zeros(2), 0.0)
    with pytest.raises(DomainError):
        GramSystem(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), 0.0)
    with pytest.raises(DomainError):
        GramSystem(np.eye(2), np.zeros(3), 0.0)


def test_action_value_at_zero_and_optimum():
    G = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -0.3])
    gram = GramSystem(G, b, 3.0)
    assert action_value(gram, np.zeros(2)) == pytest.approx(3.0)
    alpha = solve(gram)
    assert action_value(gram, alpha) == pytest.approx(3.0 - b @ np.linalg.solve(G, b))
    with pytest.raises(DomainError):
        action_value(gram, np.zeros(3))


@pytest.mark.parametrize("s", np.linspace(0.0, 1.0, 20))
def test_single_qubit_first_order_is_exact(ising_path, s):
    h_x, h_z = 2.0, 1.0
    a, b = (1 - s) * h_z, s * h_x
    result = optimize_global(ising_path(1, J=0.0), s, 1)
    agp = materialize(assemble(result.term_set, result.alpha))
    np.testing.assert_allclose(agp, h_x * h_z / (2 * (a * a + b * b)) * PAULI_Y, atol=1e-10)
    assert result.action == pytest.approx((a * -h_z + b * h_x) ** 2 / (a * a + b * b), abs=1e-10)


def _dense_gram(term_set, H, dH):
    full = SiteWindow(0, term_set.n_sites)
    H_dense, dH_dense = materialize(H), materialize(dH)
    dim = H_dense.shape[0]
    groups = [np.zeros_like(H_dense) for _ in range(term_set.group_count)]
    for term, group in zip(term_set.terms, term_set.tying):
        groups[group] += embed(term.operator, full).matrix
    commutators = [1j * (A @ H_dense - H_dense @ A) for A in groups]
    G = np.array([[np.vdot(c1, c2).real / dim for c2 in commutators] for c1 in commutators])
    b = np.array([-np.vdot(c, dH_dense).real / dim for c in commutators])
    return G, b, np.vdot(dH_dense, dH_dense).real / dim


@pytest.mark.parametrize("mode", [WNC, NC])
def test_gram_matches_dense_computation_on_ising(ising_path, mode):
    path = ising_path(3)
    result = optimize_global(path, 0.4, 2, mode=mode)
    G, b, norm2 = _dense_gram(result.term_set, path.terms(0.4), path.dterms(0.4))
    np.testing.assert_allclose(result.gram.G, G, atol=1e-10 * max(1.0, np.max(np.abs(G))))
    np.testing.assert_allclose(result.gram.b, b, atol=1e-10 * max(1.0, np.max(np.abs(b))))
    assert result.gram.dH_norm2 == pytest.approx(norm2)
    reference = np.linalg.pinv(G, rcond=1e-10, hermitian=True) @ b
    assert result.action == pytest.approx(action_value(result.gram, reference), abs=1e-9)


def test_gram_matches_dense_computation_on_mps(mps_path):
    path = mps_path(2, g=-0.504672)
    result = optimize_global(path, 0.4, 1)
    G, b, norm2 = _dense_gram(result.term_set, path.terms(0.4), path.dterms(0.4))
    np.testing.assert_allclose(result.gram.G, G, atol=1e-10 * max(1.0, np.max(np.abs(G))))
    np.testing.assert_allclose(result.gram.b, b, atol=1e-10 * max(1.0, np.max(np.abs(b))))
    assert result.gram.dH_norm2 == pytest.approx(norm2)


@pytest.mark.parametrize("mode", [WNC, NC])
def test_gram_is_invariant_under_reordering_the_hamiltonian(ising_path, mode):
    path = ising_path(4)
    H, dH = path.terms(0.4), path.dterms(0.4)
    reversed_H = OperatorSum(tuple(reversed(H.terms)), H.n_sites, H.local_dim)

    systems = []
    for terms in (H, reversed_H):
        term_set = build_term_set(terms, dH, 2, mode)
        gram = build_gram(term_set, terms, dH)
        alpha = solve(gram)
        systems.append((term_set, gram, alpha))
    (set_a, gram_a, alpha_a), (set_b, gram_b, alpha_b) = systems

    assert len(set_a) == len(set_b)
    scale = max(1.0, np.max(np.abs(gram_a.G)))
    np.testing.assert_allclose(np.sort(np.diag(gram_a.G)), np.sort(np.diag(gram_b.G)), atol=1e-12 * scale)
    np.testing.assert_allclose(np.linalg.eigvalsh(gram_a.G), np.linalg.eigvalsh(gram_b.G), atol=1e-10 * scale)
    assert action_value(gram_a, alpha_a) == pytest.approx(action_value(gram_b, alpha_b), abs=1e-10)
    np.testing.assert_allclose(
        materialize(assemble(set_a, alpha_a)), materialize(assemble(set_b, alpha_b)), atol=1e-9
    )


def test_zero_derivative_gives_zero_coefficients(ising_path):
    path = ising_path(2)
    H, dH = path.terms(0.5), path.dterms(0.5)
    term_set = enumerate_terms(H, dH, 1)
    zero = OperatorSum(tuple(LocalOperator(t.window, np.zeros_like(t.matrix), 2, True) for t in dH), 2)
    gram = build_gram(term_set, H, zero)
    np.testing.assert_array_equal(solve(gram), 0.0)


def test_ising_action_ordering(ising_path):
    path = ising_path(4)
    wnc = optimize_global(path, 0.4, 1, mode=WNC)
    nc = optimize_global(path, 0.4, 1, mode=NC)
    assert nc.alpha.shape == (1,)
    assert wnc.action <= nc.action + 1e-12
    assert nc.action <= wnc.gram.dH_norm2 + 1e-12


def test_mps_action_ordering(mps_path):
    path = mps_path(3)
    wnc = optimize_global(path, 0.4, 1, mode=WNC)
    nc = optimize_global(path, 0.4, 1, mode=NC)
    assert wnc.action <= nc.action + 1e-12
    assert nc.action <= wnc.gram.dH_norm2 + 1e-12


def test_higher_order_does_not_raise_the_action(ising_path):
    path = ising_path(4)
    first = optimize_global(path, 0.4, 1, mode=NC)
    second = optimize_global(path, 0.4, 2, mode=NC)
    assert second.alpha.shape == (2,)
    assert second.action <= first.action + 1e-12


def test_region_plan_sliding():
    plan = RegionPlan.sliding(15, 3, 1)
    assert len(plan.regions) == 13
    assert plan.covers(15)
    assert RegionPlan.sliding(2, 3).regions == (SiteWindow(0, 2),)
    assert [r.lo for r in RegionPlan.sliding(7, 3, 2).regions] == [0, 2, 4]
    assert [r.lo for r in RegionPlan.sliding(8, 3, 2).regions] == [0, 2, 4, 5]
    with pytest.raises(DomainError):
        RegionPlan.sliding(5, 0)


def test_local_with_one_region_equals_global(ising_path):
    path = ising_path(5)
    local = optimize_local(path, 0.35, 1, RegionPlan.single(5))
    best = optimize_global(path, 0.35, 1)
    np.testing.assert_allclose(local.alpha, best.alpha, atol=1e-12)
    assert local.action == pytest.approx(best.action)
    assert local.uncovered_terms == 0


def test_local_regions_cover_every_first_order_term(ising_path):
    path = ising_path(8)
    result = optimize_local(path, 0.5, 1, RegionPlan.sliding(8, 3, 1))
    assert result.uncovered_terms == 0
    assert not result.skipped_regions
    assert np.all(result.alpha != 0.0)
    assert result.action >= optimize_global(path, 0.5, 1).action - 1e-12


def test_local_coefficients_are_uniform_in_the_bulk(ising_path):
    n = 15
    path = ising_path(n)
    result = optimize_local(path, 0.5, 1, RegionPlan.sliding(n, 3, 1), with_action=False)
    by_tuple = {term.index_tuple: value for term, value in zip(result.term_set.terms, result.alpha)}
    bulk = [by_tuple[(j, j)] for j in range(2, n - 2)]
    np.testing.assert_allclose(bulk, bulk[0], atol=1e-8)
    bond = [by_tuple[(n + j, j)] for j in range(2, n - 3)]
    np.testing.assert_allclose(bond, bond[0], atol=1e-8)
    assert np.isnan(result.action)


def test_local_rejects_plan_that_misses_sites(ising_path):
    path = ising_path(5)
    with pytest.raises(DomainError):
        optimize_local(path, 0.5, 1, RegionPlan((SiteWindow(0, 3),)))
