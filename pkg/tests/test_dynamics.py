# tests/test_dynamics.py

import numpy as np
import pytest
from scipy.linalg import expm

from cdforge import dynamics
from cdforge.agp_ansatz import assemble, enumerate_terms
from cdforge.dynamics import (
    TROTTER_ORDERING,
    EvolutionConfig,
    build_hcd,
    cnot_cost,
    evolve,
    fidelity,
    krylov_expmv,
    trotter_evolve,
)
from cdforge.exceptions import DomainError, IntegratorError
from cdforge.operator_core import apply_sum, embed, materialize
from cdforge.schedules_paths import SchedulePlan, schedule_eval


@pytest.mark.parametrize("m, expected", [(1, 0), (2, 3), (3, 14), (4, 61)])
def test_cnot_cost(m, expected):
    assert cnot_cost(m) == expected


def test_cnot_cost_rejects_empty_support():
    with pytest.raises(DomainError):
        cnot_cost(0)


def test_fidelity_properties(rng):
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    assert fidelity(psi, psi) == pytest.approx(1.0)
    assert fidelity(psi, np.exp(0.7j) * psi) == pytest.approx(1.0)
    assert fidelity(np.eye(8)[0], np.eye(8)[3]) == 0.0
    with pytest.raises(DomainError):
        fidelity(psi, psi[:4])


def test_krylov_matches_dense_exponential(rng):
    m = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    H = m + m.conj().T
    psi = rng.normal(size=12) + 1j * rng.normal(size=12)
    psi /= np.linalg.norm(psi)
    out = krylov_expmv(lambda v: H @ v, psi, 0.3)
    np.testing.assert_allclose(out, expm(-0.3j * H) @ psi, atol=1e-9)


def test_krylov_reports_failed_step(rng):
    m = rng.normal(size=(12, 12))
    H = m + m.T
    psi = rng.normal(size=12).astype(complex)
    with pytest.raises(IntegratorError) as excinfo:
        krylov_expmv(lambda v: H @ v, psi, 5.0, max_dim=2, step_index=3)
    assert excinfo.value.step_index == 3


def test_evolution_config_validation():
    assert EvolutionConfig(1.0, driver="cd", mode="wnc", optimizer="local").optimizer == "LOCAL"
    with pytest.raises(DomainError):
        EvolutionConfig(1.0, driver="cd", mode="NC", optimizer="local")
    with pytest.raises(DomainError):
        EvolutionConfig(0.01, dt=0.05)
    with pytest.raises(DomainError):
        EvolutionConfig(1.0, driver="qaoa")


def test_build_hcd_at_start_is_bare_hamiltonian(ising_path):
    path = ising_path(3)
    plan = SchedulePlan("SIN2SIN2", 1.0)
    H = path.terms(0.0)
    term_set = enumerate_terms(path.terms(0.3), path.dterms(0.3), 1)
    hcd = build_hcd(path, term_set, np.ones(len(term_set)), 0.0, plan)
    assert len(hcd) == len(H)
    np.testing.assert_allclose(materialize(hcd), materialize(H))


def test_build_hcd_adds_scaled_agp(ising_path):
    path = ising_path(2)
    plan = SchedulePlan("SIN2", 2.0)
    t = 0.7
    s, s_dot = schedule_eval(plan, t)
    term_set = enumerate_terms(path.terms(s), path.dterms(s), 1)
    alpha = np.linspace(0.1, 0.5, len(term_set))
    hcd = materialize(build_hcd(path, term_set, alpha, t, plan))
    expected = materialize(path.terms(s))
    for term, value in zip(term_set.terms, alpha):
        expected = expected + s_dot * value * embed(term.operator, path.terms(s).full_window).matrix
    np.testing.assert_allclose(hcd, expected, atol=1e-12)


def test_build_hcd_accepts_assembled_agp(ising_path):
    path = ising_path(3)
    plan = SchedulePlan("SIN2SIN2", 1.0)
    s, _ = schedule_eval(plan, 0.4)
    term_set = enumerate_terms(path.terms(s), path.dterms(s), 1)
    alpha = np.linspace(-0.2, 0.3, len(term_set))
    from_terms = build_hcd(path, term_set, alpha, 0.4, plan)
    from_agp = build_hcd(path, None, None, 0.4, plan, agp=assemble(term_set, alpha))
    np.testing.assert_allclose(materialize(from_agp), materialize(from_terms), atol=1e-12)
    assert len(build_hcd(path, None, None, 0.4, plan)) == len(path.terms(s))


@pytest.mark.parametrize("mode", ["WNC", "EXACT"])
def test_evolve_builds_each_step_hamiltonian_with_build_hcd(monkeypatch, ising_path, mode):
    calls = []

    def recording_build_hcd(*args, **kwargs):
        hcd = build_hcd(*args, **kwargs)
        calls.append(hcd)
        return hcd

    monkeypatch.setattr(dynamics, "build_hcd", recording_build_hcd)
    result = evolve(ising_path(2), EvolutionConfig(1.0, driver="cd", mode=mode, dt=0.1, substeps=2))
    assert len(calls) == result.n_steps * 2 == 20
    assert all(len(hcd) > len(ising_path(2).terms(0.5)) for hcd in calls)


def test_initial_state_energy_is_ground_energy(ising_path):
    path = ising_path(3)
    psi = path.initial_state().amplitudes
    energy = np.vdot(psi, apply_sum(path.terms(0.0), psi)).real
    assert energy == pytest.approx(-3.0)


@pytest.mark.parametrize("T", [0.1, 0.5, 2.0])
def test_single_qubit_counterdiabatic_drive_is_transitionless(ising_path, T):
    config = EvolutionConfig(T, driver="cd", mode="WNC", order=1, dt=T / 400)
    result = evolve(ising_path(1, J=0.0), config)
    assert 1.0 - result.fidelity < 1e-8
    assert result.n_steps == 400


def test_exact_agp_drive_reaches_ground_state(ising_path):
    config = EvolutionConfig(0.5, driver="cd", mode="EXACT", dt=0.001)
    result = evolve(ising_path(3), config)
    assert 1.0 - result.fidelity < 1e-6


def test_slow_adiabatic_evolution_stays_in_ground_state(ising_path):
    result = evolve(ising_path(2), EvolutionConfig(50.0))
    assert 1.0 - result.fidelity < 1e-3


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("T", [0.25, 0.5, 1.0])
def test_counterdiabatic_drive_beats_bare_evolution(ising_path, n, T):
    path = ising_path(n)
    bare = evolve(path, EvolutionConfig(T))
    driven = evolve(path, EvolutionConfig(T, driver="cd", mode="WNC", order=1))
    assert driven.fidelity >= bare.fidelity


def test_step_halving_converges(ising_path):
    path = ising_path(3)
    f = [evolve(path, EvolutionConfig(1.0, driver="cd", dt=dt)).fidelity for dt in (0.1, 0.05, 0.025)]
    assert abs(f[1] - f[2]) < abs(f[0] - f[1])


def test_step_halving_meets_absolute_tolerance_at_small_dt(ising_path):
    # midpoint error is second order in dt, so 1e-7 needs dt far below 0.05
    path = ising_path(3)
    f = [
        evolve(path, EvolutionConfig(1.0, driver="cd", dt=dt, krylov_tol=1e-13, track_action=False)).fidelity
        for dt in (0.001, 0.0005)
    ]
    assert abs(f[0] - f[1]) < 1e-7


def test_substeps_refine_like_smaller_dt(ising_path):
    path = ising_path(2)
    fine = evolve(path, EvolutionConfig(1.0, driver="cd", dt=0.025)).fidelity
    sub = evolve(path, EvolutionConfig(1.0, driver="cd", dt=0.05, substeps=2))
    assert sub.n_steps == 20
    assert len(sub.trace) == 20
    assert sub.fidelity == pytest.approx(fine, abs=1e-12)


def test_evolution_is_deterministic(ising_path):
    path = ising_path(2)
    config = EvolutionConfig(0.5, driver="cd", mode="WNC", record_coefficients=True)
    first, second = evolve(path, config), evolve(path, config)
    assert first.trace == second.trace
    assert first.coefficients == second.coefficients
    np.testing.assert_array_equal(first.final_state.amplitudes, second.final_state.amplitudes)


def test_trace_rows_follow_the_schedule(ising_path):
    result = evolve(ising_path(2), EvolutionConfig(1.0, driver="cd", dt=0.1))
    assert len(result.trace) == 10
    assert result.trace[-1].t == pytest.approx(1.0)
    assert result.trace[-1].s == pytest.approx(1.0)
    assert result.trace[-1].fidelity == pytest.approx(result.fidelity)
    assert all(row.action >= 0.0 for row in result.trace)


def test_local_optimizer_evolution_runs(ising_path):
    result = evolve(ising_path(5), EvolutionConfig(1.0, driver="cd", optimizer="local", record_coefficients=True))
    assert 0.0 < result.fidelity <= 1.0
    assert {row.group_id for row in result.coefficients} >= {"k1:0-0", "k1:4-4"}


def test_trotter_cnot_count_on_ising(ising_path):
    _, report = trotter_evolve(ising_path(3), EvolutionConfig(1.0), tau=0.1)
    assert report.n_steps == 10
    assert report.support_sizes == (1, 2, 1, 2, 1)
    assert report.cnots_per_step == (6,) * 10
    assert report.total_cnots == 60
    assert report.ordering == TROTTER_ORDERING


def test_trotter_cnot_count_on_mps(mps_path):
    _, report = trotter_evolve(mps_path(3), EvolutionConfig(1.0), tau=0.1)
    assert report.cnots_per_step == (128,) * 10
    assert report.total_cnots == 1280
    assert 0.0 <= report.fidelity_trotter <= 1.0


def test_trotter_counterdiabatic_terms_add_cost(ising_path):
    path = ising_path(3)
    _, bare = trotter_evolve(path, EvolutionConfig(1.0), tau=0.1)
    _, driven = trotter_evolve(path, EvolutionConfig(1.0, driver="cd"), tau=0.1)
    assert driven.total_cnots > bare.total_cnots
    # ds/dt vanishes at t = T
    assert driven.cnots_per_step[-1] == bare.cnots_per_step[-1]


def test_trotter_error_shrinks_with_step(ising_path):
    path = ising_path(3)
    reference = evolve(path, EvolutionConfig(1.0, dt=0.005)).final_state
    gaps = [1.0 - fidelity(trotter_evolve(path, EvolutionConfig(1.0), tau=tau)[0], reference) for tau in (0.2, 0.1, 0.05, 0.025)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
