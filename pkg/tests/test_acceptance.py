# tests/test_acceptance.py

"""Desk-scale reproductions of the benchmark trends; run with `pytest -m slow`."""

import math

import numpy as np
import pytest

from cdforge.analysis import fit_scaling, predict_Tp, search_Tp
from cdforge.dynamics import EvolutionConfig, evolve, trotter_evolve

pytestmark = pytest.mark.slow

END_MATTER_T = (0.5, 1.0, 2.0, 4.0, 8.0)


def _infidelity(path, T, **driver):
    config = EvolutionConfig(T, max_window_sites=8, **driver)
    return 1.0 - evolve(path, config).fidelity


def test_end_matter_orderings(ising_path):
    path = ising_path(15)
    for T in END_MATTER_T:
        bare = _infidelity(path, T)
        nc = [_infidelity(path, T, driver="cd", mode="NC", order=k) for k in (1, 2, 3)]
        wnc_global = _infidelity(path, T, driver="cd", mode="WNC", order=1)
        wnc_local = _infidelity(path, T, driver="cd", mode="WNC", order=1, optimizer="local", track_action=False)

        assert bare > nc[0] > nc[1] >= nc[2]
        assert wnc_global <= 2.0 * nc[2]
        assert abs(math.log10(wnc_local / wnc_global)) <= 0.5


def test_mps_family_speedup_ordering(mps_path):
    path = mps_path(6, xi=3.8)
    wins = 0
    grid = (2.0, 4.0, 6.0, 8.0)
    for T in grid:
        bare = _infidelity(path, T)
        nc1 = _infidelity(path, T, driver="cd", mode="NC", order=1)
        nc2 = _infidelity(path, T, driver="cd", mode="NC", order=2)
        wnc1 = _infidelity(path, T, driver="cd", mode="WNC", order=1)
        assert wnc1 < nc1 < bare
        wins += wnc1 <= nc2
    assert wins >= 0.75 * len(grid)


def test_trotter_gate_cost(mps_path):
    path = mps_path(3, xi=3.8)
    budget = None
    for T in (0.25, 0.5, 1.0, 2.0):
        _, report = trotter_evolve(path, EvolutionConfig(T, driver="cd", mode="WNC", order=1), tau=0.05)
        if report.fidelity_trotter >= 0.90:
            budget = report.total_cnots
            break
    assert budget is not None and budget <= 2000

    # 128 CNOTs per bare step at tau = 0.05
    for T in np.arange(0.05, 3.0 * budget / 128 * 0.05, 0.05):
        _, report = trotter_evolve(path, EvolutionConfig(float(T), dt=0.05), tau=0.05)
        if report.total_cnots < 3 * budget:
            assert report.fidelity_trotter < 0.90


def test_adiabatic_scaling_predicts_direct_runtime(ising_path):
    grid_T = (1.0, 2.0, 4.0, 8.0)
    sizes = (6, 8, 10, 12)
    fits = []
    for T in grid_T:
        samples = [(n, evolve(ising_path(n), EvolutionConfig(T)).fidelity) for n in sizes]
        fit = fit_scaling(samples, T)
        assert fit.residual < 0.05
        fits.append(fit)

    f_target = 0.9
    predicted = predict_Tp(fits, 14, f_target)
    direct = search_Tp(lambda T: evolve(ising_path(14), EvolutionConfig(T)).fidelity, f_target, 1.0, 8.0, rel_tol=0.01)
    assert abs(predicted - direct) / direct < 0.10
