# cdforge/dynamics.py

"""
State-vector propagation along a path, with or without counterdiabatic terms.

evolve() freezes H_CD = H(s) + ds/dt A(s) at the midpoint of each step and applies
exp(-i H_CD dt) by Lanczos without materializing H. trotter_evolve() applies the first-order
product formula and counts CNOTs per local exponential.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from cdforge.agp_ansatz import DEFAULT_MAX_WINDOW_SITES, NC, WNC, AnsatzTermSet, assemble, exact_agp
from cdforge.exceptions import DomainError, IntegratorError
from cdforge.operator_core import (
    DEFAULT_DENSE_CAP,
    LocalOperator,
    OperatorSum,
    apply_local,
    apply_sum,
    expm_local,
    materialize,
    support_qubits,
)
from cdforge.schedules_paths import SIN2SIN2, SCHEDULE_KINDS, SchedulePlan, StateVector, schedule_eval
from cdforge.utils.log_generator import setup_pipeline_logger
from cdforge.variational import RegionPlan, optimize_global, optimize_local

log = setup_pipeline_logger(logger_name="Dynamics")

ADIABATIC = "ADIABATIC"
CD = "CD"
EXACT = "EXACT"
GLOBAL = "GLOBAL"
LOCAL = "LOCAL"

TROTTER_ORDERING = "ascending window start; Hamiltonian terms before CD terms"


@dataclass(frozen=True)
class EvolutionConfig:
    total_time: float
    driver: str = ADIABATIC
    mode: str = WNC
    order: int = 1
    optimizer: str = GLOBAL
    region_width: int = 3
    region_stride: int = 1
    dt: float = 0.05
    substeps: int = 1
    schedule: str = SIN2SIN2
    krylov_tol: float = 1e-10
    krylov_max_dim: int = 80
    dense_cap: int = DEFAULT_DENSE_CAP
    ds: float = 0.01
    max_window_sites: int = DEFAULT_MAX_WINDOW_SITES
    track_action: bool = True
    record_coefficients: bool = False

    def __post_init__(self):
        for name in ("driver", "mode", "optimizer", "schedule"):
            object.__setattr__(self, name, str(getattr(self, name)).upper())
        if self.driver not in (ADIABATIC, CD):
            raise DomainError(f"Unknown driver {self.driver!r}")
        if self.mode not in (WNC, NC, EXACT):
            raise DomainError(f"Unknown ansatz mode {self.mode!r}")
        if self.optimizer not in (GLOBAL, LOCAL):
            raise DomainError(f"Unknown optimizer {self.optimizer!r}")
        if self.driver == CD and self.optimizer == LOCAL and self.mode != WNC:
            raise DomainError("Local optimization is defined for the WNC ansatz only")
        if self.schedule not in SCHEDULE_KINDS:
            raise DomainError(f"Unknown schedule {self.schedule!r}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.total_time < self.dt:
            raise DomainError(f"Total time {self.total_time} is shorter than dt={self.dt}")
        if self.order < 1 or self.substeps < 1:
            raise DomainError("order and substeps must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    t: float
    s: float
    fidelity: float
    action: float


@dataclass(frozen=True)
class CoefficientRow:
    t: float
    s: float
    group_id: str
    alpha: float


@dataclass
class EvolutionResult:
    final_state: StateVector
    fidelity: float
    n_steps: int
    trace: List[TraceRow] = field(default_factory=list)
    coefficients: List[CoefficientRow] = field(default_factory=list)


@dataclass
class TrotterCostReport:
    n_steps: int
    tau: float
    support_sizes: Tuple[int, ...]
    cnots_per_step: Tuple[int, ...]
    total_cnots: int
    fidelity_trotter: float
    ordering: str = TROTTER_ORDERING


@dataclass
class _DriveSnapshot:
    """AGP (unscaled by ds/dt) at one value of s plus what the trace needs."""

    agp: Optional[OperatorSum]
    action: float
    term_set: Optional[AnsatzTermSet] = None
    alpha: Optional[np.ndarray] = None


def fidelity(a, b) -> float:
    a = a.amplitudes if isinstance(a, StateVector) else np.asarray(a)
    b = b.amplitudes if isinstance(b, StateVector) else np.asarray(b)
    if a.shape != b.shape:
        raise DomainError(f"State dimensions differ: {a.shape} vs {b.shape}")
    return float(min(abs(np.vdot(a, b)) ** 2, 1.0))


def cnot_cost(m: int) -> int:
    """Upper bound ceil((4^m - 3m - 1) / 4) on CNOTs for a generic m-qubit unitary."""
    if m < 1:
        raise DomainError(f"Support size must be >= 1 qubit, got {m}")
    return -(-(4 ** m - 3 * m - 1) // 4)


def build_hcd(
    path,
    term_set: Optional[AnsatzTermSet],
    alpha,
    t: float,
    plan: SchedulePlan,
    agp: Optional[OperatorSum] = None,
) -> OperatorSum:
    """H(s(t)) followed by the AGP scaled by ds/dt.

    agp, when given, is taken as already assembled and term_set/alpha are ignored;
    with neither, the bare H(s(t)) is returned.
    """
    s, s_dot = schedule_eval(plan, t)
    H = path.terms(s)
    if agp is None and term_set is not None:
        agp = assemble(term_set, alpha)
    if agp is None or s_dot == 0.0:
        return H
    return H.concat(agp.scaled(s_dot))


def krylov_expmv(
    matvec: Callable[[np.ndarray], np.ndarray],
    psi: np.ndarray,
    dt: float,
    tol: float = 1e-10,
    max_dim: int = 80,
    step_index: Optional[int] = None,
) -> np.ndarray:
    """exp(-i dt H) psi for Hermitian H given as a matvec, by Lanczos with full reorthogonalization."""
    beta0 = float(np.linalg.norm(psi))
    if beta0 == 0.0:
        return np.zeros_like(psi)
    basis = [psi / beta0]
    diag: List[float] = []
    offdiag: List[float] = []
    for j in range(max_dim):
        w = matvec(basis[j])
        a = float(np.vdot(basis[j], w).real)
        diag.append(a)
        for v in basis:
            w = w - np.vdot(v, w) * v
        b = float(np.linalg.norm(w))

        m = len(diag)
        tri = np.diag(diag) + np.diag(offdiag, 1) + np.diag(offdiag, -1)
        evals, evecs = np.linalg.eigh(tri)
        y = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :].conj())
        estimate = beta0 * b * abs(y[-1])
        if estimate < tol or b < 1e-12 or m == psi.shape[0]:
            return beta0 * (np.array(basis).T @ y)
        offdiag.append(b)
        basis.append(w / b)

    raise IntegratorError(
        f"Lanczos exponential did not reach tolerance {tol} within {max_dim} vectors (estimate {estimate:.3e})",
        step_index=step_index,
    )


def _dense_action(H: np.ndarray, dH: np.ndarray, A: np.ndarray) -> float:
    residual = dH + 1j * (A @ H - H @ A)
    return float(np.vdot(residual, residual).real / H.shape[0])


def _drive_at(path, s: float, config: EvolutionConfig) -> _DriveSnapshot:
    if config.driver == ADIABATIC:
        return _DriveSnapshot(agp=None, action=float("nan"))

    if config.mode == EXACT:
        H_terms = path.terms(s)
        H = materialize(H_terms, config.dense_cap)
        dH = materialize(path.dterms(s, config.ds), config.dense_cap)
        A = exact_agp(H, dH)
        op = LocalOperator(H_terms.full_window, A, path.local_dim, True)
        agp = OperatorSum((op,), path.n_sites, path.local_dim)
        return _DriveSnapshot(agp=agp, action=_dense_action(H, dH, A))

    if config.optimizer == LOCAL:
        plan = RegionPlan.sliding(path.n_sites, config.region_width, config.region_stride)
        result = optimize_local(
            path, s, config.order, plan, config.ds, config.max_window_sites, with_action=config.track_action
        )
    else:
        result = optimize_global(path, s, config.order, config.mode, config.ds, config.max_window_sites)
    return _DriveSnapshot(
        agp=assemble(result.term_set, result.alpha),
        action=result.action,
        term_set=result.term_set,
        alpha=result.alpha,
    )


def _coefficient_rows(t: float, s: float, snapshot: _DriveSnapshot) -> List[CoefficientRow]:
    if snapshot.term_set is None:
        return []
    labels = snapshot.term_set.group_labels()
    return [CoefficientRow(t, s, label, float(value)) for label, value in zip(labels, snapshot.alpha)]


def evolve(path, config: EvolutionConfig) -> EvolutionResult:
    plan = SchedulePlan(config.schedule, config.total_time)
    n_steps = max(1, int(round(config.total_time / config.dt)))
    step = config.total_time / n_steps
    sub = step / config.substeps

    psi = path.initial_state().amplitudes.copy()
    target = path.target_state()
    result = EvolutionResult(final_state=StateVector(psi, path.local_dim, path.n_sites), fidelity=0.0, n_steps=n_steps)
    log.info(
        "Evolution started",
        log_key="Evolve",
        status="STARTED",
        path=path.kind,
        n_sites=path.n_sites,
        T=config.total_time,
        driver=config.driver,
        mode=config.mode,
        order=config.order,
        optimizer=config.optimizer,
    )

    for k in range(n_steps):
        action = float("nan")
        for m in range(config.substeps):
            t_mid = k * step + (m + 0.5) * sub
            s, _ = schedule_eval(plan, t_mid)
            snapshot = _drive_at(path, s, config)
            action = snapshot.action
            hcd = build_hcd(path, snapshot.term_set, snapshot.alpha, t_mid, plan, agp=snapshot.agp)
            if config.record_coefficients:
                result.coefficients.extend(_coefficient_rows(t_mid, s, snapshot))

            psi = krylov_expmv(
                lambda v: apply_sum(hcd, v),
                psi,
                sub,
                config.krylov_tol,
                config.krylov_max_dim,
                step_index=k,
            )
            norm = float(np.linalg.norm(psi))
            if abs(norm - 1.0) > 1e-9:
                log.warning("Norm drift before renormalization", log_key="Evolve", status="NORM_DRIFT", step=k, drift=norm - 1.0)
            psi = psi / norm

        t_end = (k + 1) * step
        s_end, _ = schedule_eval(plan, t_end)
        result.trace.append(TraceRow(t_end, s_end, fidelity(target.amplitudes, psi), action))
        log.debug("Step done", log_key="Evolve", step=k, t=t_end, fidelity=result.trace[-1].fidelity)

    result.final_state = StateVector(psi, path.local_dim, path.n_sites)
    result.fidelity = fidelity(target, result.final_state)
    log.info("Evolution finished", log_key="Evolve", status="COMPLETED", fidelity=result.fidelity, infidelity=1.0 - result.fidelity)
    return result


def _apply_exponentials(terms: List[LocalOperator], factor: float, psi: np.ndarray, n_sites: int) -> Tuple[np.ndarray, int]:
    """Apply exp(-i factor h) for each term in ascending window order; return the CNOT count."""
    cnots = 0
    for term in sorted(terms, key=lambda op: op.window.lo):
        unitary = LocalOperator(term.window, expm_local(term, -1j * factor), term.local_dim)
        psi = apply_local(unitary, psi, n_sites)
        cnots += cnot_cost(support_qubits(term))
    return psi, cnots


def trotter_evolve(path, config: EvolutionConfig, tau: float = 0.05) -> Tuple[StateVector, TrotterCostReport]:
    if not tau > 0:
        raise DomainError(f"Trotter step must be positive, got {tau}")
    plan = SchedulePlan(config.schedule, config.total_time)
    n_steps = max(1, int(round(config.total_time / tau)))
    tau_eff = config.total_time / n_steps

    psi = path.initial_state().amplitudes.copy()
    target = path.target_state()
    cnots_per_step: List[int] = []
    support_sizes: Tuple[int, ...] = ()

    for k in range(1, n_steps + 1):
        s, s_dot = schedule_eval(plan, k * tau_eff)
        H = path.terms(s)
        if not support_sizes:
            support_sizes = tuple(support_qubits(term) for term in sorted(H.terms, key=lambda op: op.window.lo))
        psi, step_cnots = _apply_exponentials(list(H.terms), tau_eff, psi, path.n_sites)

        if config.driver == CD and s_dot != 0.0:
            snapshot = _drive_at(path, s, config)
            cd_terms = [term for term in snapshot.agp.terms if term.max_norm() > 0]
            psi, cd_cnots = _apply_exponentials(cd_terms, tau_eff * s_dot, psi, path.n_sites)
            step_cnots += cd_cnots
        cnots_per_step.append(step_cnots)

    final_state = StateVector(psi / np.linalg.norm(psi), path.local_dim, path.n_sites)
    report = TrotterCostReport(
        n_steps=n_steps,
        tau=tau_eff,
        support_sizes=support_sizes,
        cnots_per_step=tuple(cnots_per_step),
        total_cnots=int(sum(cnots_per_step)),
        fidelity_trotter=fidelity(target, final_state),
    )
    log.info(
        "Trotter evolution finished",
        log_key="TrotterEvolve",
        status="COMPLETED",
        n_steps=n_steps,
        total_cnots=report.total_cnots,
        fidelity=report.fidelity_trotter,
    )
    return final_state, report

