# cdforge/schedules_paths.py

"""
Schedules s(t) and the two Hamiltonian paths H(s) = sum_j h_j(s).

Ising path:  H(s) = (1-s) h_z sum Z_j + s (h_x sum X_j + J sum Z_j Z_{j+1}) on N qubits.
MPS path:    frustration-free parent Hamiltonian of the D=2 MPS family interpolated with
             Q_v(s) = s Q_v + (1-s) 1, on N_p qudits of dimension d=4 (N = 2 N_p qubits).
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from cdforge.exceptions import DegenerateKernelError, DomainError, SingularityError, StructuralError
from cdforge.operator_core import (
    DEFAULT_DENSE_CAP,
    PAULI_X,
    PAULI_Z,
    LocalOperator,
    OperatorSum,
    SiteWindow,
    check_dense_dim,
    ground_state,
    pauli_string,
)
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="SchedulesPaths")

SIN2 = "SIN2"
SIN2SIN2 = "SIN2SIN2"
SCHEDULE_KINDS = (SIN2, SIN2SIN2)

MPS_LOCAL_DIM = 4
MPS_BOND_DIM = 2


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class SchedulePlan:
    kind: str
    total_time: float

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise DomainError(f"Unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if not self.total_time > 0:
            raise DomainError(f"Total time must be positive, got {self.total_time}")


def schedule_eval(plan: SchedulePlan, t: float) -> Tuple[float, float]:
    """Return (s(t), ds/dt) with the analytic derivative."""
    T = plan.total_time
    slack = 1e-12 * T
    if t < -slack or t > T + slack:
        raise DomainError(f"t={t} outside [0, {T}]")
    t = min(max(t, 0.0), T)
    if t == 0.0:
        return 0.0, 0.0
    if t == T:
        return 1.0, 0.0

    phase = math.pi * t / (2.0 * T)
    inner = math.sin(phase) ** 2
    inner_dot = math.sin(2.0 * phase) * math.pi / (2.0 * T)
    if plan.kind == SIN2:
        return inner, inner_dot

    outer = 0.5 * math.pi * inner
    s = math.sin(outer) ** 2
    s_dot = math.sin(2.0 * outer) * 0.5 * math.pi * inner_dot
    return s, s_dot


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray = field(repr=False)
    local_dim: int
    n_sites: int

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.shape[0] != self.local_dim ** self.n_sites:
            raise DomainError(
                f"State of length {amplitudes.shape[0]} does not match {self.local_dim}**{self.n_sites}"
            )
        object.__setattr__(self, "amplitudes", amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        norm = self.norm()
        if norm < 1e-300:
            raise SingularityError("Cannot normalize a zero state")
        return StateVector(self.amplitudes / norm, self.local_dim, self.n_sites)


# ---------------------------------------------------------------- Ising path

@dataclass(frozen=True)
class IsingPathSpec:
    n: int
    J: float = 1.0
    h_x: float = 2.0
    h_z: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"Ising chain needs at least one qubit, got {self.n}")


def ising_terms(spec: IsingPathSpec, s: float) -> OperatorSum:
    """N single-site terms, then N-1 bond terms, in site order."""
    single = (1.0 - s) * spec.h_z * PAULI_Z + s * spec.h_x * PAULI_X
    terms = [LocalOperator(SiteWindow(j, j + 1), single, 2, True) for j in range(spec.n)]
    terms += [pauli_string("ZZ", j, s * spec.J) for j in range(spec.n - 1)]
    return OperatorSum(tuple(terms), spec.n, 2)


def ising_dterms(spec: IsingPathSpec) -> OperatorSum:
    """Analytic d/ds of ising_terms; the path is linear so this is s-independent."""
    single = -spec.h_z * PAULI_Z + spec.h_x * PAULI_X
    terms = [LocalOperator(SiteWindow(j, j + 1), single, 2, True) for j in range(spec.n)]
    terms += [pauli_string("ZZ", j, spec.J) for j in range(spec.n - 1)]
    return OperatorSum(tuple(terms), spec.n, 2)


# ---------------------------------------------------------------- MPS path

@dataclass(frozen=True)
class MpsPathSpec:
    n_p: int
    g: float
    kernel_gap_tol: float = 1e-8
    boundary_left: Tuple[complex, complex] = (1.0, 0.0)
    boundary_right: Tuple[complex, complex] = (1.0, 0.0)

    def __post_init__(self):
        if self.n_p < 2:
            raise DomainError(f"MPS path needs at least two qudits, got {self.n_p}")
        # g = -1 (cluster state) is admitted as the closed end of the family.
        if not -1.0 <= self.g < 0.0:
            raise DomainError(f"g must lie in [-1, 0), got {self.g}")


def mps_tensors(g: float) -> np.ndarray:
    """A^i_{alpha beta} for i = 0..3, shape (4, 2, 2)."""
    return np.array(
        [
            [[0.0, 0.0], [1.0, 1.0]],
            [[0.0, 0.0], [1.0, g]],
            [[g, g], [0.0, 0.0]],
            [[1.0, g], [0.0, 0.0]],
        ],
        dtype=complex,
    )


def local_map(g: float, s: float) -> np.ndarray:
    """Q_v(s) = s Q_v + (1-s) 1 as a 4x4 matrix, rows i, columns 2*alpha + beta."""
    q = mps_tensors(g).reshape(MPS_LOCAL_DIM, MPS_BOND_DIM * MPS_BOND_DIM)
    return s * q + (1.0 - s) * np.eye(MPS_LOCAL_DIM)


def _virtual_state(spec: MpsPathSpec) -> np.ndarray:
    """Boundary (x) Phi+ (x) ... (x) boundary over virtual qubits a_0 b_0 a_1 b_1 ..."""
    phi_plus = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / math.sqrt(2.0)
    left = np.asarray(spec.boundary_left, dtype=complex)
    right = np.asarray(spec.boundary_right, dtype=complex)
    vec = left / np.linalg.norm(left)
    for _ in range(spec.n_p - 1):
        vec = np.kron(vec, phi_plus)
    return np.kron(vec, right / np.linalg.norm(right))


def mps_state(spec: MpsPathSpec, s: float, cap: int = DEFAULT_DENSE_CAP) -> StateVector:
    """Normalized (x)_v Q_v(s) applied to the entangled-pair state, grouped into d=4 qudits."""
    check_dense_dim(spec.n_p, MPS_LOCAL_DIM, cap)
    q = local_map(spec.g, s)
    psi = _virtual_state(spec).reshape((MPS_LOCAL_DIM,) * spec.n_p)
    for v in range(spec.n_p):
        psi = np.moveaxis(np.tensordot(q, psi, axes=([1], [v])), 0, v)
    psi = psi.reshape(-1)

    norm = float(np.linalg.norm(psi))
    if norm < 1e-14:
        raise SingularityError(f"MPS state vanishes at s={s}, g={spec.g} (non-injective local map)")
    return StateVector(psi / norm, MPS_LOCAL_DIM, spec.n_p)


def _reduced_density(state: StateVector, lo: int, width: int) -> np.ndarray:
    d = state.local_dim
    tensor = state.amplitudes.reshape(d ** lo, d ** width, d ** (state.n_sites - lo - width))
    return np.einsum("aib,ajb->ij", tensor, tensor.conj())


def _kernel_projector(rho: np.ndarray, kernel_dim: int, gap_tol: float, where: str) -> np.ndarray:
    try:
        evals, evecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    except np.linalg.LinAlgError as error:
        raise DegenerateKernelError(f"Eigendecomposition of rho on {where} failed: {error}") from error
    gap = evals[kernel_dim] - evals[kernel_dim - 1]
    if gap < gap_tol:
        raise DegenerateKernelError(
            f"Kernel of rho on {where} not separated: gap {gap:.3e} < {gap_tol:.1e}", eigenvalues=evals
        )
    kernel = evecs[:, :kernel_dim]
    projector = kernel @ kernel.conj().T
    return 0.5 * (projector + projector.conj().T)


def _virtual_rank(spec: MpsPathSpec, lo: int, hi: int) -> int:
    """Upper bound on the rank of rho on qudits [lo, hi): open virtual legs at the block edges."""
    left = 1 if lo == 0 else MPS_BOND_DIM
    right = 1 if hi == spec.n_p else MPS_BOND_DIM
    return left * right


def mps_parent_terms(spec: MpsPathSpec, s: float, cap: int = DEFAULT_DENSE_CAP) -> OperatorSum:
    """Kernel projectors of rho_e on every edge, then single-qudit boundary projectors at both ends."""
    state = mps_state(spec, s, cap)
    d = MPS_LOCAL_DIM
    terms: List[LocalOperator] = []

    for v in range(spec.n_p - 1):
        kernel_dim = d * d - _virtual_rank(spec, v, v + 2)
        rho = _reduced_density(state, v, 2)
        projector = _kernel_projector(rho, kernel_dim, spec.kernel_gap_tol, f"edge ({v},{v + 1}) at s={s}")
        terms.append(LocalOperator(SiteWindow(v, v + 2), projector, d, True))

    for v in (0, spec.n_p - 1):
        kernel_dim = d - MPS_BOND_DIM
        rho = _reduced_density(state, v, 1)
        projector = _kernel_projector(rho, kernel_dim, spec.kernel_gap_tol, f"boundary qudit {v} at s={s}")
        terms.append(LocalOperator(SiteWindow(v, v + 1), projector, d, True))

    log.debug("Parent Hamiltonian built", log_key="MpsParentTerms", n_p=spec.n_p, g=spec.g, s=s, term_count=len(terms))
    return OperatorSum(tuple(terms), spec.n_p, d)


def xi_of_g(g: float) -> float:
    if not -1.0 < g < 0.0:
        raise DomainError(f"xi_of_g needs g in (-1, 0), got {g}")
    return 1.0 / abs(math.log((1.0 - g) / (1.0 + g)))


def g_of_xi(xi: float) -> float:
    if not xi > 0:
        raise DomainError(f"g_of_xi needs xi > 0, got {xi}")
    r = math.exp(1.0 / xi)
    return (1.0 - r) / (1.0 + r)


# ---------------------------------------------------------------- derivatives

def difference_terms(plus: OperatorSum, minus: OperatorSum, ds: float) -> OperatorSum:
    """Term-wise central difference of two term lists evaluated at s +- ds."""
    if len(plus) != len(minus):
        raise StructuralError(f"Term counts differ across s +- ds: {len(plus)} vs {len(minus)}")
    terms = []
    for index, (p, m) in enumerate(zip(plus.terms, minus.terms)):
        if p.window != m.window:
            raise StructuralError(f"Term {index} window changed across s +- ds: {p.window} vs {m.window}")
        terms.append(LocalOperator(p.window, (p.matrix - m.matrix) / (2.0 * ds), p.local_dim, True))
    return OperatorSum(tuple(terms), plus.n_sites, plus.local_dim)


def dterms_fd(path, s: float, ds: float = 0.01) -> OperatorSum:
    """Central finite difference (h_j(s+ds) - h_j(s-ds)) / (2 ds) for any path."""
    if not ds > 0:
        raise DomainError(f"Finite-difference step must be positive, got {ds}")
    return difference_terms(path.terms(s + ds), path.terms(s - ds), ds)


# ---------------------------------------------------------------- path objects

class IsingPath:
    """Linear Ising interpolation; dterms uses the analytic derivative."""

    kind = "ising"
    local_dim = 2

    def __init__(self, spec: IsingPathSpec, cap: int = DEFAULT_DENSE_CAP):
        self.spec = spec
        self.cap = cap
        self._dterms = ising_dterms(spec)

    @property
    def n_sites(self) -> int:
        return self.spec.n

    def terms(self, s: float) -> OperatorSum:
        return ising_terms(self.spec, s)

    def dterms(self, s: float, ds: float = 0.01) -> OperatorSum:
        return self._dterms

    def initial_state(self) -> StateVector:
        _, vec = ground_state(self.terms(0.0), cap=self.cap)
        return StateVector(vec, 2, self.spec.n).normalize()

    def target_state(self) -> StateVector:
        _, vec = ground_state(self.terms(1.0), cap=self.cap)
        return StateVector(vec, 2, self.spec.n).normalize()

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "N": self.spec.n, "J": self.spec.J, "h_x": self.spec.h_x, "h_z": self.spec.h_z}


class MpsPath:
    """Parent-Hamiltonian path of the MPS family; dterms uses finite differences."""

    kind = "mps"
    local_dim = MPS_LOCAL_DIM

    def __init__(self, spec: MpsPathSpec, cap: int = DEFAULT_DENSE_CAP):
        self.spec = spec
        self.cap = cap

    @property
    def n_sites(self) -> int:
        return self.spec.n_p

    def terms(self, s: float) -> OperatorSum:
        return mps_parent_terms(self.spec, s, self.cap)

    def dterms(self, s: float, ds: float = 0.01) -> OperatorSum:
        return dterms_fd(self, s, ds)

    def initial_state(self) -> StateVector:
        return mps_state(self.spec, 0.0, self.cap)

    def target_state(self) -> StateVector:
        return mps_state(self.spec, 1.0, self.cap)

    def describe(self) -> Dict[str, Any]:
        xi = xi_of_g(self.spec.g) if self.spec.g > -1.0 else 0.0
        return {"kind": self.kind, "N_p": self.spec.n_p, "N_qubits": 2 * self.spec.n_p, "g": self.spec.g, "xi": xi}


def build_path(path_config: Dict[str, Any], cap: int = DEFAULT_DENSE_CAP):
    """Path object from a config block: {"kind": "ising", "N": ...} or {"kind": "mps", "N_p": ..., "g"|"xi": ...}."""
    kind = path_config.get("kind")
    if kind == "ising":
        spec = IsingPathSpec(
            n=int(path_config["N"]),
            J=float(path_config.get("J", 1.0)),
            h_x=float(path_config.get("h_x", 2.0)),
            h_z=float(path_config.get("h_z", 1.0)),
        )
        return IsingPath(spec, cap)
    if kind == "mps":
        if "g" in path_config and path_config["g"] is not None:
            g = float(path_config["g"])
        elif "xi" in path_config and path_config["xi"] is not None:
            g = g_of_xi(float(path_config["xi"]))
        else:
            raise DomainError("MPS path config needs either 'g' or 'xi'")
        spec = MpsPathSpec(
            n_p=int(path_config["N_p"]),
            g=g,
            kernel_gap_tol=float(path_config.get("kernel_gap_tol", 1e-8)),
        )
        return MpsPath(spec, cap)
    raise DomainError(f"Unknown path kind {kind!r}")
