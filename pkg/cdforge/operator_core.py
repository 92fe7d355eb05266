# cdforge/operator_core.py

"""
Algebra of geometrically local operators on an open 1D chain of uniform local dimension d.

Every operator lives on a contiguous SiteWindow and is stored as a dense matrix of
dimension d**width. Inner products use the normalized trace Tr(A^dagger B) / d**n, so
values do not depend on the chain length and stay O(1).
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from cdforge.exceptions import DomainError, ResourceError
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="OperatorCore")

DEFAULT_DENSE_CAP = 2 ** 16
ZERO_RTOL = 1e-12
HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True, order=True)
class SiteWindow:
    """Half-open interval [lo, hi) of chain sites."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.hi <= self.lo:
            raise DomainError(f"Invalid site window [{self.lo}, {self.hi})")

    @property
    def width(self) -> int:
        return self.hi - self.lo

    def overlaps(self, other: "SiteWindow") -> bool:
        return self.lo < other.hi and other.lo < self.hi

    def contains(self, other: "SiteWindow") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def union(self, other: "SiteWindow") -> "SiteWindow":
        """Smallest window covering both (interval hull)."""
        return SiteWindow(min(self.lo, other.lo), max(self.hi, other.hi))

    def __repr__(self):
        return f"[{self.lo},{self.hi})"


class ZeroMarker:
    """Result of a commutator that vanishes identically or below the pruning threshold."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ZERO"

    def __bool__(self):
        return False


ZERO = ZeroMarker()


def _max_norm(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


@dataclass(frozen=True)
class LocalOperator:
    """Dense operator acting on a window of sites; the matrix is frozen after construction."""

    window: SiteWindow
    matrix: np.ndarray = field(repr=False)
    local_dim: int = 2
    hermitian: bool = False

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        dim = self.local_dim ** self.window.width
        if matrix.shape != (dim, dim):
            raise DomainError(
                f"Matrix shape {matrix.shape} does not match d**width = {dim} on window {self.window}"
            )
        if self.hermitian:
            scale = _max_norm(matrix)
            if _max_norm(matrix - matrix.conj().T) > HERMITIAN_RTOL * max(scale, 1e-300):
                raise DomainError(f"Operator on {self.window} flagged Hermitian but is not")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def max_norm(self) -> float:
        return _max_norm(self.matrix)

    def scaled(self, factor: complex) -> "LocalOperator":
        hermitian = self.hermitian and np.isreal(factor)
        return LocalOperator(self.window, factor * self.matrix, self.local_dim, hermitian)

    def normalized_trace(self) -> complex:
        return complex(np.trace(self.matrix)) / self.dim


@dataclass(frozen=True)
class OperatorSum:
    """Ordered list of local terms on a chain of n_sites sites."""

    terms: Tuple[LocalOperator, ...]
    n_sites: int
    local_dim: int = 2

    def __post_init__(self):
        terms = tuple(self.terms)
        if self.n_sites < 1:
            raise DomainError(f"Chain length must be positive, got {self.n_sites}")
        for index, term in enumerate(terms):
            if term.local_dim != self.local_dim:
                raise DomainError(f"Term {index} has local_dim {term.local_dim}, expected {self.local_dim}")
            if term.window.hi > self.n_sites:
                raise DomainError(f"Term {index} window {term.window} exceeds chain of {self.n_sites} sites")
        object.__setattr__(self, "terms", terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __getitem__(self, index):
        return self.terms[index]

    @property
    def full_window(self) -> SiteWindow:
        return SiteWindow(0, self.n_sites)

    def scaled(self, factor: float) -> "OperatorSum":
        return OperatorSum(tuple(term.scaled(factor) for term in self.terms), self.n_sites, self.local_dim)

    def concat(self, other: "OperatorSum") -> "OperatorSum":
        if other.n_sites != self.n_sites or other.local_dim != self.local_dim:
            raise DomainError("Cannot concatenate operator sums on different chains")
        return OperatorSum(self.terms + other.terms, self.n_sites, self.local_dim)

    def restricted(self, region: SiteWindow) -> Tuple["OperatorSum", Tuple[int, ...]]:
        """Terms fully supported inside region, with their indices in this sum."""
        indices = tuple(i for i, term in enumerate(self.terms) if region.contains(term.window))
        return OperatorSum(tuple(self.terms[i] for i in indices), self.n_sites, self.local_dim), indices


def embed(op: LocalOperator, target: SiteWindow) -> LocalOperator:
    """Return identity (x) op (x) identity on target, site order preserved."""
    if not target.contains(op.window):
        raise DomainError(f"Target window {target} does not contain {op.window}")
    if target == op.window:
        return op
    d = op.local_dim
    left = np.eye(d ** (op.window.lo - target.lo))
    right = np.eye(d ** (target.hi - op.window.hi))
    matrix = np.kron(np.kron(left, op.matrix), right)
    return LocalOperator(target, matrix, d, op.hermitian)


def _check_same_dim(a: LocalOperator, b: LocalOperator):
    if a.local_dim != b.local_dim:
        raise DomainError(f"Mismatched local_dim {a.local_dim} vs {b.local_dim}")


def commutator(a: LocalOperator, b: LocalOperator):
    """[a, b] on the union window, or ZERO when it vanishes."""
    _check_same_dim(a, b)
    if not a.window.overlaps(b.window):
        return ZERO
    hull = a.window.union(b.window)
    ea = embed(a, hull).matrix
    eb = embed(b, hull).matrix
    result = ea @ eb - eb @ ea
    if _max_norm(result) <= ZERO_RTOL * a.max_norm() * b.max_norm():
        return ZERO
    return LocalOperator(hull, result, a.local_dim)


def hs_inner(a: LocalOperator, b: LocalOperator) -> complex:
    """Normalized Hilbert-Schmidt inner product, conjugate-linear in a."""
    _check_same_dim(a, b)
    if not a.window.overlaps(b.window):
        # Disjoint supports factorize into normalized partial traces.
        return a.normalized_trace().conjugate() * b.normalized_trace()
    hull = a.window.union(b.window)
    ea = embed(a, hull).matrix
    eb = embed(b, hull).matrix
    return complex(np.vdot(ea, eb)) / ea.shape[0]


def sum_inner(a_terms: Iterable[LocalOperator], b_terms: Sequence[LocalOperator]) -> complex:
    """Pairwise hs_inner between two term lists, accumulated in ascending index order."""
    total = 0j
    for a in a_terms:
        for b in b_terms:
            total += hs_inner(a, b)
    return total


def merge_by_window(pieces: Iterable[LocalOperator]) -> List[LocalOperator]:
    """Add up pieces that share a window; output sorted by window."""
    merged: Dict[SiteWindow, np.ndarray] = {}
    local_dim = None
    for piece in pieces:
        local_dim = piece.local_dim
        if piece.window in merged:
            merged[piece.window] = merged[piece.window] + piece.matrix
        else:
            merged[piece.window] = np.array(piece.matrix)
    return [LocalOperator(window, merged[window], local_dim) for window in sorted(merged)]


def collapse(pieces: Sequence[LocalOperator], max_dim: int = 256) -> List[LocalOperator]:
    """Fold pieces into one operator on their hull when the hull is small, else merge by window."""
    if not pieces:
        return []
    hull = pieces[0].window
    for piece in pieces[1:]:
        hull = hull.union(piece.window)
    if pieces[0].local_dim ** hull.width > max_dim:
        return merge_by_window(pieces)
    total = np.zeros((pieces[0].local_dim ** hull.width,) * 2, dtype=complex)
    for piece in pieces:
        total += embed(piece, hull).matrix
    return [LocalOperator(hull, total, pieces[0].local_dim)]


def check_dense_dim(n_sites: int, local_dim: int, cap: int = DEFAULT_DENSE_CAP) -> int:
    dim = local_dim ** n_sites
    if dim > cap:
        raise ResourceError(f"Dense dimension {local_dim}**{n_sites} = {dim} exceeds cap {cap}")
    return dim


def materialize(op_sum: OperatorSum, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Full dense matrix of the sum of embedded terms."""
    dim = check_dense_dim(op_sum.n_sites, op_sum.local_dim, cap)
    total = np.zeros((dim, dim), dtype=complex)
    full = op_sum.full_window
    for term in op_sum.terms:
        total += embed(term, full).matrix
    return total


def apply_local(op: LocalOperator, psi: np.ndarray, n_sites: int) -> np.ndarray:
    """Apply op to a state vector of n_sites sites without embedding."""
    d = op.local_dim
    left = d ** op.window.lo
    right = d ** (n_sites - op.window.hi)
    tensor = psi.reshape(left, op.dim, right)
    return np.einsum("ij,ajb->aib", op.matrix, tensor).reshape(-1)


def apply_sum(op_sum: OperatorSum, psi: np.ndarray) -> np.ndarray:
    """Matrix-free product (sum of terms) @ psi, accumulated in term order."""
    out = np.zeros_like(psi, dtype=complex)
    for term in op_sum.terms:
        out += apply_local(term, psi, op_sum.n_sites)
    return out


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    result = np.array([[1.0 + 0j]])
    for factor in factors:
        result = np.kron(result, factor)
    return result


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_PAULIS = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def pauli_string(label: str, lo: int, coefficient: complex = 1.0) -> LocalOperator:
    """Qubit operator such as pauli_string("ZY", 3) = Z_3 Y_4."""
    matrix = coefficient * kron_all([_PAULIS[ch] for ch in label.upper()])
    return LocalOperator(SiteWindow(lo, lo + len(label)), matrix, 2, np.isreal(coefficient))


def is_hermitian(matrix: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = _max_norm(matrix)
    return _max_norm(matrix - matrix.conj().T) <= rtol * max(scale, 1e-300)


def expm_local(op: LocalOperator, factor: complex) -> np.ndarray:
    """exp(factor * M) for a Hermitian window matrix via its eigendecomposition."""
    herm = 0.5 * (op.matrix + op.matrix.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    return (evecs * np.exp(factor * evals)) @ evecs.conj().T


def qubits_per_site(local_dim: int) -> int:
    bits = int(round(np.log2(local_dim)))
    if 2 ** bits != local_dim:
        raise DomainError(f"Local dimension {local_dim} is not a power of two")
    return bits


def support_qubits(op: LocalOperator) -> int:
    return op.window.width * qubits_per_site(op.local_dim)


def dense_ground_state(matrix: np.ndarray) -> Tuple[float, np.ndarray]:
    try:
        evals, evecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as error:
        raise DomainError(f"Dense diagonalization failed: {error}") from error
    return float(evals[0]), evecs[:, 0]


def ground_state(op_sum: OperatorSum, dense_limit: int = 2 ** 12, cap: int = DEFAULT_DENSE_CAP) -> Tuple[float, np.ndarray]:
    """Lowest eigenpair of the sum; dense eigh for small chains, Lanczos (eigsh) beyond."""
    dim = check_dense_dim(op_sum.n_sites, op_sum.local_dim, cap)
    if dim <= dense_limit:
        return dense_ground_state(materialize(op_sum, cap))

    operator = LinearOperator((dim, dim), matvec=lambda v: apply_sum(op_sum, v.astype(complex)), dtype=complex)
    v0 = np.ones(dim, dtype=complex) / np.sqrt(dim)
    evals, evecs = eigsh(operator, k=1, which="SA", v0=v0, tol=1e-12)
    log.debug("Sparse ground state", log_key="GroundState", status="CONVERGED", energy=float(evals[0]), dim=dim)
    return float(evals[0]), evecs[:, 0]
