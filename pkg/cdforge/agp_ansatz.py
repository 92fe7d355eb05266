# cdforge/agp_ansatz.py

"""
Nested-commutator ansatz terms for the adiabatic gauge potential.

WNC terms are i [h_{j_{2k-1}}, [ ... [h_{j_1}, d_s h_{j_0}] ... ]] built breadth-first over
overlapping supports, one free coefficient per term. The NC ansatz ties all order-k terms to a
single coefficient. exact_agp is the spectral solution used as an oracle on tiny chains.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cdforge.exceptions import DomainError, ResourceError
from cdforge.operator_core import (
    ZERO,
    LocalOperator,
    OperatorSum,
    commutator,
    is_hermitian,
    merge_by_window,
)
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="AgpAnsatz")

WNC = "WNC"
NC = "NC"
DEFAULT_MAX_WINDOW_SITES = 6


@dataclass(frozen=True)
class AnsatzTerm:
    operator: LocalOperator
    order: int
    index_tuple: Tuple[int, ...]


@dataclass(frozen=True)
class AnsatzTermSet:
    terms: Tuple[AnsatzTerm, ...]
    tying: Tuple[int, ...]
    mode: str
    n_sites: int
    local_dim: int
    max_order: int

    def __post_init__(self):
        if self.mode not in (WNC, NC):
            raise DomainError(f"Unknown ansatz mode {self.mode!r}")
        if len(self.tying) != len(self.terms):
            raise DomainError("Tying map must have one group id per term")

    def __len__(self):
        return len(self.terms)

    @property
    def group_count(self) -> int:
        return len(self.terms) if self.mode == WNC else self.max_order

    def group_labels(self) -> List[str]:
        """Stable human-readable id per group, used in coefficient dumps."""
        if self.mode == NC:
            return [f"k{k + 1}" for k in range(self.max_order)]
        return [f"k{term.order}:" + "-".join(str(j) for j in term.index_tuple) for term in self.terms]


def _hermitian_term(op: LocalOperator) -> LocalOperator:
    """i * op, symmetrized; op is anti-Hermitian at odd nesting depth."""
    matrix = 1j * op.matrix
    return LocalOperator(op.window, 0.5 * (matrix + matrix.conj().T), op.local_dim, True)


def _check_inputs(H: OperatorSum, dH: OperatorSum, order: int):
    if order < 1:
        raise DomainError(f"Ansatz order must be >= 1, got {order}")
    if H.n_sites != dH.n_sites or H.local_dim != dH.local_dim:
        raise DomainError("H and dH live on different chains")


def enumerate_terms(
    H: OperatorSum,
    dH: OperatorSum,
    order: int,
    max_window_sites: int = DEFAULT_MAX_WINDOW_SITES,
    index_map: Optional[Sequence[int]] = None,
) -> AnsatzTermSet:
    """
    Breadth-first WNC enumeration up to nesting order `order`.

    Level 0 holds the seeds d_s h_{j0}; every level commutes each operator with all h_j whose
    window overlaps it, dropping vanishing commutators. Operators at odd depth 2k-1 become
    order-k terms. index_map translates local term positions to the caller's numbering.
    """
    _check_inputs(H, dH, order)
    remap = (lambda j: j) if index_map is None else (lambda j: int(index_map[j]))

    level = [(seed, (remap(j0),)) for j0, seed in enumerate(dH.terms) if seed.max_norm() > 0]
    found: List[AnsatzTerm] = []
    for depth in range(1, 2 * order):
        next_level = []
        for op, index_tuple in level:
            for j, h in enumerate(H.terms):
                if not h.window.overlaps(op.window):
                    continue
                nested = commutator(h, op)
                if nested is ZERO:
                    continue
                if nested.window.width > max_window_sites:
                    raise ResourceError(
                        f"Nested commutator window {nested.window} exceeds {max_window_sites} sites at depth {depth}"
                    )
                next_level.append((nested, index_tuple + (remap(j),)))
        if depth % 2 == 1:
            k = (depth + 1) // 2
            found.extend(AnsatzTerm(_hermitian_term(op), k, index_tuple) for op, index_tuple in next_level)
        level = next_level

    found.sort(key=lambda term: (term.order, term.index_tuple))
    log.debug("Enumerated WNC terms", log_key="EnumerateTerms", order=order, term_count=len(found))
    return AnsatzTermSet(
        terms=tuple(found),
        tying=tuple(range(len(found))),
        mode=WNC,
        n_sites=H.n_sites,
        local_dim=H.local_dim,
        max_order=order,
    )


def tie_nc(term_set: AnsatzTermSet) -> AnsatzTermSet:
    """Same terms, one coefficient group per order k."""
    if term_set.mode != WNC:
        raise DomainError("tie_nc expects a WNC term set")
    return AnsatzTermSet(
        terms=term_set.terms,
        tying=tuple(term.order - 1 for term in term_set.terms),
        mode=NC,
        n_sites=term_set.n_sites,
        local_dim=term_set.local_dim,
        max_order=term_set.max_order,
    )


def enumerate_nc_terms(
    H: OperatorSum,
    dH: OperatorSum,
    order: int,
    max_window_sites: int = DEFAULT_MAX_WINDOW_SITES,
) -> AnsatzTermSet:
    """
    NC group operators built from window-merged nested commutators.

    Contributions sharing a window are summed at every level, so each order keeps O(N) terms.
    The per-order sums equal those of tie_nc(enumerate_terms(...)).
    """
    _check_inputs(H, dH, order)
    level = merge_by_window(term for term in dH.terms if term.max_norm() > 0)
    found: List[AnsatzTerm] = []
    for depth in range(1, 2 * order):
        pieces = []
        for op in level:
            for h in H.terms:
                if not h.window.overlaps(op.window):
                    continue
                nested = commutator(h, op)
                if nested is ZERO:
                    continue
                if nested.window.width > max_window_sites:
                    raise ResourceError(
                        f"Nested commutator window {nested.window} exceeds {max_window_sites} sites at depth {depth}"
                    )
                pieces.append(nested)
        level = [piece for piece in merge_by_window(pieces) if piece.max_norm() > 0]
        if depth % 2 == 1:
            k = (depth + 1) // 2
            found.extend(AnsatzTerm(_hermitian_term(op), k, ()) for op in level)

    log.debug("Enumerated NC terms", log_key="EnumerateNcTerms", order=order, term_count=len(found))
    return AnsatzTermSet(
        terms=tuple(found),
        tying=tuple(term.order - 1 for term in found),
        mode=NC,
        n_sites=H.n_sites,
        local_dim=H.local_dim,
        max_order=order,
    )


def _coefficients(term_set: AnsatzTermSet, alpha) -> np.ndarray:
    alpha = np.asarray(alpha)
    if alpha.shape != (term_set.group_count,):
        raise DomainError(f"Expected {term_set.group_count} coefficients, got shape {alpha.shape}")
    if np.iscomplexobj(alpha):
        if np.any(np.abs(alpha.imag) > 0):
            raise DomainError("Ansatz coefficients must be real")
        alpha = alpha.real
    return alpha.astype(float)


def assemble(term_set: AnsatzTermSet, alpha) -> OperatorSum:
    """sum_eta alpha_{group(eta)} A_eta; terms with a zero coefficient are left out."""
    alpha = _coefficients(term_set, alpha)
    terms = []
    for term, group in zip(term_set.terms, term_set.tying):
        if alpha[group] != 0.0:
            terms.append(term.operator.scaled(alpha[group]))
    return OperatorSum(tuple(terms), term_set.n_sites, term_set.local_dim)


def dense_nested_commutator(H: np.ndarray, dH: np.ndarray, k: int) -> np.ndarray:
    """i [H, [H, ... [H, dH]]] with 2k-1 copies of H."""
    result = np.asarray(dH, dtype=complex)
    H = np.asarray(H, dtype=complex)
    for _ in range(2 * k - 1):
        result = H @ result - result @ H
    return 1j * result


def exact_agp(H: np.ndarray, dH: np.ndarray, gap_tol: float = 1e-10) -> np.ndarray:
    """A_mn = i dH_mn / (E_n - E_m) in the eigenbasis of H; pairs closer than gap_tol are zeroed."""
    H = np.asarray(H, dtype=complex)
    dH = np.asarray(dH, dtype=complex)
    if not is_hermitian(H) or not is_hermitian(dH):
        raise DomainError("exact_agp needs Hermitian H and dH")
    energies, vectors = np.linalg.eigh(H)
    dH_eigen = vectors.conj().T @ dH @ vectors
    gaps = energies[None, :] - energies[:, None]
    mask = np.abs(gaps) > gap_tol
    safe = np.where(mask, gaps, 1.0)
    agp_eigen = np.where(mask, 1j * dH_eigen / safe, 0.0)
    agp = vectors @ agp_eigen @ vectors.conj().T
    return 0.5 * (agp + agp.conj().T)
