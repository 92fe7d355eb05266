# cdforge/variational.py

"""
Variational fit of ansatz coefficients.

Minimizes S(alpha) = || d_s H + sum_eta alpha_eta C_eta ||^2 with C_eta = i [A_eta, H] in the
normalized Hilbert-Schmidt norm, which reduces to the real linear system G alpha = b.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from cdforge.agp_ansatz import (
    DEFAULT_MAX_WINDOW_SITES,
    NC,
    WNC,
    AnsatzTermSet,
    enumerate_nc_terms,
    enumerate_terms,
)
from cdforge.exceptions import DegenerateSystemError, DomainError, StructuralError
from cdforge.operator_core import (
    ZERO,
    LocalOperator,
    OperatorSum,
    SiteWindow,
    collapse,
    commutator,
    sum_inner,
)
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="Variational")

DEFAULT_RCOND = 1e-10
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class GramSystem:
    G: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    dH_norm2: float
    rcond: float = DEFAULT_RCOND

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if G.shape != (b.shape[0], b.shape[0]):
            raise DomainError(f"Gram matrix shape {G.shape} does not match b of length {b.shape[0]}")
        if G.size:
            scale = np.max(np.abs(G))
            if np.max(np.abs(G - G.T)) > 1e-10 * max(scale, 1e-300):
                raise DomainError("Gram matrix is not symmetric")
            G = 0.5 * (G + G.T)
            evals = np.linalg.eigvalsh(G)
            if evals[0] < -1e-10 * max(evals[-1], 0.0) - 1e-300:
                raise DomainError(f"Gram matrix is not positive semidefinite (min eigenvalue {evals[0]:.3e})")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "b", b)

    @property
    def size(self) -> int:
        return self.b.shape[0]

    def residual(self, alpha) -> float:
        if not self.size:
            return 0.0
        return float(np.linalg.norm(self.G @ np.asarray(alpha, dtype=float) - self.b))


@dataclass(frozen=True)
class RegionPlan:
    regions: Tuple[SiteWindow, ...]
    width: int = 3
    stride: int = 1

    @classmethod
    def sliding(cls, n_sites: int, width: int = 3, stride: int = 1) -> "RegionPlan":
        """Windows [lo, lo+width) every `stride` sites, plus a closing window flush with the chain end."""
        if width < 1 or stride < 1:
            raise DomainError(f"Region width and stride must be positive, got {width}, {stride}")
        if n_sites <= width:
            return cls((SiteWindow(0, n_sites),), width, stride)
        regions = [SiteWindow(lo, lo + width) for lo in range(0, n_sites - width + 1, stride)]
        if regions[-1].hi < n_sites:
            regions.append(SiteWindow(n_sites - width, n_sites))
        return cls(tuple(regions), width, stride)

    @classmethod
    def single(cls, n_sites: int) -> "RegionPlan":
        return cls((SiteWindow(0, n_sites),), n_sites, 1)

    def covers(self, n_sites: int) -> bool:
        covered = set()
        for region in self.regions:
            covered.update(range(region.lo, region.hi))
        return covered == set(range(n_sites))


@dataclass
class OptimizationResult:
    alpha: np.ndarray
    term_set: AnsatzTermSet
    action: float
    residual: float
    gram: Optional[GramSystem] = None
    skipped_regions: List[SiteWindow] = field(default_factory=list)
    uncovered_terms: int = 0


def _group_commutators(term_set: AnsatzTermSet, H: OperatorSum) -> List[List[LocalOperator]]:
    """C_g = i sum_{eta in g} sum_j [A_eta, h_j], folded into as few local pieces as possible."""
    pieces: List[List[LocalOperator]] = [[] for _ in range(term_set.group_count)]
    for term, group in zip(term_set.terms, term_set.tying):
        for h in H.terms:
            nested = commutator(term.operator, h)
            if nested is ZERO:
                continue
            pieces[group].append(nested.scaled(1j))
    return [collapse(group_pieces) for group_pieces in pieces]


def build_gram(term_set: AnsatzTermSet, H: OperatorSum, dH: OperatorSum, rcond: float = DEFAULT_RCOND) -> GramSystem:
    if not (term_set.n_sites == H.n_sites == dH.n_sites):
        raise DomainError("Ansatz, H and dH are defined on chains of different length")
    if not (term_set.local_dim == H.local_dim == dH.local_dim):
        raise DomainError("Ansatz, H and dH use different local dimensions")

    c_pieces = _group_commutators(term_set, H)
    size = term_set.group_count
    G = np.zeros((size, size), dtype=complex)
    b = np.zeros(size, dtype=complex)
    for g in range(size):
        for g2 in range(g, size):
            G[g, g2] = sum_inner(c_pieces[g], c_pieces[g2])
            G[g2, g] = G[g, g2].conjugate()
        b[g] = -sum_inner(c_pieces[g], dH.terms)
    dH_norm2 = sum_inner(dH.terms, dH.terms)

    scale = max(np.max(np.abs(G)) if size else 0.0, np.max(np.abs(b)) if size else 0.0, 1.0)
    imag = max(np.max(np.abs(G.imag)) if size else 0.0, np.max(np.abs(b.imag)) if size else 0.0)
    if imag > IMAG_TOL * scale:
        raise DomainError(f"Gram system has imaginary residue {imag:.3e}; ansatz terms are not Hermitian")
    return GramSystem(G.real, b.real, float(dH_norm2.real), rcond)


def solve(gram: GramSystem) -> np.ndarray:
    """Minimum-norm solution of G alpha = b, dropping eigenvalues below rcond * lambda_max."""
    if not gram.size:
        return np.zeros(0)
    try:
        evals, evecs = np.linalg.eigh(gram.G)
    except np.linalg.LinAlgError as error:
        log.exception("Gram eigendecomposition failed", log_key="GramSolve", status="FAILED", size=gram.size)
        raise DegenerateSystemError(f"Eigendecomposition of the Gram matrix failed: {error}") from error
    lam_max = evals[-1]
    keep = evals > gram.rcond * lam_max if lam_max > 0 else np.zeros_like(evals, dtype=bool)
    if not np.any(keep):
        if np.max(np.abs(gram.b)) > 0:
            raise DegenerateSystemError("Gram matrix vanishes below the cutoff while b is nonzero")
        return np.zeros(gram.size)
    kept = evecs[:, keep]
    alpha = kept @ ((kept.T @ gram.b) / evals[keep])
    log.debug("Solved Gram system", log_key="GramSolve", size=gram.size, rank=int(np.sum(keep)), residual=gram.residual(alpha))
    return alpha


def action_value(gram: GramSystem, alpha) -> float:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (gram.size,):
        raise DomainError(f"Expected {gram.size} coefficients, got shape {alpha.shape}")
    if not gram.size:
        return gram.dH_norm2
    return float(gram.dH_norm2 - 2.0 * alpha @ gram.b + alpha @ gram.G @ alpha)


def build_term_set(H: OperatorSum, dH: OperatorSum, order: int, mode: str, max_window_sites: int = DEFAULT_MAX_WINDOW_SITES) -> AnsatzTermSet:
    if mode == WNC:
        return enumerate_terms(H, dH, order, max_window_sites)
    if mode == NC:
        return enumerate_nc_terms(H, dH, order, max_window_sites)
    raise DomainError(f"Unknown ansatz mode {mode!r}")


def optimize_global(path, s: float, order: int, mode: str = WNC, ds: float = 0.01, max_window_sites: int = DEFAULT_MAX_WINDOW_SITES, rcond: float = DEFAULT_RCOND) -> OptimizationResult:
    H = path.terms(s)
    dH = path.dterms(s, ds)
    term_set = build_term_set(H, dH, order, mode, max_window_sites)
    gram = build_gram(term_set, H, dH, rcond)
    alpha = solve(gram)
    return OptimizationResult(
        alpha=alpha,
        term_set=term_set,
        action=action_value(gram, alpha),
        residual=gram.residual(alpha),
        gram=gram,
    )


def optimize_local(
    path,
    s: float,
    order: int,
    plan: RegionPlan,
    ds: float = 0.01,
    max_window_sites: int = DEFAULT_MAX_WINDOW_SITES,
    rcond: float = DEFAULT_RCOND,
    with_action: bool = True,
) -> OptimizationResult:
    """
    Solve one small Gram system per region and average coefficients shared between regions.

    Each region keeps only the H and d_s H terms fully supported inside it. Coefficients are keyed by
    index tuple, so the averaged vector lines up with the global WNC term set. Terms never inside any
    region keep coefficient 0.
    """
    H = path.terms(s)
    dH = path.dterms(s, ds)
    if not plan.covers(H.n_sites):
        raise DomainError(f"Region plan does not cover the chain of {H.n_sites} sites")

    totals: Dict[Tuple[int, ...], float] = {}
    counts: Dict[Tuple[int, ...], int] = {}
    skipped: List[SiteWindow] = []
    for region in plan.regions:
        H_region, h_indices = H.restricted(region)
        dH_region, dh_indices = dH.restricted(region)
        if h_indices != dh_indices:
            raise StructuralError(f"H and dH terms inside {region} do not line up: {h_indices} vs {dh_indices}")
        local_set = enumerate_terms(H_region, dH_region, order, max_window_sites, index_map=h_indices)
        if not len(local_set):
            log.warning("Region supports no ansatz term; skipped", log_key="OptimizeLocal", status="SKIPPED", region=repr(region))
            skipped.append(region)
            continue
        local_alpha = solve(build_gram(local_set, H_region, dH_region, rcond))
        for term, value in zip(local_set.terms, local_alpha):
            totals[term.index_tuple] = totals.get(term.index_tuple, 0.0) + float(value)
            counts[term.index_tuple] = counts.get(term.index_tuple, 0) + 1

    term_set = enumerate_terms(H, dH, order, max_window_sites)
    alpha = np.zeros(len(term_set))
    uncovered = 0
    for index, term in enumerate(term_set.terms):
        if term.index_tuple in counts:
            alpha[index] = totals[term.index_tuple] / counts[term.index_tuple]
        else:
            uncovered += 1
    if uncovered:
        log.warning("Ansatz terms outside every region keep coefficient 0", log_key="OptimizeLocal", status="UNCOVERED", count=uncovered)

    gram = build_gram(term_set, H, dH, rcond) if with_action else None
    return OptimizationResult(
        alpha=alpha,
        term_set=term_set,
        action=action_value(gram, alpha) if gram is not None else float("nan"),
        residual=gram.residual(alpha) if gram is not None else float("nan"),
        gram=gram,
        skipped_regions=skipped,
        uncovered_terms=uncovered,
    )
