"""Hamiltonians of the two-excitation sector.

Two constructions are provided:

* :func:`build_reduced` gives the real symmetric hopping matrix on the pair
  lattice obtained by restricting to states whose register label is fixed by
  the dressing sign (the range of the projector ``P+``). Every lattice edge
  carries ``-1/2`` except the edges ``{(x1, b), (x1, b+1)}`` with ``x1 <= a``,
  which carry ``+1/2``.
* :func:`build_sector` builds the operator on ``|(x1, x2), zeta>`` with the
  register qubit kept explicit. It is used as an independent check of the
  reduced matrix (see :func:`verify_conservation`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike

import numpy as np
import scipy.sparse as sp

from .lattice import ChainConfig, PairState, SiteIndexing, enumerate_sites, lattice_edges

HOP = -0.5


def theta(x: int) -> int:
    return 1 if x > 0 else 0


def dressing_sign(p: tuple[int, int], a: int) -> int:
    """Register eigenvalue paired with ``p`` in the range of ``P+``."""
    x1, x2 = p
    return (-1) ** (theta(x1 - a) + theta(x2 - a))


def dressing_signs(idx: SiteIndexing, config: ChainConfig) -> np.ndarray:
    """Dressing sign per site; identically +1 when there is no sigma_1 impurity."""
    if config.free:
        return np.ones(idx.total, dtype=np.int8)
    return np.array([dressing_sign(p, config.a) for p in idx], dtype=np.int8)


@dataclass(frozen=True)
class ReducedHamiltonian:
    """Hopping matrix on the pair lattice, stored as a symmetric CSR array.

    ``edges`` lists each undirected edge once (``i < j``) with its weight in
    ``weights``.
    """

    config: ChainConfig
    indexing: SiteIndexing
    edges: np.ndarray
    weights: np.ndarray
    matrix: sp.csr_array = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.indexing.total

    def entry(self, p: tuple[int, int], q: tuple[int, int]) -> float:
        return float(self.matrix[self.indexing.index(p), self.indexing.index(q)])

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @cached_property
    def spectrum(self):
        # local import: propagator depends on this module
        from .propagator import SpectralDecomposition

        return SpectralDecomposition.of(self.dense())


def _is_flipped(p: PairState, q: PairState, a: int, b: int) -> bool:
    # edge {(x1, b), (x1, b+1)} with theta(x1 - a) == 0
    lo, hi = (p, q) if p.x2 < q.x2 else (q, p)
    return lo.x1 == hi.x1 and lo.x2 == b and hi.x2 == b + 1 and lo.x1 <= a


def build_reduced(config: ChainConfig) -> ReducedHamiltonian:
    idx = enumerate_sites(config)
    edges = lattice_edges(idx)
    weights = np.full(len(edges), HOP)
    if not config.free:
        for k, (i, j) in enumerate(edges):
            if _is_flipped(idx.state(i), idx.state(j), config.a, config.b):
                weights[k] = -HOP
    n = idx.total
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    matrix = sp.csr_array((np.concatenate([weights, weights]), (rows, cols)), shape=(n, n))
    matrix.sort_indices()
    return ReducedHamiltonian(config, idx, edges, weights, matrix)


def flipped_edges(config: ChainConfig) -> list[tuple[PairState, PairState]]:
    """Edges that carry a positive weight, ordered by x1."""
    if config.free:
        return []
    a, b = config.a, config.b
    return [(PairState(x1, b), PairState(x1, b + 1)) for x1 in range(1, a + 1)]


def write_coo_csv(h: ReducedHamiltonian, path: str | PathLike) -> None:
    """Dump nonzero entries as ``row,col,value`` lines (both triangles)."""
    coo = h.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for k in order:
            w.writerow([int(coo.row[k]), int(coo.col[k]), format(float(coo.data[k]), ".17g")])


# --- explicit register sector --------------------------------------------

SIGMA_1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_3 = np.array([[1.0, 0.0], [0.0, -1.0]])
ZETA_VALUES = (1, -1)  # register basis order within each site block


@dataclass(frozen=True)
class SectorHamiltonian:
    """Dense operator on ``|(x1, x2), zeta>``; basis index ``2*site + (zeta == -1)``."""

    config: ChainConfig
    indexing: SiteIndexing
    matrix: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def link_operator(x: int, config: ChainConfig) -> np.ndarray:
    """Register operator applied when an excitation crosses link ``{x, x+1}``."""
    if not config.free:
        if x == config.a:
            return SIGMA_1
        if x == config.b:
            return SIGMA_3
    return np.eye(2)


def build_sector(config: ChainConfig) -> SectorHamiltonian:
    """Two-excitation block of the chain Hamiltonian with the register explicit.

    A move of either excitation from ``x`` to ``x+1`` contributes
    ``-1/2 U_x`` on the register, the reverse move ``-1/2 U_x^-1``.
    """
    idx = enumerate_sites(config)
    n = idx.total
    H = np.zeros((2 * n, 2 * n))
    for i, (x1, x2) in enumerate(idx.sites):
        occupied = {x1, x2}
        for x in (x1, x2):
            if x + 1 > config.s or x + 1 in occupied:
                continue
            target = tuple(sorted((occupied - {x}) | {x + 1}))
            j = idx.index(target)
            U = link_operator(x, config)
            # |j> <i| (x -> x+1) with U; hermitian partner carries U^-1 = U^T here
            H[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] += HOP * U
            H[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] += HOP * np.linalg.inv(U)
    return SectorHamiltonian(config, idx, H)


def embed_plus(signs: np.ndarray) -> np.ndarray:
    """Isometry ``E`` sending reduced basis vector ``p`` to ``|p, zeta(p)>``."""
    n = len(signs)
    E = np.zeros((2 * n, n))
    E[2 * np.arange(n) + (np.asarray(signs) == -1), np.arange(n)] = 1.0
    return E


def plus_projector(signs: np.ndarray) -> np.ndarray:
    E = embed_plus(signs)
    return E @ E.T


@dataclass
class ConservationReport:
    config: ChainConfig
    commutator_norm: float
    reduction_residual: float
    tolerance: float = 1e-12

    @property
    def passed(self) -> bool:
        return self.commutator_norm < self.tolerance and self.reduction_residual < self.tolerance

    def as_dict(self) -> dict:
        return {
            "commutator_norm": self.commutator_norm,
            "reduction_residual": self.reduction_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def verify_conservation(config: ChainConfig, tolerance: float = 1e-12) -> ConservationReport:
    """Check ``[H_sector, P+] = 0`` and ``E^T H_sector E = h+`` (Frobenius norms)."""
    if config.s > 40:
        raise ValueError(f"dense verification limited to s <= 40, got s={config.s}")
    sector = build_sector(config)
    signs = dressing_signs(sector.indexing, config)
    E = embed_plus(signs)
    P = E @ E.T
    H = sector.matrix
    comm = np.linalg.norm(H @ P - P @ H)
    resid = np.linalg.norm(E.T @ H @ E - build_reduced(config).dense())
    return ConservationReport(config, float(comm), float(resid), tolerance)


def kickback_gauge(idx: SiteIndexing, b: int) -> np.ndarray:
    """Diagonal of ``D = diag((-1)^theta(x2 - b))``."""
    return np.array([(-1) ** theta(x2 - b) for _, x2 in idx], dtype=float)
