"""Schrödinger evolution psi_t = exp(-i h t) psi_0 by exact diagonalisation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from os import PathLike
from typing import Sequence

import numpy as np

from .hamiltonian import ReducedHamiltonian
from .lattice import PairState, SiteIndexing

NORM_TOL = 1e-10


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Wavefunction:
    time: float
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def of(cls, matrix: np.ndarray) -> "SpectralDecomposition":
        try:
            w, V = np.linalg.eigh(matrix)
        except np.linalg.LinAlgError as exc:
            raise PropagationError(f"diagonalisation failed: {exc}") from exc
        return cls(w, V)

    def reconstruction_residual(self, matrix: np.ndarray) -> float:
        V, w = self.eigenvectors, self.eigenvalues
        return float(np.linalg.norm((V * w) @ V.T - matrix))

    def propagate(self, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Rows are psi at each time in ``times``; shape ``(len(times), dim)``."""
        V = self.eigenvectors
        coeffs = V.T @ psi0
        times = np.asarray(times, dtype=float)
        phases = np.exp(-1j * np.outer(times, self.eigenvalues))
        out = (phases * coeffs) @ V.T
        out[times == 0] = psi0  # exact identity at t = 0
        return out


def initial_state(idx: SiteIndexing) -> Wavefunction:
    """All amplitude on the pair (1, 2) at time 0."""
    psi = np.zeros(idx.total, dtype=complex)
    psi[idx.index((1, 2))] = 1.0
    return Wavefunction(0.0, psi)


def evolve(h: ReducedHamiltonian, psi0: Wavefunction, t: float) -> Wavefunction:
    """Advance ``psi0`` by ``t``; the result carries time ``psi0.time + t``."""
    if t < 0:
        raise ValueError(f"evolution time must be nonnegative, got {t}")
    if t == 0:
        return Wavefunction(psi0.time, psi0.amplitudes.copy())
    psi = h.spectrum.propagate(psi0.amplitudes, np.array([t]))[0]
    return Wavefunction(psi0.time + t, psi)


def evolve_grid(h: ReducedHamiltonian, psi0: Wavefunction, times: Sequence[float]) -> np.ndarray:
    """Amplitude table over a time grid (times measured from ``psi0.time``)."""
    return h.spectrum.propagate(psi0.amplitudes, np.asarray(times, dtype=float))


def amplitude_series(
    h: ReducedHamiltonian,
    psi0: Wavefunction,
    grid: Sequence[float],
    site: tuple[int, int],
) -> list[tuple[float, complex]]:
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    k = h.indexing.index(site)
    table = evolve_grid(h, psi0, grid)
    return [(float(t), complex(z)) for t, z in zip(grid, table[:, k])]


def probability_profile(psi: Wavefunction) -> np.ndarray:
    return np.abs(psi.amplitudes) ** 2


def energy(h: ReducedHamiltonian, psi: Wavefunction) -> float:
    v = psi.amplitudes
    return float(np.real(np.vdot(v, h.matrix @ v)))


def time_grid(t_max: float, dt: float) -> np.ndarray:
    """``0, dt, 2 dt, ..., t_max`` with the endpoint included when it falls on the grid."""
    n = int(np.floor(t_max / dt + 1e-9))
    return dt * np.arange(n + 1)


def terminal_site(s: int) -> PairState:
    return PairState(s - 1, s)


def write_series_csv(series: list[tuple[float, complex]], path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im", "abs"])
        for t, z in series:
            w.writerow([format(v, ".17g") for v in (t, z.real, z.imag, abs(z))])
