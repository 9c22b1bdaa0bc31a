"""Pair lattice of two hard-core walkers on a chain of s sites.

Sites are ordered pairs (x1, x2) with 1 <= x1 < x2 <= s. The dense index is
lexicographic in (x1, x2) and is the single ordering shared by every vector,
matrix and output file in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np


class ConfigError(ValueError):
    """Raised for an invalid chain or run configuration."""


@dataclass(frozen=True)
class ChainConfig:
    """Chain length ``s`` with impurities sigma_1 on link ``a`` and sigma_3 on link ``b``.

    ``free=True`` selects the variant where every link operator is the identity.
    """

    s: int
    a: int
    b: int
    free: bool = False

    def __post_init__(self) -> None:
        for name in ("s", "a", "b"):
            if not isinstance(getattr(self, name), (int, np.integer)) or isinstance(
                getattr(self, name), bool
            ):
                raise ConfigError(f"{name} must be an integer, got {getattr(self, name)!r}")
        if self.s < 4:
            raise ConfigError(f"chain length must be at least 4, got s={self.s}")
        if not 1 < self.a < self.b < self.s:
            raise ConfigError(f"need 1 < a < b < s, got s={self.s}, a={self.a}, b={self.b}")

    def as_free(self) -> "ChainConfig":
        return ChainConfig(self.s, self.a, self.b, free=True)

    def as_interacting(self) -> "ChainConfig":
        return ChainConfig(self.s, self.a, self.b, free=False)


class PairState(NamedTuple):
    x1: int
    x2: int

    def is_valid(self, s: int) -> bool:
        return 1 <= self.x1 < self.x2 <= s


@dataclass(frozen=True)
class SiteIndexing:
    """Bijection between pair states and ``0 .. s(s-1)/2 - 1``."""

    s: int
    sites: tuple[PairState, ...]
    _index: dict[PairState, int] = field(repr=False, compare=False)

    @property
    def total(self) -> int:
        return len(self.sites)

    def index(self, p: tuple[int, int]) -> int:
        try:
            return self._index[PairState(*p)]
        except KeyError:
            raise KeyError(f"{tuple(p)} is not a site of the pair lattice with s={self.s}") from None

    def state(self, i: int) -> PairState:
        return self.sites[i]

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[PairState]:
        return iter(self.sites)

    def __contains__(self, p: object) -> bool:
        return p in self._index

    def coordinates(self) -> np.ndarray:
        """``(total, 2)`` integer array of (x1, x2) rows in index order."""
        return np.array(self.sites, dtype=np.int64).reshape(-1, 2)


def pair_index(x1: int, x2: int, s: int) -> int:
    # closed form of the lexicographic rank
    return (x1 - 1) * s - (x1 - 1) * x1 // 2 + (x2 - x1 - 1)


def enumerate_sites(config: ChainConfig | int) -> SiteIndexing:
    s = config if isinstance(config, (int, np.integer)) else config.s
    sites = tuple(PairState(x1, x2) for x1 in range(1, s + 1) for x2 in range(x1 + 1, s + 1))
    return SiteIndexing(s, sites, {p: i for i, p in enumerate(sites)})


def neighbours(p: tuple[int, int], config: ChainConfig | int) -> list[PairState]:
    """Pair states reachable by moving one walker by one site, keeping x1 < x2."""
    s = config if isinstance(config, (int, np.integer)) else config.s
    p = PairState(*p)
    if not p.is_valid(s):
        raise ValueError(f"{tuple(p)} is not a site of the pair lattice with s={s}")
    x1, x2 = p
    candidates = [
        PairState(x1 - 1, x2),
        PairState(x1 + 1, x2),
        PairState(x1, x2 - 1),
        PairState(x1, x2 + 1),
    ]
    return [q for q in candidates if q.is_valid(s)]


def lattice_edges(idx: SiteIndexing) -> np.ndarray:
    """Undirected edges as an ``(m, 2)`` array of dense indices with ``i < j``.

    Row order: by the lower-index endpoint, then the x1 move before the x2 move.
    """
    edges = []
    for i, (x1, x2) in enumerate(idx.sites):
        for q in (PairState(x1 + 1, x2), PairState(x1, x2 + 1)):
            if q.is_valid(idx.s):
                edges.append((i, idx.index(q)))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)
