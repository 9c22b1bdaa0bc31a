"""Markov jump process whose one-time law is |psi_t|^2.

Rates on a directed lattice edge ``x -> y`` are

    v_t(y|x) = |h(x,y)| |psi_t(y)/psi_t(x)| [1 + sin(Arg psi_t(x) - Arg psi_t(y) + Arg h(x,y))]

which, for real ``h``, equals ``(|h| |psi_x| |psi_y| + h Im(psi_x conj(psi_y))) / |psi_x|^2``.
The latter form is what is evaluated; it avoids branch cuts of ``Arg``.

Sampling uses an explicit first-order scheme on the grid ``k * dt``: in each
step the walker at ``x`` jumps to ``y`` with probability ``v_{k dt}(y|x) dt``.
Steps whose total jump probability exceeds ``max_step_prob`` are halved
recursively. Each trajectory draws from its own generator seeded by
``(seed, index)``, so results do not depend on batching or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .hamiltonian import ReducedHamiltonian
from .lattice import PairState
from .propagator import Wavefunction, initial_state

log = logging.getLogger(__name__)

MAX_SUBDIVISION = 20
MAX_DEGREE = 4


@dataclass(frozen=True)
class SamplerSettings:
    dt: float = 0.005
    horizon: float = 25.0
    n_traj: int = 10_000
    seed: int = 20080101
    max_step_prob: float = 0.1
    zero_threshold: float = 1e-12

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.max_step_prob < 1:
            raise ValueError(f"max_step_prob must lie in (0, 1), got {self.max_step_prob}")
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be at least 1, got {self.n_traj}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.horizon / self.dt - 1e-9) if self.horizon > 0 else 0

    @property
    def step(self) -> float:
        """Actual step length; equals ``dt`` whenever ``horizon`` is a multiple of it."""
        return self.horizon / self.n_steps if self.n_steps else self.dt


# --- rates -----------------------------------------------------------------


def directed_edges(h: ReducedHamiltonian) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(src, dst, weight)`` with both orientations of every undirected edge."""
    e, w = h.edges, h.weights
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    return src, dst, np.concatenate([w, w])


def _edge_rates(psi: np.ndarray, src, dst, weight, zero_threshold: float) -> np.ndarray:
    px, py = psi[..., src], psi[..., dst]
    ax, ay = np.abs(px), np.abs(py)
    alive = ax > zero_threshold
    safe = np.where(alive, ax, 1.0)
    num = np.abs(weight) * ax * ay + weight * np.imag(px * np.conj(py))
    rates = np.where(alive, num / safe**2, 0.0)
    return np.maximum(rates, 0.0)


@dataclass(frozen=True)
class RateField:
    time: float
    src: np.ndarray
    dst: np.ndarray
    rates: np.ndarray
    h: ReducedHamiltonian = field(repr=False)

    def as_dict(self) -> dict[tuple[PairState, PairState], float]:
        st = self.h.indexing.state
        return {(st(i), st(j)): float(r) for i, j, r in zip(self.src, self.dst, self.rates)}

    def rate(self, x: tuple[int, int], y: tuple[int, int]) -> float:
        i, j = self.h.indexing.index(x), self.h.indexing.index(y)
        hit = np.nonzero((self.src == i) & (self.dst == j))[0]
        return float(self.rates[hit[0]]) if len(hit) else 0.0

    def outflow(self, probabilities: np.ndarray) -> np.ndarray:
        """Net probability current into each site: sum_y v(x|y) p_y - v(y|x) p_x."""
        flux = self.rates * probabilities[self.src]
        net = np.zeros_like(probabilities)
        np.add.at(net, self.dst, flux)
        np.add.at(net, self.src, -flux)
        return net


def rate_field(h: ReducedHamiltonian, psi: Wavefunction, zero_threshold: float = 1e-12) -> RateField:
    src, dst, w = directed_edges(h)
    return RateField(psi.time, src, dst, _edge_rates(psi.amplitudes, src, dst, w, zero_threshold), h)


def continuity_residual(
    h: ReducedHamiltonian,
    psis: Sequence[Wavefunction],
    min_amplitude: float = 1e-6,
    sites: Iterable[int] | None = None,
) -> float:
    """Max mismatch between ``d|psi|^2/dt`` and the net rate-field current.

    ``psis`` holds psi at ``t - eps``, ``t``, ``t + eps``; the derivative is the
    central difference. Sites with ``|psi_t| <= min_amplitude`` are skipped.
    """
    before, mid, after = psis
    eps = 0.5 * (after.time - before.time)
    p_before, p_mid, p_after = (np.abs(w.amplitudes) ** 2 for w in psis)
    dp = (p_after - p_before) / (2 * eps)
    current = rate_field(h, mid).outflow(p_mid)
    keep = np.abs(mid.amplitudes) > min_amplitude
    if sites is not None:
        mask = np.zeros_like(keep)
        mask[list(sites)] = True
        keep &= mask
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(dp - current)[keep]))


def continuity_probe(h: ReducedHamiltonian, t: float, eps: float = 1e-4, sites=None) -> float:
    psi0 = initial_state(h.indexing)
    times = np.array([t - eps, t, t + eps])
    table = h.spectrum.propagate(psi0.amplitudes, times)
    return continuity_residual(h, [Wavefunction(float(s), v) for s, v in zip(times, table)], sites=sites)


# --- trajectories -------------------------------------------------------------


@dataclass
class Trajectory:
    """Piecewise-constant path: ``start`` until ``times[0]``, then ``states[k]`` from ``times[k]``."""

    index: int
    start: PairState
    times: np.ndarray
    states: np.ndarray  # (m, 2) integer coordinates
    horizon: float
    overflows: int = 0

    @property
    def jumps(self) -> list[tuple[float, PairState]]:
        return [(float(t), PairState(int(a), int(b))) for t, (a, b) in zip(self.times, self.states)]

    def __len__(self) -> int:
        return len(self.times)

    def state_at(self, t: float) -> PairState:
        k = int(np.searchsorted(self.times, t, side="right"))
        if k == 0:
            return self.start
        a, b = self.states[k - 1]
        return PairState(int(a), int(b))

    def path(self) -> list[PairState]:
        return [self.start] + [p for _, p in self.jumps]


class SubdivisionError(RuntimeError):
    pass


class Sampler:
    """Sampler for the jump process of ``h`` started from ``(1, 2)``.

    Out-rates on the step grid are tabulated once, as ``(n_steps, sites, 4)``.
    """

    def __init__(
        self,
        h: ReducedHamiltonian,
        settings: SamplerSettings,
        psi_table: np.ndarray | None = None,
        max_levels: int = MAX_SUBDIVISION,
    ):
        self.h = h
        self.max_levels = max_levels
        self.settings = settings
        idx = h.indexing
        n = idx.total
        self.coords = idx.coordinates()
        self.start = idx.index((1, 2))
        self.psi0 = initial_state(idx).amplitudes

        src, dst, w = directed_edges(h)
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        self._src, self._dst, self._w = src, dst, w
        slot = np.zeros(len(src), dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
        for e, i in enumerate(src):
            slot[e] = counts[i]
            counts[i] += 1
        # padded slots point back at the site itself with rate 0
        self.nbr = np.tile(np.arange(n)[:, None], (1, MAX_DEGREE))
        self.nbr[src, slot] = dst
        self._slot = slot

        self.n_steps = settings.n_steps
        self.step = settings.step
        self.grid = self.step * np.arange(self.n_steps + 1)
        if psi_table is None:
            psi_table = h.spectrum.propagate(self.psi0, self.grid[: self.n_steps])
        self.rates = np.stack([self._out_rates(row) for row in psi_table[: self.n_steps]]) if self.n_steps else np.zeros((0, n, MAX_DEGREE))
        self._cache: dict[float, np.ndarray] = {}
        self.subdivided_steps = 0

    def _out_rates(self, psi: np.ndarray) -> np.ndarray:
        r = _edge_rates(psi, self._src, self._dst, self._w, self.settings.zero_threshold)
        out = np.zeros((self.h.dimension, MAX_DEGREE))
        out[self._src, self._slot] = r
        return out

    def rates_at(self, t: float) -> np.ndarray:
        if t not in self._cache:
            if len(self._cache) > 4096:
                self._cache.clear()
            psi = self.h.spectrum.propagate(self.psi0, np.array([t]))[0]
            self._cache[t] = self._out_rates(psi)
        return self._cache[t]

    def rng(self, traj_index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.settings.seed, traj_index]))

    def _subdivide(self, site: int, t0: float, h: float, level: int, out_rates, rng, events, flags) -> int:
        p = out_rates[site] * h
        total = p.sum()
        cap = self.settings.max_step_prob
        if total > cap:
            if level < self.max_levels:
                half = 0.5 * h
                site = self._subdivide(site, t0, half, level + 1, out_rates, rng, events, flags)
                return self._subdivide(site, t0 + half, half, level + 1, self.rates_at(t0 + half), rng, events, flags)
            flags[0] += 1
            if total > 1.0:
                p = p / total
        u = rng.random()
        cp = np.cumsum(p)
        j = int(np.count_nonzero(u >= cp))
        if j < MAX_DEGREE:
            lo = cp[j] - p[j]
            events.append((t0 + h * (u - lo) / p[j], int(self.nbr[site, j])))
            return int(self.nbr[site, j])
        return site

    def run(self, indices: Sequence[int]) -> list[Trajectory]:
        """Sample the trajectories with the given indices together."""
        indices = list(indices)
        m = len(indices)
        K, dt = self.n_steps, self.step
        rngs = [self.rng(i) for i in indices]
        U = np.empty((m, K))
        for r, g in enumerate(rngs):
            U[r] = g.random(K)
        site = np.full(m, self.start, dtype=np.int64)
        ev_row: list[np.ndarray] = []
        ev_time: list[np.ndarray] = []
        ev_site: list[np.ndarray] = []
        extra: dict[int, list[tuple[float, int]]] = {}
        overflow = np.zeros(m, dtype=np.int64)
        cap = self.settings.max_step_prob
        for k in range(K):
            p = self.rates[k][site] * dt
            cp = np.cumsum(p, axis=1)
            u = U[:, k]
            big = cp[:, -1] > cap
            j = np.count_nonzero(u[:, None] >= cp, axis=1)
            jump = (j < MAX_DEGREE) & ~big
            if jump.any():
                rows = np.nonzero(jump)[0]
                jj = j[rows]
                pj = p[rows, jj]
                lo = cp[rows, jj] - pj
                new = self.nbr[site[rows], jj]
                ev_row.append(rows)
                ev_time.append(k * dt + dt * (u[rows] - lo) / pj)
                ev_site.append(new)
                site[rows] = new
            if big.any():
                self.subdivided_steps += int(big.sum())
                for r in np.nonzero(big)[0]:
                    events: list[tuple[float, int]] = []
                    flags = [0]
                    # the first half-step reuses the tabulated rates
                    half = 0.5 * dt
                    s = self._subdivide(int(site[r]), k * dt, half, 1, self.rates[k], rngs[r], events, flags)
                    s = self._subdivide(s, k * dt + half, half, 1, self.rates_at(k * dt + half), rngs[r], events, flags)
                    site[r] = s
                    overflow[r] += flags[0]
                    extra.setdefault(int(r), []).extend(events)
        return self._assemble(indices, ev_row, ev_time, ev_site, extra, overflow)

    def _assemble(self, indices, ev_row, ev_time, ev_site, extra, overflow) -> list[Trajectory]:
        m = len(indices)
        rows = np.concatenate(ev_row) if ev_row else np.zeros(0, dtype=np.int64)
        times = np.concatenate(ev_time) if ev_time else np.zeros(0)
        sites = np.concatenate(ev_site) if ev_site else np.zeros(0, dtype=np.int64)
        if extra:
            er = [r for r, evs in extra.items() for _ in evs]
            et = [t for evs in extra.values() for t, _ in evs]
            es = [s for evs in extra.values() for _, s in evs]
            rows = np.concatenate([rows, np.array(er, dtype=np.int64)])
            times = np.concatenate([times, np.array(et)])
            sites = np.concatenate([sites, np.array(es, dtype=np.int64)])
        order = np.lexsort((times, rows))
        rows, times, sites = rows[order], times[order], sites[order]
        bounds = np.searchsorted(rows, np.arange(m + 1))
        start = self.h.indexing.state(self.start)
        out = []
        for r, i in enumerate(indices):
            sl = slice(bounds[r], bounds[r + 1])
            out.append(
                Trajectory(i, start, times[sl].copy(), self.coords[sites[sl]], self.settings.horizon, int(overflow[r]))
            )
            if overflow[r]:
                log.warning("trajectory %d: %d step(s) exceeded %d halvings", i, overflow[r], MAX_SUBDIVISION)
        return out


def psi_grid(h: ReducedHamiltonian, settings: SamplerSettings) -> np.ndarray:
    """psi from (1, 2) on ``0, step, ..., horizon``; shape ``(n_steps + 1, dim)``."""
    grid = settings.step * np.arange(settings.n_steps + 1)
    return h.spectrum.propagate(initial_state(h.indexing).amplitudes, grid)


def sample_trajectory(
    h: ReducedHamiltonian,
    psi_table: np.ndarray | None,
    settings: SamplerSettings,
    traj_index: int,
    sampler: Sampler | None = None,
) -> Trajectory:
    sampler = sampler or Sampler(h, settings, psi_table)
    return sampler.run([traj_index])[0]


@dataclass
class Ensemble:
    trajectories: list[Trajectory]
    settings: SamplerSettings

    @property
    def overflow_count(self) -> int:
        return sum(t.overflows for t in self.trajectories)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, i):
        return self.trajectories[i]


def ensemble(
    h: ReducedHamiltonian,
    psi_table: np.ndarray | None,
    settings: SamplerSettings,
    workers: int = 1,
    chunk_size: int = 1000,
    sampler: Sampler | None = None,
) -> Ensemble:
    """``n_traj`` trajectories ordered by index; content is independent of ``workers``."""
    sampler = sampler or Sampler(h, settings, psi_table)
    chunks = [range(i, min(i + chunk_size, settings.n_traj)) for i in range(0, settings.n_traj, chunk_size)]
    if workers <= 1:
        parts = [sampler.run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(sampler.run, chunks))
    return Ensemble([t for part in parts for t in part], settings)


def empirical_distribution(trajectories: Iterable[Trajectory], t: float, h: ReducedHamiltonian) -> np.ndarray:
    counts = np.zeros(h.dimension)
    n = 0
    for tr in trajectories:
        counts[h.indexing.index(tr.state_at(t))] += 1
        n += 1
    return counts / n


# --- trajectory files -----------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectories(trajectories: Iterable[Trajectory], path: str | PathLike, fmt: str = "csv") -> None:
    """One record per trajectory: index, then ``(time, x1, x2)`` triples.

    The first triple is the start state at time 0.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown trajectory format {fmt!r}")
    with open(path, "w", newline="") as fh:
        for tr in trajectories:
            triples = [(0.0, tr.start.x1, tr.start.x2)] + [(t, a, b) for t, (a, b) in tr.jumps]
            if fmt == "csv":
                row = [str(tr.index)]
                for t, a, b in triples:
                    row += [_fmt(t), str(a), str(b)]
                fh.write(",".join(row) + "\n")
            else:
                rec = {"index": tr.index, "path": [[float(t), a, b] for t, a, b in triples]}
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_trajectories(path: str | PathLike, horizon: float, fmt: str | None = None) -> list[Trajectory]:
    if fmt is None:
        fmt = "json" if str(path).endswith((".json", ".jsonl", ".ndjson")) else "csv"
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if fmt == "json":
                rec = json.loads(line)
                index, triples = rec["index"], rec["path"]
            else:
                fields = next(csv.reader(io.StringIO(line)))
                index = int(fields[0])
                vals = fields[1:]
                triples = [(float(vals[k]), int(vals[k + 1]), int(vals[k + 2])) for k in range(0, len(vals), 3)]
            (_, a0, b0), rest = triples[0], triples[1:]
            times = np.array([float(t) for t, _, _ in rest])
            states = np.array([(int(a), int(b)) for _, a, b in rest], dtype=np.int64).reshape(-1, 2)
            out.append(Trajectory(int(index), PairState(int(a0), int(b0)), times, states, horizon))
    return out
