"""First-passage and sojourn statistics at a target site, conditioned on hitting it."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from os import PathLike
from typing import Callable, Iterable

import numpy as np
from scipy import stats as sps

from .process import Trajectory


class EmptySubsampleError(ValueError):
    """No trajectory of the ensemble visits the target."""


def _at_target(tr: Trajectory, target) -> np.ndarray:
    if len(tr.states) == 0:
        return np.zeros(0, dtype=bool)
    return (tr.states[:, 0] == target[0]) & (tr.states[:, 1] == target[1])


def first_passage_time(tr: Trajectory, target: tuple[int, int], horizon: float | None = None) -> float | None:
    """Earliest arrival at ``target`` inside ``(0, horizon)``.

    Time 0 is excluded, so a trajectory starting at ``target`` only counts a
    later return.
    """
    horizon = tr.horizon if horizon is None else horizon
    k = np.nonzero(_at_target(tr, target) & (tr.times > 0) & (tr.times < horizon))[0]
    return float(tr.times[k[0]]) if len(k) else None


def sojourn_time(tr: Trajectory, target: tuple[int, int], horizon: float | None = None) -> float:
    """Total time spent at ``target`` within ``(0, horizon)``."""
    horizon = tr.horizon if horizon is None else horizon
    starts = np.concatenate([[0.0], tr.times])
    ends = np.concatenate([tr.times, [horizon]])
    here = np.concatenate([[tuple(tr.start) == tuple(target)], _at_target(tr, target)])
    lo = np.clip(starts, 0.0, horizon)
    hi = np.clip(ends, 0.0, horizon)
    return float(np.sum((hi - lo)[here]))


@dataclass(frozen=True)
class PassageRecord:
    index: int
    hit: bool
    first_passage: float | None = None
    sojourn: float | None = None


def passage_record(tr: Trajectory, target: tuple[int, int], horizon: float | None = None) -> PassageRecord:
    fpt = first_passage_time(tr, target, horizon)
    if fpt is None:
        return PassageRecord(tr.index, False)
    return PassageRecord(tr.index, True, fpt, sojourn_time(tr, target, horizon))


class EmpiricalCDF:
    """Right-continuous step function ``F(x) = #{v <= x} / n``."""

    def __init__(self, values: Iterable[float]):
        self.values = np.sort(np.asarray(list(values), dtype=float))
        if self.values.size == 0:
            raise ValueError("empirical CDF needs at least one value")

    def __call__(self, x):
        return np.searchsorted(self.values, x, side="right") / self.values.size

    def __len__(self) -> int:
        return self.values.size

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct values and the CDF just after each of them."""
        v = np.unique(self.values)
        return v, self(v)

    def mean(self) -> float:
        return float(self.values.mean())

    def median(self) -> float:
        return float(np.median(self.values))

    def iqr(self) -> float:
        return iqr(self.values)

    def summary(self) -> dict:
        return {"n": len(self), "mean": self.mean(), "median": self.median(), "iqr": self.iqr()}

    def write_csv(self, path: str | PathLike) -> None:
        v, f = self.steps()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "cumulative_fraction"])
            for a, b in zip(v, f):
                w.writerow([format(float(a), ".17g"), format(float(b), ".17g")])


def iqr(x, axis=-1):
    q75, q25 = np.percentile(x, [75, 25], axis=axis)
    return q75 - q25 if np.ndim(q75) else float(q75 - q25)


@dataclass
class ConditionalStats:
    target: tuple[int, int]
    horizon: float
    records: list[PassageRecord]
    fpt: EmpiricalCDF
    sojourn: EmpiricalCDF

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def n_hit(self) -> int:
        return len(self.fpt)

    @property
    def hit_fraction(self) -> float:
        return self.n_hit / self.n

    def summary(self) -> dict:
        return {
            "n": self.n,
            "hits": self.n_hit,
            "hit_fraction": self.hit_fraction,
            "first_passage": self.fpt.summary(),
            "sojourn": self.sojourn.summary(),
        }


def conditional_cdfs(trajectories: Iterable[Trajectory], target: tuple[int, int], horizon: float) -> ConditionalStats:
    """FPT and sojourn CDFs over the trajectories that visit ``target`` in ``(0, horizon)``."""
    records = [passage_record(tr, target, horizon) for tr in trajectories]
    if not records:
        raise ValueError("ensemble is empty")
    hits = [r for r in records if r.hit]
    if not hits:
        raise EmptySubsampleError(f"none of {len(records)} trajectories visits {tuple(target)} before t={horizon}")
    return ConditionalStats(
        tuple(target),
        horizon,
        records,
        EmpiricalCDF(r.first_passage for r in hits),
        EmpiricalCDF(r.sojourn for r in hits),
    )


def bootstrap_difference(
    x: np.ndarray,
    y: np.ndarray,
    statistic: Callable = np.mean,
    confidence: float = 0.99,
    n_resamples: int = 2000,
    seed: int = 0,
) -> tuple[float, float, float]:
    """``statistic(x) - statistic(y)`` with a percentile bootstrap interval.

    Returns ``(estimate, low, high)``; the samples are resampled independently.
    """

    def diff(a, b, axis=-1):
        return statistic(a, axis=axis) - statistic(b, axis=axis)

    res = sps.bootstrap(
        (np.asarray(x, float), np.asarray(y, float)),
        diff,
        confidence_level=confidence,
        n_resamples=n_resamples,
        method="percentile",
        vectorized=True,
        random_state=np.random.default_rng(seed),
    )
    ci = res.confidence_interval
    return float(diff(np.asarray(x, float), np.asarray(y, float))), float(ci.low), float(ci.high)
