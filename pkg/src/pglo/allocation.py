"""Replication allocation over evaluated points: OCBA plus a minimum floor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .archive import DesignArchive

DELTA_FLOOR = 1e-8
SD_FLOOR = 1e-4


@dataclass
class AllocationPlan:
    replications: np.ndarray
    budget: int
    best_index: int
    continuous: np.ndarray

    @property
    def total(self) -> int:
        return int(self.replications.sum())


def min_replications(n_points: int, slope: float = 0.05) -> int:
    """``ceil(kappa_N)`` for the linear sequence ``kappa_i = slope * i``.

    Computed in exact rational arithmetic so that e.g. ``0.05 * 140`` is 7.
    """
    k = Fraction(str(slope)) * int(n_points)
    return int(math.ceil(k))


def enforce_min_replications(archive: DesignArchive, slope: float = 0.05) -> np.ndarray:
    """Replications each point still needs to reach ``ceil(kappa_{N_t})``."""
    reps = archive.replications
    need = min_replications(len(reps), slope)
    return np.maximum(need - reps, 0).astype(int)


def ocba_weights(means, sds) -> tuple[np.ndarray, int]:
    """Continuous OCBA proportions (summing to 1) and the best index.

    Non-best points get weight ``(sd_i / delta_i)^2``; the best gets
    ``sd_b * sqrt(sum_i (w_i / sd_i)^2)``. Gaps are floored at
    ``1e-8 * range(means)`` so co-best points stay finite.
    """
    means = np.asarray(means, dtype=float)
    sds = np.maximum(np.asarray(sds, dtype=float), SD_FLOOR)
    n = len(means)
    b = int(np.argmin(means))
    w = np.zeros(n)
    if n == 1:
        w[b] = 1.0
        return w, b
    spread = float(np.ptp(means))
    eps = DELTA_FLOOR * (spread if spread > 0 else 1.0)
    others = np.arange(n) != b
    delta = np.maximum(means[others] - means[b], eps)
    w[others] = (sds[others] / delta) ** 2
    w[b] = sds[b] * math.sqrt(float(np.sum((w[others] / sds[others]) ** 2)))
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        w[:] = 0.0
        w[b] = 1.0
        return w, b
    return w / total, b


def ocba_allocate(archive_or_means, budget: int, sds=None) -> AllocationPlan:
    """Split ``budget`` added replications by the OCBA ratio rule.

    Accepts either a :class:`DesignArchive` or an array of sample means
    together with ``sds``. Continuous shares are floored to integers and the
    rounding remainder goes to the best point, so the plan sums to
    ``budget`` exactly.
    """
    if isinstance(archive_or_means, DesignArchive):
        means = archive_or_means.means
        sds = np.sqrt(archive_or_means.variances)
    else:
        means = np.asarray(archive_or_means, dtype=float)
        sds = np.asarray(sds, dtype=float)
    budget = int(budget)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    w, b = ocba_weights(means, sds)
    cont = budget * w
    reps = np.maximum(np.floor(cont), 0).astype(int)
    reps[b] += budget - int(reps.sum())
    return AllocationPlan(reps, budget, b, cont)
