"""Evaluated design points with replication statistics."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class DesignPoint:
    location: np.ndarray
    replications: int
    sample_mean: float
    sample_variance: float
    region_id: int = -1


def _key(x) -> tuple:
    return tuple(float(f"{v:.12g}") for v in np.asarray(x, dtype=float).ravel())


class DesignArchive:
    """Ordered set of distinct evaluated locations.

    Repeated evaluations of an existing location are merged into its record
    (running mean and sum of squared deviations), so locations stay pairwise
    distinct and ``total_evaluations`` is the replication sum.
    """

    def __init__(self, dim: int):
        self.dim = int(dim)
        self._loc: list[np.ndarray] = []
        self._n: list[int] = []
        self._mean: list[float] = []
        self._m2: list[float] = []
        self._region: list[int] = []
        self._index: dict[tuple, int] = {}

    def __len__(self) -> int:
        return len(self._loc)

    @property
    def total_points(self) -> int:
        return len(self._loc)

    @property
    def total_evaluations(self) -> int:
        return int(sum(self._n))

    def find(self, x) -> Optional[int]:
        return self._index.get(_key(x))

    def add(self, x, values: Iterable[float], region_id: int = -1) -> int:
        """Record observations at ``x``; returns the point index."""
        x = np.asarray(x, dtype=float).ravel().copy()
        if x.shape[0] != self.dim:
            raise ValueError(f"expected a {self.dim}-d location, got {x.shape[0]}")
        values = [float(v) for v in values]
        key = _key(x)
        idx = self._index.get(key)
        if idx is None:
            if not values:
                raise ValueError("a new point needs at least one observation")
            idx = len(self._loc)
            self._index[key] = idx
            self._loc.append(x)
            self._n.append(0)
            self._mean.append(0.0)
            self._m2.append(0.0)
            self._region.append(int(region_id))
        for v in values:
            self._n[idx] += 1
            delta = v - self._mean[idx]
            self._mean[idx] += delta / self._n[idx]
            self._m2[idx] += delta * (v - self._mean[idx])
        return idx

    def set_regions(self, region_ids) -> None:
        region_ids = [int(k) for k in region_ids]
        if len(region_ids) != len(self._loc):
            raise ValueError("one region id per point is required")
        self._region = region_ids

    @property
    def locations(self) -> np.ndarray:
        if not self._loc:
            return np.empty((0, self.dim))
        return np.vstack(self._loc)

    @property
    def replications(self) -> np.ndarray:
        return np.asarray(self._n, dtype=int)

    @property
    def means(self) -> np.ndarray:
        return np.asarray(self._mean, dtype=float)

    @property
    def variances(self) -> np.ndarray:
        n = self.replications
        m2 = np.asarray(self._m2, dtype=float)
        out = np.zeros(len(n))
        many = n > 1
        out[many] = np.maximum(m2[many] / (n[many] - 1), 0.0)
        return out

    @property
    def regions(self) -> np.ndarray:
        return np.asarray(self._region, dtype=int)

    @property
    def points(self) -> list[DesignPoint]:
        var = self.variances
        return [
            DesignPoint(self._loc[i].copy(), self._n[i], self._mean[i], float(var[i]), self._region[i])
            for i in range(len(self._loc))
        ]

    def best_index(self) -> int:
        """Index of the smallest sample mean (lowest index on ties)."""
        return int(np.argmin(self.means))

    def copy(self) -> "DesignArchive":
        other = DesignArchive(self.dim)
        other._loc = [x.copy() for x in self._loc]
        other._n = list(self._n)
        other._mean = list(self._mean)
        other._m2 = list(self._m2)
        other._region = list(self._region)
        other._index = dict(self._index)
        return other

    def subset(self, keep) -> "DesignArchive":
        other = DesignArchive(self.dim)
        for i in np.flatnonzero(np.asarray(keep)):
            other._index[_key(self._loc[i])] = len(other._loc)
            other._loc.append(self._loc[i].copy())
            other._n.append(self._n[i])
            other._mean.append(self._mean[i])
            other._m2.append(self._m2[i])
            other._region.append(self._region[i])
        return other

    def digest(self) -> str:
        h = hashlib.sha256()
        for x, n, m, s in zip(self._loc, self._n, self._mean, self._m2):
            h.update(np.asarray(x, dtype=float).tobytes())
            h.update(np.array([n, m, s], dtype=float).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "locations": [x.tolist() for x in self._loc],
            "replications": list(self._n),
            "means": list(self._mean),
            "m2": list(self._m2),
            "regions": list(self._region),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignArchive":
        arc = cls(data["dim"])
        for x, n, m, s, k in zip(data["locations"], data["replications"], data["means"], data["m2"], data["regions"]):
            x = np.asarray(x, dtype=float)
            arc._index[_key(x)] = len(arc._loc)
            arc._loc.append(x)
            arc._n.append(int(n))
            arc._mean.append(float(m))
            arc._m2.append(float(s))
            arc._region.append(int(k))
        return arc
