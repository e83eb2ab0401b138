"""Generalized pattern search on sample means.

The poll set is the ``2d`` coordinate directions scaled by the mesh size.
Polls are complete: all candidates are evaluated before the incumbent moves
to the best one (strict improvement) or the mesh halves.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping, Protocol, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class MeshState:
    incumbent: np.ndarray
    incumbent_mean: float
    mesh_size: float
    step_count: int = 0

    def __post_init__(self):
        if not self.mesh_size > 0:
            raise ValueError("mesh size must be positive")


def poll_candidates(state: MeshState, lower, upper) -> np.ndarray:
    """Incumbent +/- mesh along each axis, clipped to the box.

    Clipped candidates that land on the incumbent are dropped, as are
    duplicates, so at most ``2d`` rows come back.
    """
    x = np.asarray(state.incumbent, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    out = []
    for i in range(x.shape[0]):
        for sign in (1.0, -1.0):
            c = x.copy()
            c[i] = min(max(c[i] + sign * state.mesh_size, lower[i]), upper[i])
            if np.array_equal(c, x) or any(np.array_equal(c, o) for o in out):
                continue
            out.append(c)
    return np.asarray(out).reshape(-1, x.shape[0])


Results = Union[Mapping[tuple, float], Sequence[tuple]]


def _as_pairs(results: Results):
    items = results.items() if isinstance(results, Mapping) else results
    return [(np.asarray(loc, dtype=float), float(val)) for loc, val in items]


def update_mesh(state: MeshState, results: Results) -> MeshState:
    """Advance one poll.

    ``results`` maps candidate locations to their sample means (a mapping or
    a sequence of ``(location, mean)`` pairs). A strictly lower mean moves the
    incumbent with the mesh unchanged; anything else halves the mesh.
    """
    pairs = _as_pairs(results)
    if pairs:
        means = np.array([v for _, v in pairs])
        best = int(np.argmin(means))
        if means[best] < state.incumbent_mean:
            return MeshState(pairs[best][0].copy(), float(means[best]), state.mesh_size, state.step_count + 1)
    return replace(state, mesh_size=state.mesh_size / 2.0, step_count=state.step_count + 1)


def is_terminated(states: Sequence[MeshState], M_min: float) -> bool:
    """True once the smallest mesh among the live threads is at most ``M_min``."""
    if not states:
        raise ValueError("at least one live search state is required")
    return min(s.mesh_size for s in states) <= M_min


class DirectSearch(Protocol):
    """What the engine needs from a local direct-search method."""

    def next_candidates(self, state) -> np.ndarray: ...

    def update(self, state, results): ...

    def is_terminated(self, states) -> bool: ...


class PatternSearch:
    """Coordinate pattern search bound to a box and a stopping mesh."""

    def __init__(self, lower, upper, M_min: float):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.M_min = float(M_min)

    def next_candidates(self, state: MeshState) -> np.ndarray:
        return poll_candidates(state, self.lower, self.upper)

    def update(self, state: MeshState, results: Results) -> MeshState:
        return update_mesh(state, results)

    def is_terminated(self, states: Sequence[MeshState]) -> bool:
        return is_terminated(states, self.M_min)


def converge_quadratic_sanity(
    f: Callable[[np.ndarray], float],
    start,
    lower,
    upper,
    mesh0: float = 0.1,
    min_mesh: float = 1e-6,
    max_polls: int = 100_000,
):
    """Run noiseless pattern search until the mesh drops below ``min_mesh``.

    Returns the final state and the list of states visited (one per poll).
    """
    search = PatternSearch(lower, upper, min_mesh)
    x0 = np.asarray(start, dtype=float)
    state = MeshState(x0, float(f(x0)), mesh0)
    trail = [state]
    while state.mesh_size >= min_mesh and len(trail) <= max_polls:
        cands = search.next_candidates(state)
        state = search.update(state, [(c, f(c)) for c in cands])
        trail.append(state)
    return state, trail
