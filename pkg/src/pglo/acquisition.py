"""Expected-improvement criteria and their batch (kriging believer) maximizers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit
from scipy.stats import norm, qmc

from .archive import DesignArchive
from .errors import AcquisitionError
from .surrogate import AglgpModel, Prediction, _child_seed

BELIEVER_NOISE = 1e-8


def expected_improvement(gap, s):
    """``E[max(gap - s Z, 0)]`` for standard normal ``Z``, vectorized.

    ``gap`` is ``y_min - mean``; where ``s == 0`` the value is ``max(gap, 0)``.
    """
    gap = np.asarray(gap, dtype=float)
    s = np.asarray(s, dtype=float)
    gap, s = np.broadcast_arrays(gap, s)
    out = np.array(np.maximum(gap, 0.0), dtype=float)
    pos = s > 0
    if np.any(pos):
        with np.errstate(over="ignore"):
            z = gap[pos] / s[pos]
            out[pos] = s[pos] * norm.pdf(z) + gap[pos] * norm.cdf(z)
    return np.maximum(out, 0.0)


def mei(prediction: Prediction, y_min: float) -> float:
    """Modified EI: bounded overall mean with spatial-only standard deviation."""
    s = math.sqrt(max(prediction.var_z, 0.0))
    return float(expected_improvement(y_min - prediction.mean_bounded, s))


def mei_arrays(model: AglgpModel, x, y_min: float) -> np.ndarray:
    p = model.predict_arrays(x)
    return expected_improvement(y_min - p["mean_bounded"], np.sqrt(p["var_z"]))


def penalty_factor(n_a, v: float):
    """``1 / (1 + exp(n_a / v - 5))``."""
    return expit(5.0 - np.asarray(n_a, dtype=float) / v)


@dataclass
class PenaltyState:
    """Neighbour counts behind the gEI density penalty.

    ``a`` is the neighbourhood radius in unit-box coordinates; anchors are
    raw locations that count once each, artificial entries count ``c`` times.
    """

    v: float
    a: float
    lower: np.ndarray
    upper: np.ndarray
    anchors: np.ndarray
    artificial: list = field(default_factory=list)

    @classmethod
    def from_archive(cls, archive: DesignArchive, v: float, a_fraction: float, lower, upper) -> "PenaltyState":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        a = a_fraction * math.sqrt(len(lower))
        return cls(v, a, lower, upper, archive.locations.copy())

    def _unit(self, x):
        return (np.atleast_2d(np.asarray(x, dtype=float)) - self.lower) / (self.upper - self.lower)

    def neighbor_counts(self, x) -> np.ndarray:
        u = self._unit(x)
        counts = np.zeros(len(u))
        if len(self.anchors):
            d = np.linalg.norm(u[:, None, :] - self._unit(self.anchors)[None, :, :], axis=2)
            counts += np.sum(d <= self.a, axis=1)
        for loc, c in self.artificial:
            counts += c * (np.linalg.norm(u - self._unit(loc), axis=1) <= self.a)
        return counts

    def distance(self, x, y) -> np.ndarray:
        """Unit-box distance from each row of ``x`` to the single location ``y``."""
        return np.linalg.norm(self._unit(x) - self._unit(y), axis=1)

    def copy(self) -> "PenaltyState":
        return PenaltyState(self.v, self.a, self.lower, self.upper, self.anchors.copy(), list(self.artificial))

    def with_anchor(self, x) -> "PenaltyState":
        out = self.copy()
        out.anchors = np.vstack([self.anchors, np.atleast_2d(x)]) if len(self.anchors) else np.atleast_2d(x).copy()
        return out


def global_ei_arrays(model: AglgpModel, x, y_gmin: float) -> np.ndarray:
    p = model.predict_arrays(x)
    return expected_improvement(y_gmin - p["mean_global"], np.sqrt(p["var_global"]))


def gei_arrays(model: AglgpModel, x, y_gmin: float, penalty: PenaltyState) -> np.ndarray:
    return global_ei_arrays(model, x, y_gmin) * penalty_factor(penalty.neighbor_counts(x), penalty.v)


def gei(x, model: AglgpModel, y_gmin: float, penalty: PenaltyState) -> float:
    """Penalized global EI at a single location."""
    return float(gei_arrays(model, np.atleast_2d(x), y_gmin, penalty)[0])


def maximize_acquisition(
    f: Callable[[np.ndarray], np.ndarray],
    lower,
    upper,
    rng,
    member: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    fallback: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    extra=None,
    n_candidates: Optional[int] = None,
    n_starts: int = 5,
    tol: float = 1e-4,
):
    """Maximize a vectorized criterion over a box, optionally restricted.

    A Latin hypercube of ``256 * d`` candidates is scored; the best
    ``n_starts`` are then refined by coordinate-wise pattern moves whose step
    halves on failure until it drops below ``tol`` (in units of the box
    width). When every candidate scores zero the candidate with the largest
    ``fallback`` value (typically a posterior variance) is returned instead.

    Returns:
        ``(location, value)`` in raw coordinates.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.shape[0]
    width = upper - lower
    n_c = n_candidates or 256 * d
    rng = np.random.default_rng(rng)
    u = qmc.LatinHypercube(d=d, seed=_child_seed(rng)).random(n_c)
    if extra is not None and len(extra):
        u = np.vstack([u, (np.atleast_2d(extra) - lower) / width])
    x = lower + u * width
    if member is not None:
        keep = np.asarray(member(x), dtype=bool)
        u, x = u[keep], x[keep]
    if len(u) == 0:
        raise AcquisitionError("no feasible candidate in the search domain")
    vals = np.asarray(f(x), dtype=float)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    if not np.any(vals > 0):
        if fallback is not None:
            i = int(np.argmax(fallback(x)))
            return x[i].copy(), float(vals[i])
        i = int(np.argmax(vals))
        return x[i].copy(), float(vals[i])

    order = np.argsort(-vals, kind="stable")[:n_starts]
    cur_u = u[order].copy()
    cur_f = vals[order].copy()
    step = np.full(len(cur_u), n_c ** (-1.0 / d))
    eye = np.eye(d)
    moves = np.vstack([eye, -eye])
    for _ in range(400):
        active = np.flatnonzero(step >= tol)
        if active.size == 0:
            break
        trial = np.clip(cur_u[active, None, :] + step[active, None, None] * moves[None, :, :], 0.0, 1.0)
        flat = trial.reshape(-1, d)
        xt = lower + flat * width
        ft = np.full(len(flat), -np.inf)
        ok = np.ones(len(flat), dtype=bool) if member is None else np.asarray(member(xt), dtype=bool)
        if np.any(ok):
            ft[ok] = f(xt[ok])
        ft = np.where(np.isfinite(ft), ft, -np.inf).reshape(len(active), 2 * d)
        best = np.argmax(ft, axis=1)
        best_f = ft[np.arange(len(active)), best]
        better = best_f > cur_f[active]
        moved = active[better]
        cur_u[moved] = trial[better, best[better]]
        cur_f[moved] = best_f[better]
        step[active[~better]] *= 0.5
    i = int(np.argmax(cur_f))
    return lower + cur_u[i] * width, float(cur_f[i])


@dataclass
class GlobalCandidateBatch:
    points: np.ndarray
    region_counts: np.ndarray
    believer_values: np.ndarray
    artificial_counts: list

    @property
    def q(self) -> int:
        return len(self.points)

    @property
    def regions(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.region_counts)), self.region_counts)


def artificial_count(ei_unpenalized: float, best_other: float, n_a: float, v: float) -> int:
    """Smallest integer count pushing the penalized EI at a repeat below ``best_other``."""
    if best_other <= 0 or ei_unpenalized <= best_other:
        return 1
    need = v * (5.0 + math.log(ei_unpenalized / best_other - 1.0)) - n_a
    return max(1, int(math.ceil(need)))


def _outside(penalty: PenaltyState, centres, radius):
    centres = [np.asarray(c) for c in centres]

    def member(x):
        ok = np.ones(len(x), dtype=bool)
        for c in centres:
            ok &= penalty.distance(x, c) > radius
        return ok

    return member


def propose_global_batch(
    model: AglgpModel,
    archive: DesignArchive,
    q: int,
    penalty: PenaltyState,
    rng=None,
    max_attempts: int = 8,
) -> GlobalCandidateBatch:
    """Greedy q-point global batch under penalized gEI with believer updates.

    After each accepted point the model is conditioned on its overall
    prediction and the point joins the neighbour anchors. An argmax that
    falls inside the neighbourhood of an earlier batch member is treated as
    a repeat: artificial neighbours are stacked on that member until the
    penalized gEI of the repeat no longer beats the best alternative, and
    the maximization is rerun. If repeats persist after ``max_attempts``
    the best alternative outside every member's neighbourhood is taken.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    rng = np.random.default_rng(rng)
    lo, hi = model.lower, model.upper
    cur = model
    pen = penalty.copy()
    points, believed, artificial = [], [], []
    for _ in range(q):
        y_gmin = cur.inducing_global_min()
        chosen, alt = None, None
        for _attempt in range(max_attempts):
            crit = lambda X, m=cur, p=pen, yg=y_gmin: gei_arrays(m, X, yg, p)
            var = lambda X, m=cur: m.predict_arrays(X)["var_global"]
            x, _ = maximize_acquisition(crit, lo, hi, rng, fallback=var)
            near = [j for j, pj in enumerate(points) if pen.distance(np.atleast_2d(x), pj)[0] <= pen.a]
            if not near:
                chosen = x
                break
            member = _outside(pen, points, pen.a)
            try:
                alt, best_other = maximize_acquisition(crit, lo, hi, rng, member=member, fallback=var)
            except AcquisitionError:
                break
            if best_other <= 0:
                chosen = alt
                break
            e = float(global_ei_arrays(cur, np.atleast_2d(x), y_gmin)[0])
            n_a = float(pen.neighbor_counts(np.atleast_2d(x))[0])
            extra = artificial_count(e, best_other, n_a, pen.v)
            for j in near:
                pen.artificial.append((points[j].copy(), extra))
                artificial.append((points[j].copy(), extra))
        if chosen is None:
            chosen = alt
        if chosen is None:
            raise AcquisitionError("could not find a batch point distinct from earlier members")
        y_hat = cur.predict(chosen).mean_overall
        points.append(chosen)
        believed.append(y_hat)
        cur = cur.condition(chosen, y_hat, BELIEVER_NOISE)
        pen = pen.with_anchor(chosen)
    pts = np.vstack(points)
    counts = np.bincount(model.partition.assign(pts), minlength=model.K)
    return GlobalCandidateBatch(pts, counts, np.asarray(believed), artificial)


def propose_local_starts(
    model: AglgpModel,
    region: int,
    q_k: int,
    y_min_k: float,
    rng=None,
    separation: float = 0.0,
) -> np.ndarray:
    """Greedy ``q_k`` starting points inside one region by mEI with believer updates.

    ``separation`` (unit-box distance) is only enforced when the believer
    update alone fails to move the argmax away from an earlier start.
    """
    if q_k < 1:
        raise ValueError("q_k must be >= 1")
    idx = np.flatnonzero(model.regions == region)
    if idx.size == 0:
        raise ValueError(f"region {region} has no design points; seed it before selecting starts")
    rng = np.random.default_rng(rng)
    lo, hi = model.lower, model.upper
    width = hi - lo
    in_region = lambda X: model.partition.assign(X) == region
    design = model.scaler.from_unit(model.X[idx])
    tol = max(separation, 1e-9)
    cur = model
    starts = []
    for _ in range(q_k):
        crit = lambda X, m=cur: mei_arrays(m, X, y_min_k)
        var = lambda X, m=cur: m.predict_arrays(X)["var_z"]
        x, _ = maximize_acquisition(crit, lo, hi, rng, member=in_region, fallback=var, extra=design)
        close = lambda c: np.linalg.norm((x - c) / width) <= tol
        if any(close(s) for s in starts):
            def member(X, prev=list(starts)):
                ok = in_region(X)
                for s in prev:
                    ok &= np.linalg.norm((X - s) / width, axis=1) > tol
                return ok

            try:
                x, _ = maximize_acquisition(crit, lo, hi, rng, member=member, fallback=var, extra=design)
            except AcquisitionError:
                def member(X, prev=list(starts)):
                    ok = in_region(X)
                    for s in prev:
                        ok &= np.linalg.norm((X - s) / width, axis=1) > 1e-9
                    return ok

                x, _ = maximize_acquisition(crit, lo, hi, rng, member=member, fallback=var, extra=design)
        starts.append(x)
        cur = cur.condition(x, cur.predict(x).mean_overall, BELIEVER_NOISE)
    return np.vstack(starts)


def propose_domain_starts(model: AglgpModel, q: int, y_min: float, rng=None) -> np.ndarray:
    """``q`` starting points over the whole box by mEI with believer updates."""
    if q < 1:
        raise ValueError("q must be >= 1")
    rng = np.random.default_rng(rng)
    lo, hi = model.lower, model.upper
    width = hi - lo
    design = model.scaler.from_unit(model.X)
    cur = model
    starts = []
    for _ in range(q):
        crit = lambda X, m=cur: mei_arrays(m, X, y_min)

        def member(X, prev=list(starts)):
            ok = np.ones(len(X), dtype=bool)
            for s in prev:
                ok &= np.linalg.norm((X - s) / width, axis=1) > 1e-9
            return ok

        var = lambda X, m=cur: m.predict_arrays(X)["var_z"]
        x, _ = maximize_acquisition(crit, lo, hi, rng, member=member, fallback=var, extra=design)
        starts.append(x)
        cur = cur.condition(x, cur.predict(x).mean_overall, BELIEVER_NOISE)
    return np.vstack(starts)


def qgei_monte_carlo(
    model: AglgpModel, points, y_gmin: float, penalty: PenaltyState, n_samples: int = 100_000, rng=None
) -> tuple[float, float]:
    """Monte-Carlo estimate (and standard error) of the joint q-point gEI.

    Diagnostic only: samples the global component jointly at ``points``.
    """
    rng = np.random.default_rng(rng)
    pts = np.atleast_2d(points)
    mean = model.predict_arrays(pts)["mean_global"]
    cov = model.global_covariance(pts)
    w, vecs = np.linalg.eigh((cov + cov.T) / 2)
    root = vecs * np.sqrt(np.maximum(w, 0.0))
    draws = mean + rng.standard_normal((n_samples, len(pts))) @ root.T
    pen = penalty_factor(penalty.neighbor_counts(pts), penalty.v)
    vals = np.max(np.maximum(y_gmin - draws, 0.0) * pen, axis=1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))
