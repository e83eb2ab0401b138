"""Run orchestration: initial design, the global/local/allocation loop and baselines.

A master process owns the archive and the model. Function evaluations are
the only concurrent work: each wave of jobs is split across ``q`` workers,
job ``j`` going to worker ``j % q``, and every worker draws noise from its
own stream, so results do not depend on completion order.

Budget is reserved before every wave of new points: a wave is only launched
if, after it, the replication floor for the enlarged archive can still be
paid within ``T``. Cumulative evaluations therefore never exceed ``T``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .acquisition import (
    BELIEVER_NOISE,
    GlobalCandidateBatch,
    PenaltyState,
    propose_domain_starts,
    propose_global_batch,
    propose_local_starts,
)
from .allocation import enforce_min_replications, min_replications, ocba_allocate
from .archive import DesignArchive
from .bench.problems import Problem, evaluate_noisy, get_problem
from .config import RunConfig, from_dict
from .direct_search import MeshState, PatternSearch
from .errors import ModelFitError
from .surrogate import (
    _child_seed,
    AglgpModel,
    RegionPartition,
    fit,
    loocv_validate,
    partition_space,
    rebuild,
    refit_local,
)

STREAMS = {"design": 0, "kmeans": 1, "acquisition": 2, "hyper": 3, "restart": 4}
NOISE_STREAM_BASE = 100
SNAPSHOT_VERSION = 1


def _generator(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


class Streams:
    """Named, independent random streams spawned from one root seed."""

    def __init__(self, seed: int, q: int):
        self.named = {name: _generator(seed, key) for name, key in STREAMS.items()}
        self.noise = [_generator(seed, NOISE_STREAM_BASE + w) for w in range(q)]

    def __getitem__(self, name: str) -> np.random.Generator:
        return self.named[name]

    def state(self) -> dict:
        return {
            "named": {k: g.bit_generator.state for k, g in self.named.items()},
            "noise": [g.bit_generator.state for g in self.noise],
        }

    def restore(self, state: dict) -> None:
        for k, s in state["named"].items():
            self.named[k].bit_generator.state = s
        for g, s in zip(self.noise, state["noise"]):
            g.bit_generator.state = s


class Evaluator:
    """Fans evaluation jobs out to ``q`` workers and joins at a barrier.

    Each job is ``(x, reps)``. The modeled clock advances by the busiest
    worker's replication count times ``cost_ms``; it is deterministic, unlike
    the wall clock.
    """

    def __init__(self, problem: Problem, streams: Streams, q: int, latency: float = 0.0, cost_ms: float = 10.0):
        self.problem = problem
        self.streams = streams
        self.q = q
        self.latency = latency
        self.cost_ms = cost_ms
        self.evaluations = 0
        self.modeled_ms = 0.0
        self.waves = 0

    def wave(self, jobs):
        jobs = [(np.asarray(x, dtype=float), int(n)) for x, n in jobs if int(n) > 0]
        if not jobs:
            return []
        out = [None] * len(jobs)
        lanes = [list(range(w, len(jobs), self.q)) for w in range(self.q)]

        def work(w):
            rng = self.streams.noise[w]
            for j in lanes[w]:
                x, n = jobs[j]
                out[j] = [evaluate_noisy(self.problem, x, rng, self.latency) for _ in range(n)]

        if self.latency > 0 and self.q > 1:
            with ThreadPoolExecutor(max_workers=self.q) as pool:
                list(pool.map(work, range(self.q)))
        else:
            for w in range(self.q):
                work(w)
        busiest = max(sum(jobs[j][1] for j in lane) for lane in lanes)
        self.evaluations += sum(n for _, n in jobs)
        self.modeled_ms += busiest * self.cost_ms
        self.waves += 1
        return out


@dataclass
class RunResult:
    """Outcome of one run; user-facing values are in the problem's own orientation."""

    config: RunConfig
    trace: list
    history: list
    archive: DesignArchive
    incumbent: np.ndarray
    incumbent_mean: float
    true_f: float
    relative_error: float
    success: bool
    evals_to_success: Optional[int]
    ms_to_success: Optional[float]
    evaluations: int
    modeled_ms: float
    wall_seconds: float
    iterations: int
    events: list = field(default_factory=list)
    model: Optional[AglgpModel] = None
    partition: Optional[RegionPartition] = None

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "incumbent": [float(v) for v in self.incumbent],
            "incumbent_mean": self.incumbent_mean,
            "true_f": self.true_f,
            "relative_error": self.relative_error,
            "success": self.success,
            "evals_to_success": self.evals_to_success,
            "modeled_ms_to_success": self.ms_to_success,
            "evaluations": self.evaluations,
            "design_points": self.archive.total_points,
            "modeled_ms": self.modeled_ms,
            "wall_seconds": self.wall_seconds,
            "iterations": self.iterations,
            "events": self.events,
        }


class _Thread:
    """One pattern-search thread working in unit coordinates."""

    def __init__(self, state: MeshState):
        self.state = state
        self.pending: list = []
        self.polled: list = []
        self.fresh = True


class _Runner:
    """Shared state and machinery for PGLO and the multistart baselines."""

    def __init__(self, config: RunConfig, use_floor: bool):
        self.cfg = config
        self.problem = get_problem(config.problem, config.d, config.noise)
        self.lower = self.problem.lower
        self.upper = self.problem.upper
        self.width = self.upper - self.lower
        self.dim = self.problem.d
        self.streams = Streams(config.seed, config.q)
        self.evaluator = Evaluator(self.problem, self.streams, config.q, config.latency, config.eval_cost_ms)
        self.archive = DesignArchive(self.dim)
        self.partition: Optional[RegionPartition] = None
        self.model: Optional[AglgpModel] = None
        self.use_floor = use_floor
        self.slope = config.kappa_slope if use_floor else 0.0
        self.M_min = config.M_min * math.sqrt(self.dim)
        self.search = PatternSearch(np.zeros(self.dim), np.ones(self.dim), self.M_min)
        self.trace: list = []
        self.history: list = []
        self.events: list = []
        self.t = 0
        self.q_k = np.zeros(config.K, dtype=int)
        self.noise_var = (lambda x: self.problem.noise_sd(x) ** 2) if config.known_noise else None
        self.callback: Optional[Callable] = None

    # -- coordinates and bookkeeping ----------------------------------------

    def to_raw(self, u):
        return self.lower + np.asarray(u, dtype=float) * self.width

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    @property
    def evals(self) -> int:
        return self.evaluator.evaluations

    def _region(self, x) -> int:
        return -1 if self.partition is None else self.partition.region_of(x)

    def _note(self, kind: str, **info):
        self.events.append({"iter": self.t, "evals": self.evals, "event": kind, **info})

    def _emit(self, stage: str):
        if self.callback is not None:
            self.callback(stage, self)

    def incumbent(self):
        i = self.archive.best_index()
        x = self.archive.locations[i]
        return i, x, float(self.archive.means[i]), self.problem.true_f(x)

    def _record_history(self):
        _, _, mean, f = self.incumbent()
        self.history.append((self.evals, self.evaluator.modeled_ms, f))

    def add_row(self, stage: str):
        _, x, mean, f = self.incumbent()
        self.trace.append(
            {
                "iter": self.t,
                "N_t": self.archive.total_points,
                "evals": self.evals,
                "incumbent": [float(v) for v in x],
                "incumbent_mean": self.problem.display(mean),
                "true_f": self.problem.display(f),
                "stage": stage,
                "q_k": [int(v) for v in self.q_k],
                "elapsed_ms": self.evaluator.modeled_ms,
            }
        )

    # -- evaluation with budget reservation ---------------------------------

    def floor_cost(self, n_new: int) -> int:
        """Replications needed to lift the archive plus ``n_new`` points to the floor."""
        if not self.use_floor:
            return 0
        need = min_replications(self.archive.total_points + n_new, self.slope)
        have = self.archive.replications
        return int(np.maximum(need - have, 0).sum()) + n_new * max(need - self.cfg.r, 0)

    def affordable(self, n_new: int) -> int:
        """Largest ``k <= n_new`` new points (``r`` replications each) the budget can carry."""
        r, T = self.cfg.r, self.cfg.T
        k = int(n_new)
        while k > 0 and self.evals + k * r + self.floor_cost(k) > T:
            k -= 1
        return k

    def evaluate_points(self, points, reps: Optional[int] = None) -> list:
        """Evaluate raw locations with ``reps`` (default ``r``) replications each."""
        reps = self.cfg.r if reps is None else reps
        points = [np.asarray(p, dtype=float) for p in points]
        if not points:
            return []
        results = self.evaluator.wave([(p, reps) for p in points])
        idx = [self.archive.add(p, vals, self._region(p)) for p, vals in zip(points, results)]
        self._record_history()
        return idx

    def replicate(self, counts) -> None:
        """Add replications to existing archive points (``counts`` aligned with the archive)."""
        counts = np.asarray(counts, dtype=int)
        which = np.flatnonzero(counts > 0)
        if which.size == 0:
            return
        locs = self.archive.locations
        results = self.evaluator.wave([(locs[i], counts[i]) for i in which])
        for i, vals in zip(which, results):
            self.archive.add(locs[i], vals)
        self._record_history()

    def lhs(self, n: int, stream: str = "design") -> np.ndarray:
        u = qmc.LatinHypercube(d=self.dim, seed=_child_seed(self.streams[stream])).random(n)
        return self.to_raw(u)

    # -- pattern search ------------------------------------------------------

    def _mean_at(self, u) -> Optional[float]:
        i = self.archive.find(self.to_raw(u))
        return None if i is None else float(self.archive.means[i])

    def new_thread(self, start_raw, mesh0: float) -> _Thread:
        u = self.to_unit(start_raw)
        return _Thread(MeshState(u, self._mean_at(u), mesh0))

    def _advance(self, th: _Thread):
        """Next candidate (unit) ``th`` needs evaluated, or None once its mesh is spent.

        A completed poll is scored on current archive means (the incumbent
        included), then the next poll is generated.
        """
        if th.state.mesh_size <= self.M_min:
            return None
        if not th.pending:
            if not th.fresh:
                inc = self._mean_at(th.state.incumbent)
                state = MeshState(th.state.incumbent, inc, th.state.mesh_size, th.state.step_count)
                th.state = self.search.update(state, [(c, self._mean_at(c)) for c in th.polled])
                if th.state.mesh_size <= self.M_min:
                    return None
            th.fresh = False
            th.pending = list(self.search.next_candidates(th.state))
            th.polled = []
        return th.pending[0]

    def ps_round(self, threads, limit: int):
        """One barrier-synchronized round: every live thread evaluates one poll point.

        Points already in the archive get ``r`` more replications. Returns the
        number of points evaluated and whether the budget cut the round short.
        """
        wanted, keys, owners = [], [], []
        for th in threads:
            c = self._advance(th)
            if c is None:
                continue
            key = self.archive_key(c)
            owners.append((th, key))
            if key not in keys:
                keys.append(key)
                wanted.append(c)
        if not wanted:
            return 0, False
        fresh = sum(self._mean_at(c) is None for c in wanted)
        k = min(len(wanted), limit)
        while k > 0 and self.evals + k * self.cfg.r + self.floor_cost(min(fresh, k)) > self.cfg.T:
            k -= 1
        if k <= 0:
            return 0, True
        self.evaluate_points([self.to_raw(c) for c in wanted[:k]])
        done = set(keys[:k])
        for th, key in owners:
            if key in done:
                th.polled.append(th.pending.pop(0))
        return k, k < len(wanted)

    def archive_key(self, u) -> tuple:
        return tuple(np.round(self.to_raw(u), 9))


# -- PGLO -----------------------------------------------------------------------


class PgloRun(_Runner):
    """The iterative global -> local -> allocation loop."""

    def __init__(self, config: RunConfig):
        super().__init__(config, use_floor=True)
        self.loocv = None
        self.exhausted = False

    def _fit(self):
        cfg = self.cfg
        return fit(
            self.archive, self.partition, cfg.m, self.lower, self.upper, rng=self.streams["hyper"],
            n_starts=cfg.hyper_starts, noise_var=self.noise_var,
        )

    def initialize(self):
        cfg = self.cfg
        X0 = self.lhs(cfg.n0)
        seed = int(self.streams["kmeans"].integers(2**31 - 1))
        self.partition = partition_space(X0, cfg.K, self.lower, self.upper, seed=seed)
        self.evaluate_points(X0)
        self.model = self._fit()
        self._validate_initial_model()
        self.add_row("init")
        self._emit("init")
        return self.archive, self.partition, self.model

    def _validate_initial_model(self):
        cfg = self.cfg
        if self.model.n < 3:
            return
        res = loocv_validate(self.model)
        spread = float(np.ptp(self.archive.means))
        self.loocv = {"rmse": res.rmse, "fraction_within_3": res.fraction_within_3, "range": spread}
        self._note("loocv", **self.loocv)
        if spread > 0 and res.rmse > cfg.loocv_threshold * spread:
            extra = max(1, cfg.n0 // 2)
            k = self.affordable(extra)
            if k > 0:
                self.evaluate_points(self.lhs(k))
                self.model = self._fit()
                self._note("loocv_augment", points=k)

    def refit(self):
        try:
            self.model = self._fit()
        except ModelFitError as exc:
            self._note("fit_fallback", region=exc.region_id, message=str(exc))

    def global_stage(self) -> GlobalCandidateBatch:
        cfg = self.cfg
        penalty = PenaltyState.from_archive(self.archive, cfg.v, cfg.a, self.lower, self.upper)
        batch = global_stage(self.model, self.archive, cfg.q, penalty, self.streams["acquisition"])
        self.q_k = batch.region_counts.astype(int)
        self._emit("global")
        return batch

    def _region_members(self, k: int) -> np.ndarray:
        locs = self.archive.locations
        return locs[self.partition.assign(locs) == k]

    def _seed_regions(self, regions):
        for k in regions:
            if len(self._region_members(k)):
                continue
            rng = self.streams["restart"]
            for _ in range(1000):
                x = self.to_raw(rng.random(self.dim))
                if self.partition.region_of(x) == k:
                    break
            else:
                x = self.to_raw(self.to_unit(self.partition.centroids[k]).clip(0, 1))
            if self.affordable(1) < 1:
                return False
            self.evaluate_points([x])
            self._note("seed_region", region=int(k))
        return True

    def _mesh0(self, k: int) -> float:
        u = self.to_unit(self._region_members(k))
        diam = float(np.linalg.norm(u.max(axis=0) - u.min(axis=0))) if len(u) else 0.0
        return 0.1 * diam if diam > 0 else 0.1 * math.sqrt(self.dim)

    def _refit_local(self, regions):
        try:
            self.model = refit_local(
                self.model, self.archive, regions, rng=self.streams["hyper"],
                n_starts=self.cfg.hyper_starts, noise_var=self.noise_var,
            )
        except ModelFitError as exc:
            self._note("local_fit_fallback", region=exc.region_id, message=str(exc))

    def _starts(self, regions):
        starts, owners = [], []
        means = self.archive.means
        assign = self.partition.assign(self.archive.locations)
        for k in regions:
            y_min_k = float(np.min(means[assign == k]))
            pts = propose_local_starts(
                self.model, k, int(self.q_k[k]), y_min_k, self.streams["acquisition"], separation=self.M_min,
            )
            starts.extend(pts)
            owners.extend([k] * len(pts))
        return starts, owners

    def local_stage(self, batch: GlobalCandidateBatch):
        """Local refits, q-mEI starts and barrier-synchronized pattern search."""
        cfg = self.cfg
        regions = [k for k in range(cfg.K) if batch.region_counts[k] > 0]
        if not self._seed_regions(regions):
            self.exhausted = True
            return 0
        n_t, restarts = 0, 0
        while True:
            self._refit_local(regions)
            starts, owners = self._starts(regions)
            k = min(self.affordable(len(starts)), cfg.n_max - n_t)
            if k <= 0:
                self.exhausted = self.affordable(1) == 0
                break
            self.evaluate_points(starts[:k])
            n_t += k
            threads = [self.new_thread(s, self._mesh0(o)) for s, o in zip(starts[:k], owners[:k])]
            stalled = False
            while n_t < cfg.n_max:
                if self.search.is_terminated([th.state for th in threads]):
                    break
                got, short = self.ps_round(threads, cfg.n_max - n_t)
                n_t += got
                if short and self.affordable(1) == 0:
                    self.exhausted = True
                if self.exhausted or got == 0:
                    stalled = got == 0 and not self.search.is_terminated([th.state for th in threads])
                    break
            if n_t >= cfg.n_max or self.exhausted or stalled or restarts >= cfg.restart_cap:
                break
            restarts += 1
            self._note("restart", restart=restarts, n_t=n_t)
        self._emit("local")
        return n_t

    def allocation_stage(self, budget: Optional[int] = None):
        """Replication floor first, then OCBA on whatever is left of the stage budget."""
        cfg = self.cfg
        deficits = enforce_min_replications(self.archive, cfg.kappa_slope)
        floor_total = int(deficits.sum())
        room = cfg.T - self.evals
        if floor_total > room:
            self._note("floor_unpaid", deficit=floor_total, room=room)
            deficits = _truncate(deficits, room)
            floor_total = int(deficits.sum())
        self.replicate(deficits)
        if budget is None:
            budget = int(round(cfg.alloc_fraction * cfg.n_max * cfg.r))
            if floor_total > budget:
                self._note("floor_exceeds_stage_budget", floor=floor_total, budget=budget)
        extra = max(0, min(budget - floor_total, cfg.T - self.evals))
        if extra > 0:
            plan = ocba_allocate(self.archive, extra)
            self.replicate(plan.replications)
        self._emit("allocation")

    def iterate(self) -> bool:
        """One outer iteration; False when the budget cannot carry another."""
        if self.exhausted or self.affordable(1) < 1:
            return False
        self.t += 1
        if self.t > 1:
            self.refit()
        batch = self.global_stage()
        self.local_stage(batch)
        self.allocation_stage()
        self.add_row("iteration")
        return True

    def finish(self):
        self.allocation_stage(budget=self.cfg.T - self.evals)
        self.add_row("final")
        self._emit("final")

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "config": self.cfg.to_dict(),
            "t": self.t,
            "archive": self.archive.to_dict(),
            "model": None if self.model is None else self.model.to_dict(self.archive),
            "partition": None if self.partition is None else self.partition.to_dict(),
            "streams": self.streams.state(),
            "evaluations": self.evaluator.evaluations,
            "modeled_ms": self.evaluator.modeled_ms,
            "waves": self.evaluator.waves,
            "trace": self.trace,
            "history": self.history,
            "events": self.events,
            "q_k": [int(v) for v in self.q_k],
            "exhausted": self.exhausted,
            "loocv": self.loocv,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "PgloRun":
        run = cls(from_dict(snap["config"]))
        run.t = int(snap["t"])
        run.archive = DesignArchive.from_dict(snap["archive"])
        if snap["partition"] is not None:
            run.partition = RegionPartition.from_dict(snap["partition"])
        run.streams.restore(snap["streams"])
        run.evaluator.evaluations = int(snap["evaluations"])
        run.evaluator.modeled_ms = float(snap["modeled_ms"])
        run.evaluator.waves = int(snap["waves"])
        run.trace = list(snap["trace"])
        run.history = [tuple(h) for h in snap["history"]]
        run.events = list(snap["events"])
        run.q_k = np.asarray(snap["q_k"], dtype=int)
        run.exhausted = bool(snap["exhausted"])
        run.loocv = snap.get("loocv")
        if snap["model"] is not None:
            run.model = rebuild(snap["model"], run.archive, run.noise_var)
        return run


def _truncate(counts, room: int) -> np.ndarray:
    out = np.zeros_like(counts)
    for i in range(len(counts)):
        take = min(int(counts[i]), room)
        out[i] = take
        room -= take
    return out


def global_stage(model: AglgpModel, archive: DesignArchive, q: int, penalty: PenaltyState, rng=None):
    """q-point penalized global batch; ``region_counts`` gives the workers per region."""
    return propose_global_batch(model, archive, q, penalty, rng)


def initialize(config: RunConfig):
    """Initial design, region partition and first model fit.

    Returns:
        ``(archive, partition, model)``.
    """
    run = PgloRun(config)
    return run.initialize()


def _result(runner: _Runner, wall: float, model=None) -> RunResult:
    _, x, mean, f = runner.incumbent()
    problem = runner.problem
    err = problem.error(f)
    hit = next(((e, ms) for e, ms, fv in runner.history if problem.success(fv)), None)
    return RunResult(
        config=runner.cfg, trace=runner.trace, history=runner.history, archive=runner.archive,
        incumbent=x, incumbent_mean=problem.display(mean), true_f=problem.display(f), relative_error=err,
        success=problem.success(f), evals_to_success=None if hit is None else int(hit[0]),
        ms_to_success=None if hit is None else float(hit[1]), evaluations=runner.evals,
        modeled_ms=runner.evaluator.modeled_ms, wall_seconds=wall, iterations=runner.t,
        events=runner.events, model=model, partition=runner.partition,
    )


def _drive(run: PgloRun, snapshot_path=None, max_iterations: Optional[int] = None):
    every = run.cfg.snapshot_every
    while max_iterations is None or run.t < max_iterations:
        if not run.iterate():
            break
        if snapshot_path is not None and every and run.t % every == 0:
            save_snapshot(run, snapshot_path)


def run(
    config: RunConfig,
    callback: Optional[Callable] = None,
    snapshot_path=None,
    max_iterations: Optional[int] = None,
) -> RunResult:
    """Run the configured algorithm to budget exhaustion.

    Args:
        config: validated run configuration; ``config.algorithm`` selects
            PGLO or one of the multistart pattern-search baselines.
        callback: optional ``f(stage, runner)`` hook called after each stage
            (``init``, ``global``, ``local``, ``allocation``, ``final``).
        snapshot_path: where to write resumable snapshots (every
            ``snapshot_every`` iterations and at the end).
        max_iterations: stop the outer loop early (the final allocation
            still spends the remaining budget).
    """
    if config.algorithm != "pglo":
        mode = "lhs" if config.algorithm == "multpps_lhs" else "q_ei_starts"
        return run_baseline_multistart_ps(config, mode, callback=callback)
    start = time.perf_counter()
    r = PgloRun(config)
    r.callback = callback
    r.initialize()
    _drive(r, snapshot_path, max_iterations)
    r.finish()
    if snapshot_path is not None:
        save_snapshot(r, snapshot_path)
    return _result(r, time.perf_counter() - start, r.model)


def resume(snapshot, callback: Optional[Callable] = None, snapshot_path=None) -> RunResult:
    """Continue a PGLO run from a snapshot dict or file written at an iteration boundary."""
    if not isinstance(snapshot, dict):
        snapshot = json.loads(Path(snapshot).read_text())
    start = time.perf_counter()
    r = PgloRun.from_snapshot(snapshot)
    r.callback = callback
    if r.trace and r.trace[-1]["stage"] == "final":
        return _result(r, 0.0, r.model)
    _drive(r, snapshot_path)
    r.finish()
    if snapshot_path is not None:
        save_snapshot(r, snapshot_path)
    return _result(r, time.perf_counter() - start, r.model)


def save_snapshot(run_state: PgloRun, path) -> None:
    Path(path).write_text(json.dumps(run_state.snapshot()))


def load_snapshot(path) -> dict:
    return json.loads(Path(path).read_text())


# -- baselines -------------------------------------------------------------------


class BaselineRun(_Runner):
    """Multistart parallel pattern search without the global loop or OCBA."""

    def __init__(self, config: RunConfig, init_mode: str):
        if init_mode not in ("lhs", "q_ei_starts"):
            raise ValueError(f"init_mode must be 'lhs' or 'q_ei_starts', got {init_mode!r}")
        super().__init__(config, use_floor=False)
        self.init_mode = init_mode
        self.believer: Optional[AglgpModel] = None
        self.mesh0 = 0.1 * math.sqrt(self.dim) * config.K ** (-1.0 / self.dim)

    def _fresh_starts(self) -> list:
        q = self.cfg.q
        if self.init_mode == "lhs":
            return list(self.lhs(q, "restart"))
        y_min = float(np.min(self.archive.means))
        pts = propose_domain_starts(self.believer, q, y_min, self.streams["acquisition"])
        for p in pts:
            self.believer = self.believer.condition(p, self.believer.predict(p).mean_overall, BELIEVER_NOISE)
        return list(pts)

    def initialize(self):
        cfg = self.cfg
        if self.init_mode == "q_ei_starts":
            X0 = self.lhs(cfg.n0)
            seed = int(self.streams["kmeans"].integers(2**31 - 1))
            self.partition = partition_space(X0, cfg.K, self.lower, self.upper, seed=seed)
            self.evaluate_points(X0)
            self.model = fit(
                self.archive, self.partition, cfg.m, self.lower, self.upper, rng=self.streams["hyper"],
                n_starts=cfg.hyper_starts, noise_var=self.noise_var,
            )
            self.believer = self.model
            self.add_row("init")
        self._emit("init")

    def _launch(self):
        starts = self._fresh_starts()
        k = self.affordable(len(starts))
        if k == 0:
            return []
        self.evaluate_points(starts[:k])
        return [self.new_thread(s, self.mesh0) for s in starts[:k]]

    def execute(self):
        self.initialize()
        threads = self._launch()
        while threads:
            live = [th for th in threads if th.state.mesh_size > self.M_min]
            got = 0
            if live:
                got, _ = self.ps_round(live, len(live))
            if got == 0:
                if self.affordable(1) == 0:
                    break
                self.t += 1
                self.add_row("restart")
                threads = self._launch()
        self.add_row("final")
        self._emit("final")


def run_baseline_multistart_ps(config: RunConfig, init_mode: str = "lhs", callback=None) -> RunResult:
    """MultPPS: ``q`` pattern-search threads from LHS or one-shot q-mEI starts.

    Threads that reach the stopping mesh idle until all have, then every
    thread restarts from fresh starts. Budget accounting and the trace
    format match :func:`run`.
    """
    start = time.perf_counter()
    b = BaselineRun(config, init_mode)
    b.callback = callback
    b.execute()
    return _result(b, time.perf_counter() - start, b.model)


# -- output -----------------------------------------------------------------------


def trace_header(d: int) -> list:
    return (
        ["iter", "N_t", "evals"]
        + [f"incumbent_x{i + 1}" for i in range(d)]
        + ["incumbent_mean", "true_f", "stage", "q_k_vector", "elapsed_ms"]
    )


def trace_csv(result_or_trace, d: Optional[int] = None) -> str:
    """Render a trace as CSV text (floats in shortest round-trip form)."""
    trace = result_or_trace.trace if isinstance(result_or_trace, RunResult) else result_or_trace
    if d is None:
        d = len(trace[0]["incumbent"]) if trace else 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(d))
    for row in trace:
        w.writerow(
            [row["iter"], row["N_t"], row["evals"]]
            + [repr(float(v)) for v in row["incumbent"]]
            + [repr(float(row["incumbent_mean"])), repr(float(row["true_f"])), row["stage"],
               ";".join(str(v) for v in row["q_k"]), repr(float(row["elapsed_ms"]))]
        )
    return buf.getvalue()


def write_trace(result: RunResult, path) -> None:
    Path(path).write_text(trace_csv(result, result.archive.dim))
