"""Macro-replication studies: many seeded runs per variant, summarized.

Evaluations-to-success is the primary metric. A run that never reaches the
1 % target is censored at its budget ``T``. Speedups compare each variant
against the ``q = 1`` variant of the same algorithm in the same study.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from ..config import RunConfig, from_dict
from ..engine import RunResult, run, trace_csv

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
WALL_COLUMNS = ("mean_wall_seconds", "speedup_wall")


@dataclass(frozen=True)
class Variant:
    """An algorithm/parallelism combination, plus any other config overrides."""

    name: str
    overrides: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, spec: Union[str, dict, "Variant"]) -> "Variant":
        """Accepts ``"pglo:q=4"``-style strings, dicts or Variants.

        A dict may carry a ``name``; otherwise one is derived from the
        overrides.
        """
        if isinstance(spec, Variant):
            return spec
        if isinstance(spec, dict):
            over = {k: v for k, v in spec.items() if k != "name"}
            return cls(spec.get("name") or _label(over), over)
        head, _, rest = str(spec).partition(":")
        over = {"algorithm": head.strip()}
        for item in filter(None, (p.strip() for p in rest.split(","))):
            key, _, raw = item.partition("=")
            over[key.strip()] = _coerce(raw.strip())
        return cls(str(spec), over)


def _coerce(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def _label(over: dict) -> str:
    alg = over.get("algorithm", "pglo")
    rest = ",".join(f"{k}={v}" for k, v in sorted(over.items()) if k != "algorithm")
    return f"{alg}:{rest}" if rest else alg


@dataclass
class RunRecord:
    variant: str
    seed: int
    algorithm: str
    q: int
    success: bool
    reached: bool
    evals_to_success: int
    censored: bool
    modeled_ms_to_success: float
    wall_seconds: float
    true_f: float
    relative_error: float
    evaluations: int
    trace: list
    history: list


@dataclass
class StudyResult:
    runs: list
    summary: list
    quantiles: list
    budget: int

    def rows_for(self, variant: str) -> list:
        return [r for r in self.runs if r.variant == variant]


def _one(args) -> RunRecord:
    label, cfg = args
    res: RunResult = run(cfg)
    reached = res.evals_to_success is not None
    return RunRecord(
        variant=label, seed=cfg.seed, algorithm=cfg.algorithm, q=cfg.q, success=res.success, reached=reached,
        evals_to_success=res.evals_to_success if reached else cfg.T, censored=not reached,
        modeled_ms_to_success=res.ms_to_success if reached else res.modeled_ms,
        wall_seconds=res.wall_seconds, true_f=res.true_f, relative_error=res.relative_error,
        evaluations=res.evaluations, trace=res.trace, history=res.history,
    )


def _configs(template, seeds, variants):
    base = template.to_dict() if isinstance(template, RunConfig) else dict(template)
    jobs = []
    for v in variants:
        for s in seeds:
            jobs.append((v.name, from_dict({**base, **v.overrides, "seed": int(s)})))
    return jobs


def _incumbent_curve(history, problem_display, grid) -> np.ndarray:
    """User-facing true value of the incumbent after each grid budget (NaN before the first wave)."""
    ev = np.array([h[0] for h in history])
    fv = np.array([problem_display(h[2]) for h in history])
    pos = np.searchsorted(ev, grid, side="right") - 1
    out = np.full(len(grid), np.nan)
    ok = pos >= 0
    out[ok] = fv[pos[ok]]
    return out


def macro_study(
    template,
    seeds: Sequence[int],
    variants: Iterable,
    out_dir=None,
    workers: int = 1,
    grid_step: Optional[int] = None,
) -> StudyResult:
    """Run every variant on every seed and summarize.

    Args:
        template: base config (dict or RunConfig) shared by all variants.
        seeds: macro-replication seeds; each variant sees the same seeds.
        variants: :class:`Variant` objects or their string/dict forms.
        out_dir: if given, ``study_summary.csv``, ``convergence_quantiles.csv``,
            ``runs.csv``, one trace CSV per run and a convergence figure are
            written there.
        workers: processes to spread runs over (results are identical for
            any value).
        grid_step: evaluation spacing of the convergence-quantile grid.

    Returns:
        A :class:`StudyResult`; apart from the wall-clock columns it is a pure
        function of the inputs.
    """
    from .problems import get_problem

    variants = [Variant.parse(v) for v in variants]
    jobs = _configs(template, list(seeds), variants)
    if not jobs:
        raise ValueError("a study needs at least one seed and one variant")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one, jobs))
    else:
        records = [_one(j) for j in jobs]

    cfg0 = jobs[0][1]
    budgets = {cfg.T for _, cfg in jobs}
    if len({(cfg.problem, cfg.d, str(cfg.noise)) for _, cfg in jobs}) > 1 or len(budgets) > 1:
        raise ValueError("all variants must share the problem and the budget")
    T = cfg0.T
    problem = get_problem(cfg0.problem, cfg0.d, cfg0.noise)
    summary = _summarize(records, variants)
    step = grid_step or max(1, T // 60)
    grid = np.arange(step, T + 1, step)
    if grid[-1] != T:
        grid = np.append(grid, T)
    quantiles = []
    for v in _unique(variants):
        curves = np.array([_incumbent_curve(r.history, problem.display, grid) for r in records if r.variant == v.name])
        for j, e in enumerate(grid):
            col = curves[:, j]
            col = col[~np.isnan(col)]
            qs = np.quantile(col, QUANTILES) if len(col) else np.full(len(QUANTILES), np.nan)
            quantiles.append({"variant": v.name, "evals": int(e), **{f"q{int(p * 100)}": float(x) for p, x in zip(QUANTILES, qs)}})
    result = StudyResult(records, summary, quantiles, T)
    if out_dir is not None:
        write_study(result, out_dir, problem)
    return result


def _unique(variants):
    seen, out = set(), []
    for v in variants:
        if v.name not in seen:
            seen.add(v.name)
            out.append(v)
    return out


def _summarize(records, variants) -> list:
    rows = []
    for v in variants:
        rs = [r for r in records if r.variant == v.name]
        e2s = np.array([r.evals_to_success for r in rs], dtype=float)
        ms = np.array([r.modeled_ms_to_success for r in rs], dtype=float)
        wall = np.array([r.wall_seconds for r in rs], dtype=float)
        rows.append(
            {
                "variant": v.name,
                "algorithm": rs[0].algorithm,
                "q": rs[0].q,
                "runs": len(rs),
                "success_rate": float(np.mean([r.success for r in rs])),
                "reach_rate": float(np.mean([r.reached for r in rs])),
                "censored": int(sum(r.censored for r in rs)),
                "mean_evals_to_success": float(e2s.mean()),
                "median_evals_to_success": float(np.median(e2s)),
                "mean_modeled_ms_to_success": float(ms.mean()),
                "mean_final_true_f": float(np.mean([r.true_f for r in rs])),
                "mean_wall_seconds": float(wall.mean()),
            }
        )
    for row in rows:
        ref = next((o for o in rows if o["algorithm"] == row["algorithm"] and o["q"] == 1), None)
        if ref is None:
            row.update(speedup_evals=float("nan"), speedup_modeled=float("nan"), speedup_wall=float("nan"))
            continue
        row["speedup_evals"] = ref["mean_evals_to_success"] / row["mean_evals_to_success"]
        row["speedup_modeled"] = ref["mean_modeled_ms_to_success"] / row["mean_modeled_ms_to_success"]
        row["speedup_wall"] = ref["mean_wall_seconds"] / row["mean_wall_seconds"]
    return rows


def paired_wins(result: StudyResult, a: str, b: str) -> float:
    """Fraction of seeds on which variant ``a`` needs strictly fewer evaluations than ``b``.

    Seeds where both are censored count as losses for ``a``.
    """
    ra = {r.seed: r for r in result.rows_for(a)}
    rb = {r.seed: r for r in result.rows_for(b)}
    seeds = sorted(set(ra) & set(rb))
    if not seeds:
        raise ValueError("the two variants share no seeds")
    wins = sum(ra[s].evals_to_success < rb[s].evals_to_success for s in seeds)
    return wins / len(seeds)


def _write_rows(path: Path, rows: list):
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def write_study(result: StudyResult, out_dir, problem=None) -> None:
    from ..plotting import plot_convergence_quantiles

    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    _write_rows(out / "study_summary.csv", result.summary)
    _write_rows(out / "convergence_quantiles.csv", result.quantiles)
    run_rows = [
        {k: getattr(r, k) for k in ("variant", "seed", "algorithm", "q", "success", "reached", "evals_to_success",
                                    "censored", "modeled_ms_to_success", "wall_seconds", "true_f",
                                    "relative_error", "evaluations")}
        for r in result.runs
    ]
    _write_rows(out / "runs.csv", run_rows)
    counts: dict = {}
    for r in result.runs:
        stem = f"{_slug(r.variant)}_seed{r.seed}"
        counts[stem] = counts.get(stem, 0) + 1
        if counts[stem] > 1:
            stem = f"{stem}_{counts[stem]}"
        (out / "traces" / f"{stem}.csv").write_text(trace_csv(r.trace))
    f_star = None if problem is None else problem.display_f_star
    plot_convergence_quantiles(result.quantiles, out / "convergence.png", f_star=f_star)
