"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 model-fit error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .archive import DesignArchive
from .bench.problems import get_problem, list_problems
from .config import parse_config
from .errors import ConfigError, DomainError, ModelFitError

EXIT_OK, EXIT_CONFIG, EXIT_FIT, EXIT_IO = 0, 2, 3, 4

DEFAULT_VARIANTS = ["pglo:q=1", "multpps_lhs:q=1"]


def _out_dir(arg: Optional[str], kind: str) -> Path:
    if arg:
        path = Path(arg)
    else:
        path = Path("results") / f"{kind}-{time.strftime('%Y%m%d-%H%M%S')}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _overrides(args) -> list:
    items = list(args.set or [])
    if args.seed is not None:
        items.append(f"seed={args.seed}")
    return items


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def cmd_run(args) -> int:
    from .engine import run, write_trace
    from .plotting import plot_trace

    cfg = parse_config(args.config, _overrides(args))
    out = _out_dir(args.out, "run")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    snap = out / "snapshot.json" if cfg.algorithm == "pglo" else None
    result = run(cfg, snapshot_path=snap)
    write_trace(result, out / "trace.csv")
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2) + "\n")
    problem = get_problem(cfg.problem, cfg.d, cfg.noise)
    plot_trace(result.trace, out / "convergence.png", f_star=problem.display_f_star, title=f"{cfg.algorithm} on {cfg.problem}")
    _say(args, f"incumbent: {np.array2string(result.incumbent, precision=6)}")
    _say(args, f"sample mean: {result.incumbent_mean:.6g}  true f: {result.true_f:.6g}  target: {problem.display_f_star:.6g}")
    _say(args, f"success: {result.success}  evaluations: {result.evaluations}  output: {out}")
    return EXIT_OK


def _study_spec(args):
    spec = {}
    if args.config:
        spec = json.loads(Path(args.config).read_text())
        if not isinstance(spec, dict):
            raise ConfigError("study config must be a JSON object")
    known = {"template", "seeds", "variants", "workers", "grid_step"}
    extra = set(spec) - known
    if extra:
        raise ConfigError(f"unknown study key(s): {', '.join(sorted(extra))}")
    template = dict(spec.get("template", {}))
    for item in args.set or []:
        key, _, raw = item.partition("=")
        if not _:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            template[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            template[key.strip()] = raw
    if "problem" not in template:
        raise ConfigError("missing required field: problem (set it in template or with --set problem=...)")
    seeds = spec.get("seeds", 3)
    if args.seeds is not None:
        seeds = args.seeds
    base = args.seed if args.seed is not None else 0
    seeds = list(range(base, base + int(seeds))) if isinstance(seeds, int) else [int(s) for s in seeds]
    variants = args.variant or spec.get("variants") or DEFAULT_VARIANTS
    return template, seeds, variants, args.workers or spec.get("workers", 1), spec.get("grid_step")


def cmd_study(args) -> int:
    from .bench.study import macro_study

    template, seeds, variants, workers, grid_step = _study_spec(args)
    parse_config(None, [], base={**template, "seed": seeds[0]})  # fail fast on a bad template
    out = _out_dir(args.out, "study")
    (out / "study_config.json").write_text(
        json.dumps({"template": template, "seeds": seeds, "variants": [str(v) for v in variants]}, indent=2) + "\n"
    )
    result = macro_study(template, seeds, variants, out_dir=out, workers=workers, grid_step=grid_step)
    for row in result.summary:
        _say(
            args,
            f"{row['variant']:<24} success {row['success_rate']:.2f}  reached {row['reach_rate']:.2f}  "
            f"median evals-to-success {row['median_evals_to_success']:.0f}  speedup {row['speedup_evals']:.2f}",
        )
    _say(args, f"output: {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .engine import load_snapshot
    from .surrogate import loocv_validate, rebuild

    snap = load_snapshot(args.snapshot)
    if not isinstance(snap, dict) or snap.get("model") is None:
        raise ConfigError(f"{args.snapshot} holds no fitted model")
    archive = DesignArchive.from_dict(snap["archive"])
    model = rebuild(snap["model"], archive)
    res = loocv_validate(model)
    spread = float(np.ptp(archive.means))
    print(f"design points: {model.n}  regions: {model.K}  inducing points: {len(model.inducing)}")
    print(f"LOOCV RMSE: {res.rmse:.6g}  (response range {spread:.6g}, ratio {res.rmse / spread if spread else float('nan'):.4f})")
    print(f"standardized residuals within +/-3: {res.fraction_within_3:.3f}")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in list_problems():
        p = get_problem(name)
        box = " x ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(p.lower, p.upper))
        opt = ", ".join("(" + ", ".join(f"{v:.6g}" for v in row) + ")" for row in p.optima)
        sense = "max" if p.maximize else "min"
        print(f"{name:<11} d={p.d}  {sense}  box {box}  optimum {opt}  f*={p.display_f_star:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pglo", description="Parallel global-local optimization of noisy functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default: results/<kind>-<timestamp>)")
        p.add_argument("--seed", type=int, help="root seed (study: first seed)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (repeatable)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p_run = sub.add_parser("run", help="run one optimization")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_study = sub.add_parser("study", help="macro-replication study over seeds and variants")
    common(p_study)
    p_study.add_argument("--seeds", type=int, help="number of seeds")
    p_study.add_argument("--variant", action="append", help="variant such as 'pglo:q=4' (repeatable)")
    p_study.add_argument("--workers", type=int, help="parallel processes")
    p_study.set_defaults(func=cmd_study)

    p_val = sub.add_parser("validate-model", help="LOOCV diagnostics for a saved snapshot")
    p_val.add_argument("--snapshot", required=True)
    p_val.add_argument("--quiet", action="store_true")
    p_val.set_defaults(func=cmd_validate)

    p_list = sub.add_parser("list-problems", help="list benchmark problems")
    p_list.set_defaults(func=cmd_list, quiet=False)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelFitError as exc:
        print(f"model fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
