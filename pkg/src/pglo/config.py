"""Run configuration: defaults, validation and JSON/override parsing."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from .errors import ConfigError

ALGORITHMS = ("pglo", "multpps_lhs", "multpps_qei")


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one optimization run.

    ``n0`` defaults to ``10 * d`` and the effective inducing-set size is
    ``min(m, N)`` at each fit. ``eval_cost_ms`` is the modeled cost of one
    replication and drives the deterministic ``elapsed_ms`` trace column.
    """

    problem: str
    d: Optional[int] = None
    noise: Any = None
    K: int = 4
    n0: Optional[int] = None
    r: int = 5
    T: int = 1500
    n_max: int = 40
    q: int = 1
    m: int = 20
    v: float = 3.0
    a: float = 0.05
    M_min: float = 1e-3
    kappa_slope: float = 0.05
    alloc_fraction: float = 0.3
    seed: int = 0
    algorithm: str = "pglo"
    known_noise: bool = False
    latency: float = 0.0
    eval_cost_ms: float = 10.0
    restart_cap: int = 3
    hyper_starts: int = 5
    loocv_threshold: float = 0.5
    snapshot_every: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return validate(dataclasses.replace(self, **changes))


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _fail(msg):
    raise ConfigError(msg)


def validate(cfg: RunConfig) -> RunConfig:
    """Fill derived defaults and check every invariant, naming the fields involved."""
    from .bench.problems import get_problem

    problem = get_problem(cfg.problem, cfg.d, cfg.noise)
    d = problem.d
    n0 = cfg.n0 if cfg.n0 is not None else 10 * d
    cfg = dataclasses.replace(cfg, d=d, n0=int(n0))
    ints = ("K", "n0", "r", "T", "n_max", "q", "m", "seed", "restart_cap", "hyper_starts", "snapshot_every")
    for name in ints:
        val = getattr(cfg, name)
        if isinstance(val, bool) or not isinstance(val, (int, float)) or val != int(val):
            _fail(f"{name} must be an integer, got {val!r}")
        object.__setattr__(cfg, name, int(val))
    for name in ("K", "n0", "r", "T", "n_max", "q", "m", "hyper_starts"):
        if getattr(cfg, name) < 1:
            _fail(f"{name} must be >= 1")
    if cfg.n0 < cfg.K:
        _fail(f"n0 ({cfg.n0}) must be >= K ({cfg.K})")
    if cfg.n0 * cfg.r > cfg.T:
        _fail(f"n0 * r ({cfg.n0} * {cfg.r}) must not exceed T ({cfg.T})")
    if cfg.n_max < cfg.q:
        _fail(f"n_max ({cfg.n_max}) must be >= q ({cfg.q})")
    if cfg.m < cfg.K:
        _fail(f"m ({cfg.m}) must be >= K ({cfg.K})")
    for name in ("v", "a", "M_min", "alloc_fraction", "eval_cost_ms"):
        val = getattr(cfg, name)
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val) or val <= 0:
            _fail(f"{name} must be a positive number, got {val!r}")
    if not 0 <= cfg.kappa_slope or not math.isfinite(cfg.kappa_slope):
        _fail("kappa_slope must be a nonnegative number")
    if cfg.alloc_fraction > 1:
        _fail("alloc_fraction must be in (0, 1]")
    if cfg.latency < 0:
        _fail("latency must be nonnegative")
    if cfg.restart_cap < 0 or cfg.snapshot_every < 0:
        _fail("restart_cap and snapshot_every must be nonnegative")
    if cfg.algorithm not in ALGORITHMS:
        _fail(f"algorithm must be one of {ALGORITHMS}, got {cfg.algorithm!r}")
    if not 0 < cfg.loocv_threshold:
        _fail("loocv_threshold must be positive")
    return cfg


def from_dict(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(FIELDS))
    if unknown:
        _fail(f"unknown config key(s): {', '.join(unknown)}")
    if "problem" not in data:
        _fail("missing required field: problem")
    return validate(RunConfig(**data))


def _parse_override(item: str):
    if "=" not in item:
        _fail(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def parse_config(
    path: Union[str, Path, None] = None,
    overrides: Iterable[str] = (),
    base: Optional[dict] = None,
) -> RunConfig:
    """Read a JSON config file, apply ``key=value`` overrides and validate.

    Override values are decoded as JSON when possible (``q=8`` is an int,
    ``noise=small`` stays a string).

    Raises:
        ConfigError: malformed file, unknown key, missing ``problem`` or a
            violated invariant.
        OSError: the file cannot be read.
    """
    data = dict(base or {})
    if path is not None:
        text = Path(path).read_text()
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            _fail(f"{path}: top level must be an object")
        data.update(loaded)
    for item in overrides:
        key, value = _parse_override(item)
        data[key] = value
    return from_dict(data)
