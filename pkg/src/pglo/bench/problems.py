"""Test problems with analytic heteroscedastic noise.

Every problem is exposed to the optimizer as a minimization; problems that
are naturally maximized (the two-dimensional sine-product surface) are
negated internally and converted back for reporting.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from ..errors import ConfigError, DomainError

NOISE_LEVELS = {"small": 0.01, "large": 0.10}


@dataclass(frozen=True)
class Problem:
    """A box-constrained minimization problem.

    Attributes:
        objective: noiseless internal (minimized) objective.
        noise_sd: standard deviation of the additive Gaussian noise at ``x``.
        optima: known minimizers, one per row.
        f_star: internal optimum value.
        maximize: True when the user-facing problem is a maximization, in
            which case reported values are ``-objective``.
        value_range: range of the user-facing function over the box.
    """

    name: str
    lower: np.ndarray
    upper: np.ndarray
    objective: Callable[[np.ndarray], float]
    noise_sd: Callable[[np.ndarray], float]
    optima: np.ndarray
    f_star: float
    maximize: bool = False
    value_range: float = 1.0

    @property
    def d(self) -> int:
        return int(self.lower.shape[0])

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        tol = 1e-9 * (self.upper - self.lower)
        if x.shape != self.lower.shape or np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            raise DomainError(f"{self.name}: {x} outside the box")
        return x

    def true_f(self, x) -> float:
        return float(self.objective(self.check(x)))

    def display(self, value: float) -> float:
        """Internal objective value in the user's orientation."""
        return -value if self.maximize else value

    @property
    def display_f_star(self) -> float:
        return self.display(self.f_star)

    def error(self, internal_value: float) -> float:
        """Relative error to the optimum (absolute error over range when ``f* = 0``)."""
        gap = abs(self.f_star - internal_value)
        if self.f_star != 0:
            return gap / abs(self.f_star)
        return gap / self.value_range

    def success(self, internal_value: float, tol: float = 0.01) -> bool:
        return self.error(internal_value) < tol


def sun_function(x1, x2) -> float:
    """Two-dimensional sine-power surface with 25 local maxima on [0, 100]^2."""
    if not (0 <= x1 <= 100 and 0 <= x2 <= 100):
        raise DomainError("sun_function is defined on [0, 100]^2")
    return _sun_raw(x1, x2)


def _sun_raw(x1, x2):
    t1 = 10 * np.sin(0.05 * np.pi * x1) ** 6 / 2 ** (((x1 - 90) / 50) ** 2)
    t2 = 10 * np.sin(0.05 * np.pi * x2) ** 6 / 2 ** (((x2 - 90) / 50) ** 2)
    return t1 + t2


def sun_noise_sd(x) -> float:
    x1, x2 = x
    return math.sqrt(3.0) * (1 + x1 / 100) * (1 + x2 / 100)


def griewank(x) -> float:
    x = np.asarray(x, dtype=float)
    i = np.arange(1, x.shape[-1] + 1)
    return float(1 + np.sum(x**2) / 4000 - np.prod(np.cos(x / np.sqrt(i))))


def ackley(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    return float(
        -20 * np.exp(-0.2 * np.sqrt(np.sum(x**2) / d)) - np.exp(np.sum(np.cos(2 * np.pi * x)) / d) + 20 + np.e
    )


def levy(x) -> float:
    x = np.asarray(x, dtype=float)
    w = 1 + (x - 1) / 4
    head = np.sin(np.pi * w[0]) ** 2
    mid = np.sum((w[:-1] - 1) ** 2 * (1 + 10 * np.sin(np.pi * w[:-1] + 1) ** 2))
    tail = (w[-1] - 1) ** 2 * (1 + np.sin(2 * np.pi * w[-1]) ** 2)
    return float(head + mid + tail)


def schwefel(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(418.9829 * x.shape[-1] - np.sum(x * np.sin(np.sqrt(np.abs(x)))))


def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x**2))


def motivating(x) -> float:
    x = float(np.asarray(x).ravel()[0])
    return (2 * x + 9.96) * math.cos(13 * x - 0.26)


_STANDARD = {
    "griewank": (griewank, 600.0, 0.0),
    "ackley": (ackley, 32.768, 0.0),
    "levy": (levy, 10.0, 1.0),
    "schwefel": (schwefel, 500.0, 420.9687),
}


def _grid_range(f, lower, upper, per_dim=201) -> float:
    d = len(lower)
    if d <= 2:
        axes = [np.linspace(lower[i], upper[i], per_dim) for i in range(d)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    else:
        u = qmc.LatinHypercube(d=d, seed=0).random(per_dim**2)
        pts = lower + u * (upper - lower)
    vals = np.array([f(p) for p in pts])
    return float(vals.max() - vals.min())


def _noise_fraction(noise) -> float:
    if isinstance(noise, str):
        if noise not in NOISE_LEVELS:
            raise ConfigError(f"noise must be one of {sorted(NOISE_LEVELS)} or a fraction, got {noise!r}")
        return NOISE_LEVELS[noise]
    frac = float(noise)
    if frac < 0:
        raise ConfigError("noise fraction must be nonnegative")
    return frac


@lru_cache(maxsize=None)
def _standard_range(name: str, d: int) -> float:
    f, half, _ = _STANDARD[name]
    return _grid_range(f, -half * np.ones(d), half * np.ones(d))


def standard_suite(name: str, d: int = 2, noise="small") -> Problem:
    """Griewank, Ackley, Levy or Schwefel on its usual box with constant noise.

    The noise standard deviation is the chosen fraction (``small`` = 1 %,
    ``large`` = 10 %) of the function's range over the box.
    """
    if name not in _STANDARD:
        raise ConfigError(f"unknown standard problem {name!r}; choose from {sorted(_STANDARD)}")
    f, half, opt = _STANDARD[name]
    lower, upper = -half * np.ones(d), half * np.ones(d)
    rng_ = _standard_range(name, d)
    sd = _noise_fraction(noise) * rng_
    optimum = np.full((1, d), opt)
    return Problem(
        name=name, lower=lower, upper=upper, objective=f, noise_sd=lambda x, s=sd: s,
        optima=optimum, f_star=0.0, value_range=rng_,
    )


@lru_cache(maxsize=None)
def _motivating_optimum():
    res = minimize_scalar(motivating, bounds=(0.70, 0.80), method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(res.fun)


def get_problem(name: str, d: Optional[int] = None, noise=None) -> Problem:
    """Look up a problem by name (see :func:`list_problems`).

    ``noise`` of ``None`` (or ``"native"``) keeps the problem's own noise
    model; ``"small"``, ``"large"`` or a number sets a constant sd as that
    fraction of the function's range. Standard-suite problems default to
    ``"small"``.
    """
    if name == "sun":
        if d not in (None, 2):
            raise ConfigError("the sun problem is two-dimensional")
        frac = None if noise in (None, "native") else _noise_fraction(noise)
        sd = sun_noise_sd if frac is None else (lambda x, s=frac * 20.0: s)
        return Problem(
            name="sun", lower=np.zeros(2), upper=np.full(2, 100.0),
            objective=lambda x: -float(_sun_raw(x[0], x[1])), noise_sd=sd,
            optima=np.array([[90.0, 90.0]]), f_star=-20.0, maximize=True, value_range=20.0,
        )
    if name in _STANDARD:
        return standard_suite(name, 2 if d is None else int(d), "small" if noise is None else noise)
    if name == "sphere":
        d = 2 if d is None else int(d)
        frac = 0.0 if noise is None else _noise_fraction(noise)
        rng_ = 25.0 * d
        return Problem(
            name="sphere", lower=-5 * np.ones(d), upper=5 * np.ones(d), objective=sphere,
            noise_sd=lambda x, s=frac * rng_: s, optima=np.zeros((1, d)), f_star=0.0, value_range=rng_,
        )
    if name == "motivating":
        if d not in (None, 1):
            raise ConfigError("the motivating problem is one-dimensional")
        x_opt, f_opt = _motivating_optimum()
        sd = 2.0 if noise in (None, "native") else _noise_fraction(noise) * 20.0
        return Problem(
            name="motivating", lower=np.zeros(1), upper=np.ones(1), objective=motivating,
            noise_sd=lambda x, s=sd: s, optima=np.array([[x_opt]]), f_star=f_opt, value_range=24.0,
        )
    raise ConfigError(f"unknown problem {name!r}; choose from {list_problems()}")


def list_problems() -> list[str]:
    return ["sun", "griewank", "ackley", "levy", "schwefel", "sphere", "motivating"]


def evaluate_noisy(problem: Problem, x, rng, latency: float = 0.0) -> float:
    """One noisy observation ``f(x) + sd(x) * z``; optionally sleeps ``latency`` seconds."""
    x = problem.check(x)
    if latency > 0:
        time.sleep(latency)
    sd = problem.noise_sd(x)
    z = rng.standard_normal()
    return float(problem.objective(x) + sd * z)
