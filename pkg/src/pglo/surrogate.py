"""Additive global and local Gaussian process (AGLGP) surrogate.

The response is modelled as a smooth global GP, summarized by ``m`` inducing
points, plus an independent zero-mean residual GP in each region of a
nearest-centroid partition of the design box, plus heteroscedastic noise.

All internal algebra runs on unit-box inputs and standardized responses;
the public surface takes and returns raw coordinates and raw response units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.stats import qmc
from sklearn.cluster import KMeans

from .archive import DesignArchive
from .errors import ConfigError, DomainError, ModelFitError

NOISE_FLOOR = 1e-8
D_FLOOR = 1e-10
LENGTHSCALE_BOUNDS = (1e-3, 1e3)
VARIANCE_BOUNDS = (1e-6, 1e3)
JITTER_START = 1e-10
JITTER_MAX = 1e-4
_LOG2PI = np.log(2.0 * np.pi)


def _child_seed(rng) -> int:
    # an int seed keeps qmc from spawning off the generator, which would make
    # results depend on spawn history that a restored stream state cannot reset
    return int(np.random.default_rng(rng).integers(2**63 - 1))


def gaussian_correlation(x1, x2, lengthscales) -> float:
    """Squared-exponential correlation ``exp(-sum_j theta_j (x1_j - x2_j)^2)``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    theta = np.asarray(lengthscales, dtype=float)
    return float(np.exp(-np.sum(theta * (x1 - x2) ** 2)))


def correlation_matrix(a: np.ndarray, b: np.ndarray, theta) -> np.ndarray:
    s = np.sqrt(np.asarray(theta, dtype=float))
    return np.exp(-cdist(np.atleast_2d(a) * s, np.atleast_2d(b) * s, "sqeuclidean"))


def jittered_cholesky(a: np.ndarray, region_id=None):
    """Lower Cholesky factor of ``a + jitter*I`` with adaptive jitter.

    Jitter starts at ``1e-10 * trace/n`` and grows tenfold up to
    ``1e-4 * trace/n``. Returns ``(factor, jitter)``.
    """
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    scale = max(float(np.trace(a)) / n, 1e-300)
    jitter = JITTER_START * scale
    while jitter <= JITTER_MAX * scale * (1 + 1e-9):
        try:
            return cholesky(a + jitter * np.eye(n), lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    where = "global model" if region_id is None else f"region {region_id}"
    raise ModelFitError(f"covariance is not positive definite in {where}", region_id=region_id)


class _Scaler:
    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.width = self.upper - self.lower

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def from_unit(self, u):
        return self.lower + np.asarray(u, dtype=float) * self.width


@dataclass
class RegionPartition:
    """Voronoi partition of the design box given by ``K`` centroids.

    Distances are measured after scaling the box to the unit cube when
    bounds are known, so every region assignment is box-shape invariant.
    """

    centroids: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return int(self.centroids.shape[0])

    def _scale(self, x):
        x = np.asarray(x, dtype=float)
        if self.lower is None:
            return x
        return (x - self.lower) / (self.upper - self.lower)

    def assign(self, x) -> np.ndarray:
        """Region index of every row of ``x``; ties go to the lowest index."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d2 = cdist(self._scale(x), self._scale(self.centroids), "sqeuclidean")
        return np.argmin(d2, axis=1)

    def region_of(self, x) -> int:
        return int(self.assign(x)[0])

    def to_dict(self) -> dict:
        return {
            "centroids": self.centroids.tolist(),
            "lower": None if self.lower is None else self.lower.tolist(),
            "upper": None if self.upper is None else self.upper.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegionPartition":
        lo = data.get("lower")
        hi = data.get("upper")
        return cls(
            np.asarray(data["centroids"], dtype=float),
            None if lo is None else np.asarray(lo, dtype=float),
            None if hi is None else np.asarray(hi, dtype=float),
        )


def partition_space(initial_points, K: int, lower=None, upper=None, seed: int = 0) -> RegionPartition:
    """K-means the initial design into ``K`` regions."""
    pts = np.atleast_2d(np.asarray(initial_points, dtype=float))
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    n_distinct = len(np.unique(pts, axis=0))
    if K > n_distinct:
        raise ConfigError(f"K={K} exceeds the number of distinct initial points ({n_distinct})")
    lo = None if lower is None else np.asarray(lower, dtype=float)
    hi = None if upper is None else np.asarray(upper, dtype=float)
    part = RegionPartition(np.zeros((1, pts.shape[1])), lo, hi)
    if K == 1:
        part.centroids = pts.mean(axis=0, keepdims=True)
        return part
    scaled = part._scale(pts)
    km = KMeans(n_clusters=K, n_init=10, random_state=seed).fit(scaled)
    centers = km.cluster_centers_
    part.centroids = centers if lo is None else lo + centers * (hi - lo)
    return part


def select_inducing_points(locations, m: int, lower=None, upper=None, seed: int = 0, K: int = 1) -> np.ndarray:
    """Pick ``m`` distinct design locations as k-means centres snapped to data."""
    x = np.atleast_2d(np.asarray(locations, dtype=float))
    n = x.shape[0]
    if m > n:
        raise ConfigError(f"m={m} inducing points requested but only {n} design points exist")
    if m < K:
        raise ConfigError(f"m={m} must be at least K={K}")
    if m == n:
        return x.copy()
    u = x if lower is None else (x - lower) / (np.asarray(upper) - np.asarray(lower))
    centers = KMeans(n_clusters=m, n_init=4, random_state=seed).fit(u).cluster_centers_
    d2 = cdist(centers, u, "sqeuclidean")
    used = np.zeros(n, dtype=bool)
    chosen = []
    for row in d2:
        for j in np.argsort(row, kind="stable"):
            if not used[j]:
                used[j] = True
                chosen.append(j)
                break
    return x[np.asarray(chosen)].copy()


@dataclass(frozen=True)
class Prediction:
    mean_global: float
    var_global: float
    mean_local: float
    var_local: float
    mean_overall: float
    var_z: float
    mean_bounded: float
    region_id: int = -1


class AglgpModel:
    """Fitted AGLGP surrogate with cached factorizations.

    Instances are immutable after construction; :meth:`condition` and
    :func:`refit_local` return new models.

    Internals (unit inputs, standardized responses):
        X, y, noise: design locations, sample means, and noise variance of
            each sample mean.
        inducing: inducing locations.
        mu, sigma2, theta: global mean, variance and sensitivity parameters.
        tau2, alpha: per-region local variance and sensitivity parameters.
    """

    def __init__(
        self,
        *,
        X,
        y,
        noise,
        partition: RegionPartition,
        inducing,
        mu: float,
        sigma2: float,
        theta,
        tau2,
        alpha,
        lower,
        upper,
        y_mean: float,
        y_scale: float,
        bounds: tuple,
    ):
        self.scaler = _Scaler(lower, upper)
        self.lower = self.scaler.lower
        self.upper = self.scaler.upper
        self.dim = self.lower.shape[0]
        self.X = np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, self.dim)
        self.y = np.asarray(y, dtype=float).ravel()
        self.noise = np.asarray(noise, dtype=float).ravel()
        self.partition = partition
        self.inducing = np.atleast_2d(np.asarray(inducing, dtype=float))
        self.mu = float(mu)
        self.sigma2 = float(sigma2)
        self.theta = np.asarray(theta, dtype=float).ravel()
        self.tau2 = np.asarray(tau2, dtype=float).ravel()
        self.alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
        self.y_mean = float(y_mean)
        self.y_scale = float(y_scale)
        self.bounds = (float(bounds[0]), float(bounds[1]))
        self.regions = partition.assign(self.scaler.from_unit(self.X)) if len(self.X) else np.zeros(0, int)
        self._build()

    # -- factorization -----------------------------------------------------

    def _build(self):
        s2 = self.sigma2
        Gm = s2 * correlation_matrix(self.inducing, self.inducing, self.theta)
        self._Lg, self.jitter_global = jittered_cholesky(Gm)
        Gnm = s2 * correlation_matrix(self.X, self.inducing, self.theta)
        V = solve_triangular(self._Lg, Gnm.T, lower=True, check_finite=False)
        self.Lambda = np.maximum(s2 - np.sum(V * V, axis=0), 0.0)
        self.D = np.maximum(self.Lambda + self.noise, D_FLOOR * s2)
        B = np.eye(len(self.inducing)) + (V / self.D) @ V.T
        try:
            self._LB = cholesky(B, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise ModelFitError("global inducing system is singular") from exc
        self._Gnm = Gnm
        r = self.y - self.mu
        c = solve_triangular(self._LB, V @ (r / self.D), lower=True, check_finite=False)
        c = solve_triangular(self._LB.T, c, lower=False, check_finite=False)
        self._w_global = solve_triangular(self._Lg.T, c, lower=False, check_finite=False)
        self.residuals = self.y - (self.mu + Gnm @ self._w_global)

        self._local = {}
        self.jitter_local = np.zeros(self.partition.K)
        self.jitter_spatial = np.zeros(self.partition.K)
        for k in range(self.partition.K):
            idx = np.flatnonzero(self.regions == k)
            if idx.size == 0:
                self._local[k] = None
                continue
            Xk = self.X[idx]
            Lk = self.tau2[k] * correlation_matrix(Xk, Xk, self.alpha[k])
            chol_n, jn = jittered_cholesky(Lk + np.diag(self.noise[idx]), region_id=k)
            chol_z, jz = jittered_cholesky(Lk, region_id=k)
            self.jitter_local[k] = jn
            self.jitter_spatial[k] = jz
            beta = cho_solve((chol_n, True), self.residuals[idx], check_finite=False)
            self._local[k] = (idx, chol_n, chol_z, beta)

    @property
    def Q_m(self) -> np.ndarray:
        """``G_m + G_mn (Lambda + Sigma)^-1 G_nm`` with the fitted jitter on ``G_m``."""
        Gm = self.sigma2 * correlation_matrix(self.inducing, self.inducing, self.theta)
        Gm = Gm + self.jitter_global * np.eye(len(Gm))
        return Gm + self._Gnm.T @ (self._Gnm / self.D[:, None])

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def n(self) -> int:
        return self.X.shape[0]

    # -- prediction --------------------------------------------------------

    def _check_domain(self, x):
        tol = 1e-9 * self.scaler.width
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            raise DomainError("query location outside the design box")

    def predict_arrays(self, x) -> dict:
        """Vectorized prediction for the rows of ``x`` (raw coordinates)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        self._check_domain(x)
        u = self.scaler.to_unit(x)
        s2 = self.sigma2
        g = s2 * correlation_matrix(u, self.inducing, self.theta)
        mg = self.mu + g @ self._w_global
        a = solve_triangular(self._Lg, g.T, lower=True, check_finite=False)
        b = solve_triangular(self._LB, a, lower=True, check_finite=False)
        vg = np.maximum(s2 - np.sum(a * a, axis=0) + np.sum(b * b, axis=0), 0.0)

        k_of = self.partition.assign(x)
        ml = np.zeros(len(u))
        vl = self.tau2[k_of].copy()
        vz = self.tau2[k_of].copy()
        for k in np.unique(k_of):
            cache = self._local[k]
            if cache is None:
                continue
            idx, chol_n, chol_z, beta = cache
            rows = np.flatnonzero(k_of == k)
            l = self.tau2[k] * correlation_matrix(u[rows], self.X[idx], self.alpha[k])
            ml[rows] = l @ beta
            vn = solve_triangular(chol_n, l.T, lower=True, check_finite=False)
            vl[rows] = self.tau2[k] - np.sum(vn * vn, axis=0)
            w = solve_triangular(chol_z, l.T, lower=True, check_finite=False)
            vz[rows] = self.tau2[k] - np.sum(w * w, axis=0)
        vl = np.maximum(vl, 0.0)
        vz = np.maximum(vz, 0.0)

        sc, sc2 = self.y_scale, self.y_scale**2
        mean_global = mg * sc + self.y_mean
        mean_local = ml * sc
        overall = mean_global + mean_local
        return {
            "mean_global": mean_global,
            "var_global": vg * sc2,
            "mean_local": mean_local,
            "var_local": vl * sc2,
            "mean_overall": overall,
            "var_z": vz * sc2,
            "mean_bounded": np.clip(overall, self.bounds[0], self.bounds[1]),
            "region_id": k_of,
        }

    def predict(self, x) -> Prediction:
        p = self.predict_arrays(np.asarray(x, dtype=float).reshape(1, -1))
        return Prediction(**{k: (int(v[0]) if k == "region_id" else float(v[0])) for k, v in p.items()})

    def global_covariance(self, x) -> np.ndarray:
        """Posterior covariance of the global component between rows of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = self.scaler.to_unit(x)
        g = self.sigma2 * correlation_matrix(u, self.inducing, self.theta)
        a = solve_triangular(self._Lg, g.T, lower=True, check_finite=False)
        b = solve_triangular(self._LB, a, lower=True, check_finite=False)
        prior = self.sigma2 * correlation_matrix(u, u, self.theta)
        return (prior - a.T @ a + b.T @ b) * self.y_scale**2

    def inducing_global_min(self) -> float:
        """Smallest global-model mean over the inducing points (raw units)."""
        return float(np.min(self.predict_arrays(self.scaler.from_unit(self.inducing))["mean_global"]))

    # -- derived models ----------------------------------------------------

    def _replace(self, **changes) -> "AglgpModel":
        kw = dict(
            X=self.X, y=self.y, noise=self.noise, partition=self.partition, inducing=self.inducing,
            mu=self.mu, sigma2=self.sigma2, theta=self.theta, tau2=self.tau2, alpha=self.alpha,
            lower=self.lower, upper=self.upper, y_mean=self.y_mean, y_scale=self.y_scale, bounds=self.bounds,
        )
        kw.update(changes)
        return AglgpModel(**kw)

    def condition(self, x_new, y_new, noise_var: float = 1e-8) -> "AglgpModel":
        """Model with extra pseudo-observations appended (hyperparameters fixed)."""
        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        y_new = np.atleast_1d(np.asarray(y_new, dtype=float))
        u = self.scaler.to_unit(x_new)
        return self._replace(
            X=np.vstack([self.X, u]),
            y=np.concatenate([self.y, (y_new - self.y_mean) / self.y_scale]),
            noise=np.concatenate([self.noise, np.full(len(y_new), noise_var / self.y_scale**2)]),
        )

    def without(self, i: int) -> "AglgpModel":
        keep = np.arange(self.n) != i
        return self._replace(X=self.X[keep], y=self.y[keep], noise=self.noise[keep])

    def with_data(self, X_raw, means, noise_var_of_mean) -> "AglgpModel":
        """Same hyperparameters and standardization, new data set."""
        return self._replace(
            X=self.scaler.to_unit(np.atleast_2d(X_raw)),
            y=(np.asarray(means, dtype=float) - self.y_mean) / self.y_scale,
            noise=np.asarray(noise_var_of_mean, dtype=float) / self.y_scale**2,
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self, archive: Optional[DesignArchive] = None) -> dict:
        return {
            "kind": "aglgp",
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "mu": self.mu,
            "sigma2": self.sigma2,
            "theta": self.theta.tolist(),
            "tau2": self.tau2.tolist(),
            "alpha": self.alpha.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
            "bounds": list(self.bounds),
            "inducing": self.scaler.from_unit(self.inducing).tolist(),
            "partition": self.partition.to_dict(),
            "archive_digest": None if archive is None else archive.digest(),
        }


# -- likelihoods --------------------------------------------------------------


def _global_nll(log_params, X, y, noise, inducing):
    s2 = np.exp(log_params[0])
    theta = np.exp(log_params[1:])
    m = len(inducing)
    try:
        Gm = s2 * correlation_matrix(inducing, inducing, theta)
        Lg = cholesky(Gm + JITTER_START * s2 * np.eye(m), lower=True, check_finite=False)
        Gnm = s2 * correlation_matrix(X, inducing, theta)
        V = solve_triangular(Lg, Gnm.T, lower=True, check_finite=False)
        D = np.maximum(np.maximum(s2 - np.sum(V * V, axis=0), 0.0) + noise, D_FLOOR * s2)
        VD = V / D
        LB = cholesky(np.eye(m) + VD @ V.T, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return 1e25, 0.0
    ones = np.ones_like(y)
    cy = solve_triangular(LB, VD @ y, lower=True, check_finite=False)
    c1 = solve_triangular(LB, VD @ ones, lower=True, check_finite=False)
    yCy = np.sum(y * y / D) - cy @ cy
    oCy = np.sum(y / D) - c1 @ cy
    oCo = np.sum(1.0 / D) - c1 @ c1
    mu = oCy / oCo
    quad = yCy - 2 * mu * oCy + mu * mu * oCo
    logdet = 2 * np.sum(np.log(np.diag(LB))) + np.sum(np.log(D))
    nll = 0.5 * (quad + logdet + len(y) * _LOG2PI)
    if not np.isfinite(nll):
        return 1e25, 0.0
    return nll, mu


def _local_nll(log_params, X, e, noise):
    t2 = np.exp(log_params[0])
    alpha = np.exp(log_params[1:])
    n = len(e)
    A = t2 * correlation_matrix(X, X, alpha) + np.diag(noise)
    try:
        L = cholesky(A + JITTER_START * t2 * np.eye(n), lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return 1e25
    z = solve_triangular(L, e, lower=True, check_finite=False)
    nll = 0.5 * (z @ z + 2 * np.sum(np.log(np.diag(L))) + n * _LOG2PI)
    return nll if np.isfinite(nll) else 1e25


def _multistart(objective, dim, rng, n_starts):
    """Bounded Nelder-Mead from a Latin hypercube of log-parameter starts."""
    lv, hv = np.log(VARIANCE_BOUNDS)
    lt, ht = np.log(LENGTHSCALE_BOUNDS)
    lo = np.array([lv] + [lt] * (dim - 1))
    hi = np.array([hv] + [ht] * (dim - 1))
    start_lo = np.array([np.log(0.05)] + [np.log(0.5)] * (dim - 1))
    start_hi = np.array([np.log(5.0)] + [np.log(200.0)] * (dim - 1))
    starts = qmc.scale(qmc.LatinHypercube(d=dim, seed=_child_seed(rng)).random(n_starts), start_lo, start_hi)
    best_x, best_f = None, np.inf
    for x0 in starts:
        res = minimize(
            objective, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
            options={"xatol": 1e-2, "fatol": 1e-4, "maxfev": 120 * dim},
        )
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
    return np.clip(best_x, lo, hi)


def _prepare(archive: DesignArchive, lower, upper, noise_var: Optional[Callable] = None):
    X_raw = archive.locations
    ybar = archive.means
    reps = archive.replications
    if noise_var is None:
        s2 = archive.variances
        single = reps < 2
        if single.any() and (~single).any():
            # one replication says nothing about noise; borrow the pooled level
            s2 = np.where(single, np.median(s2[~single]), s2)
    else:
        s2 = np.asarray([noise_var(x) for x in X_raw], dtype=float)
    # exact zeros mean noiseless data; anything else is floored
    s2 = np.where(s2 > 0, np.maximum(s2, NOISE_FLOOR), 0.0)
    return X_raw, ybar, s2 / reps


def _fit_locals(X, residuals, noise, regions, K, dim, rng, n_starts, which, tau2, alpha):
    tau2 = np.array(tau2, dtype=float)
    alpha = np.array(alpha, dtype=float)
    for k in which:
        idx = np.flatnonzero(regions == k)
        if idx.size == 0:
            continue
        Xk, ek, nk = X[idx], residuals[idx], noise[idx]
        best = _multistart(lambda p: _local_nll(p, Xk, ek, nk), dim + 1, rng, n_starts)
        tau2[k] = np.exp(best[0])
        alpha[k] = np.exp(best[1:])
    return tau2, alpha


def fit(
    archive: DesignArchive,
    partition: RegionPartition,
    m: int,
    lower,
    upper,
    rng=None,
    n_starts: int = 5,
    noise_var: Optional[Callable] = None,
    inducing=None,
) -> AglgpModel:
    """Estimate the AGLGP model on the archive.

    Global parameters come from maximizing the sparse (inducing-point)
    marginal likelihood with the mean profiled out; each region's local
    parameters then maximize the likelihood of the global-model residuals.

    Args:
        archive: evaluated points with sample means and variances.
        partition: region map; every region should own at least one point.
        m: number of inducing points (capped at the archive size).
        lower, upper: box bounds of the design space.
        rng: ``numpy.random.Generator`` or seed driving the multistarts and
            k-means.
        n_starts: multistart count for each likelihood maximization.
        noise_var: optional exact noise variance callback ``x -> sigma^2``;
            sample variances are used otherwise.
        inducing: fixed inducing locations (raw), bypassing the selection.
    """
    rng = np.random.default_rng(rng)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dim = lower.shape[0]
    X_raw, ybar, var_mean = _prepare(archive, lower, upper, noise_var)
    n = len(ybar)
    if n == 0:
        raise ModelFitError("cannot fit a model without data")
    y_mean = float(np.mean(ybar))
    y_scale = float(np.std(ybar))
    if y_scale < 1e-12 * max(1.0, abs(y_mean)):
        y_scale = 1.0
    y = (ybar - y_mean) / y_scale
    noise = var_mean / y_scale**2
    scaler = _Scaler(lower, upper)
    X = scaler.to_unit(X_raw)

    if inducing is None:
        m_eff = min(int(m), n)
        seed = int(rng.integers(2**31 - 1))
        inducing = select_inducing_points(X_raw, m_eff, lower, upper, seed=seed, K=min(partition.K, m_eff))
    U = scaler.to_unit(np.atleast_2d(inducing))

    best = _multistart(lambda p: _global_nll(p, X, y, noise, U)[0], dim + 1, rng, n_starts)
    _, mu = _global_nll(best, X, y, noise, U)
    sigma2 = float(np.exp(best[0]))
    theta = np.exp(best[1:])

    spread = float(np.ptp(ybar))
    bounds = (float(np.min(ybar)) - 3 * spread, float(np.max(ybar)) + 3 * spread)
    K = partition.K
    tau2 = np.ones(K)
    alpha = np.tile(theta, (K, 1))
    base = AglgpModel(
        X=X, y=y, noise=noise, partition=partition, inducing=U, mu=mu, sigma2=sigma2, theta=theta,
        tau2=tau2 * 1e-6, alpha=alpha, lower=lower, upper=upper, y_mean=y_mean, y_scale=y_scale, bounds=bounds,
    )
    tau2, alpha = _fit_locals(X, base.residuals, noise, base.regions, K, dim, rng, n_starts, range(K), tau2, alpha)
    return base._replace(tau2=tau2, alpha=alpha)


def refit_local(
    model: AglgpModel,
    archive: DesignArchive,
    regions: Sequence[int],
    rng=None,
    n_starts: int = 5,
    noise_var: Optional[Callable] = None,
) -> AglgpModel:
    """Rebuild on the current archive, re-estimating only the listed local models.

    Global hyperparameters, inducing set and response standardization stay
    as fitted; the global predictor is recomputed on the new data.
    """
    rng = np.random.default_rng(rng)
    X_raw, ybar, var_mean = _prepare(archive, model.lower, model.upper, noise_var)
    base = model.with_data(X_raw, ybar, var_mean)
    tau2, alpha = _fit_locals(
        base.X, base.residuals, base.noise, base.regions, model.K, model.dim, rng, n_starts,
        list(regions), model.tau2, model.alpha,
    )
    return base._replace(tau2=tau2, alpha=alpha)


def rebuild(snapshot: dict, archive: DesignArchive, noise_var: Optional[Callable] = None) -> AglgpModel:
    """Recreate a model from :meth:`AglgpModel.to_dict` output and its archive."""
    lower = np.asarray(snapshot["lower"], dtype=float)
    upper = np.asarray(snapshot["upper"], dtype=float)
    X_raw, ybar, var_mean = _prepare(archive, lower, upper, noise_var)
    scaler = _Scaler(lower, upper)
    ys = snapshot["y_scale"]
    return AglgpModel(
        X=scaler.to_unit(X_raw), y=(ybar - snapshot["y_mean"]) / ys, noise=var_mean / ys**2,
        partition=RegionPartition.from_dict(snapshot["partition"]),
        inducing=scaler.to_unit(np.asarray(snapshot["inducing"], dtype=float)),
        mu=snapshot["mu"], sigma2=snapshot["sigma2"], theta=snapshot["theta"], tau2=snapshot["tau2"],
        alpha=snapshot["alpha"], lower=lower, upper=upper, y_mean=snapshot["y_mean"], y_scale=ys,
        bounds=tuple(snapshot["bounds"]),
    )


@dataclass
class LoocvResult:
    rmse: float
    standardized_residuals: np.ndarray
    fraction_within_3: float
    predictions: np.ndarray


def loocv_validate(model: AglgpModel, archive: Optional[DesignArchive] = None) -> LoocvResult:
    """Leave-one-out check with hyperparameters held fixed.

    Each point is dropped from both the global and local data before it is
    predicted; the standardized residual uses the global, local and
    sample-mean noise variances.
    """
    n = model.n
    if n < 3:
        raise ValueError("leave-one-out needs at least 3 design points")
    X_raw = model.scaler.from_unit(model.X)
    y_raw = model.y * model.y_scale + model.y_mean
    noise_raw = model.noise * model.y_scale**2
    preds = np.empty(n)
    z = np.empty(n)
    for i in range(n):
        p = model.without(i).predict_arrays(X_raw[i : i + 1])
        preds[i] = p["mean_overall"][0]
        var = p["var_global"][0] + p["var_local"][0] + noise_raw[i]
        z[i] = (y_raw[i] - preds[i]) / np.sqrt(max(var, 1e-300))
    rmse = float(np.sqrt(np.mean((y_raw - preds) ** 2)))
    return LoocvResult(rmse, z, float(np.mean(np.abs(z) <= 3.0)), preds)
