import numpy as np
import pytest

from pglo.archive import DesignArchive
from pglo.surrogate import AglgpModel, RegionPartition


def make_archive(X, means, sds=None, reps=2):
    """Archive whose sample means/variances are known exactly.

    With two replications ``m - s`` and ``m + s`` the sample mean is ``m``
    and the sample variance is ``2 s^2``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    arch = DesignArchive(X.shape[1])
    sds = np.zeros(len(X)) if sds is None else np.asarray(sds, dtype=float)
    for x, m, s in zip(X, means, sds):
        if reps == 1:
            arch.add(x, [m])
        else:
            arch.add(x, [m - s, m + s])
    return arch


def random_model(rng, n=10, m=3, K=2, d=2, noise=None):
    """AglgpModel on the unit box with moderate random hyperparameters."""
    X = rng.random((n, d))
    y = rng.standard_normal(n)
    noise = rng.uniform(0.01, 0.2, n) if noise is None else np.full(n, noise)
    centroids = rng.random((K, d))
    part = RegionPartition(centroids, np.zeros(d), np.ones(d))
    inducing = X[rng.choice(n, m, replace=False)]
    return AglgpModel(
        X=X, y=y, noise=noise, partition=part, inducing=inducing,
        mu=float(rng.normal(0, 0.3)), sigma2=float(rng.uniform(0.5, 2.0)),
        theta=rng.uniform(1.0, 20.0, d), tau2=rng.uniform(0.05, 0.5, K),
        alpha=rng.uniform(2.0, 30.0, (K, d)), lower=np.zeros(d), upper=np.ones(d),
        y_mean=float(rng.normal()), y_scale=float(rng.uniform(0.5, 3.0)), bounds=(-50.0, 50.0),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
