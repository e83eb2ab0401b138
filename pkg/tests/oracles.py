"""Independent reference implementations used by the tests.

Everything here is written from the model definitions with plain dense
linear algebra (high-precision solves, loops), never calling the package's
factorizations.
"""

import math

import mpmath as mp
import numpy as np
from scipy.stats import norm


def sq_exp(A, B, w):
    out = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = math.exp(-float(np.sum(w * (a - b) ** 2)))
    return out


def _form(a, M, b):
    """a' M^-1 b solved in 50-digit arithmetic.

    The spatial correlation matrices of dense 1-D designs reach condition
    numbers near 1e11, where a float64 explicit inverse loses ~1e-6.
    """
    with mp.workdps(50):
        w = mp.lu_solve(mp.matrix(np.asarray(M).tolist()), mp.matrix(np.asarray(b, float).tolist()))
        return float(sum(mp.mpf(float(ai)) * wi for ai, wi in zip(a, w)))


def dense_aglgp(model, x_raw):
    """Dense global + local predictor in raw units.

    Global: mean mu + g' Q^-1 G_mn D^-1 (y - mu), variance
    sigma^2 - g' G_m^-1 g + g' Q^-1 g, with Q = G_m + G_mn D^-1 G_nm and
    D = diag(sigma^2 - diag(G_nm G_m^-1 G_mn)) + noise.
    Local (per region): residuals e = y - mean_global(X), mean l' A^-1 e,
    variance tau^2 - l' A^-1 l with A = L + noise, spatial variance
    tau^2 - l' L^-1 l.
    """
    X, y, noise, U = model.X, model.y, model.noise, model.inducing
    s2, theta, mu = model.sigma2, model.theta, model.mu
    u = (np.atleast_2d(x_raw) - model.lower) / (model.upper - model.lower)
    Gm = s2 * sq_exp(U, U, theta) + model.jitter_global * np.eye(len(U))
    Gnm = s2 * sq_exp(X, U, theta)
    lam = np.array([s2 - _form(row, Gm, row) for row in Gnm])
    D = np.maximum(np.maximum(lam, 0.0) + noise, 1e-10 * s2)
    Q = Gm + Gnm.T @ np.diag(1.0 / D) @ Gnm
    rhs = Gnm.T @ ((y - mu) / D)

    def global_mean(pts):
        return np.array([mu + _form(g, Q, rhs) for g in s2 * sq_exp(pts, U, theta)])

    G = s2 * sq_exp(u, U, theta)
    mg = global_mean(u)
    vg = np.array([s2 - _form(g, Gm, g) + _form(g, Q, g) for g in G])
    resid = y - global_mean(X)

    regions_train = model.partition.assign(model.lower + X * (model.upper - model.lower))
    regions_x = model.partition.assign(np.atleast_2d(x_raw))
    ml, vl, vz = np.zeros(len(u)), np.zeros(len(u)), np.zeros(len(u))
    for r, k in enumerate(regions_x):
        idx = np.flatnonzero(regions_train == k)
        t2 = model.tau2[k]
        if idx.size == 0:
            vl[r] = vz[r] = t2
            continue
        L = t2 * sq_exp(X[idx], X[idx], model.alpha[k])
        A = L + np.diag(noise[idx]) + model.jitter_local[k] * np.eye(len(idx))
        Lz = L + model.jitter_spatial[k] * np.eye(len(idx))
        l = t2 * sq_exp(u[r : r + 1], X[idx], model.alpha[k])[0]
        ml[r] = _form(l, A, resid[idx])
        vl[r] = t2 - _form(l, A, l)
        vz[r] = t2 - _form(l, Lz, l)
    sc = model.y_scale
    return {
        "mean_global": mg * sc + model.y_mean,
        "var_global": vg * sc**2,
        "mean_local": ml * sc,
        "var_local": vl * sc**2,
        "mean_overall": (mg + ml) * sc + model.y_mean,
        "var_z": vz * sc**2,
    }


def ei_monte_carlo(gap, s, n, rng):
    """Monte-Carlo E[max(gap - s Z, 0)] and its standard error."""
    z = rng.standard_normal(n)
    vals = np.maximum(gap - s * z, 0.0)
    return vals.mean(), vals.std(ddof=1) / math.sqrt(n)


def ei_quadrature(gap, s):
    """EI by numerical integration of the normal density (no closed form)."""
    from scipy.integrate import quad

    if s == 0:
        return max(gap, 0.0)
    f = lambda z: (gap - s * z) * norm.pdf(z)
    val, _ = quad(f, -np.inf, gap / s, epsabs=1e-13, epsrel=1e-12)
    return val


def ocba_continuous(means, sds, budget):
    """Solve the OCBA ratio system directly for the continuous allocation."""
    means = np.asarray(means, float)
    sds = np.asarray(sds, float)
    b = int(np.argmin(means))
    ratio = np.zeros(len(means))
    for i in range(len(means)):
        if i != b:
            ratio[i] = (sds[i] / (means[i] - means[b])) ** 2
    ratio[b] = sds[b] * math.sqrt(sum((ratio[i] / sds[i]) ** 2 for i in range(len(means)) if i != b))
    return budget * ratio / ratio.sum(), b
