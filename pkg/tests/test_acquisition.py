import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from pglo.acquisition import (
    PenaltyState,
    artificial_count,
    expected_improvement,
    gei,
    gei_arrays,
    global_ei_arrays,
    maximize_acquisition,
    mei,
    penalty_factor,
    propose_domain_starts,
    propose_global_batch,
    propose_local_starts,
    qgei_monte_carlo,
)
from pglo.errors import AcquisitionError
from pglo.surrogate import AglgpModel, Prediction, RegionPartition

from conftest import random_model
from oracles import ei_monte_carlo, ei_quadrature


def _pred(mean, var_z):
    return Prediction(mean, 1.0, 0.0, 1.0, mean, var_z, mean, 0)


def penalty_for(model, anchors=None, v=3.0, a=0.05):
    d = model.lower.shape[0]
    anchors = np.empty((0, d)) if anchors is None else np.atleast_2d(anchors)
    return PenaltyState(v, a * math.sqrt(d), model.lower, model.upper, anchors)


def model_1d(X, y, inducing=None, theta=30.0, noise=1e-6):
    X = np.asarray(X, float)[:, None]
    y = np.asarray(y, float)
    return AglgpModel(
        X=X, y=y, noise=np.full(len(y), noise), partition=RegionPartition(np.array([[0.5]]), np.zeros(1), np.ones(1)),
        inducing=X if inducing is None else inducing, mu=0.0, sigma2=1.0, theta=np.array([theta]),
        tau2=np.array([0.05]), alpha=np.array([[60.0]]), lower=np.zeros(1), upper=np.ones(1),
        y_mean=0.0, y_scale=1.0, bounds=(-50.0, 50.0),
    )


class TestExpectedImprovement:
    def test_zero_sd(self):
        assert mei(_pred(1.0, 0.0), 0.5) == 0.0
        assert mei(_pred(0.0, 0.0), 0.5) == pytest.approx(0.5)

    def test_at_mean(self):
        assert mei(_pred(0.3, 1.0), 0.3) == pytest.approx(norm.pdf(0.0), abs=1e-15)

    @pytest.mark.parametrize("gap", [-2.0, -1.0, 0.0, 1.0, 2.0])
    @pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
    def test_matches_quadrature(self, gap, s):
        assert expected_improvement(gap * s, s) == pytest.approx(ei_quadrature(gap * s, s), rel=1e-9, abs=1e-14)

    def test_matches_monte_carlo_example(self):
        val, se = ei_monte_carlo(1.0, 2.0, 10**6, np.random.default_rng(0))
        assert abs(mei(_pred(0.0, 4.0), 1.0) - val) < 3 * se

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5, 0), st.floats(0.01, 5), st.floats(0.0, 3))
    def test_nondecreasing_in_s_when_gap_nonpositive(self, gap, s, ds):
        assert expected_improvement(gap, s + ds) >= expected_improvement(gap, s) - 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5, 5), st.floats(0.0, 5), st.floats(0.0, 3))
    def test_nondecreasing_in_gap(self, gap, s, dg):
        assert expected_improvement(gap + dg, s) >= expected_improvement(gap, s) - 1e-12


class TestPenalty:
    def test_endpoints(self):
        v = 3.0
        assert penalty_factor(0, v) == pytest.approx(1 / (1 + math.exp(-5)), abs=1e-12)
        assert penalty_factor(10 * v, v) == pytest.approx(1 / (1 + math.exp(5)), abs=1e-12)

    def test_strictly_decreasing_in_unit_interval(self):
        p = penalty_factor(np.arange(51), 3.0)
        assert np.all(np.diff(p) < 0)
        assert np.all((p > 0) & (p < 1))

    def test_neighbor_counts_brute_force(self, rng):
        anchors = rng.random((30, 2)) * 10
        pen = PenaltyState(3.0, 0.2, np.zeros(2), np.full(2, 10.0), anchors)
        x = rng.random((15, 2)) * 10
        brute = [sum(np.linalg.norm((p - q) / 10) <= 0.2 for q in anchors) for p in x]
        np.testing.assert_array_equal(pen.neighbor_counts(x), brute)
        pen.artificial.append((x[0], 4))
        assert pen.neighbor_counts(x[:1])[0] == brute[0] + 4

    def test_gei_is_penalized_global_ei(self, rng):
        model = random_model(rng)
        x = rng.random((10, 2))
        pen = penalty_for(model, anchors=x[:3])
        yg = model.inducing_global_min()
        expect = global_ei_arrays(model, x, yg) * penalty_factor(pen.neighbor_counts(x), 3.0)
        np.testing.assert_allclose(gei_arrays(model, x, yg, pen), expect)
        assert gei(x[0], model, yg, pen) == pytest.approx(expect[0])

    def test_artificial_count_closes_gap(self):
        E, B, n_a, v = 2.0, 0.1, 1.0, 3.0
        c = artificial_count(E, B, n_a, v)
        assert E * penalty_factor(n_a + c, v) <= B < E * penalty_factor(n_a + c - 1, v)
        assert artificial_count(0.05, 0.1, 0.0, v) == 1


class TestMaximizer:
    def test_smooth_maximum(self):
        f = lambda X: 1.0 - (X[:, 0] - 0.37) ** 2
        x, val = maximize_acquisition(f, [0.0], [1.0], 0)
        assert abs(x[0] - 0.37) < 1e-3
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_zero_criterion_uses_fallback(self):
        x, _ = maximize_acquisition(lambda X: np.zeros(len(X)), [0.0], [1.0], 0, fallback=lambda X: -np.abs(X[:, 0] - 0.8))
        assert abs(x[0] - 0.8) < 0.01

    def test_deterministic(self):
        f = lambda X: np.sin(9 * X[:, 0]) * np.cos(5 * X[:, 1]) + 1
        a = maximize_acquisition(f, [0, 0], [1, 1], 3)
        b = maximize_acquisition(f, [0, 0], [1, 1], 3)
        np.testing.assert_array_equal(a[0], b[0])

    def test_infeasible_domain(self):
        with pytest.raises(AcquisitionError):
            maximize_acquisition(lambda X: np.ones(len(X)), [0], [1], 0, member=lambda X: np.zeros(len(X), bool))


class TestGlobalBatch:
    def test_q1_is_gei_argmax(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            model = random_model(rng)
            pen = penalty_for(model, model.scaler.from_unit(model.X))
            batch = propose_global_batch(model, None, 1, pen, rng=seed)
            yg = model.inducing_global_min()
            ref, _ = maximize_acquisition(
                lambda X: gei_arrays(model, X, yg, pen), model.lower, model.upper, np.random.default_rng(seed),
                fallback=lambda X: model.predict_arrays(X)["var_global"],
            )
            np.testing.assert_allclose(batch.points[0], ref, atol=1e-9)
            assert batch.region_counts.sum() == 1

    @pytest.mark.parametrize("q", [2, 4])
    def test_distinct_and_counts(self, q):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            model = random_model(rng)
            batch = propose_global_batch(model, None, q, penalty_for(model), rng=seed)
            assert batch.region_counts.sum() == q
            gaps = [np.linalg.norm(a - b) for i, a in enumerate(batch.points) for b in batch.points[i + 1 :]]
            assert min(gaps) > 1e-9

    def test_symmetric_bimodal(self):
        X = np.array([0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 1.0])
        y = np.array([1.0, 0.0, -1.0, 0.0, 0.8, 0.0, -1.0, 0.0, 1.0])
        model = model_1d(X, y, theta=40.0)
        batch = propose_global_batch(model, None, 2, penalty_for(model, X[:, None]), rng=0)
        a, b = sorted(batch.points[:, 0])
        assert a < 0.45 and b > 0.55

    def test_sharp_mode_not_repeated(self):
        X = np.linspace(0, 1, 9)
        y = np.where(np.isclose(X, 0.5), -3.0, 0.0)
        model = model_1d(X, y, theta=200.0)
        batch = propose_global_batch(model, None, 2, penalty_for(model), rng=1)
        assert abs(batch.points[0, 0] - batch.points[1, 0]) > 1e-9

    def test_invalid_q(self, rng):
        with pytest.raises(ValueError):
            propose_global_batch(random_model(rng), None, 0, penalty_for(random_model(rng)))

    def test_joint_estimate_bounds_single(self, rng):
        model = random_model(rng)
        pen = penalty_for(model)
        pts = rng.random((3, 2))
        yg = model.inducing_global_min()
        val, se = qgei_monte_carlo(model, pts, yg, pen, n_samples=200_000, rng=0)
        assert val + 3 * se >= gei_arrays(model, pts, yg, pen).max()


class TestLocalStarts:
    def test_q1_within_region(self, rng):
        model = random_model(rng, n=12, K=2)
        region = int(model.regions[0])
        s = propose_local_starts(model, region, 1, float(model.y.min()), rng=0)
        assert model.partition.assign(s)[0] == region

    def test_flat_posterior_spreads(self):
        X = np.linspace(0.05, 0.95, 7)
        model = model_1d(X, np.zeros(7))
        s = propose_local_starts(model, 0, 2, 0.0, rng=0)
        assert abs(s[0, 0] - s[1, 0]) > 0.05

    def test_starts_distinct(self, rng):
        model = random_model(rng, n=12, K=2)
        s = propose_local_starts(model, int(model.regions[0]), 3, float(model.y.min()), rng=1, separation=1e-3)
        assert len(np.unique(np.round(s, 12), axis=0)) == 3

    def test_empty_region(self, rng):
        model = random_model(rng, K=2)
        empty = RegionPartition(np.array([[0.0, 0.0], [50.0, 50.0]]), np.zeros(2), np.ones(2))
        model = model._replace(partition=empty)
        with pytest.raises(ValueError):
            propose_local_starts(model, 1, 1, 0.0)

    def test_domain_starts(self, rng):
        model = random_model(rng)
        s = propose_domain_starts(model, 4, float(model.y.min()), rng=0)
        assert s.shape == (4, 2)
        assert np.all((s >= 0) & (s <= 1))
        assert len(np.unique(np.round(s, 12), axis=0)) == 4
