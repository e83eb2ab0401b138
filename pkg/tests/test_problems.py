import math

import numpy as np
import pytest

from pglo.bench.problems import (
    evaluate_noisy,
    get_problem,
    list_problems,
    standard_suite,
    sun_function,
    sun_noise_sd,
)
from pglo.errors import ConfigError, DomainError


def ackley_ref(x, y):
    a = -20 * np.exp(-0.2 * np.sqrt(0.5 * (x**2 + y**2)))
    b = -np.exp(0.5 * (np.cos(2 * np.pi * x) + np.cos(2 * np.pi * y)))
    return a + b + 20 + np.e


class TestSun:
    def test_global_optimum(self):
        assert sun_function(90, 90) == 20.0

    def test_second_best(self):
        assert abs(sun_function(70, 90) - 18.95) <= 0.005

    def test_origin(self):
        assert sun_function(0, 0) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_box(self):
        with pytest.raises(DomainError):
            sun_function(101, 50)

    def test_minimization_wrapper(self):
        p = get_problem("sun")
        assert p.true_f([90, 90]) == -20.0
        assert p.display(p.f_star) == 20.0
        assert p.success(-19.9) and not p.success(-19.7)

    def test_heteroscedastic_variance(self):
        p = get_problem("sun")
        for x in ([0, 0], [50, 20], [100, 100]):
            var = 3 * (1 + x[0] / 100) ** 2 * (1 + x[1] / 100) ** 2
            assert p.noise_sd(np.array(x, float)) ** 2 == pytest.approx(var)

    def test_wrong_dimension(self):
        with pytest.raises(ConfigError):
            get_problem("sun", d=3)


class TestStandardSuite:
    @pytest.mark.parametrize("name", ["griewank", "ackley", "levy", "schwefel"])
    def test_optimum_reproduces_f_star(self, name):
        p = standard_suite(name)
        assert abs(p.true_f(p.optima[0]) - p.f_star) < 1e-3

    def test_known_points(self):
        assert standard_suite("ackley").true_f([0, 0]) == pytest.approx(0, abs=1e-12)
        assert standard_suite("griewank").true_f([0, 0]) == pytest.approx(0, abs=1e-12)
        assert abs(standard_suite("schwefel").true_f([420.9687, 420.9687])) < 1e-3

    def test_ackley_formula(self, rng):
        p = standard_suite("ackley")
        for x in rng.uniform(-32, 32, (10, 2)):
            assert p.true_f(x) == pytest.approx(ackley_ref(*x), rel=1e-12)

    @pytest.mark.parametrize("noise,frac", [("small", 0.01), ("large", 0.10)])
    def test_noise_calibration(self, noise, frac):
        g = np.linspace(-32.768, 32.768, 201)
        X, Y = np.meshgrid(g, g)
        vals = ackley_ref(X, Y)
        spread = vals.max() - vals.min()
        p = standard_suite("ackley", noise=noise)
        assert p.noise_sd(np.zeros(2)) == pytest.approx(frac * spread, rel=0.01)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            standard_suite("rosenbrock")
        with pytest.raises(ConfigError):
            get_problem("nope")
        with pytest.raises(ConfigError):
            standard_suite("levy", noise="medium")

    def test_every_listed_problem_builds(self):
        for name in list_problems():
            p = get_problem(name)
            assert abs(p.true_f(p.optima[0]) - p.f_star) < 1e-3


class TestNoisyEvaluation:
    def test_noiseless_equals_truth(self, rng):
        p = get_problem("sphere")
        assert evaluate_noisy(p, [1.0, 2.0], rng) == 5.0

    def test_replay(self):
        p = get_problem("sun")
        a = evaluate_noisy(p, [30, 40], np.random.default_rng(9))
        b = evaluate_noisy(p, [30, 40], np.random.default_rng(9))
        assert a == b

    def test_sample_sd(self):
        p = get_problem("sun")
        x = np.array([60.0, 80.0])
        r = np.random.default_rng(0)
        draws = np.array([evaluate_noisy(p, x, r) for _ in range(100_000)])
        assert draws.std(ddof=1) == pytest.approx(sun_noise_sd(x), rel=0.02)
        assert draws.mean() == pytest.approx(p.true_f(x), abs=4 * sun_noise_sd(x) / math.sqrt(1e5))

    def test_outside_box(self, rng):
        with pytest.raises(DomainError):
            evaluate_noisy(get_problem("sun"), [-1, 5], rng)
