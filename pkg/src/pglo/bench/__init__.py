"""Benchmark problems and macro-replication studies."""

from .problems import Problem, evaluate_noisy, get_problem, list_problems, standard_suite, sun_function

__all__ = ["Problem", "evaluate_noisy", "get_problem", "list_problems", "standard_suite", "sun_function"]
