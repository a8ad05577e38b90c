"""Risk-averse Markov decision processes with nested distributional risk measures."""

from .bellman import RandomizedPolicy, simplex_min
from .distkit import Pmf, make_pmf
from .mdpmodel import Model, load_model, random_model, save_model
from .solver import evaluate_policy_finite, evaluate_policy_infinite, solve_finite, solve_infinite

__all__ = [
    "Model",
    "Pmf",
    "RandomizedPolicy",
    "evaluate_policy_finite",
    "evaluate_policy_infinite",
    "load_model",
    "make_pmf",
    "random_model",
    "save_model",
    "simplex_min",
    "solve_finite",
    "solve_infinite",
]
