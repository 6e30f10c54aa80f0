"""Structured shuffling for without-replacement SGD, with a numerical laboratory
for prefix-gradient variance and epoch-map order sensitivity."""

from .errors import CapabilityError, ConfigError, DivergenceError, ParseError
from .problems import (FiniteSumProblem, LinearRegression, LogisticRegression, MLP, QuadLinInstance,
                       QuadraticEnsemble, SmoothnessConstants, make_problem, random_quadratic_ensemble)
from .shuffling import (AprParams, AprState, apr_next_permutation, block_shuffle, even_odd_interleave,
                        make_scheme, next_permutation, reverse, seed_for_epoch, uniform_permutation)
from .optimize import OptimizerConfig, TrialRecord, run_epoch, run_trial

__version__ = "0.1.0"
