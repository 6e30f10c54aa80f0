"""Gradient-variance statistics, exact epoch-map algebra and scaling-law fits.

Conventions: ``grads`` is an (n, d) array of component gradients at a fixed
iterate; permutations are 0-based. The epoch map uses single-sample steps
with a fixed step size.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CapabilityError
from .optimize import run_epoch
from .problems import FiniteSumProblem, QuadraticEnsemble, SmoothnessConstants
from .shuffling import check_permutation, reverse, seed_for_epoch, uniform_permutation

EXHAUSTIVE_PREFIX_MAX = 8
EXHAUSTIVE_EPOCH_MAX = 7
DENSE_HESSIAN_BUDGET = 10**7


# --- block variance decomposition ---------------------------------------------


@dataclass(frozen=True)
class VarianceReport:
    sigma2_ind: float
    sigma2_within: float
    sigma2_blk: float
    K: int
    b: int
    at_w: Optional[np.ndarray] = None


def population_variance(X) -> float:
    """(1/m) sum_i ||X_i - mean||^2 over the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return float(((X - X.mean(axis=0)) ** 2).sum(axis=1).mean())


def block_means(grads, b: int) -> np.ndarray:
    """Means of consecutive row blocks of size b; b must divide n."""
    grads = np.atleast_2d(np.asarray(grads, dtype=np.float64))
    n = grads.shape[0]
    if b < 1 or n % b:
        raise ValueError(f"block size {b} must divide n={n}; use block_shuffle for ragged blocks")
    return grads.reshape(n // b, b, -1).mean(axis=1)


def variance_decomposition_from_gradients(grads, b: int, at_w=None) -> VarianceReport:
    grads = np.asarray(grads, dtype=np.float64)
    if grads.ndim == 1:
        grads = grads[:, None]
    G = block_means(grads, b)
    K = G.shape[0]
    within = float(((grads.reshape(K, b, -1) - G[:, None, :]) ** 2).sum(axis=2).mean())
    return VarianceReport(population_variance(grads), within, population_variance(G), K, b, at_w)


def variance_decomposition(problem: FiniteSumProblem, w, b: int) -> VarianceReport:
    w = np.asarray(w, dtype=np.float64)
    return variance_decomposition_from_gradients(problem.gradients(w), b, at_w=w)


# --- prefix means under sampling without replacement ------------------------


@dataclass(frozen=True)
class PrefixVarianceCheck:
    m: int
    k: int
    value: float
    closed_form: float
    mode: str
    stderr: float = 0.0
    mean_error: float = 0.0

    @property
    def rel_error(self) -> float:
        return abs(self.value - self.closed_form) / max(abs(self.closed_form), 1e-300)


def prefix_closed_form(X, k: int) -> float:
    """(m - k) / (k (m - 1)) * sigma^2 for uniform without-replacement prefixes."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m = X.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"prefix length must lie in [1, {m}], got {k}")
    if k == m:
        return 0.0
    return (m - k) / (k * (m - 1)) * population_variance(X)


def _prefix_means_all(X, k):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m = X.shape[0]
    if m > EXHAUSTIVE_PREFIX_MAX:
        raise ValueError(f"m={m} too large for exhaustive enumeration (max {EXHAUSTIVE_PREFIX_MAX}); "
                         "use prefix_second_moment_mc")
    if not 1 <= k <= m:
        raise ValueError(f"prefix length must lie in [1, {m}], got {k}")
    perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    return X[perms[:, :k]].mean(axis=1), X.mean(axis=0)


def prefix_second_moment_exhaustive(X, k: int) -> float:
    """E||prefix_k mean - mean||^2 averaged over all m! orderings."""
    means, xbar = _prefix_means_all(X, k)
    return float(((means - xbar) ** 2).sum(axis=1).mean())


def prefix_mean_exhaustive(X, k: int) -> np.ndarray:
    means, _ = _prefix_means_all(X, k)
    return means.mean(axis=0)


def prefix_second_moment_mc(X, k: int, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate and standard error; sample s uses a uniform
    permutation seeded by ``seed_for_epoch(seed, s)``."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m = X.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"prefix length must lie in [1, {m}], got {k}")
    xbar = X.mean(axis=0)
    vals = np.empty(samples)
    for s in range(samples):
        pi = uniform_permutation(m, seed_for_epoch(seed, s))
        dev = X[pi[:k]].mean(axis=0) - xbar
        vals[s] = dev @ dev
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def check_prefix_moment(X, k: int, mode: str = "exhaustive", samples: int = 20000, seed: int = 0):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    closed = prefix_closed_form(X, k)
    if mode == "exhaustive":
        means, xbar = _prefix_means_all(X, k)
        value = float(((means - xbar) ** 2).sum(axis=1).mean())
        mean_err = float(np.abs(means.mean(axis=0) - xbar).max())
        return PrefixVarianceCheck(X.shape[0], k, value, closed, mode, 0.0, mean_err)
    est, se = prefix_second_moment_mc(X, k, samples, seed)
    return PrefixVarianceCheck(X.shape[0], k, est, closed, f"mc({samples})", se)


# --- epoch-map algebra --------------------------------------------------------


@dataclass(frozen=True)
class EpochMapReport:
    T_pi: np.ndarray
    B_pi: np.ndarray
    T_bar: np.ndarray
    remainder_norm: float
    remainder_bound: Optional[float] = None


def _require_hessian(problem):
    if not problem.has_hessian:
        raise CapabilityError(f"{type(problem).__name__} has no Hessians")
    if problem.n * problem.d**2 > DENSE_HESSIAN_BUDGET:
        raise CapabilityError(f"n*d^2 = {problem.n * problem.d ** 2} exceeds the dense Hessian budget")


def second_order_term(problem, w, pi) -> np.ndarray:
    """B_pi = sum_{s<t} H_{pi(t)} g_{pi(s)} at w."""
    _require_hessian(problem)
    pi = check_permutation(pi, problem.n)
    g = problem.gradients(w)[pi]
    H = problem.hessians(w)[pi]
    before = np.cumsum(g, axis=0) - g  # sum over s < t
    return np.einsum("tij,tj->i", H, before)


def reversal_pair_term(problem, w) -> np.ndarray:
    """sum_{i != j} H_i g_j, the order-free sum B_pi + B_rev(pi)."""
    _require_hessian(problem)
    g = problem.gradients(w)
    H = problem.hessians(w)
    return H.sum(axis=0) @ g.sum(axis=0) - np.einsum("tij,tj->i", H, g)


def _T(problem, w, pi, gamma):
    return run_epoch(problem, w, pi, gamma, 1)[0]


def _T_bar(problem, w, pi, gamma):
    return 0.5 * (_T(problem, w, pi, gamma) + _T(problem, w, reverse(pi), gamma))


def epoch_displacement(problem, w, pi, gamma: float) -> np.ndarray:
    """T_pi(w) - w, accumulated directly.

    Summing the steps instead of differencing endpoints keeps round-off
    proportional to gamma rather than to ||w||, which matters when comparing
    orders whose endpoints differ by O(gamma^2) or less.
    """
    pi = check_permutation(pi, problem.n)
    w = np.asarray(w, dtype=np.float64)
    delta = np.zeros_like(w)
    for t in range(pi.size):
        delta -= gamma * problem.gradients(w + delta, pi[t:t + 1])[0]
    return delta


def _D(problem, w, pi, gamma):
    return epoch_displacement(problem, w, pi, gamma)


def _D_bar(problem, w, pi, gamma):
    return 0.5 * (_D(problem, w, pi, gamma) + _D(problem, w, reverse(pi), gamma))


def epoch_map_exact(problem, w, pi, gamma: float, constants: Optional[SmoothnessConstants] = None) -> EpochMapReport:
    _require_hessian(problem)
    w = np.asarray(w, dtype=np.float64)
    pi = check_permutation(pi, problem.n)
    T = _T(problem, w, pi, gamma)
    B = second_order_term(problem, w, pi)
    second_order = w - gamma * problem.gradients(w).sum(axis=0) + gamma**2 * B
    bound = None if constants is None else constants.c_rem * gamma**3 * problem.n**3
    return EpochMapReport(T, B, _T_bar(problem, w, pi, gamma), float(np.linalg.norm(T - second_order)), bound)


def order_sensitivity(problem, w, pi, pi_prime, gamma: float, symmetrized: bool = False) -> float:
    _require_hessian(problem)
    f = _D_bar if symmetrized else _D
    return float(np.linalg.norm(f(problem, w, pi, gamma) - f(problem, w, pi_prime, gamma)))


def _all_permutations(n):
    if n > EXHAUSTIVE_EPOCH_MAX:
        raise ValueError(f"n={n} too large for exhaustive enumeration (max {EXHAUSTIVE_EPOCH_MAX})")
    return [np.array(p, dtype=np.int64) for p in itertools.permutations(range(n))]


def _vector_variance(vals) -> float:
    vals = np.asarray(vals)
    return float(((vals - vals.mean(axis=0)) ** 2).sum(axis=1).mean())


def permutation_variance(problem, w, gamma: float, mode: str = "exhaustive", symmetrized: bool = False,
                         samples: int = 2000, seed: int = 0) -> float:
    """Var over uniform pi of T_pi(w) (or the paired-reversal average).

    Computed on displacements T_pi(w) - w, which have the same variance.
    """
    _require_hessian(problem)
    w = np.asarray(w, dtype=np.float64)
    if mode == "exhaustive":
        perms = _all_permutations(problem.n)
    elif mode == "mc":
        perms = [uniform_permutation(problem.n, seed_for_epoch(seed, s)) for s in range(samples)]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    f = _D_bar if symmetrized else _D
    return _vector_variance([f(problem, w, p, gamma) for p in perms])


def second_order_variance(problem, w) -> float:
    """Var over uniform pi of B_pi(w), by exhaustive enumeration."""
    return _vector_variance([second_order_term(problem, w, p) for p in _all_permutations(problem.n)])


# --- constants and fits -------------------------------------------------------


def quadratic_smoothness(problem: QuadraticEnsemble, w, gamma: float) -> SmoothnessConstants:
    """Constants valid along every epoch of step size <= gamma started at w.

    L = max_i ||A_i||, rho = 0. Gradients satisfy ||g_i(x)|| <= G0 + L r on
    the ball of radius r around w, with G0 = max_i ||A_i w + b_i||. The
    epoch stays within r = n gamma G whenever G = G0 / (1 - n gamma L),
    which needs n gamma L < 1.
    """
    if not isinstance(problem, QuadraticEnsemble):
        raise TypeError("analytic constants are only derived for quadratic ensembles")
    L = problem.hessian_norm_bound()
    ngl = problem.n * gamma * L
    if ngl >= 1:
        raise ValueError(f"n*gamma*L = {ngl:.3g} >= 1; no finite ball bound")
    G0 = float(np.linalg.norm(problem.gradients(np.asarray(w, dtype=np.float64)), axis=1).max())
    return SmoothnessConstants(L=L, G=G0 / (1 - ngl), rho=0.0)


def fit_loglog_slope(points, noise_floor: float = 0.0) -> tuple[float, float]:
    """Least-squares slope of log(value) against log(gamma), and its R^2.

    Points whose value is at or below ``noise_floor`` are dropped first; pass
    something like ``1e2 * eps * scale`` to keep round-off out of the fit.
    """
    pts = np.asarray(points, dtype=np.float64)
    if noise_floor > 0 and pts.ndim == 2:
        pts = pts[pts[:, 1] > noise_floor]
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise ValueError("need at least 4 (gamma, value) points")
    if np.any(pts <= 0):
        raise ValueError("gammas and values must be positive for a log-log fit")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    xc, yc = x - x.mean(), y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    resid = yc - slope * xc
    ss_tot = float(yc @ yc)
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


def gamma_grid(start: float, count: int, factor: float = 2.0) -> list[float]:
    """``count`` step sizes from ``start`` downwards, spaced by ``factor``."""
    return [start / factor**j for j in range(count)]
