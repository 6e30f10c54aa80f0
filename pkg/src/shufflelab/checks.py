"""Named numerical checks of the variance, epoch-map and APR results.

Each check returns a :class:`CheckResult`; failures are reported, never raised.
Sizes are kept small so ``run_theory_checks("all")`` finishes in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analysis as an
from .problems import QuadLinInstance, random_quadratic_ensemble
from .rngcore import SeededGenerator
from .shuffling import (AprParams, AprState, apr_next_permutation, block_shuffle, even_odd_interleave,
                        is_permutation, reverse, seed_for_epoch, uniform_permutation)


@dataclass
class CheckResult:
    name: str
    suite: str
    passed: bool
    measured: dict
    tolerance: str
    reference: str

    def line(self) -> str:
        vals = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.measured.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {vals} [{self.tolerance}]"


# Loss fed at each epoch and the (regime, transform) it must produce under default parameters.
APR_TRACE_LOSSES = (1.0, 0.5, 0.6, 0.3, 0.285, 0.3, 0.15, 0.3, 0.25, 0.24, 0.5)
APR_TRACE_EXPECTED = (
    ("initial", None), ("strong", None), ("fallback", None), ("strong", "rev"), ("mild", None),
    ("fallback", None), ("strong", "rev"), ("fallback", "eo"), ("strong", None), ("mild", None),
    ("fallback", "eo"),
)


def _random_population(gen, m, d):
    return gen.gaussians(m * d).reshape(m, d)


def check_variance_decomposition(populations=40, seed=1) -> CheckResult:
    gen = SeededGenerator(seed)
    worst, strict_ok = 0.0, True
    for _ in range(populations):
        n = 4 + int(gen.next_uint_below(61))
        d = 1 + int(gen.next_uint_below(10))
        grads = _random_population(gen, n, d)
        for b in [b for b in range(1, n + 1) if n % b == 0]:
            rep = an.variance_decomposition_from_gradients(grads, b)
            total = rep.sigma2_within + rep.sigma2_blk
            worst = max(worst, abs(rep.sigma2_ind - total) / rep.sigma2_ind)
            if b > 1 and not rep.sigma2_blk < rep.sigma2_ind:
                strict_ok = False
    return CheckResult("variance-decomp", "variance", worst <= 1e-10 and strict_ok,
                       {"max_rel_error": worst, "strict_reduction": strict_ok}, "rel <= 1e-10",
                       "individual variance = within-block + block-level variance")


def check_wor_prefix(populations=10, max_m=6, seed=2) -> CheckResult:
    gen = SeededGenerator(seed)
    worst_rel, worst_mean = 0.0, 0.0
    for _ in range(populations):
        for m in range(2, max_m + 1):
            X = _random_population(gen, m, 3)
            for k in range(1, m + 1):
                chk = an.check_prefix_moment(X, k)
                err = abs(chk.value - chk.closed_form) / max(an.population_variance(X), 1e-300)
                worst_rel = max(worst_rel, err)
                worst_mean = max(worst_mean, chk.mean_error)
    return CheckResult("wor-prefix", "variance", worst_rel <= 1e-10 and worst_mean <= 1e-12,
                       {"max_rel_error": worst_rel, "max_mean_error": worst_mean},
                       "rel <= 1e-10, mean <= 1e-12",
                       "prefix second moment (m-k)/(k(m-1)) sigma^2 under uniform orderings")


def check_block_prefix(seed=3) -> CheckResult:
    gen = SeededGenerator(seed)
    ok, worst = True, 0.0
    for K in range(2, 6):
        b = 3
        centres = _random_population(gen, K, 2)
        coherent = np.repeat(centres, b, axis=0)
        incoherent = coherent + _random_population(gen, K * b, 2)
        for grads, is_coherent in ((coherent, True), (incoherent, False)):
            rep = an.variance_decomposition_from_gradients(grads, b)
            G = an.block_means(grads, b)
            for k in range(1, K):
                blk = an.prefix_second_moment_exhaustive(G, k)
                blk_closed = (K - k) / (k * (K - 1)) * rep.sigma2_blk
                sample_const = (K - k) / (k * (K - 1)) * rep.sigma2_ind
                worst = max(worst, abs(blk - blk_closed) / max(blk_closed, 1e-300))
                if is_coherent and not math.isclose(blk, sample_const, rel_tol=1e-10):
                    ok = False
                if not is_coherent and not blk < sample_const:
                    ok = False
    return CheckResult("block-prefix", "variance", ok and worst <= 1e-10, {"max_rel_error": worst, "ordering_ok": ok},
                       "rel <= 1e-10", "block-level prefix variance uses the block variance constant")


def check_prefix_mc(seed=4) -> CheckResult:
    X = _random_population(SeededGenerator(seed), 50, 3)
    chk = an.check_prefix_moment(X, 10, mode="mc", samples=4000, seed=seed)
    z = abs(chk.value - chk.closed_form) / chk.stderr
    return CheckResult("prefix-mc", "variance", z <= 4.0, {"estimate": chk.value, "closed_form": chk.closed_form,
                       "z": z}, "|z| <= 4", "Monte Carlo prefix variance agrees with the closed form")


def check_order_lower_bound() -> CheckResult:
    q = QuadLinInstance(2.0, 3.0)
    pts, worst = [], 0.0
    for g in (1e-1, 1e-2, 1e-3, 1e-4):
        s = an.order_sensitivity(q, [q.w0], [1, 0], [0, 1], g)
        worst = max(worst, abs(s - 6.0 * g * g))
        pts.append((g, s))
    slope, _ = an.fit_loglog_slope(pts)
    return CheckResult("order-lb", "epochmap", worst <= 1e-13 and abs(slope - 2) <= 1e-3,
                       {"max_abs_error": worst, "slope": slope}, "abs <= 1e-13, |slope-2| <= 1e-3",
                       "two-component instance has order sensitivity |ab| gamma^2")


def check_reversal_identity(seed=5) -> CheckResult:
    worst = 0.0
    for n in range(2, 7):
        p = random_quadratic_ensemble(n, 3, seed=seed + n)
        w = SeededGenerator(seed + 100 + n).gaussians(3)
        target = an.reversal_pair_term(p, w)
        for s in range(20):
            pi = uniform_permutation(n, seed_for_epoch(seed, s))
            diff = an.second_order_term(p, w, pi) + an.second_order_term(p, w, reverse(pi)) - target
            worst = max(worst, float(np.abs(diff).max()))
    return CheckResult("rev-identity", "epochmap", worst <= 1e-12, {"max_abs_error": worst}, "abs <= 1e-12",
                       "second-order terms of an order and its reversal sum to an order-free term")


def check_paired_reversal_slope(seed=6) -> CheckResult:
    p = random_quadratic_ensemble(4, 3, seed=seed)
    w = np.ones(3)
    pi, pi2 = np.array([0, 1, 2, 3]), np.array([2, 0, 3, 1])
    pts = [(g, an.order_sensitivity(p, w, pi, pi2, g, symmetrized=True)) for g in an.gamma_grid(0.02, 4)]
    slope, r2 = an.fit_loglog_slope(pts)
    return CheckResult("paired-rev-slope", "epochmap", 2.7 <= slope <= 3.3, {"slope": slope, "r2": r2},
                       "slope in [2.7, 3.3]", "paired reversal makes order sensitivity cubic in gamma")


def check_permutation_variance(seed=7) -> CheckResult:
    q = QuadLinInstance(2.0, 3.0)
    g = 0.1
    var_q = an.permutation_variance(q, [q.w0], g)
    exact = g**4 * 36.0 / 4
    rel = abs(var_q - exact) / exact
    p = random_quadratic_ensemble(4, 3, seed=seed)
    w = np.ones(3)
    grid = an.gamma_grid(0.02, 4)
    var_t = [an.permutation_variance(p, w, x) for x in grid]
    var_bar = [an.permutation_variance(p, w, x, symmetrized=True) for x in grid]
    slope, _ = an.fit_loglog_slope(list(zip(grid, var_t)))
    c = an.quadratic_smoothness(p, w, grid[0])
    bound_ok = all(v <= c.c_rem**2 * x**6 * 4**6 for x, v in zip(grid, var_bar))
    return CheckResult("perm-var", "epochmap", rel <= 1e-12 and 3.8 <= slope <= 4.2 and bound_ok,
                       {"quadlin_rel_error": rel, "slope": slope, "symmetrized_bound_ok": bound_ok},
                       "rel <= 1e-12, slope in [3.8, 4.2]", "permutation variance is Theta(gamma^4)")


def check_remainder_and_upper_bound(seed=8) -> CheckResult:
    worst_rem, worst_ub = 0.0, 0.0
    for n in (3, 4, 5):
        p = random_quadratic_ensemble(n, 2, seed=seed + n)
        w = SeededGenerator(seed + n).gaussians(2)
        for g in an.gamma_grid(0.05, 4):
            c = an.quadratic_smoothness(p, w, g)
            rem_bound = c.c_rem * g**3 * n**3
            ub = c.L * c.G * g**2 * n * (n - 1) + 2 * c.c_rem * g**3 * n**3
            for s in range(5):
                pi = uniform_permutation(n, seed_for_epoch(seed, s))
                pi2 = uniform_permutation(n, seed_for_epoch(seed + 1, s))
                rep = an.epoch_map_exact(p, w, pi, g, c)
                worst_rem = max(worst_rem, rep.remainder_norm / rem_bound)
                worst_ub = max(worst_ub, an.order_sensitivity(p, w, pi, pi2, g) / ub)
    return CheckResult("remainder-bound", "epochmap", worst_rem <= 1 and worst_ub <= 1,
                       {"max_remainder_ratio": worst_rem, "max_order_ratio": worst_ub}, "ratios <= 1",
                       "third-order remainder and quadratic order-sensitivity bounds")


def check_apr_trace(n=20, base_seed=11) -> CheckResult:
    state = AprState(AprParams(), base_seed)
    got, ok = [], True
    for e, loss in enumerate(APR_TRACE_LOSSES):
        pi = apr_next_permutation(state, n, loss)
        got.append((state.last_regime, state.last_transform))
        ok &= is_permutation(pi, n)
        ok &= np.array_equal(pi, _apr_reference(e, state.last_regime, state.last_transform, n, base_seed))
    ok &= tuple(got) == APR_TRACE_EXPECTED
    return CheckResult("apr-trace", "apr", bool(ok), {"epochs": len(got), "matches": bool(ok)}, "exact",
                       "loss-ratio gated controller with periodic reversal and even-odd interleave")


def _apr_reference(e, regime, transform, n, base_seed):
    u = seed_for_epoch(base_seed, e)
    b_strong, b_mild = AprParams().block_sizes(n)
    if regime in ("initial", "fallback"):
        pi = uniform_permutation(n, u)
    else:
        pi = block_shuffle(n, b_strong if regime == "strong" else b_mild, u)
    if transform == "rev":
        pi = reverse(pi)
    elif transform == "eo":
        pi = even_odd_interleave(pi)
    return pi


SUITES = {
    "variance": (check_variance_decomposition, check_wor_prefix, check_block_prefix, check_prefix_mc),
    "epochmap": (check_order_lower_bound, check_reversal_identity, check_paired_reversal_slope,
                 check_permutation_variance, check_remainder_and_upper_bound),
    "apr": (check_apr_trace,),
}


def run_theory_checks(suite: str = "all") -> list:
    if suite == "all":
        fns = [f for group in SUITES.values() for f in group]
    elif suite in SUITES:
        fns = list(SUITES[suite])
    else:
        raise ValueError(f"unknown suite {suite!r}; expected all, {', '.join(SUITES)}")
    return [fn() for fn in fns]
