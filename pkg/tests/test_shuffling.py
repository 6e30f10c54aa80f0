import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shufflelab.rngcore import GOLDEN, MASK64, SeededGenerator, _mix64_array
from shufflelab.shuffling import (APR, AprParams, AprState, BlockReshuffling, IncrementalGradient,
                                  PairedReversal, PermutationError, RandomReshuffling, ShuffleOnce,
                                  apr_next_permutation, apr_regime, block_concatenate, block_shuffle,
                                  check_permutation, even_odd_interleave, is_permutation, make_scheme,
                                  next_permutation, reverse, seed_for_epoch, uniform_permutation)


def _perm_index(perms, n):
    # rank each row among all n! orders, by lexicographic position
    lookup = {p: r for r, p in enumerate(itertools.permutations(range(n)))}
    return np.array([lookup[tuple(p)] for p in perms])


# --- seeds -------------------------------------------------------------------


def test_seed_for_epoch_deterministic():
    assert seed_for_epoch(123, 4) == seed_for_epoch(123, 4)


def test_seed_for_epoch_no_collisions_between_epoch_0_and_1():
    s = SeededGenerator(31337).uint64_array(1_000_000)
    u0 = _mix64_array(s ^ np.uint64(GOLDEN))
    u1 = _mix64_array(s ^ np.uint64((2 * GOLDEN) & MASK64))
    assert not np.any(u0 == u1)
    # the vectorised oracle agrees with the scalar function
    for k in range(0, 1_000_000, 99_991):
        assert int(u0[k]) == seed_for_epoch(int(s[k]), 0)
        assert int(u1[k]) == seed_for_epoch(int(s[k]), 1)


# --- uniform permutations ----------------------------------------------------


def test_uniform_n1():
    assert uniform_permutation(1, 5).tolist() == [0]


def test_uniform_n0_rejected():
    with pytest.raises(ValueError):
        uniform_permutation(0, 5)


def test_uniform_reproducible():
    assert np.array_equal(uniform_permutation(50, 8), uniform_permutation(50, 8))
    assert not np.array_equal(uniform_permutation(50, 8), uniform_permutation(50, 9))


def test_uniform_n3_frequencies():
    perms = [uniform_permutation(3, seed_for_epoch(2, e)) for e in range(60_000)]
    freq = np.bincount(_perm_index(perms, 3), minlength=6) / 60_000
    assert np.all(np.abs(freq - 1 / 6) <= 0.03 / 6)


def test_uniform_position_marginals():
    n, draws = 6, 30_000
    counts = np.zeros((n, n))
    for e in range(draws):
        counts[np.arange(n), uniform_permutation(n, seed_for_epoch(77, e))] += 1
    p = 1 / n
    sd = math.sqrt(draws * p * (1 - p))
    assert np.abs(counts - draws * p).max() <= 4.5 * sd


# --- blocks ------------------------------------------------------------------


def test_block_full_size_is_identity():
    for seed in range(50):
        assert block_shuffle(6, 6, seed).tolist() == list(range(6))


def test_block_hand_example():
    assert block_concatenate(5, 2, [2, 0, 1]).tolist() == [4, 0, 1, 2, 3]


def test_block_of_one_equals_uniform_draw_exactly():
    for seed in range(200):
        assert np.array_equal(block_shuffle(9, 1, seed), uniform_permutation(9, seed))


def test_block_of_one_frequencies_match_uniform():
    draws = 24_000
    blk = np.bincount(_perm_index([block_shuffle(4, 1, seed_for_epoch(5, e)) for e in range(draws)], 4),
                      minlength=24)
    uni = np.bincount(_perm_index([uniform_permutation(4, seed_for_epoch(6, e)) for e in range(draws)], 4),
                      minlength=24)
    # both near 1/24 and near each other (two independent binomial counts)
    sd = math.sqrt(draws / 24 * (23 / 24))
    assert np.abs(blk - draws / 24).max() <= 4.5 * sd
    assert np.abs(blk - uni).max() <= 4.5 * math.sqrt(2) * sd


def test_block_ragged_last_block_kept():
    pi = block_shuffle(7, 3, 11)
    blocks = [tuple(pi[i:i + 3]) for i in range(0, 7, 3)]
    assert is_permutation(pi, 7)
    # within-block order is preserved and the short block {6} stays whole
    pieces = {(0, 1, 2), (3, 4, 5), (6,)}
    flat, out = pi.tolist(), []
    while flat:
        for p in pieces:
            if tuple(flat[:len(p)]) == p:
                out.append(p)
                flat = flat[len(p):]
                break
        else:
            pytest.fail(f"bad block structure {pi} ({blocks})")
    assert set(out) == pieces


@pytest.mark.parametrize("b", [0, 8])
def test_block_size_out_of_range(b):
    with pytest.raises(ValueError):
        block_shuffle(7, b, 0)


# --- transforms --------------------------------------------------------------


def test_reverse_examples():
    assert reverse([0, 1, 2]).tolist() == [2, 1, 0]
    assert reverse([0]).tolist() == [0]


def test_even_odd_examples():
    assert even_odd_interleave([10, 11, 12, 13, 14]).tolist() == [10, 12, 14, 11, 13]
    assert even_odd_interleave([4, 9]).tolist() == [4, 9]


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 300), seed=st.integers(0, MASK64))
def test_transforms_are_bijections(n, seed):
    pi = uniform_permutation(n, seed)
    assert np.array_equal(reverse(reverse(pi)), pi)
    assert is_permutation(even_odd_interleave(pi), n)
    assert is_permutation(reverse(pi), n)


def test_check_permutation_rejects():
    with pytest.raises(PermutationError):
        check_permutation([0, 0, 1])
    with pytest.raises(PermutationError):
        check_permutation([0, 1], 3)
    assert not is_permutation([1, 2, 3])


def test_validity_ten_thousand_trials():
    gen = SeededGenerator(404)
    ns = gen.uints_below(np.full(10_000, 512)) + 1
    for t, n in enumerate(ns.tolist()):
        u = seed_for_epoch(404, t)
        b = 1 + int(gen.next_uint_below(n))
        pi = uniform_permutation(n, u)
        for out in (pi, block_shuffle(n, b, u), reverse(pi), even_odd_interleave(pi)):
            check_permutation(out, n)


# --- APR ---------------------------------------------------------------------


def test_apr_defaults():
    p = AprParams()
    assert (p.tau_strong, p.tau_mild, p.alpha_strong, p.alpha_mild) == (0.9, 1.0, 0.1, 0.2)
    assert (p.p_rev, p.r_rev, p.p_eo, p.r_eo, p.epsilon) == (3, 0, 3, 1, 1e-10)
    assert p.block_sizes(100) == (10, 20)
    assert p.block_sizes(4) == (1, 1)


@pytest.mark.parametrize("kwargs", [
    {"tau_strong": 1.0, "tau_mild": 1.0}, {"tau_strong": 0.0}, {"alpha_strong": 0.0}, {"alpha_mild": 1.5},
    {"p_rev": 0}, {"r_rev": 3}, {"r_eo": -1}, {"epsilon": 0.0},
])
def test_apr_params_validation(kwargs):
    with pytest.raises(ValueError):
        AprParams(**kwargs)


def _apr_after(losses, n=100, seed=3):
    state = AprState(AprParams(), seed)
    for loss in losses:
        pi = apr_next_permutation(state, n, loss)
    return state, pi


def test_apr_epoch0_uniform():
    state, pi = _apr_after([1.0])
    assert state.last_regime == "initial" and state.epoch == 1
    assert np.array_equal(pi, uniform_permutation(100, seed_for_epoch(3, 0)))


def test_apr_strong_example():
    state, pi = _apr_after([1.0, 0.5])
    assert state.last_regime == "strong" and state.last_transform is None
    assert state.last_rho == pytest.approx(0.5 / (1 + 1e-10), rel=0, abs=0)
    assert np.array_equal(pi, block_shuffle(100, 10, seed_for_epoch(3, 1)))


def test_apr_fallback_without_eo_at_epoch_2():
    state, pi = _apr_after([1.0, 1.0, 1.2])
    assert state.last_regime == "fallback" and state.last_transform is None
    assert np.array_equal(pi, uniform_permutation(100, seed_for_epoch(3, 2)))


def test_apr_strong_with_rev_at_epoch_3():
    state, pi = _apr_after([1.0, 1.0, 1.0, 0.5])
    assert state.last_regime == "strong" and state.last_transform == "rev"
    assert np.array_equal(pi, reverse(block_shuffle(100, 10, seed_for_epoch(3, 3))))


def test_apr_fallback_with_eo_at_epoch_4():
    state, pi = _apr_after([1.0, 1.0, 1.0, 1.0, 2.0])
    assert state.last_transform == "eo"
    assert np.array_equal(pi, even_odd_interleave(uniform_permutation(100, seed_for_epoch(3, 4))))


def test_apr_mild_uses_larger_blocks():
    state, pi = _apr_after([1.0, 0.95])
    assert state.last_regime == "mild"
    assert np.array_equal(pi, block_shuffle(100, 20, seed_for_epoch(3, 1)))


def test_regime_boundaries_are_strict():
    p = AprParams()
    assert apr_regime(np.nextafter(0.9, 0), p) == "strong"
    assert apr_regime(0.9, p) == "mild"
    assert apr_regime(np.nextafter(1.0, 0), p) == "mild"
    assert apr_regime(1.0, p) == "fallback"


@settings(max_examples=300, deadline=None)
@given(rho=st.floats(0, 10, allow_nan=False), ts=st.floats(0.01, 2), gap=st.floats(1e-6, 2))
def test_regime_is_pure_threshold_function(rho, ts, gap):
    p = AprParams(tau_strong=ts, tau_mild=ts + gap)
    expected = "strong" if rho < ts else ("mild" if rho < ts + gap else "fallback")
    assert apr_regime(rho, p) == expected
    assert apr_regime(ts, p) == "mild"
    assert apr_regime(ts + gap, p) == "fallback"


@pytest.mark.parametrize("bad", [-0.1, math.nan, math.inf])
def test_apr_rejects_bad_loss(bad):
    state = AprState()
    apr_next_permutation(state, 10, 1.0)
    with pytest.raises(ValueError):
        apr_next_permutation(state, 10, bad)


def test_apr_scheme_requires_feedback():
    s = make_scheme("apr", 1)
    with pytest.raises(ValueError):
        next_permutation(s, 10, 0, None)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, MASK64), losses=st.lists(st.floats(0, 5), min_size=1, max_size=15),
       n=st.integers(1, 80))
def test_apr_replay_determinism(seed, losses, n):
    runs = []
    for _ in range(2):
        s = APR(seed)
        runs.append([next_permutation(s, n, e, loss) for e, loss in enumerate(losses)])
    for a, b in zip(*runs):
        assert np.array_equal(a, b)
        assert is_permutation(a, n)


# --- scheme dispatch ---------------------------------------------------------


def test_ig_identity():
    s = IncrementalGradient(5)
    for e in range(3):
        assert next_permutation(s, 7, e).tolist() == list(range(7))


def test_so_reuses_order():
    s = ShuffleOnce(5)
    orders = [next_permutation(s, 30, e) for e in range(8)]
    assert np.array_equal(orders[0], orders[7])
    assert not np.array_equal(orders[0], np.arange(30))


def test_rr_fresh_each_epoch():
    s = RandomReshuffling(5)
    a, b = next_permutation(s, 30, 0), next_permutation(s, 30, 1)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, uniform_permutation(30, seed_for_epoch(5, 0)))


def test_block_scheme_fraction():
    s = make_scheme("block:0.1", 2)
    assert isinstance(s, BlockReshuffling) and s.block_size(200) == 20
    assert make_scheme("block:7").block_size(200) == 7


def test_paired_reversal_scheme():
    s = make_scheme("pr:rr", 4)
    assert isinstance(s, PairedReversal)
    a, b, c = (next_permutation(s, 12, e) for e in range(3))
    assert np.array_equal(b, reverse(a))
    assert not np.array_equal(c, a)


@pytest.mark.parametrize("name", ["zz", "block:0", "block:x", "block:1.5"])
def test_make_scheme_rejects(name):
    with pytest.raises(ValueError):
        make_scheme(name)


def test_schemes_with_same_seed_replay():
    for name in ("ig", "so", "rr", "block:3", "block:0.2", "pr:rr"):
        a, b = make_scheme(name, 9), make_scheme(name, 9)
        for e in range(5):
            assert np.array_equal(next_permutation(a, 25, e), next_permutation(b, 25, e))
