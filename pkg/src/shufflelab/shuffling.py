"""Per-epoch data orderings for without-replacement SGD.

A permutation is a 1-d int64 numpy array holding a bijection on ``0..n-1``.
Every scheme is deterministic given its base seed: the randomness for epoch
``e`` comes from ``seed_for_epoch(base_seed, e)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rngcore import GOLDEN, MASK64, SeededGenerator, mix64


class PermutationError(ValueError):
    pass


def check_permutation(order, n: Optional[int] = None) -> np.ndarray:
    """Return ``order`` as an int64 array, raising unless it is a bijection on 0..n-1."""
    arr = np.asarray(order)
    if arr.ndim != 1:
        raise PermutationError("permutation must be one-dimensional")
    if n is not None and arr.size != n:
        raise PermutationError(f"expected {n} entries, got {arr.size}")
    arr = arr.astype(np.int64, copy=False)
    if arr.size and not np.array_equal(np.sort(arr), np.arange(arr.size)):
        raise PermutationError("not a bijection on 0..n-1")
    return arr


def is_permutation(order, n: Optional[int] = None) -> bool:
    try:
        check_permutation(order, n)
    except PermutationError:
        return False
    return True


def seed_for_epoch(base_seed: int, e: int) -> int:
    """u_e = mix64(base_seed XOR (e + 1) * GOLDEN)."""
    return mix64((int(base_seed) & MASK64) ^ (((int(e) + 1) * GOLDEN) & MASK64))


def fisher_yates(n: int, gen: SeededGenerator) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    order = list(range(n))
    # j_i uniform on [0, i] for i = n-1 .. 1
    draws = gen.uints_below(np.arange(n, 1, -1)).tolist()
    for i, j in zip(range(n - 1, 0, -1), draws):
        order[i], order[j] = order[j], order[i]
    return np.asarray(order, dtype=np.int64)


def uniform_permutation(n: int, seed: int) -> np.ndarray:
    return fisher_yates(n, SeededGenerator(seed))


def identity(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def block_concatenate(n: int, b: int, block_order) -> np.ndarray:
    """Concatenate the consecutive blocks of ``0..n-1`` (size ``b``, last one
    possibly shorter) in the order given by ``block_order``."""
    if not 1 <= b <= n:
        raise ValueError(f"block size must lie in [1, {n}], got {b}")
    k = math.ceil(n / b)
    block_order = check_permutation(block_order, k)
    return np.concatenate([np.arange(r * b, min((r + 1) * b, n)) for r in block_order]).astype(np.int64)


def block_shuffle(n: int, b: int, seed: int) -> np.ndarray:
    if not 1 <= b <= n:
        raise ValueError(f"block size must lie in [1, {n}], got {b}")
    k = math.ceil(n / b)
    return block_concatenate(n, b, uniform_permutation(k, seed))


def reverse(pi) -> np.ndarray:
    return np.asarray(pi, dtype=np.int64)[::-1].copy()


def even_odd_interleave(pi) -> np.ndarray:
    """Entries at 1-based odd positions first, then the even positions."""
    pi = np.asarray(pi, dtype=np.int64)
    return np.concatenate([pi[0::2], pi[1::2]])


# --- APR ---------------------------------------------------------------------


@dataclass(frozen=True)
class AprParams:
    tau_strong: float = 0.9
    tau_mild: float = 1.0
    alpha_strong: float = 0.1
    alpha_mild: float = 0.2
    p_rev: int = 3
    r_rev: int = 0
    p_eo: int = 3
    r_eo: int = 1
    epsilon: float = 1e-10

    def __post_init__(self):
        if not 0 < self.tau_strong < self.tau_mild:
            raise ValueError("need 0 < tau_strong < tau_mild")
        for name in ("alpha_strong", "alpha_mild"):
            a = getattr(self, name)
            if not 0 < a <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {a}")
        if self.p_rev < 1 or self.p_eo < 1:
            raise ValueError("periods must be >= 1")
        if not 0 <= self.r_rev < self.p_rev or not 0 <= self.r_eo < self.p_eo:
            raise ValueError("phases must satisfy 0 <= r < p")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def block_sizes(self, n: int) -> tuple[int, int]:
        return max(1, math.floor(self.alpha_strong * n)), max(1, math.floor(self.alpha_mild * n))


def apr_regime(rho: float, params: AprParams) -> str:
    if rho < params.tau_strong:
        return "strong"
    if rho < params.tau_mild:
        return "mild"
    return "fallback"


@dataclass
class AprState:
    params: AprParams = field(default_factory=AprParams)
    base_seed: int = 0
    prev_loss: Optional[float] = None
    epoch: int = 0
    last_regime: str = "initial"
    last_rho: Optional[float] = None
    last_transform: Optional[str] = None


def apr_next_permutation(state: AprState, n: int, current_loss: Optional[float]) -> np.ndarray:
    """Generate pi_e for ``e = state.epoch`` and advance the state.

    At epoch 0 the loss may be None (nothing has been observed yet).
    """
    e = state.epoch
    p = state.params
    if e > 0 or current_loss is not None:
        if current_loss is None or not math.isfinite(current_loss) or current_loss < 0:
            raise ValueError(f"APR needs a finite non-negative loss, got {current_loss}")
    u = seed_for_epoch(state.base_seed, e)
    b_strong, b_mild = p.block_sizes(n)
    transform = None
    rho = None

    if e == 0:
        pi = uniform_permutation(n, u)
        regime = "initial"
    else:
        if state.prev_loss is None:
            raise ValueError("APR has no previous loss; feed the epoch-0 loss first")
        rho = current_loss / (state.prev_loss + p.epsilon)
        regime = apr_regime(rho, p)
        if regime == "strong":
            pi = block_shuffle(n, b_strong, u)
            if e % p.p_rev == p.r_rev:
                pi = reverse(pi)
                transform = "rev"
        elif regime == "mild":
            pi = block_shuffle(n, b_mild, u)
        else:
            pi = uniform_permutation(n, u)
            if e % p.p_eo == p.r_eo:
                pi = even_odd_interleave(pi)
                transform = "eo"

    state.prev_loss = current_loss
    state.epoch = e + 1
    state.last_regime = regime
    state.last_rho = rho
    state.last_transform = transform
    return check_permutation(pi, n)


# --- schemes -----------------------------------------------------------------


class Scheme:
    """Stateful per-epoch permutation generator.

    ``next(n, epoch, feedback)`` must be called with consecutive epochs
    starting at 0.
    """

    name = "scheme"
    needs_feedback = False

    def __init__(self, base_seed: int = 0):
        self.base_seed = int(base_seed) & MASK64

    def next(self, n: int, epoch: int, feedback: Optional[float] = None) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, base_seed={self.base_seed})"


class IncrementalGradient(Scheme):
    name = "ig"

    def next(self, n, epoch, feedback=None):
        return identity(n)


class ShuffleOnce(Scheme):
    name = "so"

    def __init__(self, base_seed=0):
        super().__init__(base_seed)
        self._order = None

    def next(self, n, epoch, feedback=None):
        if self._order is None or self._order.size != n:
            self._order = uniform_permutation(n, seed_for_epoch(self.base_seed, 0))
        return self._order.copy()


class RandomReshuffling(Scheme):
    name = "rr"

    def next(self, n, epoch, feedback=None):
        return uniform_permutation(n, seed_for_epoch(self.base_seed, epoch))


class BlockReshuffling(Scheme):
    """Block size is either an absolute count or, if ``fraction`` is set,
    ``max(1, floor(fraction * n))``."""

    def __init__(self, base_seed=0, b: Optional[int] = None, fraction: Optional[float] = None):
        super().__init__(base_seed)
        if (b is None) == (fraction is None):
            raise ValueError("give exactly one of b or fraction")
        self.b = b
        self.fraction = fraction
        self.name = f"block:{b}" if b is not None else f"block:{fraction:g}"

    def block_size(self, n: int) -> int:
        if self.b is not None:
            return self.b
        return max(1, math.floor(self.fraction * n))

    def next(self, n, epoch, feedback=None):
        return block_shuffle(n, self.block_size(n), seed_for_epoch(self.base_seed, epoch))


class APR(Scheme):
    name = "apr"
    needs_feedback = True

    def __init__(self, base_seed=0, params: Optional[AprParams] = None):
        super().__init__(base_seed)
        self.state = AprState(params=params or AprParams(), base_seed=self.base_seed)

    def next(self, n, epoch, feedback=None):
        if epoch != self.state.epoch:
            raise ValueError(f"APR expected epoch {self.state.epoch}, got {epoch}")
        if feedback is None:
            raise ValueError("APR requires a loss feedback every epoch")
        return apr_next_permutation(self.state, n, feedback)


class PairedReversal(Scheme):
    """Even epochs take the inner scheme's order, odd epochs replay it reversed."""

    def __init__(self, inner: Scheme):
        super().__init__(inner.base_seed)
        self.inner = inner
        self.name = f"pr:{inner.name}"
        self.needs_feedback = inner.needs_feedback
        self._last = None

    def next(self, n, epoch, feedback=None):
        if epoch % 2 == 0:
            self._last = self.inner.next(n, epoch // 2, feedback)
            return self._last.copy()
        return reverse(self._last)


def make_scheme(name: str, base_seed: int = 0, apr_params: Optional[AprParams] = None) -> Scheme:
    """Build a scheme from ``ig``, ``so``, ``rr``, ``apr``, ``block:<b>``,
    ``block:<fraction>`` or ``pr:<inner>``."""
    key = name.strip().lower()
    if key == "ig":
        return IncrementalGradient(base_seed)
    if key == "so":
        return ShuffleOnce(base_seed)
    if key == "rr":
        return RandomReshuffling(base_seed)
    if key == "apr":
        return APR(base_seed, apr_params)
    if key.startswith("block:"):
        arg = key.split(":", 1)[1]
        try:
            if any(c in arg for c in ".e"):
                frac = float(arg)
                if not 0 < frac <= 1:
                    raise ValueError
                return BlockReshuffling(base_seed, fraction=frac)
            b = int(arg)
            if b < 1:
                raise ValueError
            return BlockReshuffling(base_seed, b=b)
        except ValueError:
            raise ValueError(f"bad block size in scheme {name!r}") from None
    if key.startswith("pr:"):
        return PairedReversal(make_scheme(key[3:], base_seed, apr_params))
    raise ValueError(f"unknown scheme {name!r}")


def next_permutation(scheme: Scheme, n: int, epoch: int, feedback: Optional[float] = None) -> np.ndarray:
    return check_permutation(scheme.next(n, epoch, feedback), n)
