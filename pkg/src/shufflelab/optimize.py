"""Epoch-based without-replacement training: SGD, Adam, paired reversal."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DivergenceError
from .problems import FiniteSumProblem
from .rngcore import SeededGenerator
from .shuffling import Scheme, check_permutation, next_permutation, reverse

DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd"
    gamma0: float = 0.01
    schedule: str = "constant"
    alpha: float = 0.5
    batch_size: int = 1
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if self.schedule not in ("constant", "poly"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if not self.gamma0 > 0:
            raise ConfigError("gamma0 must be positive")
        if self.schedule == "poly" and not self.alpha > 0:
            raise ConfigError("alpha must be positive for the poly schedule")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")


def step_size(config: OptimizerConfig, epoch: int) -> float:
    """gamma_e = gamma0 for constant, gamma0 / (e + 1)**alpha for poly."""
    if config.schedule == "constant":
        return config.gamma0
    return config.gamma0 / (epoch + 1) ** config.alpha


def _guard(w, loss, step):
    if not math.isfinite(loss):
        raise DivergenceError(step, "non-finite loss")
    # NaN fails the comparison as well
    if not float(w @ w) <= DIVERGENCE_NORM**2:
        raise DivergenceError(step)


def run_epoch(problem: FiniteSumProblem, w, pi, gamma: float, batch_size: int = 1):
    """One pass over the data in the order ``pi``.

    Consecutive chunks of ``pi`` of size ``batch_size`` form the mini-batches
    (the last may be shorter). Returns the final iterate and the mean of the
    per-step losses taken at the pre-step iterates.
    """
    pi = check_permutation(pi, problem.n)
    w = np.array(w, dtype=np.float64)
    total, steps = 0.0, 0
    for start in range(0, problem.n, batch_size):
        loss, g = problem.batch_loss_grad(pi[start:start + batch_size], w)
        _guard(w, loss, steps)
        w = w - gamma * g
        total += loss
        steps += 1
    _guard(w, 0.0, steps)
    return w, total / steps


def epoch_map(problem: FiniteSumProblem, w, pi, gamma: float) -> np.ndarray:
    """T_pi(w): one single-sample epoch, no divergence guard."""
    w = np.array(w, dtype=np.float64)
    for i in pi:
        w = w - gamma * problem.gradients(w, np.array([i]))[0]
    return w


def run_paired_reversal_epoch(problem: FiniteSumProblem, w, pi, gamma: float) -> np.ndarray:
    """Average of the single-sample epoch endpoints under pi and its reversal."""
    pi = check_permutation(pi, problem.n)
    a, _ = run_epoch(problem, w, pi, gamma, 1)
    b, _ = run_epoch(problem, w, reverse(pi), gamma, 1)
    return 0.5 * (a + b)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, d: int) -> "AdamState":
        return cls(np.zeros(d), np.zeros(d), 0)


def run_adam_epoch(problem, w, state: AdamState, pi, gamma: float, batch_size: int = 1,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    pi = check_permutation(pi, problem.n)
    w = np.array(w, dtype=np.float64)
    m, v, t = state.m.copy(), state.v.copy(), state.t
    total, steps = 0.0, 0
    for start in range(0, problem.n, batch_size):
        loss, g = problem.batch_loss_grad(pi[start:start + batch_size], w)
        _guard(w, loss, steps)
        t += 1
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        w = w - gamma * m_hat / (np.sqrt(v_hat) + eps)
        total += loss
        steps += 1
    _guard(w, 0.0, steps)
    return w, AdamState(m, v, t), total / steps


@dataclass
class TrialRecord:
    per_epoch_loss: np.ndarray
    best_so_far: np.ndarray
    final_w: np.ndarray
    diverged: bool = False
    diverged_epoch: Optional[int] = None
    feedback: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def best(self) -> float:
        return float(self.best_so_far[-1]) if len(self.best_so_far) else math.nan

    def to_dict(self) -> dict:
        return {
            "per_epoch_loss": [float(x) for x in self.per_epoch_loss],
            "best_so_far": [float(x) for x in self.best_so_far],
            "final_w": [float(x) for x in self.final_w],
            "diverged": self.diverged,
            "diverged_epoch": self.diverged_epoch,
            "feedback": [float(x) for x in self.feedback],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(
            np.asarray(d["per_epoch_loss"], dtype=np.float64),
            np.asarray(d["best_so_far"], dtype=np.float64),
            np.asarray(d["final_w"], dtype=np.float64),
            d["diverged"], d["diverged_epoch"], list(d["feedback"]), dict(d["provenance"]),
        )


def run_trial(problem: FiniteSumProblem, scheme: Scheme, config: OptimizerConfig, init_seed: int,
              w0=None) -> TrialRecord:
    """Train for ``config.epochs`` epochs; record F(w_e) after each epoch.

    Schemes that need feedback receive F(w_0) before epoch 0 and afterwards
    the mean per-step loss of the epoch just finished. Divergence truncates
    the record and sets the flag instead of raising.
    """
    w = problem.init_params(SeededGenerator(init_seed)) if w0 is None else np.array(w0, dtype=np.float64)
    adam = AdamState.zeros(problem.d) if config.kind == "adam" else None
    feedback = problem.full_loss(w)
    fed, losses = [], []
    diverged_epoch = None
    for e in range(config.epochs):
        gamma = step_size(config, e)
        pi = next_permutation(scheme, problem.n, e, feedback if scheme.needs_feedback else None)
        if scheme.needs_feedback:
            fed.append(feedback)
        try:
            if adam is None:
                w_new, feedback = run_epoch(problem, w, pi, gamma, config.batch_size)
            else:
                w_new, adam, feedback = run_adam_epoch(problem, w, adam, pi, gamma, config.batch_size,
                                                       config.beta1, config.beta2, config.eps_adam)
            loss = problem.full_loss(w_new)
            if not math.isfinite(loss):
                raise DivergenceError(0, "non-finite full loss")
        except DivergenceError:
            diverged_epoch = e
            break
        w = w_new
        losses.append(loss)
    per_epoch = np.asarray(losses, dtype=np.float64)
    return TrialRecord(
        per_epoch_loss=per_epoch,
        best_so_far=np.minimum.accumulate(per_epoch) if per_epoch.size else per_epoch,
        final_w=w,
        diverged=diverged_epoch is not None,
        diverged_epoch=diverged_epoch,
        feedback=fed,
        provenance={
            "base_seed": scheme.base_seed,
            "init_seed": int(init_seed),
            "scheme": scheme.name,
            "config": asdict(config),
        },
    )
