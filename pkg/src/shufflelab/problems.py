"""Finite-sum objectives F(w) = (1/n) sum_i f_i(w).

Every problem exposes per-component losses, gradients and (when available)
Hessians, plus vectorised batch evaluations used by the training loop.
Problems are immutable after construction.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as _sigmoid

from .errors import CapabilityError, ConfigError
from .rngcore import SeededGenerator


class FiniteSumProblem:
    n: int
    d: int
    has_hessian = False

    def _check_index(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range for n={self.n}")

    # vectorised surface, overridden by subclasses
    def losses(self, w, idx=None) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, w, idx=None) -> np.ndarray:
        raise NotImplementedError

    def hessians(self, w, idx=None) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} does not provide Hessians")

    def batch_loss_grad(self, idx, w) -> tuple[float, np.ndarray]:
        """Mean loss and mean gradient over the components in ``idx``."""
        idx = np.asarray(idx)
        return float(self.losses(w, idx).mean()), self.gradients(w, idx).mean(axis=0)

    def component_loss(self, i: int, w) -> float:
        self._check_index(i)
        return float(self.losses(w, np.array([i]))[0])

    def component_gradient(self, i: int, w) -> np.ndarray:
        self._check_index(i)
        return self.gradients(w, np.array([i]))[0]

    def component_hessian(self, i: int, w) -> np.ndarray:
        self._check_index(i)
        return self.hessians(w, np.array([i]))[0]

    def full_loss(self, w) -> float:
        return float(self.losses(w).mean())

    def full_gradient(self, w) -> np.ndarray:
        return self.gradients(w).mean(axis=0)

    def init_params(self, gen: SeededGenerator) -> np.ndarray:
        return 0.01 * gen.gaussians(self.d)


@dataclass(frozen=True)
class SmoothnessConstants:
    """Gradient Lipschitz bound L, gradient norm bound G, Hessian Lipschitz bound rho."""

    L: float
    G: float
    rho: float
    c_rem: float = field(init=False)

    def __post_init__(self):
        if min(self.L, self.G, self.rho) < 0:
            raise ValueError("smoothness constants must be non-negative")
        object.__setattr__(self, "c_rem", self.rho * self.G**2 / 2 + self.L**2 * self.G / 2)


class QuadraticEnsemble(FiniteSumProblem):
    """f_i(w) = 0.5 w^T A_i w + b_i^T w + c_i with symmetric A_i."""

    has_hessian = True

    def __init__(self, A, b, c=None):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
            raise ConfigError("need A of shape (n, d, d) and b of shape (n, d)")
        self.A = 0.5 * (A + A.transpose(0, 2, 1))
        self.b = b
        self.c = np.zeros(A.shape[0]) if c is None else np.asarray(c, dtype=np.float64)
        self.n, self.d = b.shape
        for arr in (self.A, self.b, self.c):
            arr.setflags(write=False)

    def _sel(self, idx):
        if idx is None:
            return self.A, self.b, self.c
        return self.A[idx], self.b[idx], self.c[idx]

    def losses(self, w, idx=None):
        A, b, c = self._sel(idx)
        w = np.asarray(w, dtype=np.float64)
        return 0.5 * np.einsum("j,ijk,k->i", w, A, w) + b @ w + c

    def gradients(self, w, idx=None):
        A, b, _ = self._sel(idx)
        return A @ np.asarray(w, dtype=np.float64) + b

    def hessians(self, w, idx=None):
        A, _, _ = self._sel(idx)
        return A.copy()

    def hessian_norm_bound(self) -> float:
        """max_i ||A_i||_2, a valid L for every component."""
        return float(max(np.abs(np.linalg.eigvalsh(Ai)).max() for Ai in self.A))


class QuadLinInstance(QuadraticEnsemble):
    """The n = 2, d = 1 pair f_1(x) = (a/2) x^2, f_2(x) = b x."""

    def __init__(self, a: float, b: float, w0: float = 1.0):
        if a == 0 or b == 0 or w0 == 0:
            raise ConfigError("QuadLinInstance needs a, b and w0 all nonzero")
        self.a, self.bcoef, self.w0 = float(a), float(b), float(w0)
        super().__init__([[[self.a]], [[0.0]]], [[0.0], [self.bcoef]])

    def __repr__(self):
        return f"QuadLinInstance(a={self.a}, b={self.bcoef}, w0={self.w0})"


def random_quadratic_ensemble(n: int, d: int, seed: int = 0, eig_range=(0.1, 1.0), b_scale=1.0) -> QuadraticEnsemble:
    """Components with Hessian eigenvalues drawn from ``eig_range`` and Gaussian linear terms."""
    gen = SeededGenerator(seed)
    lo, hi = eig_range
    A = np.empty((n, d, d))
    for i in range(n):
        Q, _ = np.linalg.qr(gen.gaussians(d * d).reshape(d, d))
        lam = lo + (hi - lo) * gen.uniforms(d)
        A[i] = (Q * lam) @ Q.T
    b = b_scale * gen.gaussians(n * d).reshape(n, d)
    return QuadraticEnsemble(A, b)


class _LinearModel(FiniteSumProblem):
    def __init__(self, X, y, intercept=False):
        X = np.asarray(X.toarray() if hasattr(X, "toarray") else X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ConfigError("need X of shape (n, d) and y of shape (n,)")
        if intercept:
            X = np.hstack([X, np.ones((X.shape[0], 1))])
        self.X, self.y = X, y
        self.n, self.d = X.shape
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    def _sel(self, idx):
        return (self.X, self.y) if idx is None else (self.X[idx], self.y[idx])


class LogisticRegression(_LinearModel):
    """f_i(w) = log(1 + exp(-y_i x_i^T w)) + (lam/2) ||w||^2 with y_i in {-1, +1}."""

    has_hessian = True

    def __init__(self, X, y, lam: float = 1e-4, intercept: bool = False):
        super().__init__(X, y, intercept)
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ConfigError("logistic regression labels must be -1/+1")
        if lam < 0:
            raise ConfigError("lam must be non-negative")
        self.lam = float(lam)

    def losses(self, w, idx=None):
        X, y = self._sel(idx)
        return np.logaddexp(0.0, -y * (X @ w)) + 0.5 * self.lam * float(w @ w)

    def gradients(self, w, idx=None):
        X, y = self._sel(idx)
        coef = -y * _sigmoid(-y * (X @ w))
        return coef[:, None] * X + self.lam * w

    def batch_loss_grad(self, idx, w):
        X, y = self.X[idx], self.y[idx]
        z = y * (X @ w)
        coef = -y * _sigmoid(-z)
        loss = np.logaddexp(0.0, -z).sum() / len(y) + 0.5 * self.lam * float(w @ w)
        return float(loss), (coef @ X) / len(y) + self.lam * w

    def hessians(self, w, idx=None):
        X, y = self._sel(idx)
        s = _sigmoid(X @ w)
        H = (s * (1 - s))[:, None, None] * X[:, :, None] * X[:, None, :]
        return H + self.lam * np.eye(self.d)


class LinearRegression(_LinearModel):
    """Squared error f_i(w) = (x_i^T w - y_i)^2."""

    has_hessian = True

    def losses(self, w, idx=None):
        X, y = self._sel(idx)
        return (X @ w - y) ** 2

    def gradients(self, w, idx=None):
        X, y = self._sel(idx)
        return (2.0 * (X @ w - y))[:, None] * X

    def batch_loss_grad(self, idx, w):
        X, y = self._sel(np.asarray(idx))
        r = X @ w - y
        return float((r * r).mean()), (2.0 / len(y)) * (r @ X)

    def hessians(self, w, idx=None):
        X, _ = self._sel(idx)
        return 2.0 * X[:, :, None] * X[:, None, :]


class MLP(FiniteSumProblem):
    """Fully connected ReLU network with softmax cross-entropy, parameters flattened.

    Layout of ``w``: for each layer, the weight matrix (fan_in x fan_out,
    row-major) followed by its bias.
    """

    def __init__(self, X, labels, sizes):
        X = np.asarray(X.toarray() if hasattr(X, "toarray") else X, dtype=np.float64)
        labels = np.asarray(labels)
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ConfigError(f"bad layer sizes {sizes}")
        if X.ndim != 2 or X.shape[1] != sizes[0]:
            raise ConfigError(f"inputs have {X.shape[-1]} features, network expects {sizes[0]}")
        if labels.shape != (X.shape[0],) or labels.min() < 0 or labels.max() >= sizes[-1]:
            raise ConfigError("labels must be integers in [0, n_classes)")
        self.X, self.labels, self.sizes = X, labels.astype(np.int64), sizes
        self.n = X.shape[0]
        self.layer_shapes = [(sizes[k], sizes[k + 1]) for k in range(len(sizes) - 1)]
        self.d = sum(a * b + b for a, b in self.layer_shapes)

    def unpack(self, w):
        out, pos = [], 0
        for a, b in self.layer_shapes:
            W = w[pos:pos + a * b].reshape(a, b)
            pos += a * b
            out.append((W, w[pos:pos + b]))
            pos += b
        return out

    def init_params(self, gen):
        parts = []
        for a, b in self.layer_shapes:
            bound = 1.0 / np.sqrt(a)
            parts.append(bound * (2.0 * gen.uniforms(a * b) - 1.0))
            parts.append(np.zeros(b))
        return np.concatenate(parts)

    def _forward(self, w, idx):
        X = self.X if idx is None else self.X[idx]
        acts = [X]
        layers = self.unpack(np.asarray(w, dtype=np.float64))
        h = X
        for k, (W, c) in enumerate(layers):
            h = h @ W + c
            if k < len(layers) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return layers, acts

    def _per_sample_loss(self, logits, y):
        m = logits.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
        return lse - logits[np.arange(len(y)), y]

    def losses(self, w, idx=None):
        y = self.labels if idx is None else self.labels[idx]
        _, acts = self._forward(w, idx)
        return self._per_sample_loss(acts[-1], y)

    def _backward(self, layers, acts, y, per_sample):
        logits = acts[-1]
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        delta = p
        delta[np.arange(len(y)), y] -= 1.0
        grads = []
        for k in range(len(layers) - 1, -1, -1):
            a_in = acts[k]
            if per_sample:
                gW = a_in[:, :, None] * delta[:, None, :]
                grads.append((gW.reshape(len(y), -1), delta))
            else:
                grads.append(((a_in.T @ delta).ravel() / len(y), delta.mean(axis=0)))
            if k > 0:
                delta = (delta @ layers[k][0].T) * (acts[k] > 0)
        grads.reverse()
        axis = 1 if per_sample else 0
        return np.concatenate([x for pair in grads for x in pair], axis=axis)

    def gradients(self, w, idx=None):
        y = self.labels if idx is None else self.labels[idx]
        layers, acts = self._forward(w, idx)
        return self._backward(layers, acts, y, per_sample=True)

    def batch_loss_grad(self, idx, w):
        idx = np.asarray(idx)
        y = self.labels[idx]
        layers, acts = self._forward(w, idx)
        loss = float(self._per_sample_loss(acts[-1], y).mean())
        return loss, self._backward(layers, acts, y, per_sample=False)

    def full_gradient(self, w):
        return self.batch_loss_grad(np.arange(self.n), w)[1]


# --- construction from text specs --------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    params: dict = field(default_factory=dict)


_KINDS = ("quadlin", "quadratic", "logreg", "linreg", "mlp")


def parse_problem_spec(text: str) -> ProblemSpec:
    """Parse ``"<kind> key=value ..."``; for mlp a bare ``784-256-10`` token gives the sizes."""
    tokens = shlex.split(text)
    if not tokens:
        raise ConfigError("empty problem spec")
    kind, params = tokens[0].lower(), {}
    if kind not in _KINDS:
        raise ConfigError(f"unknown problem kind {kind!r}; expected one of {', '.join(_KINDS)}")
    for tok in tokens[1:]:
        if "=" in tok:
            key, val = tok.split("=", 1)
            params[key.strip()] = val.strip()
        elif kind == "mlp" and "sizes" not in params:
            params["sizes"] = tok
        else:
            raise ConfigError(f"cannot parse token {tok!r} in problem spec")
    return ProblemSpec(kind, params)


def _num(params, key, default, cast=float):
    if key not in params:
        return default
    try:
        return cast(params[key])
    except ValueError:
        raise ConfigError(f"bad value for {key}: {params[key]!r}") from None


def _flag(params, key, default):
    if key not in params:
        return default
    val = str(params[key]).lower()
    if val in ("1", "true", "yes"):
        return True
    if val in ("0", "false", "no"):
        return False
    raise ConfigError(f"bad boolean for {key}: {params[key]!r}")


def synthetic_classification(n: int, d: int, seed: int = 0):
    """Gaussian features with labels from a logistic model on a random direction."""
    gen = SeededGenerator(seed)
    X = gen.gaussians(n * d).reshape(n, d)
    w_true = 2.0 * gen.gaussians(d) / np.sqrt(d)
    p = 1.0 / (1.0 + np.exp(-(X @ w_true)))
    y = np.where(gen.uniforms(n) <= p, 1.0, -1.0)
    return X, y


def synthetic_regression(n: int, d: int, seed: int = 0, noise: float = 0.5):
    gen = SeededGenerator(seed)
    X = gen.gaussians(n * d).reshape(n, d)
    w_true = gen.gaussians(d)
    y = X @ w_true + noise * gen.gaussians(n)
    return X, y


def make_problem(spec, dataset=None) -> FiniteSumProblem:
    """Build a problem from a spec string or :class:`ProblemSpec`.

    Data-driven kinds (logreg, linreg, mlp) use ``dataset`` when given,
    otherwise a seeded synthetic dataset sized by ``n=``/``d=``/``seed=``.
    """
    if isinstance(spec, str):
        spec = parse_problem_spec(spec)
    p = spec.params
    kind = spec.kind
    if kind == "quadlin":
        return QuadLinInstance(_num(p, "a", 2.0), _num(p, "b", 3.0), _num(p, "w0", 1.0))
    if kind == "quadratic":
        n, d = _num(p, "n", 4, int), _num(p, "d", 3, int)
        if n < 1 or d < 1:
            raise ConfigError("quadratic ensemble needs n, d >= 1")
        return random_quadratic_ensemble(n, d, _num(p, "seed", 0, int))

    n, d, seed = _num(p, "n", 200, int), _num(p, "d", 10, int), _num(p, "seed", 0, int)
    if kind == "mlp":
        sizes_txt = p.get("sizes", "")
        try:
            sizes = [int(s) for s in sizes_txt.split("-")]
        except ValueError:
            raise ConfigError(f"bad mlp sizes {sizes_txt!r}") from None
        if len(sizes) < 2:
            raise ConfigError("mlp needs layer sizes like 784-256-128-10")
        if dataset is not None:
            X, labels = dataset.dense_features(), dataset.labels.astype(np.int64)
        else:
            gen = SeededGenerator(seed)
            X = gen.gaussians(n * sizes[0]).reshape(n, sizes[0])
            labels = gen.uints_below(np.full(n, sizes[-1]))
        return MLP(X, labels, sizes)

    if dataset is not None:
        X, y = dataset.dense_features(), dataset.labels
    elif kind == "logreg":
        X, y = synthetic_classification(n, d, seed)
    else:
        X, y = synthetic_regression(n, d, seed, _num(p, "noise", 0.5))
    intercept = _flag(p, "intercept", False)
    if kind == "logreg":
        return LogisticRegression(X, y, lam=_num(p, "lam", 1e-4), intercept=intercept)
    return LinearRegression(X, y, intercept=intercept)
