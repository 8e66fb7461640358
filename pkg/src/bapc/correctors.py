"""Residual correctors: a one-hidden-layer MLP and a random forest regressor.

Both expose ``fit(X, y)`` / ``predict(X)`` and are fully determined by their
spec and seed. The logit helpers map bounded residuals in (-1, 1) to the real
line and back, for targets that live in [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from bapc.errors import DomainError, NonFiniteInput, ValidationError
from bapc.streams import seed_sequence

log = logging.getLogger(__name__)

CLAMP_BOUND = 1.0 - 1e-6


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError(f"features must be 1-d or 2-d, got shape {X.shape}")
    return X


def _check_training_data(X, y):
    X = _as_2d(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0] or y.size == 0:
        raise ValidationError(f"cannot train on features {X.shape} and labels {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("training data contain non-finite values")
    return X, y


# --------------------------------------------------------------------------
# Multilayer perceptron
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpSpec:
    hidden_units: int = 32
    max_iterations: int = 200
    tol: float = 1e-10
    seed: int = 0


class MlpCorrector:
    """Single hidden layer of rectified units, trained full-batch with L-BFGS.

    Inputs are standardised with statistics of the training set. The loss is
    half the mean squared error; no penalty term is added.
    """

    kind = "mlp"

    def __init__(self, spec: MlpSpec | None = None):
        self.spec = spec or MlpSpec()
        if self.spec.hidden_units < 1:
            raise ValidationError("hidden_units must be positive")
        self.loss_history: list[float] = []
        self.diagnostics: dict = {}

    def _unpack(self, w):
        d, h = self._d, self.spec.hidden_units
        i = 0
        W1 = w[i : i + d * h].reshape(d, h)
        i += d * h
        b1 = w[i : i + h]
        i += h
        W2 = w[i : i + h]
        b2 = w[i + h]
        return W1, b1, W2, b2

    def _loss_grad(self, w, Z, y):
        W1, b1, W2, b2 = self._unpack(w)
        pre = Z @ W1 + b1
        hidden = np.maximum(pre, 0.0)
        out = hidden @ W2 + b2
        r = out - y
        n = y.size
        loss = 0.5 * float(r @ r) / n
        g_out = r / n
        g_W2 = hidden.T @ g_out
        g_b2 = g_out.sum()
        g_hidden = np.outer(g_out, W2) * (pre > 0)
        g_W1 = Z.T @ g_hidden
        g_b1 = g_hidden.sum(axis=0)
        return loss, np.concatenate([g_W1.ravel(), g_b1, g_W2, [g_b2]])

    def fit(self, X, y) -> MlpCorrector:
        X, y = _check_training_data(X, y)
        self._d = X.shape[1]
        self._mean = X.mean(axis=0)
        scale = X.std(axis=0)
        self._scale = np.where(scale > 0, scale, 1.0)
        Z = (X - self._mean) / self._scale

        h = self.spec.hidden_units
        rng = np.random.Generator(np.random.PCG64(seed_sequence(self.spec.seed, "corrector-init")))
        lim1 = 1.0 / np.sqrt(self._d)
        lim2 = 1.0 / np.sqrt(h)
        w0 = np.concatenate(
            [
                rng.uniform(-lim1, lim1, size=self._d * h),
                rng.uniform(-lim1, lim1, size=h),
                rng.uniform(-lim2, lim2, size=h),
                [0.0],
            ]
        )

        self.loss_history = [self._loss_grad(w0, Z, y)[0]]
        stalled = []

        # Stop when the loss decrease is small relative to the loss itself.
        # The optimizer's own ftol is relative to max(loss, 1), which halts far
        # too early once the loss is tiny, so it is switched off below.
        def record(wk):
            prev = self.loss_history[-1]
            cur = self._loss_grad(wk, Z, y)[0]
            self.loss_history.append(cur)
            if prev - cur <= self.spec.tol * cur:
                stalled.append(True)
                raise StopIteration

        res = minimize(
            self._loss_grad,
            w0,
            args=(Z, y),
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={"maxiter": self.spec.max_iterations, "ftol": 0.0, "gtol": 1e-12},
        )
        self._w = res.x
        self.diagnostics = {
            "converged": bool(res.success or stalled),
            "iterations": int(res.nit),
            "final_loss": float(res.fun),
            "message": str(res.message),
        }
        if not res.success:
            log.info("MLP stopped without convergence after %d iterations: %s", res.nit, res.message)
        return self

    def predict(self, X) -> np.ndarray:
        Z = (_as_2d(X) - self._mean) / self._scale
        W1, b1, W2, b2 = self._unpack(self._w)
        return np.maximum(Z @ W1 + b1, 0.0) @ W2 + b2


# --------------------------------------------------------------------------
# Random forest
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForestSpec:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 2
    bootstrap: bool = True
    max_features: int | None = None
    seed: int = 0


@dataclass
class _Tree:
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.value) - 1

    def freeze(self):
        self.feature = np.asarray(self.feature, dtype=np.intp)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=np.intp)
        self.right = np.asarray(self.right, dtype=np.intp)
        self.value = np.asarray(self.value, dtype=float)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]


def _best_split(X, y, min_leaf, features):
    """Best (feature, threshold, gain) by reduction of the sum of squared errors."""
    n = y.size
    total = y.sum()
    best = (None, 0.0, 0.0)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        csum = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        # SSE reduction up to a constant: sum_L^2/n_L + sum_R^2/n_R
        score = csum**2 / n_left + (total - csum) ** 2 / (n - n_left)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        score = np.where(valid, score, -np.inf)
        k = int(np.argmax(score))
        gain = score[k] - total**2 / n
        if gain > best[2] * (1 + 1e-12) + 1e-14:
            best = (f, 0.5 * (xs[k] + xs[k + 1]), gain)
    return best


def _grow_tree(X, y, spec: ForestSpec, rng: np.random.Generator) -> _Tree:
    tree = _Tree()
    d = X.shape[1]
    n_feat = d if spec.max_features is None else min(d, spec.max_features)
    stack = [(tree.add_node(), np.arange(y.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        tree.value[node] = float(yn.mean())
        if idx.size < 2 * spec.min_samples_leaf or np.ptp(yn) == 0:
            continue
        if spec.max_depth is not None and depth >= spec.max_depth:
            continue
        features = rng.permutation(d)[:n_feat] if n_feat < d else range(d)
        f, thr, gain = _best_split(X[idx], yn, spec.min_samples_leaf, features)
        if f is None or gain <= 0:
            continue
        mask = X[idx, f] <= thr
        left, right = tree.add_node(), tree.add_node()
        tree.feature[node], tree.threshold[node] = f, thr
        tree.left[node], tree.right[node] = left, right
        stack.append((right, idx[~mask], depth + 1))
        stack.append((left, idx[mask], depth + 1))
    tree.freeze()
    return tree


class ForestCorrector:
    """Bagged regression trees split greedily on variance reduction.

    Every tree draws from its own child stream of the forest seed, so the
    fitted forest does not depend on the order in which trees are grown.
    """

    kind = "random_forest"

    def __init__(self, spec: ForestSpec | None = None):
        self.spec = spec or ForestSpec()
        if self.spec.n_trees < 1 or self.spec.min_samples_leaf < 1:
            raise ValidationError("n_trees and min_samples_leaf must be positive")
        self.trees: list[_Tree] = []
        self.diagnostics: dict = {}

    def fit(self, X, y) -> ForestCorrector:
        X, y = _check_training_data(X, y)
        n = y.size
        children = seed_sequence(self.spec.seed, "forest").spawn(self.spec.n_trees)
        self.trees = []
        for child in children:
            rng = np.random.Generator(np.random.PCG64(child))
            idx = rng.integers(0, n, size=n) if self.spec.bootstrap else np.arange(n)
            self.trees.append(_grow_tree(X[idx], y[idx], self.spec, rng))
        self.diagnostics = {"converged": True, "n_nodes": int(sum(t.value.size for t in self.trees))}
        return self

    def predict(self, X) -> np.ndarray:
        X = _as_2d(X)
        return np.mean([t.predict(X) for t in self.trees], axis=0)


# --------------------------------------------------------------------------
# Factory and helpers
# --------------------------------------------------------------------------

KIND_ALIASES = {"mlp": "mlp", "nnet": "mlp", "random_forest": "random_forest", "rf": "random_forest"}


class ZeroCorrector:
    """Predicts zero everywhere."""

    kind = "zero"
    diagnostics = {"converged": True}

    def fit(self, X, y):
        return self

    def predict(self, X):
        return np.zeros(_as_2d(X).shape[0])


class LookupCorrector:
    """Returns prescribed values at the training inputs; used to inject exact corrections."""

    kind = "lookup"
    diagnostics = {"converged": True}

    def __init__(self, X, values):
        self._X = _as_2d(X)
        self._values = np.asarray(values, dtype=float).reshape(-1)

    def fit(self, X, y):
        return self

    def predict(self, X):
        X = _as_2d(X)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            hit = np.nonzero(np.all(self._X == row, axis=1))[0]
            if hit.size == 0:
                raise ValidationError(f"no injected correction for input {row}")
            out[i] = self._values[hit[0]]
        return out


def make_corrector(kind: str, seed: int = 0, **options):
    """Untrained corrector of the given kind (``mlp``/``nnet`` or ``random_forest``/``rf``)."""
    try:
        canonical = KIND_ALIASES[kind]
    except KeyError:
        raise ValidationError(f"unknown corrector kind {kind!r}") from None
    if canonical == "mlp":
        return MlpCorrector(MlpSpec(seed=seed, **options))
    return ForestCorrector(ForestSpec(seed=seed, **options))


def train_corrector(spec, X, eps):
    """Train a corrector on residual data ``(X, eps)``; ``spec`` is an MlpSpec or ForestSpec."""
    if isinstance(spec, MlpSpec):
        return MlpCorrector(spec).fit(X, eps)
    if isinstance(spec, ForestSpec):
        return ForestCorrector(spec).fit(X, eps)
    raise ValidationError(f"unsupported corrector spec {spec!r}")


def predict_correction(corrector, x) -> np.ndarray:
    return np.asarray(corrector.predict(x), dtype=float)


def lgt(x, bound: float = CLAMP_BOUND):
    """Logit scaled to (-1, 1): ``log((1 + x) / (1 - x))``, after clamping to ``[-bound, bound]``."""
    x = np.clip(np.asarray(x, dtype=float), -bound, bound)
    if np.any(np.abs(x) >= 1.0):
        raise DomainError("lgt is only defined on (-1, 1)")
    return np.log1p(x) - np.log1p(-x)


def lgt_inverse(y):
    """Inverse of :func:`lgt`, i.e. ``tanh(y / 2)``."""
    return np.tanh(0.5 * np.asarray(y, dtype=float))


def truncate_correction(S, eps_hat):
    """Clip ``eps_hat`` so that ``S - eps_hat`` lies in [0, 1]."""
    S = np.asarray(S, dtype=float)
    return np.clip(np.asarray(eps_hat, dtype=float), S - 1.0, S)


class LogitWrapped:
    """Trains an inner corrector on ``lgt(eps)`` and returns back-transformed predictions."""

    def __init__(self, inner, bound: float = CLAMP_BOUND):
        if not 0 < bound < 1:
            raise DomainError("clamp bound must lie in (0, 1)")
        self.inner = inner
        self.bound = bound
        self.kind = inner.kind

    @property
    def diagnostics(self):
        return self.inner.diagnostics

    def fit(self, X, eps) -> LogitWrapped:
        self.inner.fit(X, lgt(eps, self.bound))
        return self

    def predict(self, X) -> np.ndarray:
        return lgt_inverse(self.inner.predict(X))
