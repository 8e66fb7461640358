"""Before/after parameter comparison for an additive residual corrector.

The procedure has three steps:

1. fit the base model ``f_theta`` on the data,
2. train a corrector on the residuals ``eps = Y - f_theta(X)``,
3. subtract the predicted correction from the labels inside a neighbourhood
   and refit, giving ``theta'``.

The local surrogate of the correction is ``delta_f = f_theta - f_theta'``;
adding it to ``f_theta`` gives the reflected model ``2 f_theta - f_theta'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from bapc import base_models
from bapc.correctors import ForestSpec, MlpSpec, make_corrector, train_corrector
from bapc.errors import NonFiniteInput, ValidationError

KINDS = ("ols_linear", "newsvendor_link")

# Delta-theta is reported as theta' - theta; the reflected shift
# theta_tilde - theta = theta - theta' is reported alongside it.
SIGN_CONVENTION = "delta_theta = theta_prime - theta; delta_theta_tilde = theta - theta_prime"


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered pairs ``(x_i, y_i)``; ``x`` is stored as an ``(n, d)`` array."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValidationError(f"features {x.shape} and labels {y.shape} do not pair up")
        if y.size < 2:
            raise ValidationError("a dataset needs at least two points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NonFiniteInput("dataset contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, points) -> LabeledDataset:
        xs, ys = zip(*points)
        x = [np.atleast_1d(np.asarray(v, dtype=float)) for v in xs]
        if len({v.shape for v in x}) != 1:
            raise ValidationError("all inputs must have the same dimension")
        return cls(np.vstack(x), np.asarray(ys, dtype=float))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def with_labels(self, y) -> LabeledDataset:
        return LabeledDataset(self.x, y)


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Closed ball ``{x : |x - center| <= radius}`` (Euclidean; absolute value in 1-d)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.ndim != 1:
            raise ValidationError("center must be a point")
        if not self.radius >= 0:
            raise ValidationError(f"radius must be nonnegative, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def global_(cls, dataset: LabeledDataset) -> NeighborhoodSpec:
        """A ball that contains every training input."""
        center = dataset.x.mean(axis=0)
        radius = float(np.max(np.linalg.norm(dataset.x - center, axis=1)))
        return cls(center, radius * (1 + 1e-9) + 1e-12)

    def distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            x = x.reshape(-1, self.center.size)
        if x.shape[1] != self.center.size:
            raise ValidationError(f"points of dimension {x.shape[1]} vs center of dimension {self.center.size}")
        return np.linalg.norm(x - self.center, axis=1)

    def contains(self, x) -> np.ndarray:
        return self.distance(x) <= self.radius


@dataclass(frozen=True)
class BaseModelFit:
    """Fitted base model. ``link`` carries the newsvendor constants when needed."""

    kind: str
    theta: np.ndarray
    training_loss: float
    link: Any = None

    def predict(self, x) -> np.ndarray:
        if self.kind == "ols_linear":
            X = base_models.design_matrix(np.asarray(x, dtype=float).reshape(-1, self.theta.size - 1))
            return X @ self.theta
        lam = float(self.theta[0])
        q = np.asarray(x, dtype=float).reshape(-1)
        link = self.link
        return base_models.success_matrix([lam], q, link.demand_sample, link.delta, link.p, link.c)[0]


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise ValidationError(f"unknown base model kind {kind!r}; expected one of {KINDS}")


def fit_base(kind: str, dataset: LabeledDataset, link=None, lambda_grid=None, smoothing_span=None) -> BaseModelFit:
    """Fit the base model of the given kind by least squares.

    For ``newsvendor_link`` the inputs are demands, labels are success
    targets, ``link`` is a :class:`~bapc.base_models.NewsvendorLinkParams`
    template and the fit is a grid search over ``lambda``.
    """
    _check_kind(kind)
    if kind == "ols_linear":
        theta = base_models.ols_fit(base_models.OlsDesign.from_features(dataset.x, dataset.y))
        fit = BaseModelFit(kind, theta, 0.0)
    else:
        if link is None:
            raise ValidationError("newsvendor_link requires link parameters")
        if dataset.d != 1:
            raise ValidationError("newsvendor_link takes one-dimensional demand inputs")
        res = base_models.fit_lambda(
            dataset.x[:, 0],
            dataset.y,
            link.p,
            link.c,
            link.delta,
            lambda_grid=lambda_grid,
            smoothing_span=smoothing_span,
            sample=link.demand_sample,
        )
        fit = BaseModelFit(kind, np.array([res.lam]), 0.0, link.with_lambda(res.lam))
    r = dataset.y - fit.predict(dataset.x)
    return replace(fit, training_loss=float(r @ r))


refit_base = fit_base


def residuals(fit: BaseModelFit, dataset: LabeledDataset) -> np.ndarray:
    """``eps_i = y_i - f_theta(x_i)`` in dataset order."""
    if fit.kind == "ols_linear" and dataset.d != fit.theta.size - 1:
        raise ValidationError(f"fit expects {fit.theta.size - 1} features, dataset has {dataset.d}")
    return dataset.y - fit.predict(dataset.x)


def modified_labels(dataset: LabeledDataset, corrector, nbhd: NeighborhoodSpec, eps_hat=None) -> LabeledDataset:
    """Subtract the predicted correction from labels whose input lies in ``nbhd``.

    ``eps_hat`` may supply precomputed corrector outputs at ``dataset.x``.
    """
    inside = nbhd.contains(dataset.x)
    if eps_hat is None:
        eps_hat = np.asarray(corrector.predict(dataset.x), dtype=float)
    y = np.where(inside, dataset.y - eps_hat, dataset.y)
    return dataset.with_labels(y)


def surrogate_delta_f(fit: BaseModelFit, fit_prime: BaseModelFit, x) -> np.ndarray:
    """``f_theta(x) - f_theta'(x)``."""
    if fit.kind != fit_prime.kind:
        raise ValidationError("both fits must be of the same kind")
    return fit.predict(x) - fit_prime.predict(x)


def reflected_prediction(fit: BaseModelFit, fit_prime: BaseModelFit, x) -> np.ndarray:
    """``f_theta(x) + delta_f(x) = 2 f_theta(x) - f_theta'(x)``."""
    return fit.predict(x) + surrogate_delta_f(fit, fit_prime, x)


@dataclass
class BapcResult:
    theta: np.ndarray
    theta_prime: np.ndarray
    delta_theta: np.ndarray
    delta_theta_tilde: np.ndarray
    x_n: np.ndarray
    base_prediction: float
    eps_hat_at_xn: float
    corrected_prediction: float
    delta_f_at_xn: float
    neighborhood: NeighborhoodSpec
    fit: BaseModelFit
    fit_prime: BaseModelFit
    corrector: Any
    delta_eps_at_xn: float | None = None
    sign_convention: str = field(default=SIGN_CONVENTION)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "theta_prime": self.theta_prime.tolist(),
            "delta_theta": self.delta_theta.tolist(),
            "delta_theta_tilde": self.delta_theta_tilde.tolist(),
            "x_n": self.x_n.tolist(),
            "base_prediction": self.base_prediction,
            "eps_hat_at_xn": self.eps_hat_at_xn,
            "corrected_prediction": self.corrected_prediction,
            "delta_f_at_xn": self.delta_f_at_xn,
            "delta_eps_at_xn": self.delta_eps_at_xn,
            "neighborhood": {"center": self.neighborhood.center.tolist(), "radius": self.neighborhood.radius},
            "sign_convention": self.sign_convention,
        }


def _resolve_corrector(corrector, seed: int):
    if isinstance(corrector, str):
        return make_corrector(corrector, seed=seed), True
    if isinstance(corrector, (MlpSpec, ForestSpec)):
        return corrector, True
    return corrector, False


def run_bapc(
    dataset: LabeledDataset,
    x_n,
    nbhd: NeighborhoodSpec,
    corrector="mlp",
    kind: str = "ols_linear",
    seed: int = 0,
    y_n: float | None = None,
    fit: BaseModelFit | None = None,
) -> BapcResult:
    """Run the three steps for the instance ``x_n``.

    ``corrector`` is a kind name, an MlpSpec/ForestSpec, or an already trained
    object with ``predict``; trained objects are used as they are. A
    precomputed step-one ``fit`` may be passed to share it across
    neighbourhoods.
    """
    _check_kind(kind)
    x_n = np.atleast_1d(np.asarray(x_n, dtype=float))
    if not nbhd.contains(x_n)[0]:
        raise ValidationError(f"x_n={x_n.tolist()} lies outside the neighbourhood")

    if fit is None:
        fit = fit_base(kind, dataset)
    eps = residuals(fit, dataset)

    model, needs_training = _resolve_corrector(corrector, seed)
    if needs_training:
        if isinstance(model, (MlpSpec, ForestSpec)):
            model = train_corrector(model, dataset.x, eps)
        else:
            model = model.fit(dataset.x, eps)

    fit_prime = refit_base(kind, modified_labels(dataset, model, nbhd))

    base_pred = float(fit.predict(x_n[None, :])[0])
    eps_hat_n = float(np.asarray(model.predict(x_n[None, :]))[0])
    delta_f = float(surrogate_delta_f(fit, fit_prime, x_n[None, :])[0])
    corrected = base_pred + eps_hat_n
    delta_eps = None if y_n is None else float(y_n - base_pred - eps_hat_n)
    return BapcResult(
        theta=fit.theta.copy(),
        theta_prime=fit_prime.theta.copy(),
        delta_theta=fit_prime.theta - fit.theta,
        delta_theta_tilde=fit.theta - fit_prime.theta,
        x_n=x_n,
        base_prediction=base_pred,
        eps_hat_at_xn=eps_hat_n,
        corrected_prediction=corrected,
        delta_f_at_xn=delta_f,
        neighborhood=nbhd,
        fit=fit,
        fit_prime=fit_prime,
        corrector=model,
        delta_eps_at_xn=delta_eps,
    )
