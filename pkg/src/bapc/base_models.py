"""Interpretable base models.

Two models are provided: ordinary least squares with an intercept, and the
one-parameter newsvendor success link whose parameter is the demand rate
``lambda`` of an exponential demand law.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from bapc.errors import DomainError, EmptyNeighborhood, NonFiniteInput, RankDeficient, ValidationError
from bapc.smoothing import local_linear_smooth

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = np.logspace(-1.0, 1.0, 200)
DEFAULT_SMOOTHING_SPAN = 0.25


# --------------------------------------------------------------------------
# Ordinary least squares
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OlsDesign:
    """Design matrix with a leading intercept column, plus labels."""

    matrix: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.matrix, dtype=float)
        Y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.shape[0]:
            raise ValidationError(f"incompatible design {X.shape} and labels {Y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise NonFiniteInput("design or labels contain non-finite values")
        object.__setattr__(self, "matrix", X)
        object.__setattr__(self, "labels", Y)

    @classmethod
    def from_features(cls, x, y) -> OlsDesign:
        return cls(design_matrix(x), y)


def design_matrix(x) -> np.ndarray:
    """Prepend an intercept column to an ``(n,)`` or ``(n, d)`` feature array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.hstack([np.ones((x.shape[0], 1)), x])


def _check_rank(X: np.ndarray) -> None:
    n, k = X.shape
    if n < k or np.linalg.matrix_rank(X) < k:
        raise RankDeficient(f"design matrix of shape {X.shape} does not have full column rank")


def _normal_solve(X: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    _check_rank(X)
    gram = X.T @ X
    try:
        return np.linalg.solve(gram, X.T @ rhs)
    except np.linalg.LinAlgError as exc:
        raise RankDeficient(str(exc)) from exc


def ols_fit(design: OlsDesign) -> np.ndarray:
    """Least-squares coefficients ``(X'X)^-1 X'Y`` (intercept first)."""
    return _normal_solve(design.matrix, design.labels)


def delta_theta_closed_form(design: OlsDesign, eps_hat) -> np.ndarray:
    """Parameter change ``(X'X)^-1 X' eps_hat`` caused by removing ``eps_hat`` from all labels."""
    eps_hat = np.asarray(eps_hat, dtype=float)
    if eps_hat.shape != design.labels.shape:
        raise ValidationError(f"eps_hat has shape {eps_hat.shape}, expected {design.labels.shape}")
    return _normal_solve(design.matrix, eps_hat)


# --------------------------------------------------------------------------
# Newsvendor link
# --------------------------------------------------------------------------


def profit(p: float, c: float, q, D):
    """Newsvendor profit ``p * min(D, q) - c * q``; broadcasts over arrays."""
    return p * np.minimum(D, q) - c * q


def parametric_critical_fractile(lam: float, p: float, c: float) -> float:
    """Optimal order ``log(p / c) / (p * lam)`` for exponential demand of rate ``p * lam``."""
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if not p > c > 0:
        raise DomainError(f"need p > c > 0, got p={p}, c={c}")
    return math.log(p / c) / (p * lam)


def empirical_quantile(sample, frac: float) -> float:
    """Left-continuous inverse of the empirical CDF.

    Returns the smallest sample value ``x`` with ``F_n(x) >= frac``.
    """
    s = np.sort(np.asarray(sample, dtype=float))
    n = s.size
    if n == 0:
        raise ValidationError("empirical_quantile of an empty sample")
    if not 0.0 < frac < 1.0:
        raise DomainError(f"frac must lie in (0, 1), got {frac}")
    pos = n * frac
    k = round(pos) if abs(pos - round(pos)) < 1e-9 else math.ceil(pos)
    return float(s[max(k, 1) - 1])


@dataclass(frozen=True)
class NewsvendorLinkParams:
    """Constants of the success link; ``demand_sample`` is the reference sample."""

    p: float
    c: float
    delta: float
    demand_sample: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        if not self.p > self.c > 0:
            raise DomainError(f"need p > c > 0, got p={self.p}, c={self.c}")
        if not self.lam > 0:
            raise DomainError(f"lambda must be positive, got {self.lam}")
        if not self.delta >= 0:
            raise DomainError(f"delta must be nonnegative, got {self.delta}")
        sample = np.sort(np.asarray(self.demand_sample, dtype=float))
        if sample.ndim != 1 or sample.size == 0:
            raise ValidationError("demand_sample must be a nonempty 1-d array")
        if not np.all(np.isfinite(sample)):
            raise NonFiniteInput("demand_sample contains non-finite values")
        object.__setattr__(self, "demand_sample", sample)

    def with_lambda(self, lam: float) -> NewsvendorLinkParams:
        return NewsvendorLinkParams(self.p, self.c, self.delta, self.demand_sample, lam)


def neighbor_matrix(query, sample, delta: float) -> np.ndarray:
    """Boolean ``(len(query), len(sample))`` matrix of ``|D - D_i| <= delta``."""
    query = np.asarray(query, dtype=float).reshape(-1)
    sample = np.asarray(sample, dtype=float).reshape(-1)
    nb = np.abs(sample[None, :] - query[:, None]) <= delta
    empty = ~nb.any(axis=1)
    if empty.any():
        raise EmptyNeighborhood(
            f"{int(empty.sum())} demand value(s) have no sample member within delta={delta}"
        )
    return nb


def success_matrix(lambdas, query, sample, delta: float, p: float, c: float) -> np.ndarray:
    """Success indicators for every ``lambda`` (rows) and query demand (columns)."""
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    nb = neighbor_matrix(query, sample, delta).astype(float)
    counts = nb.sum(axis=1)
    q = np.array([parametric_critical_fractile(lam, p, c) for lam in lambdas])
    positive = profit(p, c, q[:, None], np.asarray(sample, dtype=float)[None, :]) > 0
    return (positive.astype(float) @ nb.T) / counts[None, :]


def success_indicator(params: NewsvendorLinkParams, D_i: float) -> float:
    """Share of neighbourhood demands with positive profit at the optimal order for ``params.lam``."""
    return float(
        success_matrix([params.lam], [D_i], params.demand_sample, params.delta, params.p, params.c)[0, 0]
    )


@dataclass
class LambdaFit:
    lam: float
    grid: np.ndarray
    objective: np.ndarray
    smoothed: np.ndarray
    index: int = field(default=0)


def fit_lambda(
    demand,
    targets,
    p: float,
    c: float,
    delta: float,
    lambda_grid=None,
    smoothing_span: float | None = DEFAULT_SMOOTHING_SPAN,
    sample=None,
) -> LambdaFit:
    """Grid-search the link parameter minimising the squared residual norm.

    The objective ``sum((targets - S_hat(lambda))**2)`` is evaluated on the
    grid, smoothed with a local linear smoother of the given span (skipped when
    ``smoothing_span`` is None) and minimised over grid points. Ties go to the
    smallest ``lambda``. ``sample`` defaults to ``demand``.
    """
    grid = DEFAULT_LAMBDA_GRID if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("lambda grid must be a nonempty 1-d array")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValidationError("lambda grid must be positive and strictly increasing")
    demand = np.asarray(demand, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if demand.shape != targets.shape:
        raise ValidationError("demand and targets differ in shape")
    if np.ptp(targets) == 0:
        log.warning("all success targets are identical; the lambda fit is degenerate")
    sample = demand if sample is None else sample
    S_hat = success_matrix(grid, demand, sample, delta, p, c)
    objective = ((targets[None, :] - S_hat) ** 2).sum(axis=1)
    if not np.all(np.isfinite(objective)):
        raise NonFiniteInput("non-finite lambda objective")
    smoothed = objective if smoothing_span is None else local_linear_smooth(np.log(grid), objective, smoothing_span)
    idx = int(np.argmin(smoothed))
    return LambdaFit(float(grid[idx]), grid, objective, smoothed, idx)
