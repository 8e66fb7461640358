"""Risk-affine newsvendor: explaining a success corrector as a demand-rate shift.

Monthly demand is exponential with rate ``p * lambda``. Half of the months
order at the empirical critical fractile, the other half order ``r`` more.
The base model predicts success from demand through the one-parameter link
of :mod:`bapc.base_models`; the corrector learns the logit-scaled residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from bapc.base_models import (
    DEFAULT_LAMBDA_GRID,
    DEFAULT_SMOOTHING_SPAN,
    LambdaFit,
    empirical_quantile,
    fit_lambda,
    profit,
    success_matrix,
)
from bapc.correctors import LogitWrapped, make_corrector, truncate_correction
from bapc.errors import ValidationError
from bapc.streams import child_seed, substream

log = logging.getLogger(__name__)

DEFAULT_DELTA_GRID = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4)


@dataclass(frozen=True)
class NewsvendorConfig:
    p: float = 2.0
    c: float = 1.0
    lambda_true: float = 1.0
    n: int = 200
    perturbation: float = 1.0
    delta: float = 0.1
    mc_repeats: int = 100
    seed: int = 0
    lambda_grid: tuple | None = None
    smoothing_span: float | None = DEFAULT_SMOOTHING_SPAN

    def __post_init__(self):
        if not self.p > self.c > 0:
            raise ValidationError(f"need p > c > 0, got p={self.p}, c={self.c}")
        if not self.lambda_true > 0:
            raise ValidationError("lambda_true must be positive")
        if self.n < 4 or self.n % 4:
            raise ValidationError("n must be a positive multiple of 4 (two folds, half perturbed)")
        if self.delta < 0:
            raise ValidationError("delta must be nonnegative")
        if self.mc_repeats < 1:
            raise ValidationError("mc_repeats must be positive")

    @property
    def grid(self) -> np.ndarray:
        return DEFAULT_LAMBDA_GRID if self.lambda_grid is None else np.asarray(self.lambda_grid, dtype=float)


@dataclass
class Months:
    """Column-wise monthly records."""

    demand: np.ndarray
    order: np.ndarray
    profit: np.ndarray
    success: np.ndarray
    perturbed: np.ndarray
    q_hat: float

    def __len__(self) -> int:
        return self.demand.size

    def subset(self, idx) -> Months:
        return Months(
            self.demand[idx], self.order[idx], self.profit[idx], self.success[idx], self.perturbed[idx], self.q_hat
        )


def exponential_sample(rng: np.random.Generator, rate: float, size: int) -> np.ndarray:
    """Exponential draws by inverting the CDF of seeded uniforms."""
    u = rng.random(size)
    return -np.log1p(-u) / rate


def generate_newsvendor_dataset(config: NewsvendorConfig, rng: np.random.Generator | None = None) -> Months:
    """Months whose orders sit at the sample's critical fractile, half shifted by the perturbation."""
    rng = rng or substream(config.seed, "demand")
    D = exponential_sample(rng, config.p * config.lambda_true, config.n)
    q_hat = empirical_quantile(D, 1.0 - config.c / config.p)
    perturbed = np.arange(config.n) >= config.n // 2
    q = q_hat + np.where(perturbed, config.perturbation, 0.0)
    pi = profit(config.p, config.c, q, D)
    return Months(D, q, pi, (pi > 0).astype(float), perturbed, q_hat)


@dataclass
class ShiftResult:
    lambda_star: float
    lambda_prime_star: float
    step1: LambdaFit
    step3: LambdaFit
    eps_hat: np.ndarray
    corrected_targets: np.ndarray
    test: Months
    corrector: object = None

    @property
    def delta_lambda(self) -> float:
        return self.lambda_prime_star - self.lambda_star


def run_newsvendor_bapc(
    train: Months,
    test: Months,
    corrector="random_forest",
    delta: float = 0.1,
    p: float = 2.0,
    c: float = 1.0,
    lambda_grid=None,
    smoothing_span: float | None = DEFAULT_SMOOTHING_SPAN,
    seed: int = 0,
) -> ShiftResult:
    """Fit ``lambda`` on ``train``, learn the correction there, refit on corrected ``test`` targets.

    ``corrector`` is a kind name (trained on the logit-scaled residuals) or
    a fitted object whose ``predict`` already returns residuals in (-1, 1).
    """
    step1 = fit_lambda(train.demand, train.success, p, c, delta, lambda_grid, smoothing_span)
    eps = train.success - success_matrix([step1.lam], train.demand, train.demand, delta, p, c)[0]

    if isinstance(corrector, str):
        model = LogitWrapped(make_corrector(corrector, seed=seed)).fit(train.demand, eps)
    else:
        model = corrector
    eps_hat = truncate_correction(test.success, model.predict(test.demand))
    targets = np.clip(test.success - eps_hat, 0.0, 1.0)

    step3 = fit_lambda(test.demand, targets, p, c, delta, lambda_grid, smoothing_span)
    return ShiftResult(step1.lam, step3.lam, step1, step3, eps_hat, targets, test, model)


def stratified_halves(perturbed: np.ndarray, rng: np.random.Generator):
    """Two equal folds, each holding half of the perturbed and half of the unperturbed records."""
    folds = ([], [])
    for flag in (False, True):
        idx = np.nonzero(perturbed == flag)[0]
        if idx.size % 2:
            raise ValidationError("each stratum needs an even number of records")
        idx = rng.permutation(idx)
        folds[0].append(idx[: idx.size // 2])
        folds[1].append(idx[idx.size // 2 :])
    return np.sort(np.concatenate(folds[0])), np.sort(np.concatenate(folds[1]))


@dataclass
class McResult:
    delta: float
    corrector: str
    shifts: np.ndarray
    runs: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(self.shifts.mean())

    @property
    def std(self) -> float:
        return float(self.shifts.std(ddof=1)) if self.shifts.size > 1 else 0.0

    @property
    def stderr(self) -> float:
        return self.std / np.sqrt(self.shifts.size)


def one_repeat(config: NewsvendorConfig, corrector: str, repeat: int, delta: float | None = None) -> ShiftResult:
    """A fresh dataset, a stratified split, and one parameter shift."""
    delta = config.delta if delta is None else delta
    months = generate_newsvendor_dataset(config, substream(config.seed, "demand", repeat))
    train_idx, test_idx = stratified_halves(months.perturbed, substream(config.seed, "fold-split", repeat))
    return run_newsvendor_bapc(
        months.subset(train_idx),
        months.subset(test_idx),
        corrector,
        delta,
        config.p,
        config.c,
        config.grid,
        config.smoothing_span,
        seed=child_seed(config.seed, "corrector-init", repeat),
    )


def monte_carlo_cv(
    config: NewsvendorConfig, corrector: str = "random_forest", delta: float | None = None, keep_runs: bool = False
) -> McResult:
    """Stratified Monte Carlo cross-validation of the parameter shift.

    Repeats draw from their own substreams, so any subset of repeats can be
    recomputed independently.
    """
    delta = config.delta if delta is None else float(delta)
    runs = [one_repeat(config, corrector, k, delta) for k in range(config.mc_repeats)]
    shifts = np.array([r.delta_lambda for r in runs])
    return McResult(delta, corrector, shifts, runs if keep_runs else [])


def optimize_delta(config: NewsvendorConfig, delta_grid=DEFAULT_DELTA_GRID, corrector: str = "random_forest"):
    """Neighbourhood width minimising the spread of the parameter shift.

    Returns ``(delta_star, curve)`` where ``curve`` holds one McResult per grid
    value; ties go to the smaller delta.
    """
    grid = [float(d) for d in delta_grid]
    if not grid:
        raise ValidationError("delta grid is empty")
    curve = [monte_carlo_cv(config, corrector, d) for d in grid]
    stds = np.array([r.std for r in curve])
    return grid[int(np.argmin(stds))], curve
