"""Accuracy and fidelity checks for a corrector and its parameter-shift surrogate.

For a point with residual ``eps`` the corrector is *accurate* when
``|delta_eps| < eta1 * |eps|`` and the surrogate is *faithful* when
``|eps_hat - delta_f| < eta2 * |eps|``. Both inequalities are strict, so
equality counts as a violation. Violation fractions over a sample estimate
the confidence slacks ``delta1`` and ``delta2``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from bapc.core import (
    BaseModelFit,
    LabeledDataset,
    NeighborhoodSpec,
    modified_labels,
    refit_base,
    surrogate_delta_f,
)
from bapc.errors import EmptyNeighborhood, ValidationError


@dataclass(frozen=True)
class CriteriaParams:
    eta1: float = 1.0
    eta2: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValidationError(f"{name} must lie in (0, 1], got {v}")
        if not self.alpha > 0:
            raise ValidationError(f"alpha must be positive, got {self.alpha}")


def check_c1(eps, delta_eps, eta1):
    return np.abs(delta_eps) < eta1 * np.abs(eps)


def check_c2(eps_hat, delta_f, eps, eta2):
    return np.abs(np.asarray(eps_hat) - delta_f) < eta2 * np.abs(eps)


@dataclass
class CriteriaReport:
    """Per-point criteria records plus violation fractions."""

    x: np.ndarray
    abs_eps: np.ndarray
    abs_delta_eps: np.ndarray
    abs_fidelity_gap: np.ndarray
    c1_ok: np.ndarray
    c2_ok: np.ndarray
    zero_eps: np.ndarray
    eta1: float
    eta2: float

    @property
    def n(self) -> int:
        return self.c1_ok.size

    @property
    def delta1_hat(self) -> float:
        return float(np.mean(~self.c1_ok))

    @property
    def delta2_hat(self) -> float:
        return float(np.mean(~self.c2_ok))

    @property
    def mean_abs_eps(self) -> float:
        return float(np.mean(self.abs_eps))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "abs_eps", "abs_delta_eps", "abs_eps_hat_minus_delta_f", "c1_ok", "c2_ok", "zero_eps"])
        for i in range(self.n):
            w.writerow(
                [
                    format(float(self.x[i]), ".17g"),
                    format(float(self.abs_eps[i]), ".17g"),
                    format(float(self.abs_delta_eps[i]), ".17g"),
                    format(float(self.abs_fidelity_gap[i]), ".17g"),
                    int(self.c1_ok[i]),
                    int(self.c2_ok[i]),
                    int(self.zero_eps[i]),
                ]
            )
        return buf.getvalue()


def estimate_deltas(
    x,
    y,
    fit: BaseModelFit,
    fit_prime: BaseModelFit,
    corrector,
    eta1: float = 1.0,
    eta2: float = 1.0,
) -> CriteriaReport:
    """Evaluate both criteria at the labelled points ``(x, y)``.

    ``fit_prime`` must be the refit for the neighbourhood being assessed.
    Points with ``eps == 0`` are flagged in ``zero_eps``; they count as
    violations whenever the left-hand side is nonzero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise EmptyNeighborhood("no evaluation points in the neighbourhood")
    X = x.reshape(y.size, -1)
    eps = y - fit.predict(X)
    eps_hat = np.asarray(corrector.predict(X), dtype=float)
    delta_eps = eps - eps_hat
    delta_f = surrogate_delta_f(fit, fit_prime, X)
    return CriteriaReport(
        x=X[:, 0] if X.shape[1] == 1 else X,
        abs_eps=np.abs(eps),
        abs_delta_eps=np.abs(delta_eps),
        abs_fidelity_gap=np.abs(eps_hat - delta_f),
        c1_ok=check_c1(eps, delta_eps, eta1),
        c2_ok=check_c2(eps_hat, delta_f, eps, eta2),
        zero_eps=eps == 0,
        eta1=eta1,
        eta2=eta2,
    )


@dataclass
class SweepRow:
    radius: float
    delta1_hat: float
    delta2_hat: float
    n_eval: int
    theta_prime: np.ndarray


def radius_sweep(
    radii,
    center,
    dataset: LabeledDataset,
    fit: BaseModelFit,
    corrector,
    eta1: float = 1.0,
    eta2: float = 1.0,
    eval_nbhd: NeighborhoodSpec | None = None,
) -> list[SweepRow]:
    """Refit ``theta'`` on ``N(center, r)`` for every radius and re-estimate the slacks.

    The evaluation points stay fixed across radii (``eval_nbhd``, by default
    the ball of the largest radius), so only the refit changes with ``r``.
    """
    radii = [float(r) for r in radii]
    if not radii:
        return []
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValidationError("radii must be positive and strictly ascending")
    if eval_nbhd is None:
        eval_nbhd = NeighborhoodSpec(center, radii[-1])
    inside = eval_nbhd.contains(dataset.x)
    if not inside.any():
        raise EmptyNeighborhood("evaluation neighbourhood holds no training points")
    eps_hat = np.asarray(corrector.predict(dataset.x), dtype=float)
    rows = []
    for r in radii:
        nbhd = NeighborhoodSpec(center, r)
        fit_prime = refit_base(fit.kind, modified_labels(dataset, corrector, nbhd, eps_hat=eps_hat))
        rep = estimate_deltas(dataset.x[inside], dataset.y[inside], fit, fit_prime, corrector, eta1, eta2)
        rows.append(SweepRow(r, rep.delta1_hat, rep.delta2_hat, rep.n, fit_prime.theta.copy()))
    return rows


def theorem_bound(eta1, eta2, delta1, delta2, alpha, mean_abs_eps) -> float:
    """Upper bound on ``P[|Y - (f + delta_f)| > alpha]``.

    ``(eta1 + eta2) / alpha * E|eps| + delta1 + delta2 + delta1 * delta2``
    """
    if alpha == 0:
        raise ValidationError("alpha must be positive")
    args = (eta1, eta2, delta1, delta2, alpha, mean_abs_eps)
    if any(a < 0 for a in args):
        raise ValidationError("theorem_bound arguments must be nonnegative")
    return (eta1 + eta2) / alpha * mean_abs_eps + delta1 + delta2 + delta1 * delta2


def empirical_surrogate_tail(x, y, fit: BaseModelFit, fit_prime: BaseModelFit, alpha: float) -> float:
    """Fraction of points with ``|y - (f_theta(x) + delta_f(x))| > alpha``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise ValidationError("empty test set")
    X = np.asarray(x, dtype=float).reshape(y.size, -1)
    dev = np.abs(y - (fit.predict(X) + surrogate_delta_f(fit, fit_prime, X)))
    return float(np.mean(dev > alpha))
