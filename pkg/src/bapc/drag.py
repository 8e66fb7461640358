"""Falling body with quadratic air drag, explained with a linear base model.

Velocity data follow the closed-form solution of ``dv/dt = g - k v**2`` with
``k = rho * A * C_d / (2 m)``. A straight line is the base model, an MLP the
corrector, and the time axis is split into two interval neighbourhoods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from bapc.core import (
    BapcResult,
    LabeledDataset,
    NeighborhoodSpec,
    fit_base,
    reflected_prediction,
    residuals,
    run_bapc,
)
from bapc.correctors import MlpSpec, train_corrector
from bapc.criteria import CriteriaReport, SweepRow, estimate_deltas, radius_sweep
from bapc.errors import DomainError, ValidationError
from bapc.streams import child_seed, substream

NOISE_KINDS = ("none", "gaussian", "uniform")
SIGMA_GRID = (1.0, 2.0, 3.0)
ETA_GRID = (1.0, 0.75, 0.5, 0.3, 0.1)
CURVE_POINTS = 301


@dataclass(frozen=True)
class DragParams:
    g: float = 9.81
    m: float = 10.0
    rho: float = 1.2
    area: float = 1.0
    c_d: float = 0.47
    v_i: float = 0.0


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.kind != "none" and not self.sigma > 0:
            raise ValidationError("noisy scenarios need a positive sigma")

    @property
    def label(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}-{self.sigma:g}"


# The six scenarios shown in the drag figures.
SCENARIOS = (NoiseSpec("none"),) + tuple(
    NoiseSpec(kind, s) for kind in ("gaussian", "uniform") for s in SIGMA_GRID
)


def terminal_velocity(params: DragParams = DragParams()) -> float:
    return math.sqrt(2.0 * params.m * params.g / (params.rho * params.area * params.c_d))


def velocity(t, params: DragParams = DragParams()):
    vt = terminal_velocity(params)
    if not 0.0 <= params.v_i < vt:
        raise DomainError(f"need 0 <= v_i < v_t, got v_i={params.v_i}, v_t={vt}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    return vt * np.tanh(t * params.g / vt + np.arctanh(params.v_i / vt))


@dataclass
class DragData:
    t: np.ndarray
    v_true: np.ndarray
    v: np.ndarray
    noise: NoiseSpec

    @property
    def dataset(self) -> LabeledDataset:
        return LabeledDataset(self.t, self.v)


def generate_drag_dataset(
    n: int = 100, noise: NoiseSpec = NoiseSpec(), seed: int = 0, params: DragParams = DragParams()
) -> DragData:
    """90% of the time points uniform on [0, 2], the rest on [2, 3].

    Time points come from the ``time-points`` stream and noise from the
    ``noise`` stream, so the same seed gives the same times for every noise
    setting.
    """
    n_early = round(0.9 * n)
    rng_t = substream(seed, "time-points")
    t = np.concatenate([rng_t.uniform(0.0, 2.0, n_early), rng_t.uniform(2.0, 3.0, n - n_early)])
    v_true = velocity(t, params)
    rng_z = substream(seed, "noise")
    if noise.kind == "gaussian":
        z = rng_z.standard_normal(n)
    elif noise.kind == "uniform":
        z = rng_z.uniform(-1.0, 1.0, n)
    else:
        z = np.zeros(n)
    return DragData(t, v_true, v_true + noise.sigma * z, noise)


@dataclass(frozen=True)
class Interval:
    name: str
    center: float
    radius: float

    @property
    def nbhd(self) -> NeighborhoodSpec:
        return NeighborhoodSpec([self.center], self.radius)


INTERVALS = (Interval("I1", 1.0, 1.0), Interval("I2", 2.5, 0.5))


@dataclass
class DragRun:
    data: DragData
    results: dict[str, BapcResult]
    corrector: object
    curves: dict[str, np.ndarray] = field(default_factory=dict)
    seed: int = 0

    def slope_shift(self, interval: str) -> float:
        """Slope entry of ``theta_tilde - theta`` for the interval."""
        return float(self.results[interval].delta_theta_tilde[1])


def train_drag_corrector(data: DragData, seed: int, spec: MlpSpec | None = None):
    ds = data.dataset
    fit = fit_base("ols_linear", ds)
    eps = residuals(fit, ds)
    spec = spec or MlpSpec(seed=child_seed(seed, "corrector-init"))
    return fit, train_corrector(spec, ds.x, eps)


def run_drag(
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    intervals=INTERVALS,
    n: int = 100,
    params: DragParams = DragParams(),
    mlp: MlpSpec | None = None,
) -> DragRun:
    """One corrector trained on all residuals, then one refit per interval."""
    data = generate_drag_dataset(n, noise, seed, params)
    ds = data.dataset
    fit, corrector = train_drag_corrector(data, seed, mlp)
    results = {}
    for iv in intervals:
        results[iv.name] = run_bapc(ds, [iv.center], iv.nbhd, corrector=corrector, fit=fit)

    grid = np.linspace(0.0, 3.0, CURVE_POINTS)
    curves = {
        "t": grid,
        "v_true": velocity(grid, params),
        "f_theta": fit.predict(grid),
        "f_corrected": fit.predict(grid) + corrector.predict(grid),
    }
    for iv in intervals:
        res = results[iv.name]
        curves[f"f_theta_prime_{iv.name}"] = res.fit_prime.predict(grid)
        curves[f"f_tilde_{iv.name}"] = reflected_prediction(fit, res.fit_prime, grid)
    return DragRun(data, results, corrector, curves, seed)


def interval_report(run: DragRun, interval: Interval, eta1=1.0, eta2=1.0) -> CriteriaReport:
    """Per-point criteria on the training points inside ``interval``, using its own refit."""
    ds = run.data.dataset
    inside = interval.nbhd.contains(ds.x)
    res = run.results[interval.name]
    return estimate_deltas(ds.x[inside], ds.y[inside], res.fit, res.fit_prime, run.corrector, eta1, eta2)


def default_radii(start=0.1, stop=2.0, step=0.1) -> np.ndarray:
    k = int(round((stop - start) / step))
    return np.round(start + step * np.arange(k + 1), 12)


@dataclass
class SweepTable:
    noise: NoiseSpec
    eta: float
    rows: list[SweepRow]
    reports: dict[str, CriteriaReport]


def run_criteria_sweep(
    noises=(NoiseSpec("gaussian", 1.0), NoiseSpec("gaussian", 2.0), NoiseSpec("gaussian", 3.0)),
    etas=ETA_GRID,
    radii=None,
    seed: int = 0,
    center: float = 1.0,
    eval_interval: Interval = INTERVALS[0],
    runs: dict | None = None,
) -> list[SweepTable]:
    """Criteria tables per noise level and ``eta1 = eta2 = eta``.

    The radius sweep refits on ``N(center, r)`` and evaluates on the points of
    ``eval_interval``, keeping the corrector and step-one fit fixed. If
    ``runs`` is a dict it receives the DragRun of every noise level.
    """
    radii = default_radii() if radii is None else np.asarray(radii, dtype=float)
    tables = []
    for noise in noises:
        run = run_drag(noise, seed)
        if runs is not None:
            runs[noise.label] = run
        ds = run.data.dataset
        fit = run.results[INTERVALS[0].name].fit
        for eta in etas:
            rows = radius_sweep(radii, [center], ds, fit, run.corrector, eta, eta, eval_nbhd=eval_interval.nbhd)
            reports = {iv.name: interval_report(run, iv, eta, eta) for iv in INTERVALS}
            tables.append(SweepTable(noise, float(eta), rows, reports))
    return tables
